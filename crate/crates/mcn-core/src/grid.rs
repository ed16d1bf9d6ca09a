//! Node grids on `[0, R]` and sampled profiles `(u, u')` over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::RadialProblem;
use crate::real::Real;

/// Strictly increasing nodes from 0 to R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    nodes: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("grid", "needs at least two nodes"));
        }
        if nodes[0] != T::zero() {
            return Err(Error::invalid("grid", "first node must be 0"));
        }
        if !nodes.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("grid", "nodes must be finite"));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("grid", "nodes must increase strictly"));
        }
        Ok(Grid { nodes })
    }

    /// Uniform grid with `cells` cells.
    pub fn uniform(radius: T, cells: usize) -> Self {
        assert!(cells >= 1 && radius > T::zero());
        let mut nodes: Vec<T> = (0..=cells)
            .map(|i| radius * T::of_usize(i) / T::of_usize(cells))
            .collect();
        // guard against rounding on the last node
        *nodes.last_mut().expect("nonempty") = radius;
        Grid { nodes }
    }

    /// Uniform grid merged with the weight's breakpoints, so integrands only
    /// jump at nodes.
    pub fn for_problem(problem: &RadialProblem<T>, cells: usize) -> Self {
        let mut grid = Self::uniform(problem.radius, cells);
        grid.merge_points(&problem.weight.breakpoints(problem.radius), problem.radius);
        grid
    }

    /// Inserts interior points, dropping near-duplicates in favor of the
    /// inserted point (breakpoints must be hit exactly).
    pub fn merge_points(&mut self, points: &[T], radius: T) {
        if points.is_empty() {
            return;
        }
        let tol = radius * T::of(1e-9);
        let mut nodes = core::mem::take(&mut self.nodes);
        for &p in points {
            if p <= T::zero() || p >= radius {
                continue;
            }
            nodes.retain(|&x| x == T::zero() || x == radius || (x - p).abs() > tol);
            nodes.push(p);
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).expect("grid nodes are finite"));
        nodes.dedup();
        self.nodes = nodes;
    }

    /// Inserts the midpoint of every cell; used for refined re-measurement.
    pub fn doubled(&self) -> Self {
        let mut nodes = Vec::with_capacity(self.nodes.len() * 2 - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push((w[0] + w[1]) / T::of(2.0));
        }
        nodes.push(*self.nodes.last().expect("nonempty"));
        Grid { nodes }
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn radius(&self) -> T {
        *self.nodes.last().expect("nonempty")
    }
}

/// A profile `u` and its slope `u'` sampled on a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridProfile<T> {
    pub grid: Grid<T>,
    pub u: Vec<T>,
    pub du: Vec<T>,
}

impl<T: Real> GridProfile<T> {
    pub fn new(grid: Grid<T>, u: Vec<T>, du: Vec<T>) -> Result<Self> {
        if u.len() != grid.len() || du.len() != grid.len() {
            return Err(Error::invalid("profile", "value lists must match the grid"));
        }
        Ok(GridProfile { grid, u, du })
    }

    pub fn constant(grid: Grid<T>, level: T) -> Self {
        let n = grid.len();
        GridProfile {
            grid,
            u: vec![level; n],
            du: vec![T::zero(); n],
        }
    }

    pub fn sup_norm(&self) -> T {
        self.u.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn min_u(&self) -> T {
        self.u.iter().fold(T::infinity(), |acc, &v| acc.min(v))
    }

    pub fn max_abs_slope(&self) -> T {
        self.du.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Sup distance of the `u` components; grids must agree.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid {
            return Err(Error::invalid("profile", "grids differ"));
        }
        Ok(self
            .u
            .iter()
            .zip(other.u.iter())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs())))
    }

    /// Linear interpolation of `u`; exact at nodes.
    pub fn eval_u(&self, r: T) -> T {
        let nodes = self.grid.nodes();
        if r <= nodes[0] {
            return self.u[0];
        }
        if r >= *nodes.last().expect("nonempty") {
            return *self.u.last().expect("nonempty");
        }
        let hi = nodes.partition_point(|&x| x < r).max(1);
        let (r0, r1) = (nodes[hi - 1], nodes[hi]);
        if r == r1 {
            return self.u[hi];
        }
        let t = (r - r0) / (r1 - r0);
        self.u[hi - 1] + (self.u[hi] - self.u[hi - 1]) * t
    }

    /// Sup distance of `u` sampled at the other profile's nodes, for grids
    /// that do not match (e.g. Richardson comparisons).
    pub fn sup_distance_sampled(&self, other: &Self) -> T {
        other
            .grid
            .nodes()
            .iter()
            .zip(other.u.iter())
            .fold(T::zero(), |acc, (&r, &v)| acc.max((self.eval_u(r) - v).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{NonlinearitySpec, WeightSpec};
    use approx::assert_relative_eq;

    #[test]
    fn uniform_grid_hits_both_ends() {
        let g: Grid<f64> = Grid::uniform(5.0, 2000);
        assert_eq!(g.len(), 2001);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.radius(), 5.0);
        assert_eq!(g.cells(), 2000);
    }

    #[test]
    fn problem_grid_contains_breakpoints_exactly() {
        let p = RadialProblem::new(
            1,
            3.0,
            1.0,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![1.0, 2.0],
                values: vec![-1.0, 1.0, -1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap();
        let g = Grid::for_problem(&p, 2000);
        assert!(g.nodes().contains(&1.0));
        assert!(g.nodes().contains(&2.0));
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn doubling_inserts_midpoints() {
        let g: Grid<f64> = Grid::uniform(1.0, 4);
        let d = g.doubled();
        assert_eq!(d.len(), 9);
        assert_relative_eq!(d.nodes()[1], 0.125);
        assert_eq!(d.radius(), 1.0);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(Grid::from_nodes(vec![0.0f64]).is_err());
        assert!(Grid::from_nodes(vec![0.5f64, 1.0]).is_err());
        assert!(Grid::from_nodes(vec![0.0f64, 1.0, 1.0]).is_err());
        assert!(Grid::from_nodes(vec![0.0f64, f64::NAN]).is_err());
    }

    #[test]
    fn profile_interpolation_and_norms() {
        let g: Grid<f64> = Grid::uniform(1.0, 4);
        let u = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let p = GridProfile::new(g, u, vec![1.0; 5]).unwrap();
        assert_relative_eq!(p.eval_u(0.375), 0.375);
        assert_relative_eq!(p.eval_u(1.0), 1.0);
        assert_relative_eq!(p.sup_norm(), 1.0);
        assert_relative_eq!(p.min_u(), 0.0);
        assert_relative_eq!(p.max_abs_slope(), 1.0);
    }

    #[test]
    fn sampled_distance_between_refinements() {
        let coarse: Grid<f64> = Grid::uniform(1.0, 4);
        let fine: Grid<f64> = Grid::uniform(1.0, 8);
        let pc = GridProfile::constant(coarse, 2.0);
        let pf = GridProfile::constant(fine, 2.5);
        assert_relative_eq!(pc.sup_distance_sampled(&pf), 0.5);
    }
}
