//! The fixed-point operator whose fixed points are the radial Neumann
//! solutions, together with its deformation parameters.
//!
//! For a profile `u` on a grid, with `f` the sign-extended right-hand side
//! and `v` a nonnegative forcing weight,
//!
//! ```text
//! (T u)(r) = u(0) - (1/R^{N-1}) ∫_0^R ζ^{N-1} [f(ζ, u(ζ)) + α v(ζ)] dζ
//!            + ∫_0^r phi_inv(-w(ζ)) dζ,
//! w(r)     = (θ / r^{N-1}) ∫_0^r ξ^{N-1} [f(ξ, u(ξ)) + α v(ξ)] dξ,  w(0) = 0.
//! ```
//!
//! The output slope is `phi_inv(-w)` nodewise, so `|u'| < 1` and `u'(0) = 0`
//! hold for every output. At a fixed point the zero-total identity
//! `(1/R^{N-1}) ∫_0^R ζ^{N-1} [f + α v] dζ = 0` follows from the value at
//! r = 0, which encodes both Neumann conditions; [`neumann_defect`] measures
//! the forcing-free part of that total. At `θ = 0` the slope term vanishes
//! and the operator collapses to the one-dimensional map [`reduced_map`] on
//! constants.

use crate::error::{Error, Result};
use crate::grid::GridProfile;
use crate::phi::{extend_f_sided, phi_inv};
use crate::problem::{RadialProblem, Side, WeightSpec};
use crate::quad;
use crate::real::Real;

/// Deformation parameters: slope weight `theta`, forcing size `alpha`, and
/// the forcing shape `v`.
#[derive(Clone, Debug)]
pub struct HomotopyState<T> {
    theta: T,
    alpha: T,
    forcing: WeightSpec<T>,
}

impl<T: Real> HomotopyState<T> {
    pub fn new(theta: T, alpha: T, forcing: WeightSpec<T>) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(Error::invalid("homotopy state", "theta must lie in [0, 1]"));
        }
        if !(alpha >= T::zero() && alpha.is_finite()) {
            return Err(Error::invalid("homotopy state", "alpha must be nonnegative"));
        }
        match &forcing {
            WeightSpec::PiecewiseConstant { values, .. } | WeightSpec::Table { values, .. } => {
                if values.iter().any(|&v| v < T::zero()) {
                    return Err(Error::invalid("homotopy state", "forcing must be nonnegative"));
                }
            }
            WeightSpec::CosineShifted { .. } => {
                return Err(Error::invalid(
                    "homotopy state",
                    "forcing must be piecewise constant or a table",
                ));
            }
        }
        Ok(HomotopyState {
            theta,
            alpha,
            forcing,
        })
    }

    /// The target problem: full slope term, no forcing.
    pub fn target() -> Self {
        HomotopyState {
            theta: T::one(),
            alpha: T::zero(),
            forcing: WeightSpec::zero(),
        }
    }

    pub fn with_theta(theta: T) -> Result<Self> {
        Self::new(theta, T::zero(), WeightSpec::zero())
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn forcing(&self) -> &WeightSpec<T> {
        &self.forcing
    }
}

/// One-sided samples of the load `f(ζ, u(ζ)) + α v(ζ)` at the grid nodes.
fn sampled_load<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
    state: &HomotopyState<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let nodes = profile.grid.nodes();
    let mut above = Vec::with_capacity(nodes.len());
    let mut below = Vec::with_capacity(nodes.len());
    for (&r, &u) in nodes.iter().zip(profile.u.iter()) {
        let fa = extend_f_sided(problem, r, Side::Above, u)?;
        let fb = extend_f_sided(problem, r, Side::Below, u)?;
        if state.alpha > T::zero() {
            above.push(fa + state.alpha * state.forcing.eval_sided(r, Side::Above));
            below.push(fb + state.alpha * state.forcing.eval_sided(r, Side::Below));
        } else {
            above.push(fa);
            below.push(fb);
        }
    }
    Ok((above, below))
}

/// `w(r_j)` at every node; `w(0) = 0`.
pub fn cumulative_flux<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
    state: &HomotopyState<T>,
) -> Result<Vec<T>> {
    let (above, below) = sampled_load(problem, profile, state)?;
    let cum = quad::cumulative_radial(profile.grid.nodes(), &above, &below, problem.dimension);
    Ok(flux_from_cumulative(
        profile.grid.nodes(),
        &cum,
        state.theta,
        problem.dimension,
    ))
}

fn flux_from_cumulative<T: Real>(nodes: &[T], cum: &[T], theta: T, dimension: u32) -> Vec<T> {
    let n = dimension as i32;
    nodes
        .iter()
        .zip(cum.iter())
        .map(|(&r, &i)| {
            if r == T::zero() {
                T::zero()
            } else {
                theta * i / r.powi(n - 1)
            }
        })
        .collect()
}

/// Applies the operator. The output shares the input's grid; its slope field
/// is `phi_inv(-w)` exactly.
pub fn apply<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
    state: &HomotopyState<T>,
) -> Result<GridProfile<T>> {
    let nodes = profile.grid.nodes();
    let (above, below) = sampled_load(problem, profile, state)?;
    let cum = quad::cumulative_radial(nodes, &above, &below, problem.dimension);
    let total = cum[cum.len() - 1] / problem.radial_power(problem.radius);
    let w = flux_from_cumulative(nodes, &cum, state.theta, problem.dimension);
    let du: Vec<T> = w.iter().map(|&wj| phi_inv(-wj)).collect();
    let shape = quad::cumulative_trapezoid(nodes, &du);
    let base = profile.u[0] - total;
    let u: Vec<T> = shape.iter().map(|&s| base + s).collect();
    Ok(GridProfile {
        grid: profile.grid.clone(),
        u,
        du,
    })
}

/// `u - T u` (values and slopes) and the sup norm of the value part.
pub fn residual<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
    state: &HomotopyState<T>,
) -> Result<(GridProfile<T>, T)> {
    let image = apply(problem, profile, state)?;
    let u: Vec<T> = profile
        .u
        .iter()
        .zip(image.u.iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let du: Vec<T> = profile
        .du
        .iter()
        .zip(image.du.iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let sup = u.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    Ok((
        GridProfile {
            grid: profile.grid.clone(),
            u,
            du,
        },
        sup,
    ))
}

/// `(1/R^{N-1}) ∫_0^R ζ^{N-1} f(ζ, u(ζ)) dζ`, the forcing-free total that
/// vanishes at solutions of the target problem.
pub fn neumann_defect<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
) -> Result<T> {
    let state = HomotopyState::target();
    let (above, below) = sampled_load(problem, profile, &state)?;
    let cum = quad::cumulative_radial(profile.grid.nodes(), &above, &below, problem.dimension);
    Ok(cum[cum.len() - 1] / problem.radial_power(problem.radius))
}

/// The one-dimensional reduction the operator collapses to at `θ = 0`,
/// `α = 0`: on constants, `T u = s - reduced_map(s)` with
///
/// ```text
/// reduced_map(s) = -R s / N                                  for s <= 0,
/// reduced_map(s) = λ g(s) (1/R^{N-1}) ∫_0^R ζ^{N-1} a dζ     for s >= 0,
/// ```
///
/// which satisfies `reduced_map(s) * s < 0` for `s != 0` whenever the
/// weighted mean is negative.
pub fn reduced_map<T: Real>(problem: &RadialProblem<T>, s: T) -> T {
    if s <= T::zero() {
        -problem.radius * s / T::of_usize(problem.dimension as usize)
    } else {
        let mean = problem.weight.radial_integral(
            T::zero(),
            problem.radius,
            problem.dimension,
            4096,
        ) / problem.radial_power(problem.radius);
        problem.lambda * problem.nonlinearity.eval(s) * mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::problem::{NonlinearitySpec, WeightSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn negative_unit_weight_problem(dimension: u32, radius: f64, lambda: f64) -> RadialProblem<f64> {
        RadialProblem::new(
            dimension,
            radius,
            lambda,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![],
                values: vec![-1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap()
    }

    /// Brute-force check value for ∫_0^R ζ^{N-1} h dζ with constant h.
    fn oracle_total(h: f64, radius: f64, dimension: u32) -> f64 {
        // Simpson with a dense grid, independent of the production rule.
        let n = 20_000usize;
        let hstep = radius / n as f64;
        let f = |x: f64| x.powi(dimension as i32 - 1) * h;
        let mut sum = f(0.0) + f(radius);
        for i in 1..n {
            let x = i as f64 * hstep;
            sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * hstep / 3.0
    }

    #[test]
    fn flux_on_constants_matches_closed_form() {
        // u = c, a = -1, g = u^2, theta = 1: the load is -lambda c^2, so
        // w(r) = -lambda c^2 r / N.
        for (dimension, lambda, c) in [(1u32, 0.7, 0.9), (2u32, 0.7, 0.9)] {
            let p = negative_unit_weight_problem(dimension, 2.0, lambda);
            let grid = Grid::uniform(2.0, 400);
            let prof = GridProfile::constant(grid, c);
            let w = cumulative_flux(&p, &prof, &HomotopyState::target()).unwrap();
            for (&r, &wj) in prof.grid.nodes().iter().zip(w.iter()) {
                let expected = -lambda * c * c * r / dimension as f64;
                assert_relative_eq!(wj, expected, epsilon = 1e-12, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn apply_on_positive_constant_matches_closed_form() {
        // theta = 0, u = c > 0, a = -1, g = u^2: T u = c + lambda c^2 R / N.
        for dimension in [1u32, 2, 3] {
            let (radius, lambda, c) = (2.0, 0.5, 0.8);
            let p = negative_unit_weight_problem(dimension, radius, lambda);
            let grid = Grid::uniform(radius, 256);
            let prof = GridProfile::constant(grid, c);
            let state = HomotopyState::with_theta(0.0).unwrap();
            let out = apply(&p, &prof, &state).unwrap();
            let expected = c + lambda * c * c * radius / dimension as f64;
            let oracle = c
                - oracle_total(-lambda * c * c, radius, dimension)
                    / radius.powi(dimension as i32 - 1);
            assert_relative_eq!(expected, oracle, max_relative = 1e-9);
            for &v in &out.u {
                assert_relative_eq!(v, expected, epsilon = 1e-12, max_relative = 1e-11);
            }
            assert!(out.du.iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn apply_on_negative_constant_uses_the_extension() {
        // theta = 0, u = -c < 0: the load is +c, so T u = -c - c R / N.
        for dimension in [1u32, 2, 3] {
            let (radius, lambda, c) = (2.0, 0.5, 0.8);
            let p = negative_unit_weight_problem(dimension, radius, lambda);
            let grid = Grid::uniform(radius, 256);
            let prof = GridProfile::constant(grid, -c);
            let state = HomotopyState::with_theta(0.0).unwrap();
            let out = apply(&p, &prof, &state).unwrap();
            let oracle =
                -c - oracle_total(c, radius, dimension) / radius.powi(dimension as i32 - 1);
            let expected = -c - c * radius / dimension as f64;
            assert_relative_eq!(expected, oracle, max_relative = 1e-9);
            for &v in &out.u {
                assert_relative_eq!(v, expected, epsilon = 1e-12, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn theta_zero_matches_reduced_map_on_constants() {
        let p = negative_unit_weight_problem(2, 2.0, 0.5);
        let grid = Grid::uniform(2.0, 512);
        let state = HomotopyState::with_theta(0.0).unwrap();
        for &c in &[-1.5, -0.3, 0.0, 0.4, 1.2] {
            let prof = GridProfile::constant(grid.clone(), c);
            let out = apply(&p, &prof, &state).unwrap();
            let expected = c - reduced_map(&p, c);
            for &v in &out.u {
                assert_relative_eq!(v, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn reduced_map_opposes_the_state() {
        let p = negative_unit_weight_problem(2, 2.0, 0.5);
        for &s in &[-2.0, -0.1, 0.1, 2.0] {
            assert!(reduced_map(&p, s) * s < 0.0);
        }
        assert_eq!(reduced_map(&p, 0.0), 0.0);
    }

    #[test]
    fn output_slopes_are_admissible_and_consistent() {
        let p: RadialProblem<f64> = RadialProblem::figure1();
        let grid = Grid::for_problem(&p, 500);
        let prof = GridProfile::constant(grid, 3.0);
        let state = HomotopyState::target();
        let out = apply(&p, &prof, &state).unwrap();
        assert_eq!(out.du[0], 0.0);
        assert!(out.du.iter().all(|d| d.abs() < 1.0));
        // the value field is the running trapezoid of the slope field
        let nodes = out.grid.nodes();
        for j in 0..nodes.len() - 1 {
            let inc = (nodes[j + 1] - nodes[j]) * (out.du[j] + out.du[j + 1]) / 2.0;
            assert_relative_eq!(out.u[j + 1] - out.u[j], inc, epsilon = 1e-13);
        }
        // and w matches the slope through phi_inv
        let w = cumulative_flux(&p, &prof, &state).unwrap();
        for (d, wj) in out.du.iter().zip(w.iter()) {
            assert_relative_eq!(*d, phi_inv(-*wj), epsilon = 1e-15);
        }
    }

    #[test]
    fn residual_vanishes_only_at_fixed_points() {
        let p = negative_unit_weight_problem(1, 2.0, 0.5);
        let grid = Grid::uniform(2.0, 128);
        let state = HomotopyState::target();
        let zero = GridProfile::constant(grid.clone(), 0.0);
        let (_, sup0) = residual(&p, &zero, &state).unwrap();
        assert_relative_eq!(sup0, 0.0);
        let off = GridProfile::constant(grid, 0.5);
        let (_, sup1) = residual(&p, &off, &state).unwrap();
        assert!(sup1 > 1e-3);
    }

    #[test]
    fn neumann_defect_ignores_forcing() {
        let p = negative_unit_weight_problem(1, 2.0, 0.5);
        let grid = Grid::uniform(2.0, 128);
        let prof = GridProfile::constant(grid, 0.7);
        // closed form: (1/R^0) ∫_0^2 (-lambda c^2) = -2 lambda c^2
        let expected = -2.0 * 0.5 * 0.49;
        assert_relative_eq!(
            neumann_defect(&p, &prof).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn state_validation() {
        assert!(HomotopyState::new(-0.1f64, 0.0, WeightSpec::zero()).is_err());
        assert!(HomotopyState::new(1.1f64, 0.0, WeightSpec::zero()).is_err());
        assert!(HomotopyState::new(0.5f64, -1.0, WeightSpec::zero()).is_err());
        let negative_forcing = WeightSpec::PiecewiseConstant {
            breakpoints: vec![],
            values: vec![-1.0f64],
        };
        assert!(HomotopyState::new(0.5, 1.0, negative_forcing).is_err());
        assert!(HomotopyState::new(0.5f64, 1.0, WeightSpec::zero()).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// T maps bounded sets to bounded sets: the slope part contributes at
        /// most R in sup norm.
        #[test]
        fn image_is_bounded_by_level_total_and_radius(
            c in -2.0f64..2.0,
            theta in 0.0f64..1.0,
            lambda in 0.01f64..1.0,
        ) {
            let p = negative_unit_weight_problem(2, 2.0, lambda);
            let grid = Grid::uniform(2.0, 64);
            let prof = GridProfile::constant(grid, c);
            let state = HomotopyState::with_theta(theta).unwrap();
            let out = apply(&p, &prof, &state).unwrap();
            let load = if c >= 0.0 { -lambda * c * c } else { c.abs() };
            let total = load * 2.0 / 2.0; // R^N/(N R^{N-1}) = R/N with N=2, R=2
            let bound = c.abs() + total.abs() + 2.0 + 1e-9;
            prop_assert!(out.sup_norm() <= bound);
            prop_assert!(out.du.iter().all(|d| d.abs() < 1.0));
            prop_assert_eq!(out.du[0], 0.0);
        }
    }
}
