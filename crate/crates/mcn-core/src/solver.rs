//! Damped, accelerated fixed-point iteration for the integral operator, plus
//! the multiplicity search built on top of it.
//!
//! Plain iteration of the operator is unstable for large λ: the zero-total
//! constraint enters through the value at r = 0, and on profiles far from
//! balance that term overshoots without bound. The iteration here therefore
//! re-balances every image: after each application the profile is shifted
//! vertically so that the zero-total identity holds exactly ("level
//! projection"). The shifted map has exactly the same fixed points, because
//! at a fixed point the shift is zero, and conversely any fixed point of the
//! shifted map makes the total vanish, which forces the shift to zero.
//! Anderson extrapolation on top shortens the tail of the convergence.

use crate::constants::{ConstantsBundle, Estimate, Provenance};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridProfile};
use crate::operator::{self, HomotopyState};
use crate::problem::{RadialProblem, Side};
use crate::quad;
use crate::real::Real;

/// Iteration controls.
#[derive(Clone, Debug)]
pub struct SolveOptions<T> {
    /// Sup-norm residual target on the value component.
    pub tol: T,
    pub max_iter: usize,
    /// Damping weight on the new image (1 = undamped).
    pub damping: T,
    /// Anderson window; 0 disables extrapolation.
    pub acceleration_depth: usize,
    /// Cells in the uniform background grid (breakpoints get merged in).
    pub grid_cells: usize,
    /// Re-balance every image so the zero-total identity holds exactly.
    pub level_projection: bool,
    /// Give up when the best residual has not improved for this many steps.
    pub stall_window: usize,
    /// Refine the best iterate by a Jacobian-free Newton pass when the
    /// accelerated sweep alone does not reach the tolerance. Fixed points
    /// of the operator can repel the plain iteration (the small branch
    /// does, for λ well past the threshold), so this is what actually
    /// drives the residual to `tol` there.
    pub newton_polish: bool,
    /// Optional norm brackets to classify a converged profile against.
    pub brackets: Option<NormBrackets<T>>,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            tol: T::of(1e-10),
            max_iter: 600,
            damping: T::of(0.7),
            acceleration_depth: 5,
            grid_cells: 2000,
            level_projection: true,
            stall_window: 120,
            newton_polish: true,
            brackets: None,
        }
    }
}

/// Norm levels separating small, middle and large profiles.
#[derive(Clone, Copy, Debug)]
pub struct NormBrackets<T> {
    /// Ceiling for the small branch.
    pub delta_star: T,
    /// Relative width of the excluded shell around `delta_star`.
    pub gap_fraction: T,
}

impl<T: Real> NormBrackets<T> {
    pub fn from_bundle(bundle: &ConstantsBundle<T>) -> Self {
        NormBrackets {
            delta_star: bundle.delta_star,
            gap_fraction: T::of(1e-3),
        }
    }
}

/// Where a converged profile sits relative to the brackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    /// Sup norm within round-off of zero.
    Trivial,
    /// Sup norm strictly under the small-branch ceiling.
    Small,
    /// Sup norm inside the thin shell around the ceiling where neither
    /// label is trustworthy.
    MiddleExcluded,
    /// Sup norm strictly over the ceiling.
    Large,
    /// No brackets were supplied.
    Unbracketed,
}

/// Starting profile for the iteration.
#[derive(Clone, Debug)]
pub enum StartProfile<T> {
    /// The constant profile at this level.
    Constant(T),
    /// An explicit profile (resampled onto the solve grid if needed).
    Profile(GridProfile<T>),
}

/// A converged solve.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub profile: GridProfile<T>,
    /// Final sup-norm residual of the value component.
    pub residual: T,
    pub iterations: usize,
    pub classification: Classification,
}

/// The pair returned by the multiplicity search.
#[derive(Clone, Debug)]
pub struct TwoSolutions<T> {
    pub small: Solution<T>,
    pub large: Solution<T>,
    /// True when the pair straddles the small-branch ceiling.
    pub straddles_ceiling: bool,
}

/// Failure report for the multiplicity search.
#[derive(Clone, Debug)]
pub struct MultiplicityNotFound<T> {
    /// Starting levels that were tried.
    pub attempts: Vec<T>,
    /// Distinct nontrivial solutions that were found (fewer than two).
    pub found: Vec<Solution<T>>,
}

/// Zero-total mismatch of `y` shifted to level `s`:
/// `h(s) = ∫ ζ^{N-1} f(ζ, y - y(0) + s) dζ`.
pub fn level_defect<T: Real>(
    problem: &RadialProblem<T>,
    state: &HomotopyState<T>,
    shape: &GridProfile<T>,
    s: T,
) -> Result<T> {
    let shifted = GridProfile {
        grid: shape.grid.clone(),
        u: shape.u.iter().map(|&v| v - shape.u[0] + s).collect(),
        du: shape.du.clone(),
    };
    let nodes = shifted.grid.nodes();
    let mut above = Vec::with_capacity(nodes.len());
    let mut below = Vec::with_capacity(nodes.len());
    for (&r, &u) in nodes.iter().zip(shifted.u.iter()) {
        let fa = crate::phi::extend_f_sided(problem, r, Side::Above, u)?;
        let fb = crate::phi::extend_f_sided(problem, r, Side::Below, u)?;
        if state.alpha() > T::zero() {
            above.push(fa + state.alpha() * state.forcing().eval_sided(r, Side::Above));
            below.push(fb + state.alpha() * state.forcing().eval_sided(r, Side::Below));
        } else {
            above.push(fa);
            below.push(fb);
        }
    }
    let cum = quad::cumulative_radial(nodes, &above, &below, problem.dimension);
    Ok(cum[cum.len() - 1])
}

/// Shifts `y` vertically so that the zero-total identity holds, picking the
/// admissible level nearest the hint.
///
/// The defect tends to +∞ as the level goes to -∞ (the extension `f = -u`
/// dominates) and, when the weighted mean is negative and `g` grows, to -∞
/// as the level grows, so a crossing always exists somewhere. Near a fixed
/// point the defect has a root within O(residual) of the current level but
/// also spurious roots a solution-width away; a wide bracket can land on
/// those and drag the iteration onto a different branch, so the search
/// expands outward from the hint and keeps the first crossing it meets.
pub fn project_level<T: Real>(
    problem: &RadialProblem<T>,
    state: &HomotopyState<T>,
    image: &GridProfile<T>,
    hint: T,
) -> Result<GridProfile<T>> {
    let defect = |s: T| level_defect(problem, state, image, s);

    let d0 = defect(hint)?;
    let (mut lo, mut hi) = (hint, hint);
    if d0 != T::zero() {
        // expand symmetrically until one side changes sign
        let mut step = T::of(1e-9) * (T::one() + hint.abs());
        let mut bracket = None;
        let mut prev_plus = hint;
        let mut prev_minus = hint;
        for _ in 0..120 {
            let sp = hint + step;
            let dp = defect(sp)?;
            if dp == T::zero() || (dp > T::zero()) != (d0 > T::zero()) {
                bracket = Some((prev_plus, sp));
                break;
            }
            prev_plus = sp;
            let sm = hint - step;
            let dm = defect(sm)?;
            if dm == T::zero() || (dm > T::zero()) != (d0 > T::zero()) {
                bracket = Some((sm, prev_minus));
                break;
            }
            prev_minus = sm;
            step = step * T::of(2.0);
        }
        let (a, b) = bracket.ok_or_else(|| Error::invalid("level projection", "no bracket"))?;
        lo = a;
        hi = b;
    }

    // bisect on sign
    let mut d_lo = defect(lo)?;
    for _ in 0..200 {
        if (hi - lo).abs() <= T::of(1e-15) * (T::one() + lo.abs()) {
            break;
        }
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let d = defect(mid)?;
        if d == T::zero() {
            lo = mid;
            hi = mid;
            break;
        }
        if (d > T::zero()) == (d_lo > T::zero()) {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
        }
    }
    let s = (lo + hi) / T::of(2.0);
    Ok(GridProfile {
        grid: image.grid.clone(),
        u: image.u.iter().map(|&v| v - image.u[0] + s).collect(),
        du: image.du.clone(),
    })
}

/// Anderson extrapolation state over difference windows.
struct Anderson<T> {
    depth: usize,
    residuals: Vec<Vec<T>>, // F_k = G(u_k) - u_k
    iterates: Vec<Vec<T>>,  // u_k
}

impl<T: Real> Anderson<T> {
    fn new(depth: usize) -> Self {
        Anderson {
            depth,
            residuals: Vec::new(),
            iterates: Vec::new(),
        }
    }

    fn reset(&mut self) {
        self.residuals.clear();
        self.iterates.clear();
    }

    fn push(&mut self, u: Vec<T>, f: Vec<T>) {
        self.iterates.push(u);
        self.residuals.push(f);
        if self.iterates.len() > self.depth + 1 {
            self.iterates.remove(0);
            self.residuals.remove(0);
        }
    }

    /// Mixed iterate `sum_j w_j (u_j + beta F_j)`; None when the window is
    /// too shallow or the least-squares system is degenerate.
    fn mixed(&self, beta: T) -> Option<Vec<T>> {
        let m = self.residuals.len();
        if m < 2 {
            return None;
        }
        let k = m - 1;
        let dim = self.residuals[0].len();
        // columns: dF_j = F_{j+1} - F_j
        let cols: Vec<Vec<T>> = (0..k)
            .map(|j| {
                (0..dim)
                    .map(|i| self.residuals[j + 1][i] - self.residuals[j][i])
                    .collect()
            })
            .collect();
        // normal equations with a ridge; small k keeps this well-posed enough
        let mut ata = vec![vec![T::zero(); k]; k];
        let mut atb = vec![T::zero(); k];
        let fk = &self.residuals[k];
        for a in 0..k {
            for b in a..k {
                let mut s = T::zero();
                for i in 0..dim {
                    s += cols[a][i] * cols[b][i];
                }
                ata[a][b] = s;
                ata[b][a] = s;
            }
            let mut s = T::zero();
            for i in 0..dim {
                s += cols[a][i] * fk[i];
            }
            atb[a] = s;
        }
        let ridge = T::of(1e-12)
            * (0..k).map(|a| ata[a][a]).fold(T::zero(), T::max).max(T::of(1e-300));
        for a in 0..k {
            ata[a][a] += ridge;
        }
        let gamma = solve_dense(&mut ata, &mut atb)?;
        if gamma.iter().any(|g| !g.is_finite() || g.abs() > T::of(1e6)) {
            return None;
        }
        // u_acc = u_k + beta F_k - sum_j gamma_j [(u_{j+1}-u_j) + beta dF_j]
        let uk = &self.iterates[k];
        let mut out: Vec<T> = (0..dim).map(|i| uk[i] + beta * fk[i]).collect();
        for j in 0..k {
            let g = gamma[j];
            if g == T::zero() {
                continue;
            }
            for i in 0..dim {
                let du = self.iterates[j + 1][i] - self.iterates[j][i];
                out[i] = out[i] - g * (du + beta * cols[j][i]);
            }
        }
        Some(out)
    }
}

/// Gaussian elimination with partial pivoting; None on singular systems.
fn solve_dense<T: Real>(a: &mut [Vec<T>], b: &mut [T]) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < T::of(1e-300) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == T::zero() {
                continue;
            }
            for c in col..n {
                let v = a[col][c];
                a[row][c] = a[row][c] - factor * v;
            }
            let bv = b[col];
            b[row] = b[row] - factor * bv;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s = s - a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

fn l2<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// `F(u) = (T u) - u` on the value vector.
fn fixed_point_defect<T: Real>(
    problem: &RadialProblem<T>,
    state: &HomotopyState<T>,
    grid: &Grid<T>,
    u: &[T],
) -> Result<Vec<T>> {
    let profile = GridProfile {
        grid: grid.clone(),
        u: u.to_vec(),
        du: vec![T::zero(); u.len()],
    };
    let image = operator::apply(problem, &profile, state)?;
    Ok(image.u.iter().zip(u).map(|(&g, &v)| g - v).collect())
}

/// Unpreconditioned GMRES on `J x = b` with `J` given as a closure.
///
/// One Arnoldi cycle with modified Gram-Schmidt and Givens rotations;
/// returns once the relative residual drops under `tol` or the Krylov
/// space is exhausted. The operator's Jacobian is a compact perturbation
/// of the identity, so the spectrum clusters and short cycles suffice.
fn gmres<T: Real>(
    mut jv: impl FnMut(&[T]) -> Result<Vec<T>>,
    b: &[T],
    max_dim: usize,
    tol: T,
) -> Result<Vec<T>> {
    let n = b.len();
    let beta = l2(b);
    if beta == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let m = max_dim.min(n);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    basis.push(b.iter().map(|&x| x / beta).collect());
    let mut h: Vec<Vec<T>> = Vec::with_capacity(m); // h[j] = column j, length j+2
    let mut cs: Vec<T> = Vec::with_capacity(m);
    let mut sn: Vec<T> = Vec::with_capacity(m);
    let mut g = vec![T::zero(); m + 1];
    g[0] = beta;

    let mut dim = 0usize;
    for j in 0..m {
        let mut w = jv(&basis[j])?;
        let mut col = vec![T::zero(); j + 2];
        for (i, vi) in basis.iter().enumerate() {
            let mut d = T::zero();
            for t in 0..n {
                d += w[t] * vi[t];
            }
            col[i] = d;
            for t in 0..n {
                w[t] = w[t] - d * vi[t];
            }
        }
        let wn = l2(&w);
        col[j + 1] = wn;
        // previously accumulated rotations, then a new one for this column
        for i in 0..j {
            let (c, s) = (cs[i], sn[i]);
            let (a0, a1) = (col[i], col[i + 1]);
            col[i] = c * a0 + s * a1;
            col[i + 1] = -s * a0 + c * a1;
        }
        let (a0, a1) = (col[j], col[j + 1]);
        let r = (a0 * a0 + a1 * a1).sqrt();
        let (c, s) = if r == T::zero() {
            (T::one(), T::zero())
        } else {
            (a0 / r, a1 / r)
        };
        cs.push(c);
        sn.push(s);
        col[j] = r;
        col[j + 1] = T::zero();
        let g0 = g[j];
        g[j] = c * g0;
        g[j + 1] = -s * g0;
        h.push(col);
        dim = j + 1;

        if g[j + 1].abs() <= tol * beta || wn <= T::of(1e-14) * beta {
            break;
        }
        if j + 1 < m {
            basis.push(w.iter().map(|&x| x / wn).collect());
        }
    }

    // back substitution on the rotated Hessenberg system
    let mut y = vec![T::zero(); dim];
    for row in (0..dim).rev() {
        let mut s = g[row];
        for c in row + 1..dim {
            s = s - h[c][row] * y[c];
        }
        let d = h[row][row];
        if d.abs() < T::of(1e-300) {
            break;
        }
        y[row] = s / d;
    }
    let mut x = vec![T::zero(); n];
    for (j, &yj) in y.iter().enumerate() {
        if yj == T::zero() {
            continue;
        }
        for t in 0..n {
            x[t] += yj * basis[j][t];
        }
    }
    Ok(x)
}

/// Inexact Newton on the fixed-point defect, with directional derivatives
/// by finite differences and a backtracking sup-norm line search.
fn newton_refine<T: Real>(
    problem: &RadialProblem<T>,
    state: &HomotopyState<T>,
    grid: &Grid<T>,
    start: Vec<T>,
    tol: T,
    max_steps: usize,
) -> Result<(Vec<T>, T, usize)> {
    let n = start.len();
    let mut u = start;
    let mut f = fixed_point_defect(problem, state, grid, &u)?;
    let mut fnorm = sup(&f);
    let mut steps = 0usize;

    for _ in 0..max_steps {
        if fnorm <= tol {
            break;
        }
        steps += 1;
        let scale = T::one() + sup(&u);
        let rhs: Vec<T> = f.iter().map(|&x| -x).collect();
        let step = {
            let u_ref = &u;
            let f_ref = &f;
            let jv = |v: &[T]| -> Result<Vec<T>> {
                let vn = l2(v).max(T::of(1e-300));
                let eps = T::epsilon().sqrt() * scale / vn;
                let pert: Vec<T> = u_ref.iter().zip(v).map(|(&a, &b)| a + eps * b).collect();
                let fp = fixed_point_defect(problem, state, grid, &pert)?;
                Ok(fp
                    .iter()
                    .zip(f_ref.iter())
                    .map(|(&a, &b)| (a - b) / eps)
                    .collect())
            };
            gmres(jv, &rhs, 100.min(n), T::of(1e-4))?
        };

        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<T> = u.iter().zip(step.iter()).map(|(&a, &s)| a + t * s).collect();
            let ft = fixed_point_defect(problem, state, grid, &trial)?;
            let fn_t = sup(&ft);
            if fn_t <= tol || fn_t < fnorm * (T::one() - T::of(1e-4) * t) {
                u = trial;
                f = ft;
                fnorm = fn_t;
                accepted = true;
                break;
            }
            t = t / T::of(2.0);
        }
        if !accepted {
            break;
        }
    }
    Ok((u, fnorm, steps))
}

/// Norm below which a profile cannot be told apart from the trivial
/// solution at tolerance `tol`: the operator moves a constant at this level
/// by less than the tolerance already, so anything smaller is noise, not a
/// solution. Solved from λ·sup|a|·g(c)·Rᴺ/N = tol with a tenfold margin.
pub fn trivial_ceiling<T: Real>(problem: &RadialProblem<T>, tol: T) -> T {
    let n = T::of_usize(problem.dimension as usize);
    let geom = problem.radius.powi(problem.dimension as i32) / n;
    let coeff = problem.lambda * problem.weight.sup_abs() * geom;
    let floor = T::of(10.0) * tol;
    if !(coeff > T::zero()) || !coeff.is_finite() {
        return floor;
    }
    let target = tol / coeff;
    let mut hi = T::one().max(problem.radius);
    if problem.nonlinearity.eval(hi) <= target {
        return floor;
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if problem.nonlinearity.eval(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    floor.max(T::of(10.0) * hi)
}

fn classify<T: Real>(
    norm: T,
    trivial_below: T,
    brackets: &Option<NormBrackets<T>>,
) -> Classification {
    if norm <= trivial_below {
        return Classification::Trivial;
    }
    match brackets {
        None => Classification::Unbracketed,
        Some(b) => {
            let gap = b.gap_fraction * b.delta_star;
            if (norm - b.delta_star).abs() <= gap {
                Classification::MiddleExcluded
            } else if norm < b.delta_star {
                Classification::Small
            } else {
                Classification::Large
            }
        }
    }
}

/// Builds the reported solution: the value field keeps the best iterate,
/// the slopes are regenerated from its own flux so the slope identity
/// holds exactly at the reported profile.
fn finish_solution<T: Real>(
    problem: &RadialProblem<T>,
    state: &HomotopyState<T>,
    options: &SolveOptions<T>,
    best: GridProfile<T>,
    residual: T,
    iterations: usize,
) -> Result<Solution<T>> {
    let w = operator::cumulative_flux(problem, &best, state)?;
    let du: Vec<T> = w.iter().map(|&x| crate::phi::phi_inv(-x)).collect();
    let profile = GridProfile {
        grid: best.grid.clone(),
        u: best.u.clone(),
        du,
    };
    let norm = profile.sup_norm();
    let trivial_below = trivial_ceiling(problem, options.tol);
    Ok(Solution {
        profile,
        residual,
        iterations,
        classification: classify(norm, trivial_below, &options.brackets),
    })
}

/// Runs the iteration at a fixed homotopy state.
pub fn solve_at<T: Real>(
    problem: &RadialProblem<T>,
    state: &HomotopyState<T>,
    start: StartProfile<T>,
    options: &SolveOptions<T>,
) -> Result<Solution<T>> {
    let grid = Grid::for_problem(problem, options.grid_cells);
    // the start is deliberately not level-projected: a constant profile has
    // no admissible nonzero level, so projecting it first would collapse
    // every constant start onto the trivial branch
    let mut current = match start {
        StartProfile::Constant(c) => GridProfile::constant(grid, c),
        StartProfile::Profile(p) => {
            if p.grid.nodes() == grid.nodes() {
                p
            } else {
                resample(&p, &grid)
            }
        }
    };

    // a start that is already nearly a fixed point goes straight to the
    // Newton pass: the sweep below walks unstable fixed points off toward
    // the trivial branch, which would waste a good seed
    if options.newton_polish {
        let f0 = fixed_point_defect(problem, state, &current.grid, &current.u)?;
        if sup(&f0) <= T::of(0.05) * (T::one() + current.sup_norm()) {
            if let Ok((u_n, f_n, steps)) = newton_refine(
                problem,
                state,
                &current.grid.clone(),
                current.u.clone(),
                options.tol,
                30,
            ) {
                if f_n <= options.tol {
                    let refined = GridProfile {
                        grid: current.grid.clone(),
                        u: u_n,
                        du: current.du.clone(),
                    };
                    return finish_solution(problem, state, options, refined, f_n, steps);
                }
            }
        }
    }

    let beta = options.damping;
    let mut anderson = Anderson::new(options.acceleration_depth);
    let mut best = current.clone();
    let mut best_residual = T::infinity();
    let mut since_best = 0usize;
    let mut iterations = 0usize;

    for iter in 0..options.max_iter {
        iterations = iter + 1;
        let image = operator::apply(problem, &current, state)?;
        let image = if options.level_projection {
            project_level(problem, state, &image, current.u[0])?
        } else {
            image
        };
        let f: Vec<T> = image
            .u
            .iter()
            .zip(current.u.iter())
            .map(|(&g, &u)| g - u)
            .collect();
        let residual = f.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));

        if residual < best_residual {
            best_residual = residual;
            best = image.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if residual <= options.tol {
            break;
        }
        if since_best > options.stall_window {
            break;
        }

        anderson.push(current.u.clone(), f.clone());
        let next_u = if options.acceleration_depth > 0 {
            match anderson.mixed(beta) {
                Some(u) if u.iter().all(|v| v.is_finite()) => u,
                _ => {
                    anderson.reset();
                    current
                        .u
                        .iter()
                        .zip(f.iter())
                        .map(|(&u, &fv)| u + beta * fv)
                        .collect()
                }
            }
        } else {
            current
                .u
                .iter()
                .zip(f.iter())
                .map(|(&u, &fv)| u + beta * fv)
                .collect()
        };

        // rebuild a consistent slope field for the blended value field by
        // one operator pass bookkeeping: keep slopes from the image (they
        // are admissible) and let the next application correct them
        current = GridProfile {
            grid: image.grid.clone(),
            u: next_u,
            du: image.du.clone(),
        };
        // iterate safety: collapse back to the best profile on blowup
        let norm = current.sup_norm();
        if !norm.is_finite() || norm > T::of(1e8) * (T::one() + best.sup_norm()) {
            anderson.reset();
            current = best.clone();
        }
    }

    if options.newton_polish && best_residual > options.tol {
        if let Ok((u_n, f_n, extra)) =
            newton_refine(problem, state, &best.grid.clone(), best.u.clone(), options.tol, 30)
        {
            iterations += extra;
            if f_n < best_residual {
                best_residual = f_n;
                best = GridProfile {
                    grid: best.grid.clone(),
                    u: u_n,
                    du: best.du.clone(),
                };
            }
        }
    }

    finish_solution(problem, state, options, best, best_residual, iterations)
}

/// Convenience: solve the target problem (θ = 1, no forcing).
pub fn solve<T: Real>(
    problem: &RadialProblem<T>,
    start: StartProfile<T>,
    options: &SolveOptions<T>,
) -> Result<Solution<T>> {
    solve_at(problem, &HomotopyState::target(), start, options)
}

/// Linear resampling of a profile onto another grid. Slopes are zeroed;
/// the solver regenerates them from its own flux on the first sweep.
pub fn resample<T: Real>(p: &GridProfile<T>, grid: &Grid<T>) -> GridProfile<T> {
    let u: Vec<T> = grid.nodes().iter().map(|&r| p.eval_u(r)).collect();
    let du = vec![T::zero(); grid.len()];
    GridProfile {
        grid: grid.clone(),
        u,
        du,
    }
}

/// Tracks a solution along the slope homotopy θ: 0 → 1.
///
/// Returns the profile at every requested θ. Useful to carry the
/// zero-dimensional picture at θ = 0 into the full problem.
pub fn homotopy_path<T: Real>(
    problem: &RadialProblem<T>,
    thetas: &[T],
    start: StartProfile<T>,
    options: &SolveOptions<T>,
) -> Result<Vec<Solution<T>>> {
    if thetas.is_empty() {
        return Err(Error::invalid("homotopy path", "no theta values"));
    }
    let mut out = Vec::with_capacity(thetas.len());
    let mut carried = start;
    for (i, &theta) in thetas.iter().enumerate() {
        let state = HomotopyState::with_theta(theta)?;
        let sol = solve_at(problem, &state, carried, options)?;
        if i == 0 && sol.residual > options.tol && sol.classification == Classification::Trivial {
            return Err(Error::PathStuckAtStart);
        }
        carried = StartProfile::Profile(sol.profile.clone());
        out.push(sol);
    }
    Ok(out)
}

/// A converged candidate is worth keeping when it is genuinely nontrivial,
/// strictly positive and distinct from everything already collected.
fn keep_candidate<T: Real>(sol: Solution<T>, tol: T, found: &mut Vec<Solution<T>>) {
    if sol.residual > tol
        || sol.classification == Classification::Trivial
        || sol.profile.min_u() <= T::zero()
        || !sol.profile.sup_norm().is_finite()
    {
        return;
    }
    if found
        .iter()
        .all(|s| s.profile.sup_distance_sampled(&sol.profile) > T::of(10.0) * tol)
    {
        found.push(sol);
    }
}

/// Seeds a solve from every shooting root in `(0, ceiling]` and collects the
/// survivors. The scan starts at the trivial ceiling (below it every branch
/// is numerically zero) and brackets sign changes of the terminal slope
/// defect, so it sees every branch whose center value is not pathologically
/// close to a neighbor's.
fn shooting_leg<T: Real>(
    problem: &RadialProblem<T>,
    ceiling: T,
    options: &SolveOptions<T>,
    attempts: &mut Vec<T>,
    found: &mut Vec<Solution<T>>,
) {
    let controls = crate::shooting::ShotControls {
        slope_margin: T::of(1e-12),
        ..crate::shooting::ShotControls::default()
    };
    let lo = (T::of(1e-10) * (T::one() + problem.radius))
        .max(trivial_ceiling(problem, options.tol));
    if !(lo < ceiling) {
        return;
    }
    let roots = match crate::shooting::find_roots(problem, lo, ceiling, 600, T::of(1e-12), &controls)
    {
        Ok(r) => r,
        Err(_) => return,
    };
    let grid = Grid::for_problem(problem, options.grid_cells);
    for root in roots.iter().take(8) {
        attempts.push(root.center_value);
        let raw = GridProfile {
            grid: match Grid::from_nodes(root.r.clone()) {
                Ok(g) => g,
                Err(_) => continue,
            },
            u: root.u.clone(),
            du: root.du.clone(),
        };
        let seed = resample(&raw, &grid);
        if let Ok(sol) = solve(problem, StartProfile::Profile(seed), options) {
            keep_candidate(sol, options.tol, found);
        }
    }
}

/// Slope-one tent profile peaked over the positivity hull: the shape the
/// a-priori estimates give the large branch, so it lands in its basin.
fn tent_start<T: Real>(problem: &RadialProblem<T>, grid: &Grid<T>, level: T) -> GridProfile<T> {
    let peak = crate::problem::detect_sign_structure(
        problem,
        &crate::problem::SignDetection::default(),
    )
    .ok()
    .and_then(|s| {
        let lo = s.intervals.first().map(|i| i.lo)?;
        let hi = s.intervals.last().map(|i| i.hi)?;
        Some((lo + hi) / T::of(2.0))
    })
    .unwrap_or(problem.radius / T::of(2.0));
    let floor = T::of(1e-3) * level.max(T::of(1e-6));
    let u: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&r| (level - (r - peak).abs()).max(floor))
        .collect();
    GridProfile {
        grid: grid.clone(),
        u,
        du: vec![T::zero(); grid.len()],
    }
}

fn straddles<T: Real>(found: &[Solution<T>], delta_star: T) -> bool {
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for s in found {
        let n = s.profile.sup_norm();
        lo = lo.min(n);
        hi = hi.max(n);
    }
    !found.is_empty() && lo < delta_star && hi > delta_star
}

/// Searches for two distinct positive solutions at the problem's own λ.
///
/// The legs run in order of reliability: shooting roots reseeded into the
/// grid solver, tent profiles over the positivity hull, the constant-level
/// schedule derived from the bracket constants, and a continuation descent
/// from 2λ. The search returns as soon as the collected set brackets the
/// small-branch ceiling; otherwise it runs everything and returns the
/// extremal pair by sup norm.
pub fn find_two_solutions<T: Real>(
    problem: &RadialProblem<T>,
    bundle: &ConstantsBundle<T>,
    options: &SolveOptions<T>,
) -> std::result::Result<TwoSolutions<T>, Box<MultiplicityNotFound<T>>> {
    let mut options = options.clone();
    options.brackets = Some(NormBrackets::from_bundle(bundle));

    let d_floor = bundle
        .d_star
        .as_ref()
        .map(|e| e.value)
        .unwrap_or(bundle.delta_star * T::of(1e-3));
    let ceiling = bundle
        .d_star_upper
        .as_ref()
        .map(|e| e.value)
        .unwrap_or_else(|| T::of(4.0) * problem.radius.max(bundle.delta_star));

    let mut found: Vec<Solution<T>> = Vec::new();
    let mut attempts: Vec<T> = Vec::new();
    let done = |found: &Vec<Solution<T>>| found.len() >= 2 && straddles(found, bundle.delta_star);

    shooting_leg(problem, ceiling, &options, &mut attempts, &mut found);

    if !done(&found) {
        let grid = Grid::for_problem(problem, options.grid_cells);
        let mut level = bundle.delta_star * T::of(2.0);
        let mut tent_levels: Vec<T> = Vec::new();
        while level <= ceiling {
            tent_levels.push(level);
            level = level * T::of(2.0);
        }
        // δ* can sit far below the scale of the domain; make sure the ladder
        // reaches it anyway
        let r_half = problem.radius / T::of(2.0);
        if tent_levels.last().map(|&l| l < r_half).unwrap_or(true) && r_half <= ceiling {
            tent_levels.push(r_half);
        }
        for &level in &tent_levels {
            if done(&found) {
                break;
            }
            attempts.push(level);
            if let Ok(sol) = solve(
                problem,
                StartProfile::Profile(tent_start(problem, &grid, level)),
                &options,
            ) {
                keep_candidate(sol, options.tol, &mut found);
            }
        }
    }

    if !done(&found) {
        let mut levels = vec![
            d_floor * T::of(1.5),
            (d_floor + bundle.delta_star) / T::of(2.0),
            bundle.delta_star * T::of(0.9),
        ];
        let mut level = bundle.delta_star * T::of(2.0);
        while level <= ceiling {
            levels.push(level);
            level = level * T::of(2.0);
        }
        for &c in &levels {
            if done(&found) {
                break;
            }
            attempts.push(c);
            if let Ok(sol) = solve(problem, StartProfile::Constant(c), &options) {
                keep_candidate(sol, options.tol, &mut found);
            }
        }

        // continuation from 2λ: basins can be wider there
        if !done(&found) {
            let mut boosted = problem.clone();
            boosted.lambda = problem.lambda * T::of(2.0);
            for &c in &levels {
                if done(&found) {
                    break;
                }
                let seed = match solve(&boosted, StartProfile::Constant(c), &options) {
                    Ok(s)
                        if s.residual <= options.tol
                            && s.classification != Classification::Trivial =>
                    {
                        s
                    }
                    _ => continue,
                };
                let mut carried = seed.profile;
                let mut ok = true;
                for &factor in &[T::of(std::f64::consts::SQRT_2), T::one()] {
                    let mut stepped = problem.clone();
                    stepped.lambda = problem.lambda * factor;
                    match solve(&stepped, StartProfile::Profile(carried.clone()), &options) {
                        Ok(s) if s.residual <= options.tol => carried = s.profile,
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    if let Ok(sol) = solve(problem, StartProfile::Profile(carried), &options) {
                        keep_candidate(sol, options.tol, &mut found);
                    }
                }
            }
        }
    }

    if found.len() < 2 {
        return Err(Box::new(MultiplicityNotFound { attempts, found }));
    }
    found.sort_by(|a, b| {
        a.profile
            .sup_norm()
            .partial_cmp(&b.profile.sup_norm())
            .unwrap()
    });
    let small = found.first().unwrap().clone();
    let large = found.last().unwrap().clone();
    let straddle = small.profile.sup_norm() < bundle.delta_star
        && large.profile.sup_norm() > bundle.delta_star;
    Ok(TwoSolutions {
        small,
        large,
        straddles_ceiling: straddle,
    })
}

/// Solves across a λ grid with warm starts, reporting norms per λ.
pub struct SweepRow<T> {
    pub lambda: T,
    pub norms: Vec<T>,
    /// True when at least two distinct nontrivial solutions converged.
    pub multiple: bool,
}

pub fn lambda_sweep<T: Real>(
    problem: &RadialProblem<T>,
    lambdas: &[T],
    bundle: Option<&ConstantsBundle<T>>,
    options: &SolveOptions<T>,
) -> Result<Vec<SweepRow<T>>> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda sweep", "empty grid"));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("lambda sweep", "grid must be strictly increasing"));
    }
    let ceiling = bundle
        .and_then(|b| b.d_star_upper.as_ref().map(|e| e.value))
        .unwrap_or_else(|| T::of(4.0) * problem.radius);

    let mut rows = Vec::with_capacity(lambdas.len());
    let mut warm: Vec<GridProfile<T>> = Vec::new();
    for &lambda in lambdas {
        let mut p = problem.clone();
        p.lambda = lambda;
        let mut found: Vec<Solution<T>> = Vec::new();
        for w in &warm {
            if let Ok(sol) = solve(&p, StartProfile::Profile(w.clone()), options) {
                keep_candidate(sol, options.tol, &mut found);
            }
        }
        if found.len() < 2 {
            let mut attempts = Vec::new();
            shooting_leg(&p, ceiling, options, &mut attempts, &mut found);
        }
        if let Some(b) = bundle {
            if found.len() < 2 {
                for &c in &[b.delta_low, b.delta_star * T::of(0.9)] {
                    if let Ok(sol) = solve(&p, StartProfile::Constant(c), options) {
                        keep_candidate(sol, options.tol, &mut found);
                    }
                }
            }
        }
        let mut norms: Vec<T> = found.iter().map(|s| s.profile.sup_norm()).collect();
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let multiple = found.len() >= 2;
        warm = found.into_iter().map(|s| s.profile).collect();
        rows.push(SweepRow {
            lambda,
            norms,
            multiple,
        });
    }
    Ok(rows)
}

/// Empirical exclusion radius for the small branch: the largest probed
/// level with no solution at or below it, halved for safety.
///
/// A solution with sup norm ≤ c starts from a center value ≤ c, so a
/// shooting scan of `(0, c]` that brackets no terminal-defect root is
/// evidence that the ball of radius c holds only the trivial solution.
/// Constant-start solves at the probe levels double-check from the
/// fixed-point side. The value is a measurement, not a proof.
pub fn estimate_d_star<T: Real>(
    problem: &RadialProblem<T>,
    delta_star: T,
    options: &SolveOptions<T>,
) -> Estimate<T> {
    let fallback = Estimate {
        value: delta_star * T::of(1e-3),
        provenance: Provenance::Fallback,
        note: "no collapse level could be certified".into(),
    };
    let controls = crate::shooting::ShotControls {
        slope_margin: T::of(1e-12),
        ..crate::shooting::ShotControls::default()
    };
    let lo = (T::of(1e-10) * (T::one() + problem.radius))
        .max(trivial_ceiling(problem, options.tol));

    // levels δ*·2⁻ᵏ from just under δ* down the lattice
    let mut best: Option<T> = None;
    for k in 1..=20 {
        let c = delta_star / T::of(f64::powi(2.0, k));
        if c <= lo {
            break;
        }
        let roots = match crate::shooting::find_roots(problem, lo, c, 400, T::of(1e-12), &controls)
        {
            Ok(r) => r,
            Err(_) => continue,
        };
        if !roots.is_empty() {
            continue;
        }
        let sol = match solve(problem, StartProfile::Constant(c), options) {
            Ok(s) => s,
            Err(_) => continue,
        };
        if sol.classification == Classification::Trivial
            || sol.profile.sup_norm() > c
            || sol.residual > options.tol
        {
            // either collapsed, or converged to something above the probe
            // ball; both are consistent with an empty ball below c
            best = Some(c);
            break;
        }
    }
    match best {
        Some(c) => Estimate {
            value: c / T::of(2.0),
            provenance: Provenance::Measured,
            note: "largest probe level with an empty ball, halved".into(),
        },
        None => fallback,
    }
}

/// Empirical ceiling for the large branch: grows a trial ceiling until two
/// consecutive ceilings harvest the same solution set, then returns the
/// final ceiling (always above every found norm). A measurement, not a
/// proof; a ceiling past the hard cap reports an unbounded-branch error.
pub fn estimate_d_star_upper<T: Real>(
    problem: &RadialProblem<T>,
    delta_star: T,
    options: &SolveOptions<T>,
) -> Result<Estimate<T>> {
    let hard_cap = T::of(64.0) * problem.radius.max(T::one());
    let mut ceiling = (T::of(4.0) * delta_star).max(problem.radius);
    let mut previous: Option<Vec<T>> = None;
    loop {
        let mut found: Vec<Solution<T>> = Vec::new();
        let mut attempts = Vec::new();
        shooting_leg(problem, ceiling, options, &mut attempts, &mut found);
        let mut norms: Vec<T> = found.iter().map(|s| s.profile.sup_norm()).collect();
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let same = previous
            .as_ref()
            .map(|p| {
                p.len() == norms.len()
                    && p.iter()
                        .zip(norms.iter())
                        .all(|(&a, &b)| (a - b).abs() <= T::of(1e-8) * (T::one() + a.abs()))
            })
            .unwrap_or(false);
        let max_norm = norms.last().copied().unwrap_or(T::zero());
        if same && ceiling > max_norm {
            return Ok(Estimate {
                value: ceiling,
                provenance: Provenance::Measured,
                note: "stable harvest under ceiling growth".into(),
            });
        }
        previous = Some(norms);
        ceiling = ceiling * T::of(2.0);
        if ceiling > hard_cap {
            return Err(Error::UnboundedBranch {
                ceiling: ceiling.as_f64(),
                cap: hard_cap.as_f64(),
            });
        }
    }
}
