//! Scalar kernel of the curvature operator and the sign extension of the
//! right-hand side.
//!
//! `phi(s) = s / sqrt(1 - s^2)` maps the admissible slope range (-1, 1) onto
//! the whole line; its inverse `phi_inv(y) = y / sqrt(1 + y^2)` is total,
//! odd, strictly increasing, and contracts toward zero (`|phi_inv(y)| <= |y|`
//! with `|phi_inv| < 1`). Three inequalities about this pair carry the
//! solution estimates, and [`check_inequalities`] sweeps them numerically:
//!
//! 1. `phi_inv(theta * phi(s)) >= theta * s` for `theta in [0, 1]`, `s in [0, 1)`;
//! 2. `phi(s) <= 2 phi(1/2) s` on `[0, 1/2]`;
//! 3. `|phi_inv(y)| <= |y|`.

use crate::error::{Error, Result};
use crate::problem::{RadialProblem, Side};
use crate::real::Real;

/// Relative width of the guard band around `|s| = 1` inside which [`phi`]
/// refuses to evaluate.
pub const SLOPE_GUARD: f64 = 1e-12;

/// `s / sqrt(1 - s^2)`; fails inside the guard band around the light cone.
pub fn phi<T: Real>(s: T) -> Result<T> {
    if !s.is_finite() || s.abs() >= T::one() - T::of(SLOPE_GUARD) {
        return Err(Error::SlopeSaturated { s: s.as_f64() });
    }
    Ok(s / (T::one() - s * s).sqrt())
}

/// Total inverse of [`phi`], clamped to the largest representable slope
/// below 1 so the strict bound `|phi_inv| < 1` survives round-off at huge
/// arguments. NaN propagates.
pub fn phi_inv<T: Real>(y: T) -> T {
    if y.is_nan() {
        return y;
    }
    let cap = T::one() - T::epsilon() / T::of(2.0);
    let den = (T::one() + y * y).sqrt();
    if !den.is_finite() {
        // y*y overflowed; the true value is within one ulp of the cap
        return if y > T::zero() { cap } else { -cap };
    }
    (y / den).min(cap).max(-cap)
}

/// `phi(1/2) = 1/sqrt(3)`, a constant of the estimates.
pub fn phi_half<T: Real>() -> T {
    phi(T::of(0.5)).expect("1/2 is an admissible slope")
}

/// Sign-extended right-hand side:
/// `lambda * a(r) * g(u)` for `u >= 0`, and `-u` for `u < 0`.
pub fn extend_f<T: Real>(problem: &RadialProblem<T>, r: T, u: T) -> Result<T> {
    if u < T::zero() {
        // keep the domain check even though the weight value is unused
        problem.eval_weight(r)?;
        return Ok(-u);
    }
    Ok(problem.lambda * problem.eval_weight(r)? * problem.nonlinearity.eval(u))
}

/// One-sided variant for quadrature across weight jumps.
pub fn extend_f_sided<T: Real>(problem: &RadialProblem<T>, r: T, side: Side, u: T) -> Result<T> {
    if u < T::zero() {
        problem.eval_weight_sided(r, side)?;
        return Ok(-u);
    }
    Ok(problem.lambda * problem.eval_weight_sided(r, side)? * problem.nonlinearity.eval(u))
}

/// Worst margins of the three kernel inequalities over a deterministic sweep.
/// Margins are oriented so that nonnegative means the inequality held; a
/// violation is a margin below `-slack`, where the slack covers floating-point
/// round-off only.
#[derive(Clone, Copy, Debug)]
pub struct InequalityReport<T> {
    pub samples: usize,
    /// min over the sweep of `phi_inv(theta * phi(s)) - theta * s`.
    pub homotopy_margin: T,
    /// min over the sweep of `2 phi(1/2) s - phi(s)`.
    pub chord_margin: T,
    /// min over the sweep of `|y| - |phi_inv(y)|`.
    pub contraction_margin: T,
    pub slack: T,
    pub violations: usize,
}

/// Sweeps the three inequalities on about `budget` sample points.
pub fn check_inequalities<T: Real>(budget: usize) -> InequalityReport<T> {
    let budget = budget.max(64);
    let slack = T::slack();
    let mut samples = 0usize;
    let mut violations = 0usize;

    // (1) theta x s grid; s stays strictly inside the guard band.
    let per_axis = ((budget / 2) as f64).sqrt().ceil() as usize;
    let mut homotopy_margin = T::infinity();
    for i in 0..=per_axis {
        let theta = T::of_usize(i) / T::of_usize(per_axis);
        for j in 0..per_axis {
            let s = (T::one() - T::of(2.0 * SLOPE_GUARD)) * T::of_usize(j) / T::of_usize(per_axis);
            let margin = phi_inv(theta * phi(s).expect("s below guard")) - theta * s;
            homotopy_margin = homotopy_margin.min(margin);
            if margin < -slack {
                violations += 1;
            }
            samples += 1;
        }
    }

    // (2) s in [0, 1/2]
    let n2 = budget / 4;
    let two_phi_half = T::of(2.0) * phi_half::<T>();
    let mut chord_margin = T::infinity();
    for j in 0..=n2 {
        let s = T::of(0.5) * T::of_usize(j) / T::of_usize(n2);
        let margin = two_phi_half * s - phi(s).expect("s <= 1/2");
        chord_margin = chord_margin.min(margin);
        if margin < -slack {
            violations += 1;
        }
        samples += 1;
    }

    // (3) y spanning many decades, both signs
    let n3 = budget / 4;
    let mut contraction_margin = T::infinity();
    for j in 0..=n3 {
        let t = -8.0 + 16.0 * j as f64 / n3 as f64;
        let y = T::of(10f64.powf(t));
        for y in [y, -y, T::zero()] {
            let margin = y.abs() - phi_inv(y).abs();
            contraction_margin = contraction_margin.min(margin);
            if margin < -slack {
                violations += 1;
            }
            samples += 1;
        }
    }

    InequalityReport {
        samples,
        homotopy_margin,
        chord_margin,
        contraction_margin,
        slack,
        violations,
    }
}
