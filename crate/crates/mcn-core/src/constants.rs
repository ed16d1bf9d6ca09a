//! The explicit constants that bracket solution sizes and locate the
//! multiplicity threshold.
//!
//! From the positivity intervals of the weight and a trim width ε the
//! pipeline produces:
//!
//! * `delta_star`: the ceiling `2^{N-1} ε^N / R^{N-1}` under which small
//!   solutions are trapped,
//! * `delta_low`: a floor below `delta_star` such that any solution whose
//!   sup norm is at most `delta_star` stays above `delta_low` somewhere,
//! * `lambda_star`: a size of λ beyond which two positive solutions exist,
//!   one with sup norm under `delta_star` and one over it.
//!
//! `d_star` and `d_star_upper` are measured, not derived: lower and upper
//! envelopes for the small and large branch obtained by probing the solver.

use crate::error::{Error, Result};
use crate::phi::phi_half;
use crate::problem::{Interval, RadialProblem, SignStructure};
use crate::real::Real;
use serde::Serialize;

/// How a reported number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Evaluated from a closed-form expression.
    Formula,
    /// Measured by running the solver or another experiment.
    Measured,
    /// A fallback when the measurement was inconclusive.
    Fallback,
}

/// A number together with how it was obtained.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub provenance: Provenance,
    pub note: String,
}

/// The full constants pipeline output for one problem and one trim width.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsBundle<T> {
    /// Trim width applied to each positivity interval.
    pub epsilon: T,
    /// Replacement inner radius for a positivity interval touching r = 0.
    pub gamma: Option<T>,
    /// Sup-norm ceiling for the small branch.
    pub delta_star: T,
    /// Positive floor below `delta_star`.
    pub delta_low: T,
    /// Threshold size of λ for the two-solution regime.
    pub lambda_star: T,
    /// `∫ r^{N-1} a` over each trimmed positivity interval.
    pub trimmed_integrals: Vec<T>,
    /// Measured lower envelope of the small branch, if probed.
    pub d_star: Option<Estimate<T>>,
    /// Measured upper envelope of the large branch, if probed.
    pub d_star_upper: Option<Estimate<T>>,
}

/// Trim widths live on an absolute lattice so that reported constants are
/// reproducible bit for bit across machines.
pub const EPSILON_LATTICE: f64 = 9.5367431640625e-7; // 2^-20

fn lattice_floor<T: Real>(x: T) -> T {
    let step = T::of(EPSILON_LATTICE);
    (x / step).floor() * step
}

/// Largest lattice multiple ε with `4ε < |I|` for every positivity interval
/// and every trimmed integral strictly positive.
///
/// Feasibility is monotone in ε (shrinking the trim can only help), so a
/// binary search over lattice indices finds the largest admissible point.
pub fn choose_epsilon<T: Real>(
    problem: &RadialProblem<T>,
    structure: &SignStructure<T>,
) -> Result<T> {
    if structure.intervals.is_empty() {
        return Err(Error::NoPositivityInterval);
    }
    let min_len = structure
        .intervals
        .iter()
        .map(|i| i.length())
        .fold(T::infinity(), T::min);
    let step = T::of(EPSILON_LATTICE);
    let feasible = |eps: T| -> bool {
        if eps <= T::zero() {
            return false;
        }
        structure.intervals.iter().all(|i| {
            let two = T::of(2.0);
            i.length() > T::of(4.0) * eps
                && trimmed_weight_integral(problem, i, eps) > T::zero()
                && i.hi - two * eps > i.lo + two * eps
        })
    };
    // upper bound: ε < |I|/4, as a lattice index
    let hi_f = (min_len / T::of(4.0) / step).ceil().as_f64() as i64;
    if hi_f <= 0 {
        return Err(Error::NoAdmissibleTrim(
            "every candidate trim width collapses a positivity interval".into(),
        ));
    }
    let (mut lo, mut hi) = (0i64, hi_f + 1); // invariant: lo feasible-or-zero, hi infeasible
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(T::of(mid as f64) * step) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0 {
        return Err(Error::NoAdmissibleTrim(
            "no lattice trim width keeps all trimmed weight integrals positive".into(),
        ));
    }
    Ok(lattice_floor(T::of(lo as f64) * step))
}

/// `∫_{lo+2ε}^{hi-2ε} r^{N-1} a(r) dr` over one positivity interval.
fn trimmed_weight_integral<T: Real>(
    problem: &RadialProblem<T>,
    interval: &Interval<T>,
    epsilon: T,
) -> T {
    let two = T::of(2.0);
    let (a, b) = (interval.lo + two * epsilon, interval.hi - two * epsilon);
    if b <= a {
        return T::zero();
    }
    problem
        .weight
        .radial_integral(a, b, problem.dimension, 512)
}

/// Evaluates the bracket constants for a given trim width.
///
/// Fails with a hypothesis violation when the trim is inadmissible: some
/// interval shorter than 4ε, or some trimmed integral nonpositive.
pub fn compute_bundle<T: Real>(
    problem: &RadialProblem<T>,
    structure: &SignStructure<T>,
    epsilon: T,
) -> Result<ConstantsBundle<T>> {
    if structure.intervals.is_empty() {
        return Err(Error::NoPositivityInterval);
    }
    if !(epsilon > T::zero()) {
        return Err(Error::invalid("trim width", "must be positive"));
    }
    let n = problem.dimension as i32;
    let two = T::of(2.0);
    let four = T::of(4.0);

    let mut trimmed = Vec::with_capacity(structure.intervals.len());
    for interval in &structure.intervals {
        if interval.length() <= four * epsilon {
            return Err(Error::NoAdmissibleTrim(format!(
                "positivity interval [{}, {}] is shorter than four trim widths",
                interval.lo.as_f64(),
                interval.hi.as_f64()
            )));
        }
        let t = trimmed_weight_integral(problem, interval, epsilon);
        if !(t > T::zero()) {
            return Err(Error::NoAdmissibleTrim(format!(
                "trimmed weight integral over [{}, {}] is not positive",
                interval.lo.as_f64(),
                interval.hi.as_f64()
            )));
        }
        trimmed.push(t);
    }

    let r_pow = problem.radius.powi(n - 1);
    let delta_star = two.powi(n - 1) * epsilon.powi(n) / r_pow;

    // Floor: over each interval, the slope bound |u'| <= phi_inv-cap gives
    // u >= delta_star / (1 + 2 phi(1/2) |I| tau^{2N-2} / (sigma^{N-1} (2 eps)^N))
    // somewhere in the trimmed core; an interval touching r = 0 swaps sigma
    // for a strictly interior gamma.
    let phi_h = phi_half::<T>();
    let mut gamma = None;
    let mut delta_low = T::infinity();
    for interval in &structure.intervals {
        let (sigma, tau) = (interval.lo, interval.hi);
        let len = interval.length();
        let (inner, cap) = if sigma == T::zero() {
            let g = delta_star.min(tau) / two;
            gamma = Some(g);
            (g, delta_star - g)
        } else {
            (sigma, delta_star)
        };
        let denom = T::one()
            + two * phi_h * len * tau.powi(2 * n - 2)
                / (inner.powi(n - 1) * (two * epsilon).powi(n));
        delta_low = delta_low.min(cap / denom);
    }
    if !(delta_low > T::zero() && delta_low < delta_star) {
        return Err(Error::invalid(
            "bracket floor",
            "computed floor does not sit strictly inside (0, delta_star)",
        ));
    }

    let g_min = problem.nonlinearity.min_on(delta_low, delta_star);
    if !(g_min > T::zero()) {
        return Err(Error::invalid(
            "bracket floor",
            "nonlinearity vanishes somewhere in [delta_low, delta_star]",
        ));
    }
    let t_min = trimmed.iter().copied().fold(T::infinity(), T::min);
    let lambda_star = two * r_pow * phi_h / (g_min * t_min);

    Ok(ConstantsBundle {
        epsilon,
        gamma,
        delta_star,
        delta_low,
        lambda_star,
        trimmed_integrals: trimmed,
        d_star: None,
        d_star_upper: None,
    })
}

/// Convenience: trim width chosen automatically, then the bundle.
pub fn auto_bundle<T: Real>(
    problem: &RadialProblem<T>,
    structure: &SignStructure<T>,
) -> Result<ConstantsBundle<T>> {
    let epsilon = choose_epsilon(problem, structure)?;
    compute_bundle(problem, structure, epsilon)
}
