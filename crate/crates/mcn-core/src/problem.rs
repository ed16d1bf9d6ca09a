//! Problem data: the radial domain, the sign-changing weight `a`, the
//! nonlinearity `g`, and the detected sign structure of the weight.
//!
//! The weight must change sign: the theory requires one or more closed
//! intervals where `a >= 0` with `a > 0` somewhere inside (positivity
//! intervals), together with a strictly negative weighted mean
//! `∫_0^R r^{N-1} a(r) dr < 0`. [`detect_sign_structure`] recovers the
//! positivity intervals from samples and refines their endpoints by
//! bisection; [`check_mean_condition`] tests the mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::real::Real;

/// One-sided evaluation at a point where a piecewise weight may jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Limit from below (left).
    Below,
    /// Limit from above (right); the default convention for plain evaluation.
    Above,
}

/// Sign-changing weight `a(r)` on `[0, R]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum WeightSpec<T> {
    /// `a(r) = cos(|r - center|^exponent + phase)`.
    CosineShifted { center: T, phase: T, exponent: T },
    /// Constant `values[i]` on `[breakpoints[i-1], breakpoints[i])`, with the
    /// last piece closed at `R`.
    PiecewiseConstant { breakpoints: Vec<T>, values: Vec<T> },
    /// Linear interpolation through `(r[i], values[i])`; the nodes must cover
    /// `[0, R]`.
    Table { r: Vec<T>, values: Vec<T> },
}

impl<T: Real> WeightSpec<T> {
    /// Identically zero weight, used as the neutral forcing term.
    pub fn zero() -> Self {
        WeightSpec::PiecewiseConstant {
            breakpoints: Vec::new(),
            values: vec![T::zero()],
        }
    }

    /// Indicator of a union of intervals, a convenient nonnegative forcing.
    pub fn indicator(intervals: &[Interval<T>]) -> Self {
        let mut breakpoints = Vec::new();
        let mut values = vec![T::zero()];
        for iv in intervals {
            if iv.lo > T::zero() {
                breakpoints.push(iv.lo);
                values.push(T::one());
            } else {
                *values.last_mut().expect("values never empty") = T::one();
            }
            breakpoints.push(iv.hi);
            values.push(T::zero());
        }
        WeightSpec::PiecewiseConstant {
            breakpoints,
            values,
        }
    }

    pub fn validate(&self, radius: T) -> Result<()> {
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        match self {
            WeightSpec::CosineShifted {
                center,
                phase,
                exponent,
            } => {
                if !(center.is_finite() && phase.is_finite() && exponent.is_finite()) {
                    return Err(Error::invalid("weight", "non-finite parameter"));
                }
                if *exponent <= T::zero() {
                    return Err(Error::invalid("weight", "exponent must be positive"));
                }
            }
            WeightSpec::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                if values.len() != breakpoints.len() + 1 {
                    return Err(Error::invalid(
                        "weight",
                        "piecewise weight needs exactly one more value than breakpoints",
                    ));
                }
                if !finite(breakpoints) || !finite(values) {
                    return Err(Error::invalid("weight", "non-finite parameter"));
                }
                let mut prev = T::zero();
                for &b in breakpoints {
                    if b <= prev || b >= radius {
                        return Err(Error::invalid(
                            "weight",
                            "breakpoints must be strictly increasing inside (0, R)",
                        ));
                    }
                    prev = b;
                }
            }
            WeightSpec::Table { r, values } => {
                if r.len() != values.len() || r.len() < 2 {
                    return Err(Error::invalid(
                        "weight",
                        "table needs matching r/value lists with at least two rows",
                    ));
                }
                if !finite(r) || !finite(values) {
                    return Err(Error::invalid("weight", "non-finite parameter"));
                }
                if !r.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::invalid("weight", "table abscissae must increase"));
                }
                let tol = radius * T::of(1e-12);
                if r[0].abs() > tol || (r[r.len() - 1] - radius).abs() > tol {
                    return Err(Error::invalid("weight", "table must cover [0, R]"));
                }
            }
        }
        Ok(())
    }

    /// Pointwise value with the `Above` convention at jumps.
    pub fn eval(&self, r: T) -> T {
        self.eval_sided(r, Side::Above)
    }

    /// One-sided value; the sides differ only where the weight jumps.
    pub fn eval_sided(&self, r: T, side: Side) -> T {
        match self {
            WeightSpec::CosineShifted {
                center,
                phase,
                exponent,
            } => ((r - *center).abs().powf(*exponent) + *phase).cos(),
            WeightSpec::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                let idx = match side {
                    Side::Above => breakpoints.partition_point(|&b| b <= r),
                    Side::Below => breakpoints.partition_point(|&b| b < r),
                };
                values[idx]
            }
            WeightSpec::Table { r: rs, values } => {
                if r <= rs[0] {
                    return values[0];
                }
                if r >= rs[rs.len() - 1] {
                    return values[values.len() - 1];
                }
                let hi = rs.partition_point(|&x| x < r).max(1);
                let (r0, r1) = (rs[hi - 1], rs[hi]);
                let t = (r - r0) / (r1 - r0);
                values[hi - 1] + (values[hi] - values[hi - 1]) * t
            }
        }
    }

    /// Interior points where the weight (or its derivative) is not smooth;
    /// quadrature and integration split cells here.
    pub fn breakpoints(&self, radius: T) -> Vec<T> {
        match self {
            WeightSpec::CosineShifted { center, .. } => {
                if *center > T::zero() && *center < radius {
                    vec![*center]
                } else {
                    Vec::new()
                }
            }
            WeightSpec::PiecewiseConstant { breakpoints, .. } => breakpoints.clone(),
            WeightSpec::Table { r, .. } => {
                r.iter()
                    .copied()
                    .filter(|&x| x > T::zero() && x < radius)
                    .collect()
            }
        }
    }

    /// Upper bound for `sup |a|` on `[0, R]`.
    pub fn sup_abs(&self) -> T {
        match self {
            WeightSpec::CosineShifted { .. } => T::one(),
            WeightSpec::PiecewiseConstant { values, .. } | WeightSpec::Table { values, .. } => {
                values
                    .iter()
                    .fold(T::zero(), |acc, &v| acc.max(v.abs()))
            }
        }
    }

    /// `∫_lo^hi r^{N-1} a(r) dr`. Exact for the piecewise-constant and table
    /// kinds (closed-form moments per piece); composite trapezoid with
    /// `cells` cells, split at breakpoints, otherwise.
    pub fn radial_integral(&self, lo: T, hi: T, dimension: u32, cells: usize) -> T {
        if hi <= lo {
            return T::zero();
        }
        match self {
            WeightSpec::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                let mut total = T::zero();
                let mut seg_lo = lo;
                for (i, &b) in breakpoints.iter().enumerate() {
                    if b <= lo {
                        continue;
                    }
                    if b >= hi {
                        total += values[i] * quad::radial_moment(seg_lo, hi, dimension);
                        return total;
                    }
                    total += values[i] * quad::radial_moment(seg_lo, b, dimension);
                    seg_lo = b;
                }
                total
                    + values[values.len() - 1] * quad::radial_moment(seg_lo, hi, dimension)
            }
            WeightSpec::Table { r, values } => {
                let mut total = T::zero();
                for i in 0..r.len() - 1 {
                    let (a, b) = (r[i].max(lo), r[i + 1].min(hi));
                    if a >= b {
                        continue;
                    }
                    // linear piece v(x) = c0 + c1 x on [r_i, r_{i+1}]
                    let c1 = (values[i + 1] - values[i]) / (r[i + 1] - r[i]);
                    let c0 = values[i] - c1 * r[i];
                    total += c0 * quad::radial_moment(a, b, dimension)
                        + c1 * quad::radial_moment_next(a, b, dimension);
                }
                // constant extension outside the table (validation keeps this empty)
                if lo < r[0] {
                    total += values[0] * quad::radial_moment(lo, r[0].min(hi), dimension);
                }
                let last = r[r.len() - 1];
                if hi > last {
                    total += values[values.len() - 1]
                        * quad::radial_moment(last.max(lo), hi, dimension);
                }
                total
            }
            WeightSpec::CosineShifted { .. } => {
                let mut cuts: Vec<T> = vec![lo];
                for b in self.breakpoints(hi) {
                    if b > lo && b < hi {
                        cuts.push(b);
                    }
                }
                cuts.push(hi);
                let mut total = T::zero();
                for w in cuts.windows(2) {
                    let n = cells.max(16);
                    total += quad::trapezoid_fn(
                        |x| x.powi(dimension as i32 - 1) * self.eval(x),
                        w[0],
                        w[1],
                        n,
                    );
                }
                total
            }
        }
    }
}

/// Nonlinearity `g(u)` on `u >= 0`, with `g(0) = 0` and `g > 0` on `(0, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum NonlinearitySpec<T> {
    /// `g(u) = u^p`, `p > 1`.
    Power { p: T },
    /// `g(u) = u^p + u^q`, `1 < p <= q`.
    PowerSum { p: T, q: T },
    /// Linear interpolation through `(u[i], values[i])` with `u[0] = 0`,
    /// `values[0] = 0`; extended linearly beyond the last node.
    Table { u: Vec<T>, values: Vec<T> },
}

impl<T: Real> NonlinearitySpec<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            NonlinearitySpec::Power { p } => {
                if !p.is_finite() || *p <= T::one() {
                    return Err(Error::invalid("nonlinearity", "exponent must exceed 1"));
                }
            }
            NonlinearitySpec::PowerSum { p, q } => {
                if !p.is_finite() || !q.is_finite() || *p <= T::one() || *q < *p {
                    return Err(Error::invalid(
                        "nonlinearity",
                        "exponents must satisfy 1 < p <= q",
                    ));
                }
            }
            NonlinearitySpec::Table { u, values } => {
                if u.len() != values.len() || u.len() < 2 {
                    return Err(Error::invalid(
                        "nonlinearity",
                        "table needs matching u/value lists with at least two rows",
                    ));
                }
                if u[0] != T::zero() || values[0] != T::zero() {
                    return Err(Error::invalid("nonlinearity", "table must start at (0, 0)"));
                }
                if !u.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::invalid("nonlinearity", "table abscissae must increase"));
                }
                if values.iter().skip(1).any(|&v| v <= T::zero() || !v.is_finite()) {
                    return Err(Error::invalid(
                        "nonlinearity",
                        "table values must be positive beyond the origin",
                    ));
                }
            }
        }
        Ok(())
    }

    /// `g(u)` for `u >= 0`.
    pub fn eval(&self, u: T) -> T {
        debug_assert!(u >= T::zero(), "nonlinearity evaluated at negative state");
        match self {
            NonlinearitySpec::Power { p } => u.powf(*p),
            NonlinearitySpec::PowerSum { p, q } => u.powf(*p) + u.powf(*q),
            NonlinearitySpec::Table { u: us, values } => {
                let n = us.len();
                if u >= us[n - 1] {
                    let slope = (values[n - 1] - values[n - 2]) / (us[n - 1] - us[n - 2]);
                    return values[n - 1] + slope * (u - us[n - 1]);
                }
                let hi = us.partition_point(|&x| x < u).max(1);
                let t = (u - us[hi - 1]) / (us[hi] - us[hi - 1]);
                values[hi - 1] + (values[hi] - values[hi - 1]) * t
            }
        }
    }

    /// Minimum of `g` over `[lo, hi]`: 1024-point sampling followed by
    /// golden-section refinement around the best sample.
    pub fn min_on(&self, lo: T, hi: T) -> T {
        debug_assert!(lo <= hi);
        let n = 1024usize;
        let mut best_x = lo;
        let mut best = self.eval(lo);
        for i in 1..=n {
            let x = lo + (hi - lo) * T::of_usize(i) / T::of_usize(n);
            let v = self.eval(x);
            if v < best {
                best = v;
                best_x = x;
            }
        }
        let h = (hi - lo) / T::of_usize(n);
        let (mut a, mut b) = ((best_x - h).max(lo), (best_x + h).min(hi));
        let inv_phi = T::of(0.618_033_988_749_894_9);
        let mut x1 = b - (b - a) * inv_phi;
        let mut x2 = a + (b - a) * inv_phi;
        let (mut f1, mut f2) = (self.eval(x1), self.eval(x2));
        for _ in 0..80 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - (b - a) * inv_phi;
                f1 = self.eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + (b - a) * inv_phi;
                f2 = self.eval(x2);
            }
        }
        best.min(f1).min(f2)
    }

    /// Numerical sniff test of the small-state hypothesis `g(u)/u -> 0`:
    /// the ratio must shrink along a decreasing sample sequence.
    pub fn vanishing_slope_at_zero(&self, scale: T) -> bool {
        let mut prev = T::infinity();
        for k in 1..=4 {
            let u = scale * T::of(10.0).powi(-2 * k);
            if u <= T::zero() {
                return true;
            }
            let ratio = self.eval(u) / u;
            if ratio > prev * T::of(0.75) {
                return false;
            }
            prev = ratio;
        }
        true
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn length(&self) -> T {
        self.hi - self.lo
    }
}

/// Positivity intervals of the weight and its weighted mean.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignStructure<T> {
    /// Maximal closed intervals where the weight is nonnegative and somewhere
    /// positive, in increasing order, pairwise disjoint.
    pub intervals: Vec<Interval<T>>,
    /// `∫_0^R r^{N-1} a(r) dr`.
    pub weighted_mean: T,
}

/// The radial Neumann problem on `[0, R]` in dimension `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialProblem<T> {
    pub dimension: u32,
    pub radius: T,
    pub lambda: T,
    pub weight: WeightSpec<T>,
    pub nonlinearity: NonlinearitySpec<T>,
}

impl<T: Real> RadialProblem<T> {
    pub fn new(
        dimension: u32,
        radius: T,
        lambda: T,
        weight: WeightSpec<T>,
        nonlinearity: NonlinearitySpec<T>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("problem", "dimension must be at least 1"));
        }
        if !(radius.is_finite() && radius > T::zero()) {
            return Err(Error::invalid("problem", "radius must be positive"));
        }
        if !(lambda.is_finite() && lambda > T::zero()) {
            return Err(Error::invalid("problem", "lambda must be positive"));
        }
        weight.validate(radius)?;
        nonlinearity.validate()?;
        Ok(RadialProblem {
            dimension,
            radius,
            lambda,
            weight,
            nonlinearity,
        })
    }

    /// The built-in example behind the `figure1` command: `N = 2`, `R = 5`,
    /// `a(r) = cos(|r - 5|^{3/2} + 1)`, `g(u) = u^2 + u^3`, `lambda = 0.1`.
    pub fn figure1() -> Self {
        RadialProblem {
            dimension: 2,
            radius: T::of(5.0),
            lambda: T::of(0.1),
            weight: WeightSpec::CosineShifted {
                center: T::of(5.0),
                phase: T::one(),
                exponent: T::of(1.5),
            },
            nonlinearity: NonlinearitySpec::PowerSum {
                p: T::of(2.0),
                q: T::of(3.0),
            },
        }
    }

    /// `r^{N-1}`.
    pub fn radial_power(&self, r: T) -> T {
        r.powi(self.dimension as i32 - 1)
    }

    /// Weight value with a domain check.
    pub fn eval_weight(&self, r: T) -> Result<T> {
        self.eval_weight_sided(r, Side::Above)
    }

    pub fn eval_weight_sided(&self, r: T, side: Side) -> Result<T> {
        if r < T::zero() || r > self.radius || !r.is_finite() {
            return Err(Error::OutOfDomain {
                r: r.as_f64(),
                radius: self.radius.as_f64(),
            });
        }
        Ok(self.weight.eval_sided(r, side))
    }
}

/// Options for [`detect_sign_structure`].
#[derive(Clone, Copy, Debug)]
pub struct SignDetection<T> {
    /// Samples with `|a| <= sign_tol` count as zero.
    pub sign_tol: T,
    /// Number of sample cells on `[0, R]`; at least 16.
    pub grid_points: usize,
    /// Reject structures whose weighted mean is not negative.
    pub require_negative_mean: bool,
}

impl<T: Real> Default for SignDetection<T> {
    fn default() -> Self {
        SignDetection {
            sign_tol: T::of(1e-10),
            grid_points: 4096,
            require_negative_mean: false,
        }
    }
}

/// Finds the positivity intervals of the weight by classifying samples and
/// refining each boundary with bisection down to the working precision.
/// Zero-plateaus adjacent to a positive region are absorbed into it.
pub fn detect_sign_structure<T: Real>(
    problem: &RadialProblem<T>,
    options: &SignDetection<T>,
) -> Result<SignStructure<T>> {
    if options.grid_points < 16 {
        return Err(Error::invalid("sign detection", "needs at least 16 cells"));
    }
    let radius = problem.radius;
    let n = options.grid_points;
    let tol = options.sign_tol;

    // Sample nodes, merged with weight breakpoints so plateaus of piecewise
    // weights are seen exactly.
    let mut nodes: Vec<T> = (0..=n)
        .map(|i| radius * T::of_usize(i) / T::of_usize(n))
        .collect();
    for b in problem.weight.breakpoints(radius) {
        nodes.push(b);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("weight nodes are finite"));
    nodes.dedup_by(|a, b| (*a - *b).abs() <= radius * T::of(1e-15));

    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        Neg,
        Zero,
        Pos,
    }
    let classify = |r: T| -> Class {
        let v = problem.weight.eval(r);
        if v > tol {
            Class::Pos
        } else if v < -tol {
            Class::Neg
        } else {
            Class::Zero
        }
    };
    let classes: Vec<Class> = nodes.iter().map(|&r| classify(r)).collect();

    // A boundary sits between a strictly negative sample and the nonnegative
    // block; bisect on "a < -tol" so zero-plateaus stay inside the interval.
    let refine = |mut neg: T, mut nonneg: T| -> T {
        for _ in 0..200 {
            let mid = (neg + nonneg) / T::of(2.0);
            if mid == neg || mid == nonneg {
                break;
            }
            if problem.weight.eval(mid) < -tol {
                neg = mid;
            } else {
                nonneg = mid;
            }
        }
        nonneg
    };

    let mut intervals = Vec::new();
    let mut i = 0usize;
    while i < nodes.len() {
        if classes[i] == Class::Neg {
            i += 1;
            continue;
        }
        let start = i;
        let mut has_pos = false;
        while i < nodes.len() && classes[i] != Class::Neg {
            has_pos |= classes[i] == Class::Pos;
            i += 1;
        }
        let end = i - 1;
        if !has_pos {
            continue;
        }
        let lo = if start == 0 {
            T::zero()
        } else {
            refine(nodes[start - 1], nodes[start])
        };
        let hi = if end == nodes.len() - 1 {
            radius
        } else {
            refine(nodes[end + 1], nodes[end])
        };
        intervals.push(Interval { lo, hi });
    }

    if intervals.is_empty() {
        return Err(Error::NoPositivityInterval);
    }

    let weighted_mean =
        problem
            .weight
            .radial_integral(T::zero(), radius, problem.dimension, options.grid_points);
    if options.require_negative_mean && weighted_mean >= T::zero() {
        return Err(Error::MeanNotNegative {
            mean: weighted_mean.as_f64(),
        });
    }

    Ok(SignStructure {
        intervals,
        weighted_mean,
    })
}

/// Returns the weighted mean `∫_0^R r^{N-1} a dr`, failing unless it is
/// strictly negative.
pub fn check_mean_condition<T: Real>(
    problem: &RadialProblem<T>,
    options: &SignDetection<T>,
) -> Result<T> {
    let mean =
        problem
            .weight
            .radial_integral(T::zero(), problem.radius, problem.dimension, options.grid_points);
    if mean >= T::zero() {
        return Err(Error::MeanNotNegative {
            mean: mean.as_f64(),
        });
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn desk_problem() -> RadialProblem<f64> {
        RadialProblem::new(
            1,
            3.0,
            100.0,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![1.0, 2.0],
                values: vec![-1.0, 1.0, -1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .expect("desk problem is valid")
    }

    #[test]
    fn cosine_weight_matches_closed_form() {
        let p: RadialProblem<f64> = RadialProblem::figure1();
        assert_relative_eq!(p.eval_weight(5.0).unwrap(), 1.0f64.cos(), max_relative = 1e-15);
        let r = 2.0;
        assert_relative_eq!(
            p.eval_weight(r).unwrap(),
            ((5.0f64 - r).powf(1.5) + 1.0).cos(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let p: RadialProblem<f64> = RadialProblem::figure1();
        assert!(matches!(
            p.eval_weight(-0.1),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(p.eval_weight(5.1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn piecewise_sides_differ_only_at_breakpoints() {
        let p = desk_problem();
        assert_eq!(p.eval_weight_sided(1.0, Side::Below).unwrap(), -1.0);
        assert_eq!(p.eval_weight_sided(1.0, Side::Above).unwrap(), 1.0);
        assert_eq!(p.eval_weight_sided(1.5, Side::Below).unwrap(), 1.0);
        assert_eq!(p.eval_weight_sided(1.5, Side::Above).unwrap(), 1.0);
        assert_eq!(p.eval_weight(3.0).unwrap(), -1.0);
    }

    #[test]
    fn desk_sign_structure_and_mean() {
        let p = desk_problem();
        let s = detect_sign_structure(&p, &SignDetection::default()).unwrap();
        assert_eq!(s.intervals.len(), 1);
        assert_relative_eq!(s.intervals[0].lo, 1.0, epsilon = 1e-9);
        assert_relative_eq!(s.intervals[0].hi, 2.0, epsilon = 1e-9);
        // closed form: -1 + 1 - 1
        assert_relative_eq!(s.weighted_mean, -1.0, epsilon = 1e-12);
        assert_relative_eq!(
            check_mean_condition(&p, &SignDetection::default()).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn detection_is_stable_under_grid_doubling() {
        let p: RadialProblem<f64> = RadialProblem::figure1();
        let coarse = detect_sign_structure(
            &p,
            &SignDetection {
                grid_points: 4096,
                ..SignDetection::default()
            },
        )
        .unwrap();
        let fine = detect_sign_structure(
            &p,
            &SignDetection {
                grid_points: 8192,
                ..SignDetection::default()
            },
        )
        .unwrap();
        assert_eq!(coarse.intervals.len(), fine.intervals.len());
        for (a, b) in coarse.intervals.iter().zip(fine.intervals.iter()) {
            assert_relative_eq!(a.lo, b.lo, epsilon = 1e-9);
            assert_relative_eq!(a.hi, b.hi, epsilon = 1e-9);
        }
    }

    #[test]
    fn all_negative_weight_has_no_positivity_interval() {
        let p = RadialProblem::new(
            1,
            3.0,
            1.0,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![],
                values: vec![-1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap();
        assert!(matches!(
            detect_sign_structure(&p, &SignDetection::default()),
            Err(Error::NoPositivityInterval)
        ));
    }

    #[test]
    fn positive_mean_is_flagged() {
        let p = RadialProblem::new(
            1,
            3.0,
            1.0,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![1.0],
                values: vec![1.0, -0.1],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap();
        let opts = SignDetection {
            require_negative_mean: true,
            ..SignDetection::default()
        };
        assert!(matches!(
            detect_sign_structure(&p, &opts),
            Err(Error::MeanNotNegative { .. })
        ));
    }

    #[test]
    fn zero_plateau_is_absorbed() {
        // a = -1 on [0,1), 0 on [1,1.5), 1 on [1.5,2), -1 on [2,3]
        let p = RadialProblem::new(
            1,
            3.0,
            1.0,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![1.0, 1.5, 2.0],
                values: vec![-1.0, 0.0, 1.0, -1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap();
        let s = detect_sign_structure(&p, &SignDetection::default()).unwrap();
        assert_eq!(s.intervals.len(), 1);
        assert_relative_eq!(s.intervals[0].lo, 1.0, epsilon = 1e-9);
        assert_relative_eq!(s.intervals[0].hi, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn table_weight_interpolates_and_integrates_exactly() {
        let w: WeightSpec<f64> = WeightSpec::Table {
            r: vec![0.0, 1.0, 2.0],
            values: vec![-1.0, 1.0, -1.0],
        };
        w.validate(2.0).unwrap();
        assert_relative_eq!(w.eval(0.5), 0.0, epsilon = 1e-15);
        assert_relative_eq!(w.eval(1.5), 0.0, epsilon = 1e-15);
        // N = 1: ∫_0^2 a = 0 by symmetry; N = 2: ∫ r a(r) dr = ∫_0^1 r(2r-1) + ∫_1^2 r(3-2r)
        assert_relative_eq!(w.radial_integral(0.0, 2.0, 1, 8), 0.0, epsilon = 1e-14);
        let exact_n2 = (2.0 / 3.0 - 0.5) + (3.0 * 3.0 / 2.0 - 2.0 * 7.0 / 3.0);
        assert_relative_eq!(w.radial_integral(0.0, 2.0, 2, 8), exact_n2, epsilon = 1e-13);
    }

    #[test]
    fn nonlinearity_minimum_on_interval() {
        let g: NonlinearitySpec<f64> = NonlinearitySpec::Power { p: 2.0 };
        // monotone, so the minimum sits at the left endpoint
        assert_relative_eq!(g.min_on(0.3, 0.8), 0.09, max_relative = 1e-10);
        let gs: NonlinearitySpec<f64> = NonlinearitySpec::PowerSum { p: 2.0, q: 3.0 };
        assert_relative_eq!(gs.min_on(0.5, 1.0), 0.375, max_relative = 1e-10);
    }

    #[test]
    fn vanishing_slope_detects_superlinearity() {
        let sup: NonlinearitySpec<f64> = NonlinearitySpec::Power { p: 2.0 };
        assert!(sup.vanishing_slope_at_zero(1.0));
        let lin: NonlinearitySpec<f64> = NonlinearitySpec::Table {
            u: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
        };
        assert!(!lin.vanishing_slope_at_zero(1.0));
    }

    #[test]
    fn indicator_forcing_matches_intervals() {
        let v = WeightSpec::indicator(&[Interval { lo: 1.0, hi: 2.0 }]);
        assert_eq!(v.eval(0.5), 0.0);
        assert_eq!(v.eval(1.5), 1.0);
        assert_eq!(v.eval(2.5), 0.0);
        let touching = WeightSpec::indicator(&[Interval { lo: 0.0, hi: 1.0 }]);
        assert_eq!(touching.eval(0.0), 1.0);
        assert_eq!(touching.eval(1.5), 0.0);
    }
}
