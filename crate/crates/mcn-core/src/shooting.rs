//! Independent check by shooting: integrate the planar system from the
//! center and bisect on the initial value until the outer Neumann condition
//! holds.
//!
//! With `v = r^{N-1} phi(u')` the equation becomes
//!
//! ```text
//! u' = phi_inv( v / r^{N-1} ),    v' = -r^{N-1} f(r, u),
//! ```
//!
//! regular away from r = 0. Near the center a series start handles the
//! removable singularity: for `u(0) = c`,
//!
//! ```text
//! u(r) = c - F0 r^2 / (2N) + O(r^4),    v(r) = -F0 r^N / N + O(r^{N+2}),
//! ```
//!
//! with `F0 = λ a(0+) g(c)`. The defect `c ↦ u'(R; c)` changes sign across a
//! solution; [`find_roots`] scans and bisects it. This path shares no code
//! with the fixed-point solver, so agreement between the two is meaningful.

use crate::error::{Error, Result};
use crate::phi::{extend_f_sided, phi_inv};
use crate::problem::{RadialProblem, Side};
use crate::real::Real;

/// Integration controls.
#[derive(Clone, Debug)]
pub struct ShotControls<T> {
    /// Relative local error target for the adaptive integrator.
    pub rel_tol: T,
    /// Absolute local error floor.
    pub abs_tol: T,
    /// Hand the radius over to the series start below this fraction of R.
    pub switch_fraction: T,
    /// When set, take fixed steps of this size instead of adapting
    /// (convergence-order studies).
    pub fixed_step: Option<T>,
    /// Record the state at these radii (always includes 0 and R).
    pub output_points: Vec<T>,
    /// Abort when |u'| reaches 1 - this margin.
    pub slope_margin: T,
}

impl<T: Real> Default for ShotControls<T> {
    fn default() -> Self {
        ShotControls {
            rel_tol: T::of(1e-10),
            abs_tol: T::of(1e-12),
            switch_fraction: T::of(1e-3),
            fixed_step: None,
            output_points: Vec::new(),
            slope_margin: T::of(1e-9),
        }
    }
}

/// Outcome of one shot from `u(0) = c`.
#[derive(Clone, Debug)]
pub struct ShotResult<T> {
    /// Initial value.
    pub center_value: T,
    /// `u'(R)`; the defect driven to zero by [`find_roots`].
    pub end_slope: T,
    /// `u(R)`.
    pub end_value: T,
    /// Radii where the state was recorded.
    pub r: Vec<T>,
    /// Values at those radii.
    pub u: Vec<T>,
    /// Slopes at those radii.
    pub du: Vec<T>,
    /// False when the slope guard tripped before reaching R.
    pub valid: bool,
    /// Radius where the guard tripped, when it did.
    pub saturated_at: Option<T>,
    /// Accepted integrator steps.
    pub steps: usize,
}

struct System<'a, T> {
    problem: &'a RadialProblem<T>,
}

impl<'a, T: Real> System<'a, T> {
    /// Right-hand side; `side` resolves the weight on breakpoints.
    fn rhs(&self, r: T, u: T, v: T, side: Side) -> Result<[T; 2]> {
        let n = self.problem.dimension as i32;
        let pw = r.powi(n - 1);
        let du = phi_inv(v / pw);
        let dv = -pw * extend_f_sided(self.problem, r, side, u)?;
        Ok([du, dv])
    }
}

/// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates one shot from `u(0) = c` out to r = R.
pub fn integrate_shot<T: Real>(
    problem: &RadialProblem<T>,
    c: T,
    controls: &ShotControls<T>,
) -> Result<ShotResult<T>> {
    let radius = problem.radius;
    let n = problem.dimension as i32;
    let sys = System { problem };

    // stop set: output points and weight breakpoints, sorted
    let mut stops: Vec<T> = controls
        .output_points
        .iter()
        .copied()
        .chain(problem.weight.breakpoints(radius))
        .filter(|&r| r > T::zero() && r < radius)
        .collect();
    stops.push(radius);
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup_by(|a, b| (*a - *b).abs() <= T::of(1e-14) * radius);

    let mut rec_r = Vec::new();
    let mut rec_u = Vec::new();
    let mut rec_du = Vec::new();
    rec_r.push(T::zero());
    rec_u.push(c);
    rec_du.push(T::zero());

    // series start across the removable singularity
    let r_switch = controls.switch_fraction * radius;
    let a0 = problem.eval_weight_sided(T::zero(), Side::Above)?;
    let g0 = problem.nonlinearity.eval(c.max(T::zero())) * if c >= T::zero() { T::one() } else { T::zero() };
    let f0 = if c >= T::zero() {
        problem.lambda * a0 * g0
    } else {
        -c // extension branch: f = -u
    };
    let nn = T::of_usize(problem.dimension as usize);
    let mut r = r_switch.min(if stops.is_empty() { radius } else { stops[0] } / T::of(2.0));
    let mut u = c - f0 * r * r / (T::of(2.0) * nn);
    let mut v = -f0 * r.powi(n) / nn;

    let slope_cap = T::one() - controls.slope_margin;
    let guard = |du: T| du.abs() >= slope_cap;

    let mut steps = 0usize;
    let mut h = match controls.fixed_step {
        Some(h) => h,
        None => (radius - r) / T::of(100.0),
    };
    let mut stop_idx = stops.partition_point(|&s| s <= r);

    // record output points that fall inside the series zone by the series
    for &p in controls.output_points.iter().filter(|&&p| p > T::zero() && p < r) {
        let du_p = phi_inv(-f0 * p / nn);
        rec_r.push(p);
        rec_u.push(c - f0 * p * p / (T::of(2.0) * nn));
        rec_du.push(du_p);
    }

    let mut valid = true;
    let mut saturated_at = None;

    'outer: while stop_idx < stops.len() {
        let stop = stops[stop_idx];
        // integrate [r, stop]; weight side is Above except at the final
        // approach to the stop, where Below resolves the breakpoint
        while r < stop {
            let mut step = match controls.fixed_step {
                Some(hf) => hf,
                None => h,
            };
            let mut hit_stop = false;
            if r + step >= stop - T::of(1e-14) * radius {
                step = stop - r;
                hit_stop = true;
            }
            if step <= T::zero() {
                break;
            }

            // one RK step with the FSAL-free layout; side Above inside the
            // cell, Below exactly at a stop endpoint
            let side_at = |x: T| -> Side {
                if hit_stop && (x - stop).abs() <= T::of(1e-14) * radius {
                    Side::Below
                } else {
                    Side::Above
                }
            };
            let k1 = sys.rhs(r, u, v, Side::Above)?;
            let mut ks = [[T::zero(); 2]; 7];
            ks[0] = k1;
            let mut failed = false;
            for i in 0..6 {
                let mut du_acc = T::zero();
                let mut dv_acc = T::zero();
                for j in 0..=i {
                    du_acc += T::of(A[i][j]) * ks[j][0];
                    dv_acc += T::of(A[i][j]) * ks[j][1];
                }
                let xi = r + T::of(C[i]) * step;
                let ui = u + step * du_acc;
                let vi = v + step * dv_acc;
                let pw = xi.powi(n - 1);
                if guard(phi_inv(vi / pw)) {
                    failed = true;
                    break;
                }
                ks[i + 1] = sys.rhs(xi, ui, vi, side_at(xi))?;
            }
            if failed {
                valid = false;
                saturated_at = Some(r);
                break 'outer;
            }

            // 5th-order solution and embedded error
            let mut u5 = u;
            let mut v5 = v;
            for j in 0..6 {
                u5 += step * T::of(A[5][j]) * ks[j][0];
                v5 += step * T::of(A[5][j]) * ks[j][1];
            }
            let mut eu = T::zero();
            let mut ev = T::zero();
            for j in 0..7 {
                eu += T::of(E[j]) * ks[j][0];
                ev += T::of(E[j]) * ks[j][1];
            }
            eu = eu * step;
            ev = ev * step;
            let scale_u = controls.abs_tol + controls.rel_tol * u.abs().max(u5.abs());
            let scale_v = controls.abs_tol + controls.rel_tol * v.abs().max(v5.abs());
            let err = ((eu / scale_u).powi(2) + (ev / scale_v).powi(2)).sqrt()
                / T::of(std::f64::consts::SQRT_2);

            if controls.fixed_step.is_some() || err <= T::one() {
                r = if hit_stop { stop } else { r + step };
                u = u5;
                v = v5;
                steps += 1;
                let pw = r.powi(n - 1);
                let du_now = phi_inv(v / pw);
                if guard(du_now) {
                    valid = false;
                    saturated_at = Some(r);
                    break 'outer;
                }
                rec_r.push(r);
                rec_u.push(u);
                rec_du.push(du_now);
                if steps > 2_000_000 {
                    return Err(Error::invalid("shot", "step budget exhausted"));
                }
            }
            if controls.fixed_step.is_none() {
                let order = T::of(0.2);
                let fac = if err > T::zero() {
                    (T::of(0.9) * err.powf(-order)).min(T::of(5.0)).max(T::of(0.2))
                } else {
                    T::of(5.0)
                };
                h = step * fac;
                let h_min = T::of(1e-14) * radius;
                if h < h_min {
                    h = h_min;
                }
            }
        }
        stop_idx += 1;
    }

    let end_slope = if valid {
        phi_inv(v / radius.powi(n - 1))
    } else {
        T::nan()
    };
    Ok(ShotResult {
        center_value: c,
        end_slope,
        end_value: u,
        r: rec_r,
        u: rec_u,
        du: rec_du,
        valid,
        saturated_at,
        steps,
    })
}

/// A shot whose every recorded slope sits below tolerance is numerically
/// indistinguishable from the trivial branch; its terminal defect carries no
/// sign information and it must not count as a root.
fn trajectory_active<T: Real>(shot: &ShotResult<T>, defect_tol: T) -> bool {
    let sup = shot.du.iter().fold(T::zero(), |m, &d| m.max(d.abs()));
    sup > T::of(10.0) * defect_tol
}

/// Scans `c` over a range and bisects every sign change of the end slope.
///
/// Samples are spaced geometrically when the range spans two or more decades
/// of positive `c` (small branches cluster near zero), uniformly otherwise.
/// Invalid shots (slope guard) break the scan chain: a sign change across an
/// invalid shot is not bracketed. Shots below the trivial scale are skipped;
/// the end slope of a near-zero trajectory is integrator noise, not data.
/// Roots are polished to `|u'(R)| <= defect_tol`.
pub fn find_roots<T: Real>(
    problem: &RadialProblem<T>,
    c_lo: T,
    c_hi: T,
    scan_points: usize,
    defect_tol: T,
    controls: &ShotControls<T>,
) -> Result<Vec<ShotResult<T>>> {
    if !(c_lo < c_hi) || scan_points < 2 {
        return Err(Error::invalid("root scan", "empty or inverted range"));
    }
    let mut roots = Vec::new();
    let span = T::of_usize(scan_points - 1);
    let geometric = c_lo > T::zero() && c_hi / c_lo >= T::of(100.0);
    let ratio = if geometric {
        ((c_hi / c_lo).ln() / span).exp()
    } else {
        T::one()
    };
    let step = (c_hi - c_lo) / span;
    let mut prev: Option<(T, T)> = None; // (c, defect) of last valid shot

    for i in 0..scan_points {
        let c = if geometric {
            (c_lo * ratio.powi(i as i32)).min(c_hi)
        } else {
            c_lo + T::of_usize(i) * step
        };
        let shot = integrate_shot(problem, c, controls)?;
        if !shot.valid {
            prev = None;
            continue;
        }
        let d = shot.end_slope;
        if d.abs() <= defect_tol {
            if trajectory_active(&shot, defect_tol) {
                roots.push(shot);
            }
            prev = None;
            continue;
        }
        if let Some((pc, pd)) = prev {
            if pd * d < T::zero() {
                if let Some(root) = bisect_defect(problem, pc, c, defect_tol, controls)? {
                    roots.push(root);
                }
            }
        }
        prev = Some((c, d));
    }
    Ok(roots)
}

fn bisect_defect<T: Real>(
    problem: &RadialProblem<T>,
    mut lo: T,
    mut hi: T,
    defect_tol: T,
    controls: &ShotControls<T>,
) -> Result<Option<ShotResult<T>>> {
    let mut d_lo = integrate_shot(problem, lo, controls)?.end_slope;
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break; // interval collapsed to adjacent floats
        }
        let shot = integrate_shot(problem, mid, controls)?;
        if !shot.valid {
            // guard tripped inside the bracket: shrink toward the lo side
            hi = mid;
            continue;
        }
        let d = shot.end_slope;
        if d.abs() <= defect_tol {
            if trajectory_active(&shot, defect_tol) {
                return Ok(Some(shot));
            }
            // the whole neighborhood is sub-tolerance: a noise bracket
            return Ok(None);
        }
        if d_lo * d < T::zero() {
            hi = mid;
        } else {
            lo = mid;
            d_lo = d;
        }
    }
    // tolerance not reached; return the midpoint shot anyway if it is close
    let mid = (lo + hi) / T::of(2.0);
    let shot = integrate_shot(problem, mid, controls)?;
    if shot.valid
        && shot.end_slope.abs() <= defect_tol * T::of(1e3)
        && trajectory_active(&shot, defect_tol)
    {
        return Ok(Some(shot));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{NonlinearitySpec, WeightSpec};
    use approx::assert_relative_eq;

    fn desk_problem(lambda: f64) -> RadialProblem<f64> {
        RadialProblem::new(
            1,
            3.0,
            lambda,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![1.0, 2.0],
                values: vec![-1.0, 1.0, -1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap()
    }

    #[test]
    fn zero_start_is_stationary() {
        let p = desk_problem(5.0);
        let shot = integrate_shot(&p, 0.0, &ShotControls::default()).unwrap();
        assert!(shot.valid);
        assert_relative_eq!(shot.end_slope, 0.0, epsilon = 1e-12);
        assert_relative_eq!(shot.end_value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn small_start_on_negative_weight_is_linearizable() {
        // a = -1 everywhere, g = u^2, c small: the load is tiny, u stays
        // close to c and the end slope's sign matches -∫ f = +λ c² R.
        let p = RadialProblem::new(
            1,
            2.0,
            1.0,
            WeightSpec::PiecewiseConstant {
                breakpoints: vec![],
                values: vec![-1.0],
            },
            NonlinearitySpec::Power { p: 2.0 },
        )
        .unwrap();
        let c = 1e-3;
        let shot = integrate_shot(&p, c, &ShotControls::default()).unwrap();
        assert!(shot.valid);
        // v(R) = -∫_0^R f = λ c² R to first order, so u'(R) ≈ λ c² R > 0
        // and u(R) ≈ c + λ c² R² / 2
        assert!(shot.end_slope > 0.0);
        assert_relative_eq!(shot.end_slope, 1.0 * c * c * 2.0, max_relative = 1e-2);
        assert_relative_eq!(shot.end_value, c + 1.0 * c * c * 4.0 / 2.0, max_relative = 1e-4);
    }

    #[test]
    fn series_start_matches_fixed_step_integration() {
        let p = desk_problem(10.0);
        let adaptive = integrate_shot(&p, 0.5, &ShotControls::default()).unwrap();
        let fixed = integrate_shot(
            &p,
            0.5,
            &ShotControls {
                fixed_step: Some(1e-4),
                ..ShotControls::default()
            },
        )
        .unwrap();
        assert!(adaptive.valid && fixed.valid);
        assert_relative_eq!(adaptive.end_slope, fixed.end_slope, epsilon = 1e-7);
        assert_relative_eq!(adaptive.end_value, fixed.end_value, epsilon = 1e-7);
    }

    #[test]
    fn output_points_are_recorded_in_order() {
        // the trajectory records every accepted step; requested output
        // points must appear among them exactly, and radii must increase
        let p = desk_problem(5.0);
        let controls = ShotControls {
            output_points: vec![0.5, 1.5, 2.5],
            ..ShotControls::default()
        };
        let shot = integrate_shot(&p, 0.3, &controls).unwrap();
        assert!(shot.valid);
        assert_eq!(shot.r.first(), Some(&0.0));
        assert_eq!(shot.r.last(), Some(&3.0));
        for stop in [0.5, 1.5, 2.5] {
            assert!(shot.r.contains(&stop), "missing stop {stop}");
        }
        for w in shot.r.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(shot.r.len(), shot.u.len());
        assert_eq!(shot.r.len(), shot.du.len());
    }

    #[test]
    fn slope_guard_invalidates_extreme_shots() {
        // enormous λ and c: the slope saturates inside the domain
        let p = desk_problem(1e6);
        let shot = integrate_shot(&p, 50.0, &ShotControls::default()).unwrap();
        assert!(!shot.valid);
        assert!(shot.saturated_at.is_some());
        assert!(shot.end_slope.is_nan());
    }

    #[test]
    fn fixed_step_error_decays_at_fourth_order_or_better() {
        // the embedded pair advances on the 5th-order weights; halving the
        // step should cut the end-state error by at least ~2^4. The
        // reference runs far below the fixed-step errors so the comparison
        // measures the integrator, not the reference.
        let p = desk_problem(10.0);
        let reference = integrate_shot(
            &p,
            0.4,
            &ShotControls {
                rel_tol: 1e-13,
                abs_tol: 1e-15,
                ..ShotControls::default()
            },
        )
        .unwrap();
        let mut errs = Vec::new();
        for &h in &[8e-2, 4e-2, 2e-2] {
            let s = integrate_shot(
                &p,
                0.4,
                &ShotControls {
                    fixed_step: Some(h),
                    ..ShotControls::default()
                },
            )
            .unwrap();
            errs.push((s.end_value - reference.end_value).abs().max(1e-16));
        }
        let rate01 = (errs[0] / errs[1]).log2();
        let rate12 = (errs[1] / errs[2]).log2();
        assert!(
            rate01 > 3.5 || errs[1] < 1e-13,
            "rate {rate01}, errs {errs:?}"
        );
        assert!(
            rate12 > 3.5 || errs[2] < 1e-13,
            "rate {rate12}, errs {errs:?}"
        );
    }

    #[test]
    fn root_scan_finds_nontrivial_solutions_at_large_lambda() {
        // λ well above the two-solution threshold for this problem; the
        // small branch sits orders of magnitude below the large one, so a
        // single geometric scan must resolve both. The large branch runs
        // with |u'| within 1e-9 of 1 in the interior, so the slope guard
        // needs the production margin.
        let p = desk_problem(4000.0);
        let controls = ShotControls {
            slope_margin: 1e-12,
            ..ShotControls::default()
        };
        let roots = find_roots(&p, 1e-6, 2.0, 600, 1e-10, &controls).unwrap();
        assert!(
            roots.len() >= 2,
            "expected at least two roots, got {}",
            roots.len()
        );
        // all reported roots satisfy the outer condition
        for root in &roots {
            assert!(root.end_slope.abs() <= 1e-10);
            assert!(root.center_value > 0.0);
        }
        // the two branches live on opposite sides of a three-decade gap
        let min = roots.iter().map(|r| r.center_value).fold(f64::INFINITY, f64::min);
        let max = roots.iter().map(|r| r.center_value).fold(0.0, f64::max);
        assert!(min < 1e-3, "small root {min}");
        assert!(max > 1.0, "large root {max}");
    }
}
