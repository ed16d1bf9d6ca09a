//! Solver-independent certification of candidate profiles.
//!
//! A certificate records, for a profile (u, u') on a grid:
//!
//! * the nodewise residual of the integrated equation
//!   `phi(u'(r)) + (1/r^{N-1}) ∫_0^r ξ^{N-1} f(ξ, u) dξ = 0`, computed
//!   twice: with the profile's own quadrature rule (gated) and with the
//!   running integral on a midpoint-refined grid (recorded as a
//!   discretization diagnostic, not gated, since its size reflects the
//!   grid, not the candidate; the grid-convergence suite budgets it),
//! * both Neumann slopes,
//! * positivity and the slope bound `|u'| < 1`,
//! * the zero-total identity `(1/R^{N-1}) ∫_0^R ξ^{N-1} f dξ = 0`, gated
//!   and refined the same way,
//! * monotonicity of the flux `r^{N-1} phi(u')`: non-increasing on each
//!   positivity interval of the weight, non-decreasing outside,
//! * the slope-versus-size bound
//!   `|u'(r)| <= (tau_i^{N-1} / (2 eps)^N) u(r)` on each trimmed positivity
//!   interval `[sigma_i + 2 eps, tau_i - 2 eps]`, together with its
//!   consequence `|u'| <= 1/2` there for profiles no larger than the
//!   small-branch ceiling,
//! * conditionally, the floor `min u >= delta_low` over the trimmed interval
//!   carrying the max, for profiles whose sup norm sits near the ceiling.
//!
//! The checks never consult how the profile was produced, so fixed-point
//! solutions and shooting solutions face identical scrutiny.

use crate::constants;
use crate::error::Result;
use crate::grid::GridProfile;
use crate::operator;
use crate::phi::{extend_f_sided, phi};
use crate::problem::{Interval, RadialProblem, SignDetection, Side};
use crate::quad;
use crate::real::Real;
use serde::Serialize;

/// Acceptance gates. Residual-like gates scale with
/// `1 + λ sup|a| max g`; the others are absolute.
#[derive(Clone, Debug)]
pub struct Tolerances<T> {
    /// Nodewise residual of the integrated equation, times scale.
    pub ode_residual: T,
    /// Neumann slopes at both ends.
    pub boundary_defect: T,
    /// Slopes must stay below `1 - slope_margin`. Branches near the slope
    /// bound genuinely approach |u'| = 1 from below as λ grows, so this is a
    /// float-headroom guard, not a physical gap.
    pub slope_margin: T,
    /// Solver-rule zero-total identity, times scale.
    pub integral_identity: T,
    /// Slack on the monotonicity and size-bound margins.
    pub claim_slack: T,
    /// Profiles at most this large in sup norm count as trivial.
    pub trivial_norm: T,
    /// Trim width for the interval checks; None picks one automatically.
    pub trim_epsilon: Option<T>,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            ode_residual: T::of(1e-6),
            boundary_defect: T::of(1e-8),
            slope_margin: T::of(1e-12),
            integral_identity: T::of(1e-8),
            claim_slack: T::of(1e-8),
            trivial_norm: T::of(1e-9),
            trim_epsilon: None,
        }
    }
}

/// One named margin check; nonnegative margin (up to slack) passes.
#[derive(Clone, Debug, Serialize)]
pub struct ClaimCheck<T> {
    pub name: String,
    pub margin: T,
    pub pass: bool,
}

/// Everything measured about one candidate profile.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate<T> {
    pub sup_norm: T,
    pub min_u: T,
    pub max_abs_slope: T,
    /// Integrated-equation residual under the profile's own quadrature
    /// rule (gated).
    pub ode_residual_sup: T,
    /// Same residual with a midpoint-refined running integral (diagnostic).
    pub ode_residual_refined: T,
    pub neumann_defect_0: T,
    pub neumann_defect_r: T,
    /// Zero-total identity under the solver's quadrature rule (gated).
    pub integral_identity: T,
    /// Same identity under refined quadrature (diagnostic).
    pub integral_identity_refined: T,
    /// Residual scale `1 + λ sup|a| max g`.
    pub scale: T,
    pub trivial: bool,
    pub claims: Vec<ClaimCheck<T>>,
    pub overall: bool,
}

impl<T: Real> Certificate<T> {
    /// Structured text: one `key = value` line per field, claims inline.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let line = |s: &mut String, k: &str, v: T| {
            s.push_str(&format!("{k} = {:.16e}\n", v.as_f64()));
        };
        line(&mut s, "sup_norm", self.sup_norm);
        line(&mut s, "min_u", self.min_u);
        line(&mut s, "max_abs_slope", self.max_abs_slope);
        line(&mut s, "ode_residual_sup", self.ode_residual_sup);
        line(&mut s, "ode_residual_refined", self.ode_residual_refined);
        line(&mut s, "neumann_defect_0", self.neumann_defect_0);
        line(&mut s, "neumann_defect_r", self.neumann_defect_r);
        line(&mut s, "integral_identity", self.integral_identity);
        line(&mut s, "integral_identity_refined", self.integral_identity_refined);
        line(&mut s, "scale", self.scale);
        s.push_str(&format!("trivial = {}\n", self.trivial));
        for c in &self.claims {
            s.push_str(&format!(
                "claim {} = {:.16e} {}\n",
                c.name,
                c.margin.as_f64(),
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        s.push_str(&format!(
            "overall = {}\n",
            if self.overall { "pass" } else { "FAIL" }
        ));
        s
    }
}

fn max_g_on<T: Real>(problem: &RadialProblem<T>, hi: T) -> T {
    let samples = 1024;
    let mut m = T::zero();
    for i in 0..=samples {
        let u = hi * T::of_usize(i) / T::of_usize(samples);
        m = m.max(problem.nonlinearity.eval(u));
    }
    m
}

/// Sided load samples `f(r, u(r))` at every node of `nodes`.
fn load_samples<T: Real>(
    problem: &RadialProblem<T>,
    nodes: &[T],
    u: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let mut above = Vec::with_capacity(nodes.len());
    let mut below = Vec::with_capacity(nodes.len());
    for (&r, &uu) in nodes.iter().zip(u.iter()) {
        above.push(extend_f_sided(problem, r, Side::Above, uu)?);
        below.push(extend_f_sided(problem, r, Side::Below, uu)?);
    }
    Ok((above, below))
}

/// Certifies a profile. Failures are recorded in the certificate; the only
/// errors are structural (profile nodes outside the domain).
pub fn certify<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
    tolerances: &Tolerances<T>,
) -> Result<Certificate<T>> {
    let nodes = profile.grid.nodes();
    let n = problem.dimension as i32;
    let sup_norm = profile.sup_norm();
    let min_u = profile.min_u();
    let max_abs_slope = profile.max_abs_slope();
    let trivial = sup_norm <= tolerances.trivial_norm;
    let scale = T::one() + problem.lambda * problem.weight.sup_abs() * max_g_on(problem, sup_norm);

    // own-rule running integral on the profile's grid
    let (oa, ob) = load_samples(problem, nodes, &profile.u)?;
    let own_cum = quad::cumulative_radial(nodes, &oa, &ob, problem.dimension);

    // refined running integral: midpoint-inserted grid, u interpolated
    let fine = profile.grid.doubled();
    let fine_nodes = fine.nodes();
    let mut fine_u = Vec::with_capacity(fine_nodes.len());
    for (k, _) in fine_nodes.iter().enumerate() {
        if k % 2 == 0 {
            fine_u.push(profile.u[k / 2]);
        } else {
            fine_u.push((profile.u[k / 2] + profile.u[k / 2 + 1]) / T::of(2.0));
        }
    }
    let (fa, fb) = load_samples(problem, fine_nodes, &fine_u)?;
    let fine_cum = quad::cumulative_radial(fine_nodes, &fa, &fb, problem.dimension);

    let mut ode_residual_sup = T::zero();
    let mut ode_residual_refined = T::zero();
    for (j, &r) in nodes.iter().enumerate() {
        let (own_term, fine_term) = if r == T::zero() {
            (T::zero(), T::zero())
        } else {
            let p = r.powi(n - 1);
            (own_cum[j] / p, fine_cum[2 * j] / p)
        };
        match phi(profile.du[j]) {
            Ok(p) => {
                ode_residual_sup = ode_residual_sup.max((p + own_term).abs());
                ode_residual_refined = ode_residual_refined.max((p + fine_term).abs());
            }
            Err(_) => {
                ode_residual_sup = T::infinity();
                ode_residual_refined = T::infinity();
            }
        }
    }

    let integral_identity = operator::neumann_defect(problem, profile)?;
    let integral_identity_refined =
        fine_cum[fine_cum.len() - 1] / problem.radius.powi(n - 1);

    let neumann_defect_0 = profile.du[0];
    let neumann_defect_r = profile.du[profile.du.len() - 1];

    // interval-structure checks; skipped when the structure or an
    // admissible trim is unavailable, or for profiles with negative parts
    let mut claims: Vec<ClaimCheck<T>> = Vec::new();
    let structure = crate::problem::detect_sign_structure(problem, &SignDetection::default());
    if let Ok(structure) = structure {
        let epsilon = match tolerances.trim_epsilon {
            Some(e) => Ok(e),
            None => constants::choose_epsilon(problem, &structure),
        };
        if let Ok(epsilon) = epsilon {
            if !trivial && min_u >= T::zero() {
                claims.extend(claim_checks(
                    problem,
                    profile,
                    &structure.intervals,
                    epsilon,
                    tolerances,
                    scale,
                    sup_norm,
                ));
            }
        }
    }

    let gates = [
        ode_residual_sup <= tolerances.ode_residual * scale,
        neumann_defect_0.abs() <= tolerances.boundary_defect,
        neumann_defect_r.abs() <= tolerances.boundary_defect,
        max_abs_slope < T::one() - tolerances.slope_margin,
        integral_identity.abs() <= tolerances.integral_identity * scale,
        trivial || min_u > T::zero(),
    ];
    let overall = gates.iter().all(|&g| g) && claims.iter().all(|c| c.pass);

    Ok(Certificate {
        sup_norm,
        min_u,
        max_abs_slope,
        ode_residual_sup,
        ode_residual_refined,
        neumann_defect_0,
        neumann_defect_r,
        integral_identity,
        integral_identity_refined,
        scale,
        trivial,
        claims,
        overall,
    })
}

fn claim_checks<T: Real>(
    problem: &RadialProblem<T>,
    profile: &GridProfile<T>,
    intervals: &[Interval<T>],
    epsilon: T,
    tolerances: &Tolerances<T>,
    scale: T,
    sup_norm: T,
) -> Vec<ClaimCheck<T>> {
    let nodes = profile.grid.nodes();
    let n = problem.dimension as i32;
    let two = T::of(2.0);
    let mut out = Vec::new();

    // flux monotonicity: F = r^{N-1} phi(u') falls on positivity intervals,
    // rises outside
    let flux: Vec<Option<T>> = nodes
        .iter()
        .zip(profile.du.iter())
        .map(|(&r, &d)| phi(d).ok().map(|p| r.powi(n - 1) * p))
        .collect();
    let inside = |a: T, b: T| intervals.iter().any(|i| i.lo <= a && b <= i.hi);
    let outside = |a: T, b: T| {
        intervals.iter().all(|i| b <= i.lo || a >= i.hi)
    };
    let mut flux_margin = T::infinity();
    let mut flux_applicable = false;
    for j in 0..nodes.len() - 1 {
        let (ra, rb) = (nodes[j], nodes[j + 1]);
        let (fa, fb) = match (flux[j], flux[j + 1]) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        if inside(ra, rb) {
            flux_margin = flux_margin.min(fa - fb);
            flux_applicable = true;
        } else if outside(ra, rb) {
            flux_margin = flux_margin.min(fb - fa);
            flux_applicable = true;
        }
    }
    if flux_applicable {
        out.push(ClaimCheck {
            name: "flux-monotone".into(),
            margin: flux_margin,
            pass: flux_margin >= -tolerances.claim_slack * scale,
        });
    }

    // slope-versus-size bound on each trimmed interval, plus the 1/2 cap
    // when the profile is no larger than the small-branch ceiling
    let r_pow = problem.radius.powi(n - 1);
    let delta_star = two.powi(n - 1) * epsilon.powi(n) / r_pow;
    let mut bound_margin = T::infinity();
    let mut half_max = T::zero();
    let mut any_nodes = false;
    for interval in intervals {
        let (lo, hi) = (interval.lo + two * epsilon, interval.hi - two * epsilon);
        if hi <= lo {
            continue;
        }
        let coeff = interval.hi.powi(n - 1) / (two * epsilon).powi(n);
        for (j, &r) in nodes.iter().enumerate() {
            if r < lo || r > hi {
                continue;
            }
            any_nodes = true;
            bound_margin = bound_margin.min(coeff * profile.u[j] - profile.du[j].abs());
            half_max = half_max.max(profile.du[j].abs());
        }
    }
    if any_nodes {
        out.push(ClaimCheck {
            name: "slope-bound".into(),
            margin: bound_margin,
            pass: bound_margin >= -tolerances.claim_slack,
        });
        if sup_norm <= delta_star * (T::one() + T::slack()) {
            let margin = T::of(0.5) - half_max;
            out.push(ClaimCheck {
                name: "slope-half".into(),
                margin,
                pass: margin >= -tolerances.claim_slack,
            });
        }
    }

    // size floor near the ceiling: only meaningful for profiles whose norm
    // lands in the shell [0.9, 1.1] * delta_star
    if (sup_norm - delta_star).abs() <= T::of(0.1) * delta_star {
        if let Ok(structure) = crate::problem::detect_sign_structure(problem, &SignDetection::default()) {
            if let Ok(bundle) = constants::compute_bundle(problem, &structure, epsilon) {
                // interval carrying the largest max
                let mut best: Option<(T, &Interval<T>)> = None;
                for interval in intervals {
                    let m = nodes
                        .iter()
                        .zip(profile.u.iter())
                        .filter(|(&r, _)| r >= interval.lo && r <= interval.hi)
                        .map(|(_, &u)| u)
                        .fold(T::neg_infinity(), T::max);
                    if best.map(|(b, _)| m > b).unwrap_or(true) {
                        best = Some((m, interval));
                    }
                }
                if let Some((_, interval)) = best {
                    let (lo, hi) = (interval.lo + two * epsilon, interval.hi - two * epsilon);
                    let trimmed_min = nodes
                        .iter()
                        .zip(profile.u.iter())
                        .filter(|(&r, _)| r >= lo && r <= hi)
                        .map(|(_, &u)| u)
                        .fold(T::infinity(), T::min);
                    if trimmed_min.is_finite() {
                        let margin = trimmed_min - bundle.delta_low;
                        out.push(ClaimCheck {
                            name: "trimmed-floor".into(),
                            margin,
                            pass: margin >= -tolerances.claim_slack,
                        });
                    }
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::problem::{NonlinearitySpec, WeightSpec};
    use crate::solver::{self, SolveOptions, StartProfile};
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
    fn zero_profile_is_a_trivial_pass() {
        let p = desk_problem(100.0);
        let grid = Grid::for_problem(&p, 200);
        let zero = GridProfile::constant(grid, 0.0);
        let cert = certify(&p, &zero, &Tolerances::default()).unwrap();
        assert!(cert.trivial);
        assert!(cert.overall);
        assert_relative_eq!(cert.ode_residual_sup, 0.0);
        assert_relative_eq!(cert.integral_identity, 0.0);
        assert_relative_eq!(cert.min_u, 0.0);
        assert!(cert.claims.is_empty());
    }

    #[test]
    fn solver_solution_certifies_and_perturbation_fails() {
        // small branch via shooting, polished on the grid: the smooth
        // candidate every gate should accept
        let p = desk_problem(4361.0);
        let options = SolveOptions {
            grid_cells: 2000,
            ..SolveOptions::default()
        };
        let controls = crate::shooting::ShotControls {
            slope_margin: 1e-12,
            ..crate::shooting::ShotControls::default()
        };
        let roots = crate::shooting::find_roots(&p, 1e-6, 1e-3, 200, 1e-12, &controls).unwrap();
        assert_eq!(roots.len(), 1);
        let grid = Grid::for_problem(&p, options.grid_cells);
        let raw = GridProfile {
            grid: Grid::from_nodes(roots[0].r.clone()).unwrap(),
            u: roots[0].u.clone(),
            du: roots[0].du.clone(),
        };
        let start = StartProfile::Profile(solver::resample(&raw, &grid));
        let sol = solver::solve(&p, start, &options).unwrap();
        assert!(sol.residual <= 1e-10, "residual {}", sol.residual);
        assert!(sol.profile.sup_norm() > 1e-9, "landed on the trivial branch");

        let tol = Tolerances {
            trim_epsilon: Some(0.2),
            ..Tolerances::default()
        };
        let cert = certify(&p, &sol.profile, &tol).unwrap();
        assert!(cert.overall, "certificate:\n{}", cert.to_text());
        assert!(cert.min_u > 0.0);
        assert!(cert.max_abs_slope < 1.0 - 1e-9);
        assert!(cert.claims.iter().any(|c| c.name == "slope-bound"));
        assert!(cert.claims.iter().any(|c| c.name == "flux-monotone"));
        for c in &cert.claims {
            assert!(c.pass, "claim {} failed with margin {}", c.name, c.margin);
        }

        // a vertical shift breaks the zero-total identity
        let shifted = GridProfile {
            grid: sol.profile.grid.clone(),
            u: sol.profile.u.iter().map(|&v| v + 0.01).collect(),
            du: sol.profile.du.clone(),
        };
        let bad = certify(&p, &shifted, &tol).unwrap();
        assert!(!bad.overall);
        assert!(bad.integral_identity.abs() > tol.integral_identity * bad.scale);
    }

    #[test]
    fn text_format_lists_every_field() {
        let p = desk_problem(10.0);
        let grid = Grid::for_problem(&p, 100);
        let zero = GridProfile::constant(grid, 0.0);
        let cert = certify(&p, &zero, &Tolerances::default()).unwrap();
        let text = cert.to_text();
        for key in [
            "sup_norm",
            "min_u",
            "max_abs_slope",
            "ode_residual_sup",
            "ode_residual_refined",
            "neumann_defect_0",
            "neumann_defect_r",
            "integral_identity",
            "integral_identity_refined",
            "scale",
            "trivial",
            "overall",
        ] {
            assert!(text.contains(key), "missing {key} in:\n{text}");
        }
        assert!(serde_json::to_string(&cert).is_ok());
    }
}
