//! On-disk problem descriptions.
//!
//! A problem file is TOML with three scalars and two tagged tables:
//!
//! ```toml
//! dimension = 1
//! radius = 3.0
//! lambda = 4000.0
//!
//! [weight]
//! kind = "piecewise-constant"
//! breakpoints = [1.0, 2.0]
//! values = [-1.0, 1.0, -1.0]
//!
//! [nonlinearity]
//! kind = "power"
//! p = 2.0
//! ```
//!
//! Weight kinds: `cosine-shifted` (fields `center`, `phase`, `exponent`),
//! `piecewise-constant` (`breakpoints`, `values`, with one more value than
//! breakpoints), `table` (`r`, `values`, linearly interpolated).
//!
//! Nonlinearity kinds: `power` (`p`), `power-sum` (`p`, `q`), `table`
//! (`u`, `values`).

use mcn_core::{NonlinearitySpec, RadialProblem, WeightSpec};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dimension: u32,
    pub radius: f64,
    pub lambda: f64,
    pub weight: WeightConfig,
    pub nonlinearity: NonlinearityConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightConfig {
    /// `a(r) = cos(|r - center|^exponent + phase)`.
    CosineShifted {
        center: f64,
        phase: f64,
        exponent: f64,
    },
    /// Constant on each cell between consecutive breakpoints.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// Piecewise-linear interpolation of `(r, values)` samples.
    Table { r: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `g(u) = u^p` with `p > 1`.
    Power { p: f64 },
    /// `g(u) = u^p + u^q` with `1 < p <= q`.
    PowerSum { p: f64, q: f64 },
    /// Piecewise-linear interpolation of `(u, values)` samples.
    Table { u: Vec<f64>, values: Vec<f64> },
}

impl WeightConfig {
    fn into_spec(self) -> WeightSpec<f64> {
        match self {
            WeightConfig::CosineShifted {
                center,
                phase,
                exponent,
            } => WeightSpec::CosineShifted {
                center,
                phase,
                exponent,
            },
            WeightConfig::PiecewiseConstant {
                breakpoints,
                values,
            } => WeightSpec::PiecewiseConstant {
                breakpoints,
                values,
            },
            WeightConfig::Table { r, values } => WeightSpec::Table { r, values },
        }
    }
}

impl NonlinearityConfig {
    fn into_spec(self) -> NonlinearitySpec<f64> {
        match self {
            NonlinearityConfig::Power { p } => NonlinearitySpec::Power { p },
            NonlinearityConfig::PowerSum { p, q } => NonlinearitySpec::PowerSum { p, q },
            NonlinearityConfig::Table { u, values } => NonlinearitySpec::Table { u, values },
        }
    }
}

/// Parses a problem file and builds the validated problem. All failures
/// (TOML shape, unknown fields, out-of-domain scalars) come back as one
/// message; the caller treats them as unreadable input.
pub fn parse(text: &str) -> Result<RadialProblem<f64>, String> {
    let cfg: ProblemConfig = toml::from_str(text).map_err(|e| format!("problem file: {e}"))?;
    RadialProblem::new(
        cfg.dimension,
        cfg.radius,
        cfg.lambda,
        cfg.weight.into_spec(),
        cfg.nonlinearity.into_spec(),
    )
    .map_err(|e| format!("problem file: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_piecewise_problem() {
        let text = r#"
dimension = 1
radius = 3.0
lambda = 4000.0

[weight]
kind = "piecewise-constant"
breakpoints = [1.0, 2.0]
values = [-1.0, 1.0, -1.0]

[nonlinearity]
kind = "power"
p = 2.0
"#;
        let p = parse(text).unwrap();
        assert_eq!(p.dimension, 1);
        assert_eq!(p.radius, 3.0);
        assert_eq!(p.weight.eval(1.5), 1.0);
        assert_eq!(p.nonlinearity.eval(3.0), 9.0);
    }

    #[test]
    fn parses_cosine_and_power_sum() {
        let text = r#"
dimension = 2
radius = 5.0
lambda = 0.1

[weight]
kind = "cosine-shifted"
center = 5.0
phase = 1.0
exponent = 1.5

[nonlinearity]
kind = "power-sum"
p = 2.0
q = 3.0
"#;
        let p = parse(text).unwrap();
        let builtin = RadialProblem::figure1();
        for i in 0..=64 {
            let r = 5.0 * i as f64 / 64.0;
            assert_eq!(p.weight.eval(r), builtin.weight.eval(r));
        }
        assert_eq!(p.nonlinearity.eval(2.0), 12.0);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_scalars() {
        let bad_field = r#"
dimension = 1
radius = 3.0
lambda = 1.0
typo = true

[weight]
kind = "piecewise-constant"
breakpoints = []
values = [1.0]

[nonlinearity]
kind = "power"
p = 2.0
"#;
        assert!(parse(bad_field).is_err());

        let bad_radius = r#"
dimension = 1
radius = -3.0
lambda = 1.0

[weight]
kind = "piecewise-constant"
breakpoints = []
values = [1.0]

[nonlinearity]
kind = "power"
p = 2.0
"#;
        assert!(parse(bad_radius).is_err());

        // sublinear power violates the shape of g
        let bad_power = r#"
dimension = 1
radius = 3.0
lambda = 1.0

[weight]
kind = "piecewise-constant"
breakpoints = []
values = [1.0]

[nonlinearity]
kind = "power"
p = 0.5
"#;
        assert!(parse(bad_power).is_err());
    }
}
