//! Error surface of the library.
//!
//! Numeric payloads are widened to `f64` so the enum stays non-generic.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("r = {r} lies outside [0, {radius}]")]
    OutOfDomain { r: f64, radius: f64 },

    #[error("slope {s} is inside the guard band around |s| = 1")]
    SlopeSaturated { s: f64 },

    #[error("weight has no positivity interval above the sign tolerance")]
    NoPositivityInterval,

    #[error("weighted mean {mean} is not negative")]
    MeanNotNegative { mean: f64 },

    #[error("no admissible trim width: {0}")]
    NoAdmissibleTrim(String),

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("iteration diverged at the initial state of the path")]
    PathStuckAtStart,

    #[error("solution branch still growing at ceiling {ceiling:e} (cap {cap:e})")]
    UnboundedBranch { ceiling: f64, cap: f64 },
}

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }

    /// True for violations of the structural hypotheses on the weight and
    /// nonlinearity, as opposed to numerical or usage failures.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::NoPositivityInterval | Error::MeanNotNegative { .. } | Error::NoAdmissibleTrim(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
