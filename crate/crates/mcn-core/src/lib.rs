//! Positive radial solutions of Neumann problems for the Minkowski-curvature
//! operator with a sign-changing weight.
//!
//! The library centers on the divergence-form equation
//!
//! ```text
//! ( r^{N-1} u' / sqrt(1 - u'^2) )' + λ r^{N-1} a(r) g(u) = 0,   0 < r < R,
//! u'(0) = u'(R) = 0,
//! ```
//!
//! where the weight `a` changes sign and has negative radial mean, and
//! `g >= 0` vanishes superlinearly at the origin. Such problems admit pairs
//! of positive solutions once λ is large enough; the crate finds them,
//! certifies them against the integral form of the equation, and brackets
//! their sizes with explicit constants.
//!
//! Everything is generic over the scalar type through [`Real`], with `f64`
//! aliases at the root for the common case.

pub mod constants;
pub mod error;
pub mod grid;
pub mod operator;
pub mod phi;
pub mod problem;
pub mod quad;
pub mod real;
pub mod shooting;
pub mod solver;
pub mod verify;

pub use constants::{ConstantsBundle, Estimate, Provenance};
pub use error::{Error, Result};
pub use grid::{Grid, GridProfile};
pub use operator::HomotopyState;
pub use problem::{
    Interval, NonlinearitySpec, RadialProblem, SignDetection, SignStructure, Side, WeightSpec,
};
pub use real::Real;
pub use shooting::{ShotControls, ShotResult};
pub use solver::{
    Classification, MultiplicityNotFound, NormBrackets, Solution, SolveOptions, StartProfile,
    TwoSolutions,
};
pub use verify::{certify, Certificate, ClaimCheck, Tolerances};

/// `f64` problem description.
pub type Problem64 = RadialProblem<f64>;
/// `f32` problem description.
pub type Problem32 = RadialProblem<f32>;
/// `f64` grid profile.
pub type Profile64 = GridProfile<f64>;
