//! Multipartite entanglement purification of GHZ-state spin ensembles with
//! parity-check detection.
//!
//! The crate has two independent computational routes to every protocol
//! quantity, which is the whole point of its test story:
//!
//! * [`ensemble`] — closed-form transformations of GHZ-diagonal probability
//!   vectors (purification rounds, cross-combination distillation, pairwise
//!   recurrence purification, entanglement link, and the symmetric-noise
//!   efficiency/fidelity curves).
//! * [`exact`] — an exact small-register state-vector oracle that builds the
//!   same protocols out of gates, parity-check detections, and projective
//!   measurements, by full branch enumeration.
//!
//! [`scheduler`] iterates the closed forms under a fidelity-threshold policy
//! and accounts for yields; [`montecarlo`] samples the exact circuits
//! trajectory-by-trajectory and checks the closed forms statistically.
//!
//! All numeric kernels are generic over the floating-point type through
//! [`Scalar`]; `f64` is the precision the tolerances in the test suites are
//! written for, `f32` builds and runs but is only suitable for rough sweeps.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub mod ensemble;
pub mod exact;
pub mod ghz;
pub mod montecarlo;
pub mod scheduler;

/// Floating-point scalar the numeric kernels are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance used for normalization checks, scaled to the
    /// precision of the type (`~2e-12` for `f64`).
    fn norm_tolerance() -> Self {
        Self::epsilon() * Self::from_f(1.0e4)
    }

    /// Shorthand for converting an `f64` constant; panics only for types that
    /// cannot represent ordinary small constants, which no `Scalar` is.
    fn from_f(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant must convert")
    }

    /// Lossy view as `f64` (exact for `f32`/`f64`).
    fn to_f(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum<T>
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

pub use ensemble::{GhzEnsemble, HarvestSet, PairEnsemble, PairId, SymmetricCurves};
pub use exact::{Parity, PureState, Spin, WeightedMixture};
pub use ghz::{ErrorPattern, GhzLabel, Sign};
pub use montecarlo::{Scenario, TrialConfig, TrialSummary};
pub use scheduler::{YieldPolicy, YieldReport};

/// Double-precision aliases; the tolerances quoted throughout the docs and
/// the acceptance suite refer to these instantiations.
pub type PureState64 = exact::PureState<f64>;
pub type WeightedMixture64 = exact::WeightedMixture<f64>;
pub type GhzEnsemble64 = ensemble::GhzEnsemble<f64>;
pub type PairEnsemble64 = ensemble::PairEnsemble<f64>;

/// Single-precision aliases.
pub type PureState32 = exact::PureState<f32>;
pub type WeightedMixture32 = exact::WeightedMixture<f32>;
pub type GhzEnsemble32 = ensemble::GhzEnsemble<f32>;
pub type PairEnsemble32 = ensemble::PairEnsemble<f32>;
