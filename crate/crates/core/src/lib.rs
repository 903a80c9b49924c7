//! Structure optimization of general binary-tree multiplexers (GBMs) for
//! spatially multiplexed heralded single-photon sources.
//!
//! The pipeline is:
//!
//! 1. [`tree`] enumerates every binary tree of `N_R` identical photon routers
//!    through its canonical integer-sequence encoding and reduces each tree to
//!    the multiset of symbolic arm transmissions `V_r^j V_t^k`.
//! 2. [`statistics`] evaluates the output photon-number distribution of the
//!    source for a given ordered set of numeric arm transmissions.
//! 3. [`optimizer`] maximizes the single-photon probability over the input
//!    mean photon number and searches all distinct structures.
//! 4. [`montecarlo`] is an event-level simulator used as an independent check
//!    of the analytic statistics.
//! 5. [`sweeps`] runs the parameter maps and persists them as CSV.
//!
//! The numeric core is generic over the floating-point type through
//! [`Scalar`]; the aliases below fix it to `f64`, which is what the sweeps,
//! the simulator and the command-line tool use.

pub mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod scalar;
pub mod statistics;
pub mod sweeps;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tree::{
    arm_transmissions, build_tree, catalan, dedup_structures, generate_canonical_sequences,
    ArmExponents, MultiplexerTree, Port, RouterSequence, TransmissionSet,
};

/// Loss parameters in double precision.
pub type LossParams = statistics::LossParams<f64>;
/// Descending arm transmissions in double precision.
pub type ArmVector = statistics::ArmVector<f64>;
/// Output photon statistics in double precision.
pub type PhotonStatistics = statistics::PhotonStatistics<f64>;
/// Optimum of one structure in double precision.
pub type StructureOptimum = optimizer::StructureOptimum<f64>;
/// Result of the structure search in double precision.
pub type SearchReport = optimizer::SearchReport<f64>;
/// Result of a single-structure λ optimization in double precision.
pub type LambdaOptimum = optimizer::LambdaOptimum<f64>;

/// Single-precision variants, mostly useful for cross-checking precision loss.
pub mod f32 {
    pub type LossParams = crate::statistics::LossParams<f32>;
    pub type ArmVector = crate::statistics::ArmVector<f32>;
    pub type PhotonStatistics = crate::statistics::PhotonStatistics<f32>;
    pub type StructureOptimum = crate::optimizer::StructureOptimum<f32>;
}
