//! Exact simulation of networks of quantum reference frames on the circle.
//!
//! Particles carry integer angular momentum. Frames prepare systems through
//! the preparation isometry ([`network::prepare`]), systems interact through
//! momentum-conserving unitaries ([`dynamics`]), and measurements enumerate
//! every outcome branch exactly. The conservation checker compares, outcome by
//! outcome, the conditional distribution of a set's total momentum with its
//! distribution at a reference point.

pub mod dynamics;
pub mod frc;
pub mod network;
pub mod scenario;
pub mod statevec;
pub mod wavefun;

pub use dynamics::{
    apply_interaction, check_individual_conservation, validate_momentum_conserving, ConservationReport, Event,
    InteractionSpec, Pipeline,
};
pub use frc::{builtin_transforms, transform_state, LabelTransform};
pub use network::{prepare, FrameNetwork, InteractionEvent};
pub use statevec::{Distribution, MomentumBasisState, ParticleId, SparseState};
pub use wavefun::Wavefunction;

/// Tolerance for algebraic identities (unitarity, norms, exact rewrites).
pub const ALGEBRAIC_TOLERANCE: f64 = 1e-12;

/// Tolerance for the conservation verdict and for oracle comparisons.
pub const CHECK_TOLERANCE: f64 = 1e-10;

/// Branches less likely than this are excluded from conservation reports.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-14;
