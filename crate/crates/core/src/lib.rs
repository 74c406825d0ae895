//! Saturated output feedback for maximal monotone control systems: Hilbert
//! state spaces, projections onto control constraints, closed-loop operators,
//! resolvent-based integrators and three concrete models.

pub mod error;
pub mod hilbert;
pub mod integrators;
pub mod linalg;
pub mod models;
pub mod projection;
pub mod report;
pub mod system;

pub use error::{Error, Result};
pub use hilbert::{inner, norm, Grid, GridField, InnerProduct, NodeKind, StateVector, WaveState};
pub use integrators::{simulate, step, SchemeKind, SolverSettings, StepScheme, Trajectory};
pub use projection::ConstraintSet;
pub use system::{eval_m_cl, ClosedLoop, Equilibrium, MonotoneControlSystem};

/// Random source for sampled checks: counter-based and seedable, so streams
/// are reproducible across platforms.
pub type SampleRng = rand_chacha::ChaCha8Rng;
