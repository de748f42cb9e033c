//! Independent references for the fast formulas.

pub mod continuity;
pub mod decay;
pub mod ensemble;
pub mod expanded;
pub mod fd;
pub mod scaling;
pub mod ulam;

pub use continuity::{continuity_check, ContinuityReport};
pub use decay::{decay_check, DecayReport};
pub use ensemble::{ensemble_response, EnsembleReport};
pub use expanded::expanded_divergence;
pub use fd::{fd_response, FdOptions, FdResult};
pub use scaling::{ulam_error_scaling, ScalingReport};
pub use ulam::{ulam_build, ulam_density, ulam_response, UlamOptions, UlamResult};
