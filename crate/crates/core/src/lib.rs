//! Linear response of uniformly hyperbolic maps computed along a single
//! orbit: unstable frames, equivariant divergences, adjoint shadowing and the
//! fast adjoint response formula, with independent oracles.

pub mod divergence;
pub mod error;
pub mod field;
pub mod frames;
pub mod linalg;
pub mod oracles;
pub mod orbit;
pub mod response;
pub mod series;
pub mod shadowing;
pub mod stats;
pub mod systems;

pub use error::{Error, Result};
pub use field::{ScalarField, TrigKind, TrigTerm, VectorField};
pub use frames::{FrameOptions, Frames};
pub use orbit::{generate_orbit, OrbitData, OrbitSpec, OrbitStart};
pub use response::{linear_response, Engine, ResponseOptions, ResponseReport, RunSpec};
pub use series::{CovectorSeries, Series, SeriesLabel, VectorSeries};
pub use stats::Estimate;
pub use systems::{make_builtin, validate_system, SystemDef};
