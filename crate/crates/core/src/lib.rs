//! Classical and quantum kicked-rotor simulations.
//!
//! Modules follow the physics: [`classical`] iterates kicked maps,
//! [`quantum`] propagates wavefunctions on a truncated momentum lattice,
//! and the remaining modules build diagnostics and model variants on top.

pub mod anderson;
pub mod classical;
pub mod coupled;
pub mod diagnostics;
pub mod error;
pub mod kepler;
pub mod linalg;
pub mod nonhermitian;
pub mod pseudoclassical;
pub mod quantum;
pub mod rng;
pub mod series;
pub mod special;
pub mod stats;
pub mod topology;

pub use classical::{Ensemble, Geometry, KickPotential, PhasePoint};
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use quantum::{FloquetSpec, InitKind, RotorState};
pub use series::TimeSeries;
pub use coupled::{CoupledSpec, TwoRotorState};
pub use kepler::{KeplerPoint, MicrowaveParams};
pub use topology::{BandGrid, ResonantDkrSpec};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
