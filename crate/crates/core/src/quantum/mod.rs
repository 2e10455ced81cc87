//! Split-step Floquet propagation on the momentum lattice `m in [-L, L]`.

mod double_kick;
mod engine;
mod spin;

pub use double_kick::*;
pub use engine::*;
pub use spin::*;
