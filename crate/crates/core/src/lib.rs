//! Radial vortex solutions of a penalized gauge-coupled Schrödinger system:
//! mountain-pass search, Newton refinement, vanishing-penalty continuation
//! and an independent shooting oracle.

pub mod continuation;
pub mod error;
pub mod functional;
pub mod grid;
pub mod model;
pub mod mountain_pass;
pub mod numerics;
pub mod ode;
pub mod oracle;
pub mod report;

pub use error::{Result, VortexError};
pub use functional::{EnergyBreakdown, State};
pub use grid::RadialGrid;
pub use model::ModelParams;
