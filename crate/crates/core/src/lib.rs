//! Resonances of one-dimensional Schrödinger operators with finitely many
//! semiclassical delta barriers.
//!
//! The crate evaluates the resonance determinant three ways, builds the
//! Newton polygon that predicts the resonance strings, locates resonances
//! numerically and reports how closely they follow the predicted curves.

pub mod determinant;
pub mod error;
pub mod model;
pub mod polygon;
pub mod report;
pub mod solver;
pub mod theory;

pub use error::{ResonanceError, Result};
pub use model::{ComplexPoint, DeltaBarrier, DeltaSystem, Window};
