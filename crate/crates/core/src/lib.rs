//! Spectral action and first-order corrections for operator-valued symbols
//! with one slow degree of freedom.

pub mod corrections;
pub mod error;
pub mod fast_algebra;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod quantizer;
pub mod spectral_action;

pub use error::{Error, Result};
pub use fast_algebra::{FastOperator, LadderPair};
pub use geometry::{BandField, OperatorField, SlowGrid};
pub use harness::model::ModelSpec;
