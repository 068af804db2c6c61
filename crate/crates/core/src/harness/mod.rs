//! Model configuration, pipeline runs, convergence studies and exports.

pub mod convergence;
pub mod export;
pub mod model;
pub mod pipeline;
pub mod verify;
