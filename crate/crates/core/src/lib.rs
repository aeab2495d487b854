//! Multi-task gradient combination by orthogonal decomposition.
//!
//! The library splits each task's gradient into a component that agrees with
//! every other task and a component that conflicts, using an orthonormal basis
//! of the span of per-group gradients. Comparator combiners (plain sum, MGDA,
//! PCGrad, CAGrad) and a shared-bottom trainer with exact per-example
//! gradients round out the benchmark harness.

pub mod cli;
pub mod combiners;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
