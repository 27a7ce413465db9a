//! Discrete-time disturbance observers for servo motion control.
//!
//! Two observers are provided on top of a zero-order-hold servo model:
//! the conventional observer, whose estimation error is driven by the first
//! difference of the lumped disturbance, and a high-performance observer
//! whose error is driven only by the second difference. The [`sim`] module
//! closes the loop with a PD controller and the [`metrics`] module evaluates
//! the resulting traces.

pub mod control;
pub mod disturbance;
pub mod error;
pub mod metrics;
pub mod numkit;
pub mod observer;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};
