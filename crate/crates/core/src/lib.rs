//! Simulation and verification of semilinear evolution equations driven by
//! compensated Poisson noise, truncated to the eigenbasis of a diagonal
//! generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod integrator;
pub mod noise;
pub mod operator;
pub mod stability;
pub mod state;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use noise::{JumpTrain, MarkFamily, MarkMeasure, RngStream};
pub use operator::DiagonalGenerator;
pub use state::StateVector;
