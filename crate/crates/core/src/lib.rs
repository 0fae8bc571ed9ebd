//! Data-driven Kalman prediction from measured input-output data.
//!
//! The pipeline estimates the innovations sequence by a projection of future
//! outputs onto past input-output windows, builds an innovations-based Signal
//! Matrix Model (SMM), reduces it to block-triangular form, realizes that as a
//! data-based state-space model and runs a stationary Kalman predictor whose
//! state feeds a multi-step output predictor.
//!
//! ```text
//! (u, y) ─► innovations ─► smm ─► ddss ─► kalman ─► predictor
//! ```
//!
//! [`benchmark`] reproduces a longitudinal aircraft study with Dryden gusts
//! and compares the pipeline against baselines over a seeded Monte Carlo
//! campaign.

pub mod benchmark;
pub mod ddss;
pub mod diagnostics;
pub mod error;
pub mod innovations;
pub mod kalman;
pub mod linalg;
pub mod pipeline;
pub mod predictor;
pub mod smm;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::{HorizonSpec, Trajectory};
