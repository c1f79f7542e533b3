//! Deterministic federated-learning simulator.
//!
//! FedAvg with per-tensor stochastic uniform quantization, cosine and
//! importance-weighted bit-length scheduling, Laplace local differential
//! privacy, and exact communication accounting.
//!
//! Module map:
//!
//! - [`math`]: dense tensors, parameter sets, desk-scale models, clipped SGD
//! - [`quant`]: symmetric stochastic quantization
//! - [`schedule`]: bit-length schedulers
//! - [`privacy`]: sensitivity analysis and the Laplace mechanism
//! - [`data`]: datasets, IDX ingestion, non-IID partitioners
//! - [`federation`]: the server/client protocol loop and accounting
//! - [`harness`]: configuration, metrics export, run comparison, sweeps

pub mod data;
pub mod error;
pub mod federation;
pub mod harness;
pub mod math;
pub mod privacy;
pub mod quant;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
