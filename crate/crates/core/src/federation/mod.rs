//! The federated protocol: client selection, quantized broadcast, local
//! training with optional local DP, quantized upload, weighted aggregation
//! and bit accounting.
//!
//! Randomness is drawn from [`crate::rng::stream`] keyed by round and client,
//! so a run is reproducible and client work can run in parallel without
//! changing any result.

mod accounting;
mod client;
mod config;
mod server;

pub use accounting::{comm_cost, fp32_cost, pack_codes, unpack_codes, FP32_BITS, SCALE_BITS, TAG_BITS};
pub use client::{client_update, local_train, ClientProfile, ClientRngs, ClientUpdate, LocalTraining};
pub use config::{BitSchedule, DataSource, ExperimentConfig, PartitionScheme};
pub use server::{
    aggregate, best_round, evaluate, load_data, run_experiment, select_clients, RoundRecord, ServerState, Simulation,
};
