//! Experiment orchestration: configuration files, metrics files, run
//! comparison and parameter sweeps.

mod compare;
mod config;
mod manifest;
mod metrics;
mod sweep;

pub use compare::{compare_files, compare_runs, CompareSummary, RunSummary};
pub use config::{parse_config, parse_config_str, CONFIG_DEFAULTS};
pub use manifest::{unix_now, RunManifest};
pub use metrics::{export_metrics, parse_metrics, read_metrics, render_metrics, MetricsFormat, CSV_HEADER};
pub use sweep::{expand_grid, parse_grid, run_sweep, GridAxis, SweepCell};

/// Output directory used when none is given on the command line.
pub const OUT_DIR_ENV: &str = "FEDQ_OUT_DIR";
