//! TOML experiment configuration.
//!
//! Only `rounds` and the `[model]` table are required; everything else falls
//! back to [`CONFIG_DEFAULTS`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::federation::{BitSchedule, DataSource, ExperimentConfig, PartitionScheme};
use crate::math::{ModelKind, ModelSpec};
use crate::privacy::DpConfig;
use crate::schedule::ScheduleMode;

/// A fully commented example with every default spelled out.
pub const CONFIG_DEFAULTS: &str = r#"# required
rounds = 100

seed = 0
clients = 10
clients_per_round = 5
local_epochs = 5
batch_size = 64
learning_rate = 0.1
eval_every = 10
parallel = true

# required
[model]
kind = "logistic"        # logistic | mlp
input_dim = 2
num_classes = 3
# hidden_dim = 16        # mlp only

[schedule]
mode = "static"          # static | cosine | dynamic
bits = 32                # static only
b_max = 32
b_min = 8
lambda_h = 0.5           # dynamic only

# Local differential privacy; omit the table to disable.
# [dp]
# epsilon = 10000.0
# xi = 100.0

[partition]
scheme = "dirichlet"     # dirichlet | power_law | iid
alpha = 0.5              # dirichlet
# exponent = 1.2         # power_law

[data]
source = "synthetic"     # synthetic | idx
n_per_class = 200
test_per_class = 100
spread = 0.15
# train_images = "train-images-idx3-ubyte"    # idx only, relative to the config file
# train_labels = "train-labels-idx1-ubyte"
# test_images = "t10k-images-idx3-ubyte"
# test_labels = "t10k-labels-idx1-ubyte"
"#;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    rounds: Option<u64>,
    seed: Option<u64>,
    clients: Option<usize>,
    clients_per_round: Option<usize>,
    local_epochs: Option<u64>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    eval_every: Option<u64>,
    parallel: Option<bool>,
    model: Option<RawModel>,
    #[serde(default)]
    schedule: RawSchedule,
    dp: Option<RawDp>,
    #[serde(default)]
    partition: RawPartition,
    #[serde(default)]
    data: RawData,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    input_dim: usize,
    num_classes: usize,
    hidden_dim: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    mode: Option<String>,
    bits: Option<u32>,
    b_max: Option<u32>,
    b_min: Option<u32>,
    lambda_h: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDp {
    epsilon: f64,
    xi: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    scheme: Option<String>,
    alpha: Option<f64>,
    exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    source: Option<String>,
    n_per_class: Option<usize>,
    test_per_class: Option<usize>,
    spread: Option<f64>,
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn reject_unused<T>(key: &str, value: &Option<T>, context: &str) -> Result<()> {
    match value {
        Some(_) => Err(bad(key, format!("not allowed {context}"))),
        None => Ok(()),
    }
}

fn convert(raw: RawConfig, base_dir: &Path) -> Result<ExperimentConfig> {
    let rounds = raw.rounds.ok_or_else(|| bad("rounds", "missing required key"))?;
    let m = raw.model.ok_or_else(|| bad("model", "missing required table"))?;
    let model = match m.kind.as_str() {
        "logistic" => {
            reject_unused("model.hidden_dim", &m.hidden_dim, "for kind = \"logistic\"")?;
            ModelSpec {
                kind: ModelKind::Logistic,
                input_dim: m.input_dim,
                num_classes: m.num_classes,
            }
        }
        "mlp" => {
            let hidden_dim = m
                .hidden_dim
                .ok_or_else(|| bad("model.hidden_dim", "required for kind = \"mlp\""))?;
            ModelSpec {
                kind: ModelKind::Mlp { hidden_dim },
                input_dim: m.input_dim,
                num_classes: m.num_classes,
            }
        }
        other => {
            return Err(bad(
                "model.kind",
                format!("unknown model kind {other:?}, expected \"logistic\" or \"mlp\""),
            ))
        }
    };

    let s = raw.schedule;
    let mode = match s.mode.as_deref().unwrap_or("static") {
        "static" => ScheduleMode::Static {
            bits: s.bits.unwrap_or(32),
        },
        "cosine" => {
            reject_unused("schedule.bits", &s.bits, "for mode = \"cosine\"")?;
            ScheduleMode::Cosine
        }
        "dynamic" => {
            reject_unused("schedule.bits", &s.bits, "for mode = \"dynamic\"")?;
            ScheduleMode::Dynamic
        }
        other => {
            return Err(bad(
                "schedule.mode",
                format!("unknown mode {other:?}, expected \"static\", \"cosine\" or \"dynamic\""),
            ))
        }
    };
    let schedule = BitSchedule {
        mode,
        b_max: s.b_max.unwrap_or(32),
        b_min: s.b_min.unwrap_or(8),
        lambda_h: s.lambda_h.unwrap_or(0.5),
    };

    let p = raw.partition;
    let partition = match p.scheme.as_deref().unwrap_or("dirichlet") {
        "dirichlet" => {
            reject_unused("partition.exponent", &p.exponent, "for scheme = \"dirichlet\"")?;
            PartitionScheme::Dirichlet {
                alpha: p.alpha.unwrap_or(0.5),
            }
        }
        "power_law" => {
            reject_unused("partition.alpha", &p.alpha, "for scheme = \"power_law\"")?;
            PartitionScheme::PowerLaw {
                exponent: p.exponent.unwrap_or(1.2),
            }
        }
        "iid" => {
            reject_unused("partition.alpha", &p.alpha, "for scheme = \"iid\"")?;
            reject_unused("partition.exponent", &p.exponent, "for scheme = \"iid\"")?;
            PartitionScheme::Iid
        }
        other => {
            return Err(bad(
                "partition.scheme",
                format!("unknown scheme {other:?}, expected \"dirichlet\", \"power_law\" or \"iid\""),
            ))
        }
    };

    let d = raw.data;
    let data = match d.source.as_deref().unwrap_or("synthetic") {
        "synthetic" => {
            for (key, v) in [
                ("data.train_images", &d.train_images),
                ("data.train_labels", &d.train_labels),
                ("data.test_images", &d.test_images),
                ("data.test_labels", &d.test_labels),
            ] {
                reject_unused(key, v, "for source = \"synthetic\"")?;
            }
            DataSource::Synthetic {
                n_per_class: d.n_per_class.unwrap_or(200),
                test_per_class: d.test_per_class.unwrap_or(100),
                spread: d.spread.unwrap_or(0.15),
            }
        }
        "idx" => {
            reject_unused("data.n_per_class", &d.n_per_class, "for source = \"idx\"")?;
            reject_unused("data.test_per_class", &d.test_per_class, "for source = \"idx\"")?;
            reject_unused("data.spread", &d.spread, "for source = \"idx\"")?;
            let path = |key: &str, v: Option<PathBuf>| {
                v.map(|p| base_dir.join(p))
                    .ok_or_else(|| bad(key, "required for source = \"idx\""))
            };
            DataSource::Idx {
                train_images: path("data.train_images", d.train_images)?,
                train_labels: path("data.train_labels", d.train_labels)?,
                test_images: path("data.test_images", d.test_images)?,
                test_labels: path("data.test_labels", d.test_labels)?,
            }
        }
        other => {
            return Err(bad(
                "data.source",
                format!("unknown source {other:?}, expected \"synthetic\" or \"idx\""),
            ))
        }
    };

    let cfg = ExperimentConfig {
        model,
        schedule,
        dp: raw.dp.map(|dp| DpConfig {
            epsilon: dp.epsilon,
            xi: dp.xi,
        }),
        rounds,
        num_clients: raw.clients.unwrap_or(10),
        clients_per_round: raw.clients_per_round.unwrap_or(5),
        local_epochs: raw.local_epochs.unwrap_or(5),
        batch_size: raw.batch_size.unwrap_or(64),
        learning_rate: raw.learning_rate.unwrap_or(0.1),
        seed: raw.seed.unwrap_or(0),
        partition,
        data,
        eval_every: raw.eval_every.unwrap_or(10),
        parallel: raw.parallel.unwrap_or(true),
    };
    Ok(cfg)
}

/// Parse and validate a TOML config. Relative IDX paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let cfg = convert(raw, base_dir)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
