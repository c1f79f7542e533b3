use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ModelSpec;
use crate::privacy::DpConfig;
use crate::schedule::{ScheduleConfig, ScheduleMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitSchedule {
    #[serde(flatten)]
    pub mode: ScheduleMode,
    pub b_max: u32,
    pub b_min: u32,
    pub lambda_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum PartitionScheme {
    Dirichlet { alpha: f64 },
    PowerLaw { exponent: f64 },
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Gaussian blobs sized from the model's input dimension and class count.
    Synthetic {
        n_per_class: usize,
        test_per_class: usize,
        spread: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub schedule: BitSchedule,
    /// `None` disables clipping and noise.
    pub dp: Option<DpConfig>,
    pub rounds: u64,
    pub num_clients: usize,
    pub clients_per_round: usize,
    pub local_epochs: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub partition: PartitionScheme,
    pub data: DataSource,
    pub eval_every: u64,
    /// Run the clients of a round on the rayon pool.
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn schedule_config(&self) -> ScheduleConfig {
        ScheduleConfig {
            mode: self.schedule.mode,
            b_max: self.schedule.b_max,
            b_min: self.schedule.b_min,
            total_rounds: self.rounds.max(1),
            lambda_h: self.schedule.lambda_h,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.model
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        self.schedule_config()
            .validate()
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        if let Some(dp) = &self.dp {
            dp.validate().map_err(|e| Error::Config(format!("dp: {e}")))?;
        }
        if self.num_clients == 0 {
            return fail("clients must be >= 1".into());
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.num_clients {
            return fail(format!(
                "clients_per_round must be in [1, clients = {}], got {}",
                self.num_clients, self.clients_per_round
            ));
        }
        if self.local_epochs == 0 {
            return fail("local_epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.eval_every == 0 {
            return fail("eval_every must be >= 1".into());
        }
        match self.partition {
            PartitionScheme::Dirichlet { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                return fail(format!("partition.alpha must be > 0, got {alpha}"));
            }
            PartitionScheme::PowerLaw { exponent } if !(exponent >= 0.0 && exponent.is_finite()) => {
                return fail(format!("partition.exponent must be >= 0, got {exponent}"));
            }
            _ => {}
        }
        if let DataSource::Synthetic {
            n_per_class, spread, ..
        } = &self.data
        {
            if *n_per_class == 0 {
                return fail("data.n_per_class must be >= 1".into());
            }
            if !(*spread >= 0.0 && spread.is_finite()) {
                return fail(format!("data.spread must be >= 0, got {spread}"));
            }
        }
        Ok(())
    }
}
