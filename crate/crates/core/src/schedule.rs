//! Bit-length schedulers.
//!
//! The global scheduler anneals the bit-length from `b_max` to `b_min` along
//! a half cosine. The dynamic scheduler scales the annealed span by a client
//! importance score built from label entropy and relative dataset size.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{MAX_BITS, MIN_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Fixed bit-length every round.
    Static { bits: u32 },
    /// Cosine annealing with importance fixed at 1.
    Cosine,
    /// Cosine annealing scaled by per-client importance (uplink only).
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    pub b_max: u32,
    pub b_min: u32,
    pub total_rounds: u64,
    pub lambda_h: f64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_BITS <= self.b_min && self.b_min <= self.b_max && self.b_max <= MAX_BITS) {
            return Err(Error::invalid(format!(
                "need {MIN_BITS} <= b_min ({}) <= b_max ({}) <= {MAX_BITS}",
                self.b_min, self.b_max
            )));
        }
        if self.total_rounds < 1 {
            return Err(Error::invalid("total_rounds must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda_h) {
            return Err(Error::invalid(format!("lambda_h {} outside [0, 1]", self.lambda_h)));
        }
        if let ScheduleMode::Static { bits } = self.mode {
            if !(MIN_BITS..=MAX_BITS).contains(&bits) {
                return Err(Error::invalid(format!(
                    "static bit-length {bits} outside [{MIN_BITS}, {MAX_BITS}]"
                )));
            }
        }
        Ok(())
    }

    /// Bit-length for the server broadcast at round `t` (importance 1).
    pub fn server_bits(&self, t: u64) -> Result<u32> {
        self.bits_with_importance(t, 1.0)
    }

    fn bits_with_importance(&self, t: u64, nu: f64) -> Result<u32> {
        match self.mode {
            ScheduleMode::Static { bits } => Ok(bits),
            ScheduleMode::Cosine | ScheduleMode::Dynamic => {
                if t >= self.total_rounds {
                    return Err(Error::invalid(format!(
                        "round {t} beyond schedule of {} rounds",
                        self.total_rounds
                    )));
                }
                // The last round (t = T - 1) lands exactly on b_min.
                let horizon = self.total_rounds - 1;
                let b = if horizon == 0 {
                    f64::from(self.b_min) + nu * f64::from(self.b_max - self.b_min)
                } else {
                    cosine_bits(t, horizon, self.b_max, self.b_min, nu)?
                };
                Ok(round_bits(b, self.b_min, self.b_max))
            }
        }
    }
}

/// `b_min + nu (b_max - b_min) (1 + cos(pi t / horizon)) / 2`.
pub fn cosine_bits(t: u64, horizon: u64, b_max: u32, b_min: u32, nu: f64) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("cosine horizon must be >= 1"));
    }
    if t > horizon {
        return Err(Error::invalid(format!("round {t} beyond horizon {horizon}")));
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::invalid(format!("importance {nu} outside [0, 1]")));
    }
    if b_min > b_max {
        return Err(Error::invalid(format!("b_min {b_min} > b_max {b_max}")));
    }
    let span = f64::from(b_max - b_min);
    let phase = (1.0 + (PI * t as f64 / horizon as f64).cos()) / 2.0;
    let b = f64::from(b_min) + nu * span * phase;
    Ok(b.clamp(f64::from(b_min), f64::from(b_max)))
}

/// Nearest integer, halves rounded up, clamped into `[b_min, b_max]`.
pub fn round_bits(b: f64, b_min: u32, b_max: u32) -> u32 {
    let r = (b + 0.5).floor();
    r.clamp(f64::from(b_min), f64::from(b_max)) as u32
}

/// Label entropy normalized by `log2 K`; zero-probability classes contribute 0.
pub fn normalized_entropy(label_counts: &[u64], num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::invalid(format!("need K >= 2 classes, got {num_classes}")));
    }
    if label_counts.len() > num_classes {
        return Err(Error::invalid(format!(
            "histogram has {} bins but K = {num_classes}",
            label_counts.len()
        )));
    }
    let total: u64 = label_counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("empty label histogram"));
    }
    let total = total as f64;
    let h: f64 = label_counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    Ok((h / (num_classes as f64).log2()).clamp(0.0, 1.0))
}

/// Inputs to the client importance score for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceInputs {
    pub label_counts: Vec<u64>,
    pub dataset_size: u64,
    /// Largest dataset among this round's selected clients.
    pub n_max: u64,
    pub num_classes: usize,
}

impl ImportanceInputs {
    pub fn validate(&self) -> Result<()> {
        let sum: u64 = self.label_counts.iter().sum();
        if sum != self.dataset_size {
            return Err(Error::invalid(format!(
                "label counts sum to {sum}, dataset size is {}",
                self.dataset_size
            )));
        }
        if !(1 <= self.dataset_size && self.dataset_size <= self.n_max) {
            return Err(Error::invalid(format!(
                "need 1 <= n_i ({}) <= n_max ({})",
                self.dataset_size, self.n_max
            )));
        }
        Ok(())
    }
}

/// `lambda_h * entropy + (1 - lambda_h) * n_i / n_max`.
pub fn client_importance(inp: &ImportanceInputs, lambda_h: f64) -> Result<f64> {
    inp.validate()?;
    if !(0.0..=1.0).contains(&lambda_h) {
        return Err(Error::invalid(format!("lambda_h {lambda_h} outside [0, 1]")));
    }
    let entropy = normalized_entropy(&inp.label_counts, inp.num_classes)?;
    let size = inp.dataset_size as f64 / inp.n_max as f64;
    Ok((lambda_h * entropy + (1.0 - lambda_h) * size).clamp(0.0, 1.0))
}

/// Integer bit-length for a client upload at round `t`.
pub fn schedule_bits(cfg: &ScheduleConfig, t: u64, importance: Option<&ImportanceInputs>) -> Result<u32> {
    match cfg.mode {
        ScheduleMode::Static { .. } | ScheduleMode::Cosine => cfg.bits_with_importance(t, 1.0),
        ScheduleMode::Dynamic => {
            let inp = importance.ok_or_else(|| Error::invalid("dynamic schedule requires client importance inputs"))?;
            let nu = client_importance(inp, cfg.lambda_h)?;
            cfg.bits_with_importance(t, nu)
        }
    }
}
