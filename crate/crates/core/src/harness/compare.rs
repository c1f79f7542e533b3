use std::path::Path;

use serde::Serialize;

use super::metrics::read_metrics;
use crate::error::Result;
use crate::federation::{best_round, RoundRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub rounds: usize,
    pub total_bits: u64,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
    pub best_test_acc: Option<f64>,
    pub best_round: Option<u64>,
}

impl RunSummary {
    pub fn of(records: &[RoundRecord]) -> Self {
        let uplink_bits = records.iter().map(|r| r.uplink_bits).sum();
        let downlink_bits = records.iter().map(|r| r.downlink_bits).sum();
        let best = best_round(records);
        Self {
            rounds: records.len(),
            total_bits: uplink_bits + downlink_bits,
            uplink_bits,
            downlink_bits,
            best_test_acc: best.map(|b| b.0),
            best_round: best.map(|b| b.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub baseline: RunSummary,
    pub variant: RunSummary,
    /// `variant_total_bits / baseline_total_bits`.
    pub bit_ratio: f64,
    /// `1 - bit_ratio`, as a fraction.
    pub reduction: f64,
}

pub fn compare_runs(baseline: &[RoundRecord], variant: &[RoundRecord]) -> CompareSummary {
    let baseline = RunSummary::of(baseline);
    let variant = RunSummary::of(variant);
    let bit_ratio = if baseline.total_bits == 0 {
        if variant.total_bits == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        variant.total_bits as f64 / baseline.total_bits as f64
    };
    CompareSummary {
        baseline,
        variant,
        bit_ratio,
        reduction: 1.0 - bit_ratio,
    }
}

/// Compare two metrics files (CSV or JSONL, formats may differ).
pub fn compare_files(baseline: &Path, variant: &Path) -> Result<CompareSummary> {
    Ok(compare_runs(&read_metrics(baseline)?, &read_metrics(variant)?))
}
