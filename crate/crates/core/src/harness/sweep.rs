//! Cartesian parameter sweeps.
//!
//! A grid is `key=v1,v2;key=v1,...`. Keys: `epsilon` (a number or `off`),
//! `xi`, `schedule` (`static:B`, `cosine`, `dynamic`), `lambda_h`, `b_max`,
//! `b_min`, `clients`, `clients_per_round`, `rounds`, `alpha`, `seed`.
//! Cells are numbered in row-major order with the last axis varying fastest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::compare::RunSummary;
use super::manifest::{unix_now, RunManifest};
use super::metrics::{export_metrics, MetricsFormat};
use crate::error::{Error, Result};
use crate::federation::{run_experiment, ExperimentConfig, PartitionScheme};
use crate::privacy::DpConfig;
use crate::schedule::ScheduleMode;

const KEYS: &[&str] = &[
    "epsilon",
    "xi",
    "schedule",
    "lambda_h",
    "b_max",
    "b_min",
    "clients",
    "clients_per_round",
    "rounds",
    "alpha",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

pub fn parse_grid(spec: &str) -> Result<Vec<GridAxis>> {
    let mut axes: Vec<GridAxis> = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid: {part:?} is not key=values")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "grid: unknown key {key:?}, expected one of {KEYS:?}"
            )));
        }
        if axes.iter().any(|a| a.key == key) {
            return Err(Error::Config(format!("grid: key {key:?} given twice")));
        }
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::Config(format!("grid: key {key:?} has no values")));
        }
        axes.push(GridAxis {
            key: key.to_string(),
            values,
        });
    }
    if axes.is_empty() {
        return Err(Error::Config("grid: no axes".into()));
    }
    Ok(axes)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("grid: {key}: cannot parse {v:?}")))
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "epsilon" => {
            if v == "off" {
                cfg.dp = None;
            } else {
                let xi = cfg.dp.map_or(100.0, |dp| dp.xi);
                cfg.dp = Some(DpConfig {
                    epsilon: num(key, v)?,
                    xi,
                });
            }
        }
        "xi" => match cfg.dp.as_mut() {
            Some(dp) => dp.xi = num(key, v)?,
            None => return Err(Error::Config("grid: xi given but DP is off".into())),
        },
        "schedule" => {
            cfg.schedule.mode = match v {
                "cosine" => ScheduleMode::Cosine,
                "dynamic" => ScheduleMode::Dynamic,
                s => match s.strip_prefix("static:") {
                    Some(b) => ScheduleMode::Static { bits: num(key, b)? },
                    None => return Err(Error::Config(format!("grid: schedule: unknown value {s:?}"))),
                },
            }
        }
        "lambda_h" => cfg.schedule.lambda_h = num(key, v)?,
        "b_max" => cfg.schedule.b_max = num(key, v)?,
        "b_min" => cfg.schedule.b_min = num(key, v)?,
        "clients" => cfg.num_clients = num(key, v)?,
        "clients_per_round" => cfg.clients_per_round = num(key, v)?,
        "rounds" => cfg.rounds = num(key, v)?,
        "alpha" => cfg.partition = PartitionScheme::Dirichlet { alpha: num(key, v)? },
        "seed" => cfg.seed = num(key, v)?,
        _ => unreachable!("keys checked by parse_grid"),
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: usize,
    pub settings: Vec<(String, String)>,
    pub config: ExperimentConfig,
}

/// Expand the grid against a base config, validating every cell up front.
pub fn expand_grid(base: &ExperimentConfig, axes: &[GridAxis]) -> Result<Vec<SweepCell>> {
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    (0..total)
        .map(|index| {
            let mut rest = index;
            let mut picks = vec![0; axes.len()];
            for (i, axis) in axes.iter().enumerate().rev() {
                picks[i] = rest % axis.values.len();
                rest /= axis.values.len();
            }
            let mut config = base.clone();
            let mut settings = Vec::with_capacity(axes.len());
            // epsilon first so xi can refine it
            let mut order: Vec<usize> = (0..axes.len()).collect();
            order.sort_by_key(|&i| axes[i].key != "epsilon");
            for i in order {
                apply(&mut config, &axes[i].key, &axes[i].values[picks[i]])?;
            }
            for (axis, &p) in axes.iter().zip(&picks) {
                settings.push((axis.key.clone(), axis.values[p].clone()));
            }
            config
                .validate()
                .map_err(|e| Error::Config(format!("grid cell {index}: {e}")))?;
            Ok(SweepCell {
                index,
                settings,
                config,
            })
        })
        .collect()
}

/// Run every cell (in parallel), writing `cell-NNN/metrics.csv` and
/// `cell-NNN/manifest.json` per cell plus `summary.csv` under `out_dir`.
pub fn run_sweep(base: &ExperimentConfig, axes: &[GridAxis], out_dir: &Path) -> Result<Vec<(SweepCell, RunSummary)>> {
    let cells = expand_grid(base, axes)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results: Vec<(SweepCell, RunSummary)> = cells
        .into_par_iter()
        .map(|cell| {
            let started = unix_now();
            let records = run_experiment(&cell.config)?;
            let dir = out_dir.join(format!("cell-{:03}", cell.index));
            let metrics: PathBuf = dir.join("metrics.csv");
            export_metrics(&records, MetricsFormat::Csv, &metrics)?;
            RunManifest::new(&cell.config, started, vec![metrics]).write(&dir.join("manifest.json"))?;
            Ok((cell, RunSummary::of(&records)))
        })
        .collect::<Result<_>>()?;

    let mut summary = String::from("cell");
    for axis in axes {
        let _ = write!(summary, ",{}", axis.key);
    }
    summary.push_str(",total_bits,uplink_bits,downlink_bits,best_test_acc,best_round\n");
    for (cell, s) in &results {
        let _ = write!(summary, "{}", cell.index);
        for (_, v) in &cell.settings {
            let _ = write!(summary, ",{v}");
        }
        let _ = writeln!(
            summary,
            ",{},{},{},{},{}",
            s.total_bits,
            s.uplink_bits,
            s.downlink_bits,
            s.best_test_acc.map_or(String::new(), |a| format!("{a:.6}")),
            s.best_round.map_or(String::new(), |r| r.to_string())
        );
    }
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, summary).map_err(|e| Error::io(&path, e))?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_config_str;

    fn base() -> ExperimentConfig {
        parse_config_str(
            "rounds = 4\n[model]\nkind = \"logistic\"\ninput_dim = 2\nnum_classes = 3\n",
            Path::new("."),
        )
        .unwrap()
    }

    #[test]
    fn grid_parsing() {
        let axes = parse_grid("epsilon=off,1e2; schedule=static:8,cosine").unwrap();
        assert_eq!(axes.len(), 2);
        assert_eq!(axes[1].values, vec!["static:8", "cosine"]);
        assert!(parse_grid("colour=red").is_err());
        assert!(parse_grid("seed").is_err());
        assert!(parse_grid("seed=1;seed=2").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn expansion_order_and_values() {
        let axes = parse_grid("epsilon=off,100;schedule=static:8,cosine,dynamic").unwrap();
        let cells = expand_grid(&base(), &axes).unwrap();
        assert_eq!(cells.len(), 6);
        assert!(cells[0].config.dp.is_none());
        assert_eq!(cells[0].config.schedule.mode, ScheduleMode::Static { bits: 8 });
        assert_eq!(cells[2].config.schedule.mode, ScheduleMode::Dynamic);
        assert_eq!(
            cells[3].config.dp,
            Some(DpConfig {
                epsilon: 100.0,
                xi: 100.0
            })
        );
        assert_eq!(
            cells[4].settings,
            vec![("epsilon".into(), "100".into()), ("schedule".into(), "cosine".into())]
        );
    }

    #[test]
    fn invalid_cells_rejected_up_front() {
        let axes = parse_grid("clients_per_round=5,20").unwrap();
        assert!(expand_grid(&base(), &axes).is_err());
        let axes = parse_grid("xi=5").unwrap();
        assert!(expand_grid(&base(), &axes).is_err());
        let axes = parse_grid("schedule=static").unwrap();
        assert!(expand_grid(&base(), &axes).is_err());
    }
}
