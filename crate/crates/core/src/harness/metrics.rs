//! Per-round metrics files.
//!
//! Columns, in order: `t, downlink_bits, uplink_bits, mean_bits, test_acc,
//! train_acc`. Bit counts are integers; real-valued columns carry exactly six
//! decimals; rounds without evaluation leave accuracies empty (CSV) or `null`
//! (JSONL). JSONL lines also list the selected client ids.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::federation::RoundRecord;

pub const CSV_HEADER: &str = "t,downlink_bits,uplink_bits,mean_bits,test_acc,train_acc";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Csv,
    Jsonl,
}

impl MetricsFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MetricsFormat::Csv => "csv",
            MetricsFormat::Jsonl => "jsonl",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(MetricsFormat::Csv),
            Some("jsonl") => Ok(MetricsFormat::Jsonl),
            _ => Err(Error::invalid(format!(
                "{}: metrics files must end in .csv or .jsonl",
                path.display()
            ))),
        }
    }
}

impl std::str::FromStr for MetricsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MetricsFormat::Csv),
            "jsonl" => Ok(MetricsFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown metrics format {other:?}"))),
        }
    }
}

fn fixed(x: Option<f64>, missing: &str) -> String {
    x.map_or_else(|| missing.to_string(), |v| format!("{v:.6}"))
}

/// Render records in the given format.
pub fn render_metrics(records: &[RoundRecord], format: MetricsFormat) -> String {
    let mut out = String::new();
    match format {
        MetricsFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in records {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{},{}",
                    r.t,
                    r.downlink_bits,
                    r.uplink_bits,
                    r.mean_bits,
                    fixed(r.test_acc, ""),
                    fixed(r.train_acc, "")
                );
            }
        }
        MetricsFormat::Jsonl => {
            for r in records {
                let selected = r.selected.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
                let _ = writeln!(
                    out,
                    "{{\"t\":{},\"downlink_bits\":{},\"uplink_bits\":{},\"mean_bits\":{:.6},\"test_acc\":{},\"train_acc\":{},\"selected\":[{}]}}",
                    r.t,
                    r.downlink_bits,
                    r.uplink_bits,
                    r.mean_bits,
                    fixed(r.test_acc, "null"),
                    fixed(r.train_acc, "null"),
                    selected
                );
            }
        }
    }
    out
}

pub fn export_metrics(records: &[RoundRecord], format: MetricsFormat, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, render_metrics(records, format)).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    t: u64,
    downlink_bits: u64,
    uplink_bits: u64,
    mean_bits: f64,
    test_acc: Option<f64>,
    train_acc: Option<f64>,
    #[serde(default)]
    selected: Vec<usize>,
}

fn schema(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::invalid(format!("{}:{line}: {msg}", path.display()))
}

pub fn parse_metrics(text: &str, format: MetricsFormat, path: &Path) -> Result<Vec<RoundRecord>> {
    match format {
        MetricsFormat::Csv => {
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h == CSV_HEADER => {}
                Some(h) => return Err(schema(path, 1, format!("header {h:?} does not match {CSV_HEADER:?}"))),
                None => return Err(schema(path, 1, "missing header")),
            }
            lines
                .enumerate()
                .filter(|(_, l)| !l.is_empty())
                .map(|(i, line)| {
                    let n = i + 2;
                    let cols: Vec<&str> = line.split(',').collect();
                    if cols.len() != 6 {
                        return Err(schema(path, n, format!("expected 6 columns, got {}", cols.len())));
                    }
                    let int = |s: &str, what| s.parse::<u64>().map_err(|e| schema(path, n, format!("{what}: {e}")));
                    let real = |s: &str, what| s.parse::<f64>().map_err(|e| schema(path, n, format!("{what}: {e}")));
                    let opt = |s: &str, what| {
                        if s.is_empty() {
                            Ok(None)
                        } else {
                            real(s, what).map(Some)
                        }
                    };
                    Ok(RoundRecord {
                        t: int(cols[0], "t")?,
                        downlink_bits: int(cols[1], "downlink_bits")?,
                        uplink_bits: int(cols[2], "uplink_bits")?,
                        mean_bits: real(cols[3], "mean_bits")?,
                        test_acc: opt(cols[4], "test_acc")?,
                        train_acc: opt(cols[5], "train_acc")?,
                        selected: Vec::new(),
                    })
                })
                .collect()
        }
        MetricsFormat::Jsonl => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let r: JsonRecord = serde_json::from_str(line).map_err(|e| schema(path, i + 1, e))?;
                Ok(RoundRecord {
                    t: r.t,
                    downlink_bits: r.downlink_bits,
                    uplink_bits: r.uplink_bits,
                    mean_bits: r.mean_bits,
                    test_acc: r.test_acc,
                    train_acc: r.train_acc,
                    selected: r.selected,
                })
            })
            .collect(),
    }
}

/// Read a metrics file, picking the format from its extension.
pub fn read_metrics(path: &Path) -> Result<Vec<RoundRecord>> {
    let format = MetricsFormat::from_path(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text, format, path)
}
