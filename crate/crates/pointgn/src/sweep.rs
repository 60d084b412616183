//! Hyperparameter sweeps: one encoder setting varied along an axis while
//! aggregation mode and gamma are swept underneath it.

use std::fmt::Write as _;
use std::path::Path;

use pointgn_core::{AggregationMode, EncoderConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::pipeline::{build_dataset_bank, confusion_for, encode_all};
use crate::report::{config_comment, config_json, with_ext, write_jsonl, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Neighbors per group.
    K,
    /// Per-point feature width 3V; values must be multiples of 3.
    Dimension,
    Stages,
    Sigma,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(Self::K),
            "dimension" | "dim" => Ok(Self::Dimension),
            "stages" => Ok(Self::Stages),
            "sigma" => Ok(Self::Sigma),
            _ => Err(Error::Config(format!(
                "unknown sweep axis {s:?} (expected k, dimension, stages or sigma)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::K => "k",
            Self::Dimension => "dimension",
            Self::Stages => "stages",
            Self::Sigma => "sigma",
        })
    }
}

impl SweepAxis {
    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &EncoderConfig, value: f64) -> Result<EncoderConfig> {
        let whole = |what: &str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{what} must be a positive integer, got {value}"
                )))
            }
        };
        let mut c = base.clone();
        match self {
            Self::K => c.neighbors = whole("k")?,
            Self::Stages => c.stages = whole("stages")?,
            Self::Dimension => {
                let d = whole("dimension")?;
                if d % 3 != 0 {
                    return Err(Error::Config(format!(
                        "dimension must be a multiple of 3, got {d}"
                    )));
                }
                c.refs_per_axis = d / 3;
            }
            Self::Sigma => c.sigma = value,
        }
        c.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }
}

/// One grid point: accuracies over its co-grid of modes and gammas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub best_accuracy: f64,
    pub average_accuracy: f64,
    pub best_agg_mode: String,
    pub best_gamma: f64,
    /// Size of the co-grid averaged over.
    pub configs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepGrid {
    pub fn to_csv(&self, config: &[(String, String)]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)
                .map_err(|e| Error::Eval(format!("csv: {e}")))?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Error::Eval(format!("csv: {e}")))?;
        Ok(config_comment(config) + &String::from_utf8_lossy(&body))
    }

    /// Parses [`SweepGrid::to_csv`] output; `#` lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let rows: Vec<SweepRow> = r
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("sweep csv: {e}")))?;
        let axis = rows
            .first()
            .map(|r| r.axis)
            .ok_or_else(|| Error::Config("sweep csv has no rows".into()))?;
        if rows.iter().any(|r| r.axis != axis) {
            return Err(Error::Config("sweep csv mixes axes".into()));
        }
        Ok(Self { axis, rows })
    }

    pub fn text(&self, config: &[(String, String)]) -> String {
        let mut s = format!(
            "{:>10}  {:>8}  {:>8}  {:<14} {:>8}\n",
            self.axis, "best", "average", "best mode", "gamma"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>10}  {:>8.4}  {:>8.4}  {:<14} {:>8}",
                r.value, r.best_accuracy, r.average_accuracy, r.best_agg_mode, r.best_gamma
            );
        }
        let _ = writeln!(s, "config:");
        for (k, v) in config {
            let _ = writeln!(s, "  {k}={v}");
        }
        s
    }

    /// Writes `<prefix>.csv` and `<prefix>.jsonl`.
    pub fn write(
        &self,
        prefix: &Path,
        config: &[(String, String)],
        details: &[serde_json::Value],
    ) -> Result<()> {
        write_text(&with_ext(prefix, "csv"), &self.to_csv(config)?)?;
        let mut lines = details.to_vec();
        lines.push(json!({"type": "summary", "axis": self.axis.to_string(), "rows": self.rows.len(), "config": config_json(config)}));
        write_jsonl(&with_ext(prefix, "jsonl"), &lines)
    }
}

/// What the sweep varies below each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoGrid {
    pub modes: Vec<AggregationMode>,
    pub gammas: Vec<f64>,
}

/// Rebuilds the bank for every value of `axis` and every mode of the
/// co-grid, scoring each gamma on `test`. Returns the grid and one JSON
/// record per (value, mode, gamma).
pub fn run_sweep(
    pool: &rayon::ThreadPool,
    train: &LabeledDataset,
    test: &LabeledDataset,
    base: &EncoderConfig,
    axis: SweepAxis,
    values: &[f64],
    co: &CoGrid,
) -> Result<(SweepGrid, Vec<serde_json::Value>)> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if co.modes.is_empty() || co.gammas.is_empty() {
        return Err(Error::Config(
            "sweep co-grid needs at least one mode and one gamma".into(),
        ));
    }
    let configs: Vec<EncoderConfig> = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<_>>()?;
    let labels = test.labels();
    let mut rows = Vec::with_capacity(values.len());
    let mut details = Vec::new();
    for (&value, config) in values.iter().zip(&configs) {
        let mut scores = Vec::new();
        for &mode in &co.modes {
            let cfg = EncoderConfig {
                aggregation: mode,
                ..config.clone()
            };
            let bank = build_dataset_bank(pool, train, &cfg)?;
            let feats = encode_all(pool, &test.clouds, &cfg)?;
            for &gamma in &co.gammas {
                let acc = confusion_for(pool, &feats, &labels, &bank, gamma)?.accuracy();
                details.push(json!({
                    "type": "point",
                    "axis": axis.to_string(),
                    "value": value,
                    "agg_mode": mode.to_string(),
                    "gamma": gamma,
                    "accuracy": acc,
                }));
                scores.push((acc, mode, gamma));
            }
        }
        let mut best = scores[0];
        for &s in &scores[1..] {
            if s.0 > best.0 {
                best = s;
            }
        }
        rows.push(SweepRow {
            axis,
            value,
            best_accuracy: best.0,
            average_accuracy: scores.iter().map(|s| s.0).sum::<f64>() / scores.len() as f64,
            best_agg_mode: best.1.to_string(),
            best_gamma: best.2,
            configs: scores.len(),
        });
    }
    Ok((SweepGrid { axis, rows }, details))
}
