//! Run settings: built-in defaults, then a flat `key=value` file, then
//! command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pointgn_core::{AggregationMode, EncoderConfig, GroupStdMode, SampleStrategy, DEFAULT_GAMMA};

use crate::dataset::{Sampling, ScanObjectNNSplit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    ModelNet40,
    ScanObjectNN,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modelnet40" => Ok(Self::ModelNet40),
            "scanobjectnn" => Ok(Self::ScanObjectNN),
            other => Err(Error::Config(format!(
                "unknown dataset {other:?} (expected modelnet40 or scanobjectnn)"
            ))),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ModelNet40 => "modelnet40",
            Self::ScanObjectNN => "scanobjectnn",
        })
    }
}

/// Fully resolved settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dataset_dir: Option<PathBuf>,
    pub dataset: DatasetKind,
    pub split: ScanObjectNNSplit,
    pub sampling: Sampling,
    pub encoder: EncoderConfig,
    pub gamma: f64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub limit: Option<usize>,
    pub force: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dataset_dir: None,
            dataset: DatasetKind::ModelNet40,
            split: ScanObjectNNSplit::PbT50Rs,
            sampling: Sampling::default(),
            encoder: EncoderConfig::default(),
            gamma: DEFAULT_GAMMA,
            threads: 0,
            limit: None,
            force: false,
        }
    }
}

/// Keys understood by [`Settings::set`], in echo order.
pub const KEYS: [&str; 19] = [
    "dataset-dir",
    "dataset",
    "split",
    "points",
    "sample",
    "seed",
    "refs-per-axis",
    "sigma",
    "k",
    "stages",
    "agg-mode",
    "group-std",
    "normalize",
    "clamp-k",
    "stage-sigmas",
    "gamma",
    "threads",
    "limit",
    "force",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

impl Settings {
    /// Applies one `key=value` pair. Underscores in keys are accepted in
    /// place of dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let core = |e: pointgn_core::Error| Error::Config(format!("{key}: {e}"));
        match key.as_str() {
            "dataset-dir" => self.dataset_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "dataset" => self.dataset = value.parse()?,
            "split" => self.split = value.parse()?,
            "points" => self.sampling.points = parse(&key, value)?,
            "sample" => self.sampling.strategy = value.parse::<SampleStrategy>().map_err(core)?,
            "seed" => self.sampling.seed = parse(&key, value)?,
            "refs-per-axis" => self.encoder.refs_per_axis = parse(&key, value)?,
            "sigma" => self.encoder.sigma = parse(&key, value)?,
            "k" => self.encoder.neighbors = parse(&key, value)?,
            "stages" => self.encoder.stages = parse(&key, value)?,
            "agg-mode" => {
                self.encoder.aggregation = value.parse::<AggregationMode>().map_err(core)?
            }
            "group-std" => self.encoder.group_std = value.parse::<GroupStdMode>().map_err(core)?,
            "normalize" => self.encoder.normalize_input = parse_bool(&key, value)?,
            "clamp-k" => self.encoder.clamp_k = parse_bool(&key, value)?,
            "stage-sigmas" => {
                self.encoder.stage_sigmas = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(&key, s))
                    .collect::<Result<_>>()?
            }
            "gamma" => self.gamma = parse(&key, value)?,
            "threads" => self.threads = parse(&key, value)?,
            "limit" => {
                self.limit = if value.is_empty() {
                    None
                } else {
                    Some(parse(&key, value)?)
                }
            }
            "force" => self.force = parse_bool(&key, value)?,
            _ => return Err(Error::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key=value` per line, `#` comments and
    /// blank lines ignored.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Applies encoder settings recorded by [`EncoderConfig::canonical`],
    /// e.g. from a bank sidecar.
    pub fn apply_encoder_record<'a>(
        &mut self,
        record: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<()> {
        for (k, v) in record {
            let key = match k {
                "neighbors" => "k",
                "aggregation" => "agg-mode",
                "normalize_input" => "normalize",
                other => other,
            };
            self.set(key, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.sampling.points == 0 {
            return Err(Error::Config("points must be >= 1".into()));
        }
        if self.sampling.points < self.encoder.min_points() {
            return Err(Error::Config(format!(
                "{} points cannot go through {} halving stages (need >= {})",
                self.sampling.points,
                self.encoder.stages,
                self.encoder.min_points()
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if self.limit == Some(0) {
            return Err(Error::Config("limit must be >= 1".into()));
        }
        Ok(())
    }

    /// `(key, value)` pairs for every setting, in [`KEYS`] order. Feeding
    /// them back through [`Settings::set`] reproduces `self`.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        let e = &self.encoder;
        let values = [
            self.dataset_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            self.dataset.to_string(),
            self.split.to_string(),
            self.sampling.points.to_string(),
            self.sampling.strategy.to_string(),
            self.sampling.seed.to_string(),
            e.refs_per_axis.to_string(),
            format!("{:?}", e.sigma),
            e.neighbors.to_string(),
            e.stages.to_string(),
            e.aggregation.to_string(),
            e.group_std.to_string(),
            e.normalize_input.to_string(),
            e.clamp_k.to_string(),
            e.stage_sigmas
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(","),
            format!("{:?}", self.gamma),
            self.threads.to_string(),
            self.limit.map(|l| l.to_string()).unwrap_or_default(),
            self.force.to_string(),
        ];
        KEYS.into_iter().zip(values).collect()
    }

    /// `key=value` lines of [`Settings::resolved`].
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.resolved() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.resolved()
                .into_iter()
                .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut s = Settings::default();
        s.apply_text(
            "# tuned\nsigma = 0.3\nagg_mode=multiplicative\nstage-sigmas=0.3,0.25\nlimit=50\ndataset-dir=/data/x\n",
            Path::new("cfg"),
        )
        .unwrap();
        assert_eq!(s.encoder.sigma, 0.3);
        assert_eq!(s.encoder.aggregation, AggregationMode::Multiplicative);
        let mut back = Settings::default();
        back.apply_text(&s.echo(), Path::new("echo")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn errors_name_the_line() {
        let mut s = Settings::default();
        let err = s
            .apply_text("k=120\nsigma=wide\n", Path::new("cfg"))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(s.set("colour", "red").is_err());
        assert!(s.set("split", "bogus").is_err());
    }

    #[test]
    fn encoder_record_round_trips() {
        let mut a = Settings::default();
        a.encoder.sigma = 0.3;
        a.encoder.neighbors = 90;
        a.encoder.aggregation = AggregationMode::Multiplicative;
        a.encoder.normalize_input = false;
        let text = a.encoder.canonical();
        let mut b = Settings::default();
        b.apply_encoder_record(text.lines().map(|l| l.split_once('=').unwrap()))
            .unwrap();
        assert_eq!(b.encoder, a.encoder);
        assert_eq!(b.encoder.fingerprint(), a.encoder.fingerprint());
    }

    #[test]
    fn validation() {
        let mut s = Settings::default();
        s.validate().unwrap();
        s.sampling.points = 8;
        assert!(s.validate().is_err());
        s.sampling.points = 1024;
        s.gamma = 0.0;
        assert!(s.validate().is_err());
    }
}
