use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};
use core::str::FromStr;

use crate::error::{Error, Result};

/// How GPE of the normalized neighbor coordinates is folded into the
/// gathered neighbor features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationMode {
    /// `feats + gpe(coords) * gpe(coords)`
    #[default]
    PaperLiteral,
    /// `feats * gpe(coords)`
    Multiplicative,
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-literal" => Ok(Self::PaperLiteral),
            "multiplicative" => Ok(Self::Multiplicative),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregation mode {other:?} (expected paper-literal or multiplicative)"
            ))),
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PaperLiteral => "paper-literal",
            Self::Multiplicative => "multiplicative",
        })
    }
}

/// Standard deviation used when standardizing a neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupStdMode {
    /// One scalar over every entry of the block.
    #[default]
    Pooled,
    /// One value per column.
    PerDimension,
}

impl FromStr for GroupStdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "per-dimension" => Ok(Self::PerDimension),
            other => Err(Error::InvalidArgument(format!(
                "unknown group std mode {other:?} (expected pooled or per-dimension)"
            ))),
        }
    }
}

impl fmt::Display for GroupStdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pooled => "pooled",
            Self::PerDimension => "per-dimension",
        })
    }
}

/// Every hyperparameter of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Reference points per axis (V). The per-point feature width is `3 * V`.
    pub refs_per_axis: usize,
    /// Gaussian width used for the initial embedding and, unless overridden
    /// by `stage_sigmas`, for every stage.
    pub sigma: f64,
    /// Neighbors per group (K).
    pub neighbors: usize,
    /// Number of halving stages (S).
    pub stages: usize,
    pub aggregation: AggregationMode,
    /// Center and scale each input cloud into the unit ball first.
    pub normalize_input: bool,
    /// Allow K to shrink to the parent point count instead of failing.
    pub clamp_k: bool,
    pub group_std: GroupStdMode,
    /// Optional per-stage sigma; stage `s` uses `stage_sigmas[s]` when present.
    pub stage_sigmas: Vec<f64>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            refs_per_axis: 9,
            sigma: 0.35,
            neighbors: 120,
            stages: 4,
            aggregation: AggregationMode::PaperLiteral,
            normalize_input: true,
            clamp_k: false,
            group_std: GroupStdMode::Pooled,
            stage_sigmas: Vec::new(),
        }
    }
}

impl EncoderConfig {
    /// Sigma tuned for the ScanObjectNN splits; everything else is default.
    pub fn scanobjectnn() -> Self {
        Self {
            sigma: 0.3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.refs_per_axis == 0 {
            return Err(Error::InvalidArgument("refs_per_axis must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if let Some(s) = self
            .stage_sigmas
            .iter()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "stage sigma must be positive and finite, got {s}"
            )));
        }
        if self.neighbors == 0 {
            return Err(Error::InvalidArgument("neighbors must be >= 1".into()));
        }
        if self.stages == 0 {
            return Err(Error::InvalidArgument("stages must be >= 1".into()));
        }
        if self.stages >= usize::BITS as usize {
            return Err(Error::InvalidArgument(format!(
                "{} stages is not representable",
                self.stages
            )));
        }
        Ok(())
    }

    /// Per-point feature width D = 3V.
    pub fn feature_dim(&self) -> usize {
        3 * self.refs_per_axis
    }

    /// Length of the global descriptor, S * D.
    pub fn global_dim(&self) -> usize {
        self.stages * self.feature_dim()
    }

    /// Smallest cloud that keeps at least one point after every stage.
    pub fn min_points(&self) -> usize {
        1usize << self.stages
    }

    pub fn stage_sigma(&self, stage: usize) -> f64 {
        self.stage_sigmas.get(stage).copied().unwrap_or(self.sigma)
    }

    /// Stable `key=value` rendering, one pair per line.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "refs_per_axis={}", self.refs_per_axis);
        let _ = writeln!(s, "sigma={:?}", self.sigma);
        let _ = writeln!(s, "neighbors={}", self.neighbors);
        let _ = writeln!(s, "stages={}", self.stages);
        let _ = writeln!(s, "aggregation={}", self.aggregation);
        let _ = writeln!(s, "normalize_input={}", self.normalize_input);
        let _ = writeln!(s, "clamp_k={}", self.clamp_k);
        let _ = writeln!(s, "group_std={}", self.group_std);
        let sig: Vec<String> = self.stage_sigmas.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "stage_sigmas={}", sig.join(","));
        s
    }

    /// 64-bit FNV-1a of [`EncoderConfig::canonical`]. Two banks are
    /// comparable only when their fingerprints agree.
    pub fn fingerprint(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_ablation_choices() {
        let c = EncoderConfig::default();
        assert_eq!(c.neighbors, 120);
        assert_eq!(c.feature_dim(), 27);
        assert_eq!(c.stages, 4);
        assert_eq!(c.sigma, 0.35);
        assert_eq!(c.global_dim(), 108);
        assert_eq!(EncoderConfig::scanobjectnn().sigma, 0.3);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_rejects_degenerate_values() {
        for bad in [
            EncoderConfig {
                refs_per_axis: 0,
                ..Default::default()
            },
            EncoderConfig {
                sigma: 0.0,
                ..Default::default()
            },
            EncoderConfig {
                sigma: -1.0,
                ..Default::default()
            },
            EncoderConfig {
                sigma: f64::NAN,
                ..Default::default()
            },
            EncoderConfig {
                neighbors: 0,
                ..Default::default()
            },
            EncoderConfig {
                stages: 0,
                ..Default::default()
            },
            EncoderConfig {
                stage_sigmas: alloc::vec![0.3, 0.0],
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn fingerprint_tracks_every_field() {
        let base = EncoderConfig::default();
        let variants = [
            EncoderConfig {
                sigma: 0.3,
                ..Default::default()
            },
            EncoderConfig {
                aggregation: AggregationMode::Multiplicative,
                ..Default::default()
            },
            EncoderConfig {
                group_std: GroupStdMode::PerDimension,
                ..Default::default()
            },
            EncoderConfig {
                clamp_k: true,
                ..Default::default()
            },
            EncoderConfig {
                stage_sigmas: alloc::vec![0.35],
                ..Default::default()
            },
        ];
        for v in variants {
            assert_ne!(v.fingerprint(), base.fingerprint());
        }
        assert_eq!(base.fingerprint(), EncoderConfig::default().fingerprint());
    }

    #[test]
    fn enum_names_round_trip() {
        for m in [
            AggregationMode::PaperLiteral,
            AggregationMode::Multiplicative,
        ] {
            assert_eq!(format!("{m}").parse::<AggregationMode>().unwrap(), m);
        }
        for m in [GroupStdMode::Pooled, GroupStdMode::PerDimension] {
            assert_eq!(format!("{m}").parse::<GroupStdMode>().unwrap(), m);
        }
        assert!("bogus".parse::<AggregationMode>().is_err());
    }
}
