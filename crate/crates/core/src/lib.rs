//! Training-free point-cloud classification.
//!
//! The pipeline has no learnable weights. A cloud is normalized, embedded
//! with a Gaussian positional encoding against a fixed reference grid, and
//! pushed through a hierarchy of farthest-point-sampling / k-NN grouping
//! stages. Each stage pools its neighborhoods with mean + max, and the
//! per-stage global pools are concatenated into a single L2-normalized
//! descriptor. Classification compares that descriptor against a bank of
//! encoded training clouds and sums exponentially weighted similarities per
//! class.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, dataset
//! ingestion and the command-line harness live in the `pointgn` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bank_codec;
pub mod classifier;
pub mod cloud;
pub mod config;
pub mod encoder;
pub mod error;
pub mod fewshot;
pub mod gpe;
pub mod group;
pub mod matrix;
pub mod metrics;
pub mod sampling;

pub use classifier::{
    build_bank, classify, predict, select_gamma_loo, BankWarning, ClassificationResult,
    FeatureBank, GammaSelection, DEFAULT_GAMMA, DEFAULT_GAMMA_CANDIDATES,
};
pub use cloud::{normalize_unit_sphere, sample_points, Point, PointCloud, SampleStrategy};
pub use config::{AggregationMode, EncoderConfig, GroupStdMode};
pub use encoder::{encode, encode_stage, GlobalFeature, StageState};
pub use error::{Error, Result};
pub use fewshot::{make_fewshot_episodes, FewShotEpisode};
pub use gpe::{gpe_aggregate, gpe_encode, make_reference_grid, neighbor_pool, GaussianEncoding};
pub use group::{gather_group, group_normalize, GroupedNeighborhood, GROUP_EPSILON};
pub use matrix::Matrix;
pub use metrics::ConfusionMatrix;
pub use sampling::{fps, knn, Neighbors};
