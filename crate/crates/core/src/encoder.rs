use alloc::format;
use alloc::vec::Vec;

use crate::cloud::{normalize_unit_sphere, Point, PointCloud};
use crate::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::gpe::{gpe_aggregate_in_place, neighbor_pool, GaussianEncoding};
use crate::group::{gather_group, group_normalize};
use crate::matrix::{l2_norm, Matrix};
use crate::sampling::{fps, knn};

/// Coordinates and per-point features handed from one stage to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct StageState {
    pub coords: Vec<Point>,
    /// `coords.len() x D`.
    pub feats: Matrix,
    /// Number of stages already applied.
    pub stage_index: usize,
}

impl StageState {
    /// Stage-0 state: optional unit-sphere normalization followed by the
    /// Gaussian embedding of every point.
    pub fn initial(cloud: &PointCloud, config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let cloud = if config.normalize_input {
            normalize_unit_sphere(cloud)?
        } else {
            cloud.clone()
        };
        let encoding = GaussianEncoding::uniform(config.refs_per_axis, config.sigma)?;
        let coords = cloud.into_points();
        let feats = encoding.encode(&coords);
        Ok(Self {
            coords,
            feats,
            stage_index: 0,
        })
    }
}

/// The global descriptor of one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFeature {
    pub values: Vec<f64>,
    pub source_label: Option<usize>,
    /// [`EncoderConfig::fingerprint`] of the configuration that produced it.
    pub config_fingerprint: u64,
}

impl GlobalFeature {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One grouping stage: sample half the points with FPS, group the K nearest
/// parents around each sample, standardize the group, fold in the encoding
/// of the standardized coordinates and pool over the neighbors.
///
/// The returned coordinates are the sampled centers as they were in the
/// parent set, not their standardized versions.
pub fn encode_stage(state: &StageState, config: &EncoderConfig) -> Result<StageState> {
    let parents = state.coords.len();
    if parents < 2 {
        return Err(Error::InvalidInput(format!(
            "stage {} received {parents} point(s); need at least 2",
            state.stage_index + 1
        )));
    }
    if state.feats.rows() != parents {
        return Err(Error::ShapeMismatch(format!(
            "{parents} coordinates but {} feature rows",
            state.feats.rows()
        )));
    }
    let encoding =
        GaussianEncoding::uniform(config.refs_per_axis, config.stage_sigma(state.stage_index))?;
    if state.feats.cols() != encoding.dim() {
        return Err(Error::ShapeMismatch(format!(
            "stage features have {} columns, encoding produces {}",
            state.feats.cols(),
            encoding.dim()
        )));
    }

    let centers = fps(&state.coords, parents / 2)?;
    let center_coords: Vec<Point> = centers.iter().map(|&i| state.coords[i]).collect();
    let neighbors = knn(
        &center_coords,
        &state.coords,
        config.neighbors,
        config.clamp_k,
    )?;

    let mut pooled = Matrix::zeros(centers.len(), encoding.dim());
    for (j, &center) in centers.iter().enumerate() {
        let group = gather_group(center, neighbors.row(j), &state.coords, &state.feats)?;
        let mut group = group_normalize(&group, config.group_std);
        gpe_aggregate_in_place(
            &mut group.feats,
            &group.coords,
            &encoding,
            config.aggregation,
        )?;
        pooled
            .row_mut(j)
            .copy_from_slice(&neighbor_pool(&group.feats)?);
    }

    Ok(StageState {
        coords: center_coords,
        feats: pooled,
        stage_index: state.stage_index + 1,
    })
}

/// Runs every stage and concatenates the per-stage global mean + max pools
/// into one unit-length vector of `stages * 3 * refs_per_axis` values.
pub fn encode(cloud: &PointCloud, config: &EncoderConfig) -> Result<GlobalFeature> {
    config.validate()?;
    let required = config.min_points();
    if cloud.len() < required {
        return Err(Error::TooFewPoints {
            actual: cloud.len(),
            required,
            stages: config.stages,
        });
    }

    let mut state = StageState::initial(cloud, config)?;
    let mut values = Vec::with_capacity(config.global_dim());
    for _ in 0..config.stages {
        state = encode_stage(&state, config)?;
        let pooled = state
            .feats
            .mean_plus_max()
            .ok_or_else(|| Error::InvalidInput("stage produced no points".into()))?;
        values.extend(pooled);
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "encoding produced a non-finite value".into(),
        ));
    }
    let norm = l2_norm(&values);
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(GlobalFeature {
        values,
        source_label: cloud.label(),
        config_fingerprint: config.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        PointCloud::new(pts, Some(0)).unwrap()
    }

    #[test]
    fn stage_halves_points_and_keeps_width() {
        let cfg = EncoderConfig::default();
        let state = StageState::initial(&random_cloud(1024, 1), &cfg).unwrap();
        assert!(state.feats.as_slice().iter().all(|v| *v > 0.0 && *v <= 1.0));
        let next = encode_stage(&state, &cfg).unwrap();
        assert_eq!(next.coords.len(), 512);
        assert_eq!((next.feats.rows(), next.feats.cols()), (512, 27));
        assert_eq!(next.stage_index, 1);
    }

    #[test]
    fn two_point_stage_with_clamped_k() {
        let cfg = EncoderConfig {
            clamp_k: true,
            ..Default::default()
        };
        let cloud = PointCloud::new(vec![[0.0, 0.0, 0.0], [1.0, 0.5, 0.0]], None).unwrap();
        let state = StageState::initial(&cloud, &cfg).unwrap();
        let next = encode_stage(&state, &cfg).unwrap();
        assert_eq!(next.coords.len(), 1);
        assert!(next.feats.as_slice().iter().all(|v| v.is_finite()));

        let strict = EncoderConfig::default();
        assert!(encode_stage(&state, &strict).is_err());
    }

    #[test]
    fn odd_point_counts_floor() {
        let cfg = EncoderConfig {
            neighbors: 4,
            ..Default::default()
        };
        let state = StageState::initial(&random_cloud(11, 3), &cfg).unwrap();
        assert_eq!(encode_stage(&state, &cfg).unwrap().coords.len(), 5);
    }

    #[test]
    fn encode_shape_and_norm() {
        let cfg = EncoderConfig::default();
        let f = encode(&random_cloud(1024, 2), &cfg).unwrap();
        assert_eq!(f.len(), 108);
        assert!((l2_norm(&f.values) - 1.0).abs() < 1e-12);
        assert_eq!(f.source_label, Some(0));
        assert_eq!(f.config_fingerprint, cfg.fingerprint());
    }

    #[test]
    fn encode_rejects_tiny_clouds() {
        let cfg = EncoderConfig {
            clamp_k: true,
            ..Default::default()
        };
        let err = encode(&random_cloud(15, 4), &cfg).unwrap_err();
        assert_eq!(
            err,
            Error::TooFewPoints {
                actual: 15,
                required: 16,
                stages: 4
            }
        );
        assert!(encode(&random_cloud(16, 4), &cfg).is_ok());
    }
}
