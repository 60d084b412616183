use alloc::format;
use alloc::vec::Vec;

use crate::cloud::Point;
use crate::config::GroupStdMode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Added to the standard deviation before dividing.
pub const GROUP_EPSILON: f64 = 1e-5;

/// The K neighbors of one sampled center, with their coordinates and features.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedNeighborhood {
    pub center_index: usize,
    pub neighbor_indices: Vec<usize>,
    /// K x 3.
    pub coords: Vec<Point>,
    /// K x D.
    pub feats: Matrix,
}

/// Copies the rows named by `neighbor_idx` out of `coords` and `feats`.
pub fn gather_group(
    center_idx: usize,
    neighbor_idx: &[usize],
    coords: &[Point],
    feats: &Matrix,
) -> Result<GroupedNeighborhood> {
    if coords.len() != feats.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates but {} feature rows",
            coords.len(),
            feats.rows()
        )));
    }
    if neighbor_idx.is_empty() {
        return Err(Error::InvalidArgument(
            "a group needs at least one neighbor".into(),
        ));
    }
    if let Some(&bad) = neighbor_idx.iter().find(|&&i| i >= coords.len()) {
        return Err(Error::InvalidArgument(format!(
            "neighbor index {bad} out of range for {} points",
            coords.len()
        )));
    }
    let d = feats.cols();
    let mut data = Vec::with_capacity(neighbor_idx.len() * d);
    for &i in neighbor_idx {
        data.extend_from_slice(feats.row(i));
    }
    Ok(GroupedNeighborhood {
        center_index: center_idx,
        neighbor_indices: neighbor_idx.to_vec(),
        coords: neighbor_idx.iter().map(|&i| coords[i]).collect(),
        feats: Matrix::from_vec(neighbor_idx.len(), d, data)?,
    })
}

/// Standardizes coordinates and features within the group.
///
/// Each column has its mean over the K neighbors subtracted. The centered
/// block is then divided by its standard deviation plus [`GROUP_EPSILON`]:
/// a single scalar over all entries ([`GroupStdMode::Pooled`]) or one value
/// per column ([`GroupStdMode::PerDimension`]). Coordinates and features are
/// standardized independently of each other.
pub fn group_normalize(group: &GroupedNeighborhood, mode: GroupStdMode) -> GroupedNeighborhood {
    let mut coords: Vec<f64> = group.coords.iter().flatten().copied().collect();
    standardize(&mut coords, 3, mode);
    let coords = coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();

    let mut feats = group.feats.clone();
    let d = feats.cols();
    if d > 0 {
        standardize(feats.as_mut_slice(), d, mode);
    }

    GroupedNeighborhood {
        center_index: group.center_index,
        neighbor_indices: group.neighbor_indices.clone(),
        coords,
        feats,
    }
}

/// In-place standardization of a row-major block with `cols` columns.
pub(crate) fn standardize(block: &mut [f64], cols: usize, mode: GroupStdMode) {
    let rows = block.len() / cols;
    if rows == 0 {
        return;
    }
    let n = rows as f64;
    let mut mean = alloc::vec![0.0; cols];
    for r in block.chunks_exact(cols) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for r in block.chunks_exact_mut(cols) {
        for (v, m) in r.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    match mode {
        GroupStdMode::Pooled => {
            let ss: f64 = block.iter().map(|v| v * v).sum();
            let std = libm::sqrt(ss / block.len() as f64);
            let inv = 1.0 / (std + GROUP_EPSILON);
            block.iter_mut().for_each(|v| *v *= inv);
        }
        GroupStdMode::PerDimension => {
            let mut ss = alloc::vec![0.0; cols];
            for r in block.chunks_exact(cols) {
                for (s, v) in ss.iter_mut().zip(r) {
                    *s += v * v;
                }
            }
            let inv: Vec<f64> = ss
                .iter()
                .map(|s| 1.0 / (libm::sqrt(s / n) + GROUP_EPSILON))
                .collect();
            for r in block.chunks_exact_mut(cols) {
                for (v, i) in r.iter_mut().zip(&inv) {
                    *v *= i;
                }
            }
        }
    }
}
