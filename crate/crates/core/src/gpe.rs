//! Gaussian positional encoding.
//!
//! Every coordinate is compared against a fixed grid of V reference values
//! and mapped to `exp(-(c - v)^2 / (2 sigma^2))`. A point becomes a 3V
//! vector laid out reference-major: columns `3j, 3j+1, 3j+2` hold the x, y
//! and z responses to reference `j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cloud::Point;
use crate::config::AggregationMode;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `V` values evenly spaced on `[-1, 1]`; `[0]` when `V = 1`.
pub fn make_reference_grid(v: usize) -> Result<Vec<f64>> {
    match v {
        0 => Err(Error::InvalidArgument("reference grid needs V >= 1".into())),
        1 => Ok(vec![0.0]),
        _ => {
            let span = (v - 1) as f64;
            Ok((0..v).map(|j| -1.0 + 2.0 * j as f64 / span).collect())
        }
    }
}

/// A reference grid together with its Gaussian width.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEncoding {
    refs: Vec<f64>,
    sigma: f64,
    inv_two_sigma_sq: f64,
    ladder: Option<Ladder>,
}

/// Constants for walking an evenly spaced grid with ratios instead of one
/// `exp` per reference.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ladder {
    first: f64,
    step: f64,
    /// `exp(-2 a step^2)`: the factor by which consecutive ratios shrink.
    decay: f64,
}

impl GaussianEncoding {
    pub fn new(refs: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if refs.is_empty() || refs.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument(
                "reference grid must be non-empty and finite".into(),
            ));
        }
        Ok(Self {
            refs,
            sigma,
            inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
            ladder: None,
        })
    }

    /// Uniform grid of `refs_per_axis` values.
    pub fn uniform(refs_per_axis: usize, sigma: f64) -> Result<Self> {
        let mut enc = Self::new(make_reference_grid(refs_per_axis)?, sigma)?;
        if refs_per_axis > 1 {
            let step = 2.0 / (refs_per_axis - 1) as f64;
            enc.ladder = Some(Ladder {
                first: -1.0,
                step,
                decay: libm::exp(-2.0 * enc.inv_two_sigma_sq * step * step),
            });
        }
        Ok(enc)
    }

    pub fn refs(&self) -> &[f64] {
        &self.refs
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Output width, `3 * V`.
    pub fn dim(&self) -> usize {
        3 * self.refs.len()
    }

    #[inline]
    fn response(&self, c: f64, v: f64) -> f64 {
        let d = c - v;
        libm::exp(-d * d * self.inv_two_sigma_sq)
    }

    /// Writes the encoding of one point into `out` (length `3V`).
    pub fn encode_point_into(&self, p: &Point, out: &mut [f64]) {
        match self.ladder {
            Some(ladder) => {
                for (a, &c) in p.iter().enumerate() {
                    self.walk_axis(ladder, c, a, out);
                }
            }
            None => {
                for (j, &v) in self.refs.iter().enumerate() {
                    for a in 0..3 {
                        out[3 * j + a] = self.response(p[a], v);
                    }
                }
            }
        }
    }

    /// Responses of coordinate `c` to every reference, written to column
    /// `3j + axis`. The nearest reference is evaluated directly; neighbors
    /// follow from `g[j+1] / g[j] = exp(2 a step (c - v_j) - a step^2)`, a
    /// ratio that itself shrinks by `decay` per step. Every ratio applied
    /// while moving away from the nearest reference is at most 1.
    fn walk_axis(&self, ladder: Ladder, c: f64, axis: usize, out: &mut [f64]) {
        let v = self.refs.len();
        let a = self.inv_two_sigma_sq;
        let pos = (c - ladder.first) / ladder.step;
        let nearest = if pos <= 0.0 {
            0
        } else {
            (libm::round(pos) as usize).min(v - 1)
        };
        let offset = c - self.refs[nearest];
        let center = libm::exp(-offset * offset * a);
        out[3 * nearest + axis] = center;

        let base = a * ladder.step * ladder.step;
        let lean = 2.0 * a * ladder.step * offset;

        let mut g = center;
        let mut ratio = libm::exp(lean - base);
        for j in nearest + 1..v {
            g *= ratio;
            ratio *= ladder.decay;
            out[3 * j + axis] = g;
        }

        let mut g = center;
        let mut ratio = libm::exp(-lean - base);
        for j in (0..nearest).rev() {
            g *= ratio;
            ratio *= ladder.decay;
            out[3 * j + axis] = g;
        }
    }

    pub fn encode(&self, coords: &[Point]) -> Matrix {
        let mut m = Matrix::zeros(coords.len(), self.dim());
        for (i, p) in coords.iter().enumerate() {
            self.encode_point_into(p, m.row_mut(i));
        }
        m
    }
}

/// Encodes `coords` against `refs` with width `sigma`.
pub fn gpe_encode(coords: &[Point], refs: &[f64], sigma: f64) -> Result<Matrix> {
    Ok(GaussianEncoding::new(refs.to_vec(), sigma)?.encode(coords))
}

/// Folds the encoding of the (normalized) neighbor coordinates into the
/// gathered neighbor features. The result keeps the `K x D` shape.
pub fn gpe_aggregate(
    group_feats: &Matrix,
    group_coords: &[Point],
    encoding: &GaussianEncoding,
    mode: AggregationMode,
) -> Result<Matrix> {
    let mut out = group_feats.clone();
    gpe_aggregate_in_place(&mut out, group_coords, encoding, mode)?;
    Ok(out)
}

pub(crate) fn gpe_aggregate_in_place(
    feats: &mut Matrix,
    coords: &[Point],
    encoding: &GaussianEncoding,
    mode: AggregationMode,
) -> Result<()> {
    if feats.cols() != encoding.dim() || feats.rows() != coords.len() {
        return Err(Error::ShapeMismatch(format!(
            "features are {}x{}, coordinates give {}x{}",
            feats.rows(),
            feats.cols(),
            coords.len(),
            encoding.dim()
        )));
    }
    let mut enc = vec![0.0; encoding.dim()];
    for (i, p) in coords.iter().enumerate() {
        encoding.encode_point_into(p, &mut enc);
        let row = feats.row_mut(i);
        match mode {
            AggregationMode::PaperLiteral => {
                for (f, g) in row.iter_mut().zip(&enc) {
                    *f += g * g;
                }
            }
            AggregationMode::Multiplicative => {
                for (f, g) in row.iter_mut().zip(&enc) {
                    *f *= g;
                }
            }
        }
    }
    Ok(())
}

/// Column-wise mean plus column-wise max over the neighbor rows.
///
/// Bit-identical under any permutation of the rows (see
/// [`Matrix::mean_plus_max`]).
pub fn neighbor_pool(group_feats: &Matrix) -> Result<Vec<f64>> {
    group_feats
        .mean_plus_max()
        .ok_or_else(|| Error::InvalidArgument("cannot pool an empty group".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_grids() {
        assert_eq!(make_reference_grid(1).unwrap(), vec![0.0]);
        assert_eq!(make_reference_grid(2).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(make_reference_grid(3).unwrap(), vec![-1.0, 0.0, 1.0]);
        // arithmetic progression with step 0.25
        let expected: Vec<f64> = (0..9).map(|j| -1.0 + 0.25 * j as f64).collect();
        assert_eq!(make_reference_grid(9).unwrap(), expected);
        assert!(make_reference_grid(0).is_err());
    }

    #[test]
    fn coincidence_and_one_sigma_values() {
        let refs = [-1.0, 0.0, 1.0];
        let m = gpe_encode(&[[0.0, 1.0, 0.35]], &refs, 0.35).unwrap();
        assert_eq!(m.cols(), 9);
        // reference 1 (v = 0), x axis
        assert_eq!(m.get(0, 3), 1.0);
        // reference 2 (v = 1), y axis
        assert_eq!(m.get(0, 7), 1.0);
        // z = 0.35 against v = 0 is exactly one sigma away
        assert!((m.get(0, 5) - (-0.5f64).exp()).abs() < 1e-12);
        // x = 0 against v = 1: exp(-1 / 0.245), evaluated independently
        assert!((m.get(0, 6) - 0.016_879_884_148_789_895).abs() < 1e-15);
        let u = GaussianEncoding::uniform(3, 0.35)
            .unwrap()
            .encode(&[[0.0, 1.0, 0.35]]);
        assert!((u.get(0, 6) - 0.016_879_884_148_789_895).abs() < 1e-15);
        assert_eq!(u.get(0, 3), 1.0);
        assert_eq!(u.get(0, 7), 1.0);
    }

    #[test]
    fn ladder_matches_direct_evaluation() {
        for v in [2, 3, 9, 15, 33] {
            for sigma in [0.05, 0.2, 0.35, 1.0] {
                let fast = GaussianEncoding::uniform(v, sigma).unwrap();
                let slow = GaussianEncoding::new(make_reference_grid(v).unwrap(), sigma).unwrap();
                for i in -40..=40 {
                    let c = i as f64 * 0.0731;
                    let p = [c, -c, 0.5 * c];
                    let (a, b) = (fast.encode(&[p]), slow.encode(&[p]));
                    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                        assert!(
                            (x - y).abs() <= 1e-12 * y + 1e-300,
                            "{x} vs {y} (V={v}, sigma={sigma}, c={c})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn encode_rejects_bad_sigma() {
        assert!(gpe_encode(&[[0.0; 3]], &[0.0], 0.0).is_err());
        assert!(gpe_encode(&[[0.0; 3]], &[0.0], -0.1).is_err());
    }

    #[test]
    fn aggregate_identities() {
        let enc = GaussianEncoding::new(vec![-1.0, 0.0, 1.0], 0.35).unwrap();
        let coords = [[0.2, -0.4, 0.9], [0.0, 1.0, -1.0]];
        let g = enc.encode(&coords);

        let zeros = Matrix::zeros(2, 9);
        let out = gpe_aggregate(&zeros, &coords, &enc, AggregationMode::PaperLiteral).unwrap();
        for (o, e) in out.as_slice().iter().zip(g.as_slice()) {
            assert_eq!(*o, e * e);
        }

        // coordinates sitting on a reference value for every column
        let enc1 = GaussianEncoding::new(vec![0.5], 0.3).unwrap();
        let on_ref = [[0.5; 3]; 2];
        let f = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let out = gpe_aggregate(&f, &on_ref, &enc1, AggregationMode::PaperLiteral).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let out = gpe_aggregate(&f, &on_ref, &enc1, AggregationMode::Multiplicative).unwrap();
        assert_eq!(out, f);

        assert!(gpe_aggregate(
            &Matrix::zeros(2, 8),
            &coords,
            &enc,
            AggregationMode::PaperLiteral
        )
        .is_err());
        assert!(gpe_aggregate(
            &Matrix::zeros(3, 9),
            &coords,
            &enc,
            AggregationMode::PaperLiteral
        )
        .is_err());
    }

    #[test]
    fn pooling_examples() {
        let one = Matrix::from_rows(&[[0.25, -1.0]]).unwrap();
        assert_eq!(neighbor_pool(&one).unwrap(), vec![0.5, -2.0]);
        let col = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(neighbor_pool(&col).unwrap(), vec![1.5]);
        let same = Matrix::from_rows(&[[0.3, 0.7]; 5]).unwrap();
        let p = neighbor_pool(&same).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 1.4).abs() < 1e-12);
        assert!(neighbor_pool(&Matrix::zeros(0, 3)).is_err());
    }
}
