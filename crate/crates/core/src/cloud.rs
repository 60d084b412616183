use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// An unordered set of 3D points with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    label: Option<usize>,
}

impl PointCloud {
    /// Fails on an empty point list or any non-finite coordinate.
    pub fn new(points: Vec<Point>, label: Option<usize>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point cloud is empty".into()));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { points, label })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let n = points.len() as f64;
    c.map(|v| v / n)
}

/// Centers the cloud on its centroid and scales it so the farthest point has
/// unit norm. A cloud made of one repeated point collapses to the origin.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> Result<PointCloud> {
    let c = centroid(&cloud.points);
    let mut points: Vec<Point> = cloud
        .points
        .iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let max_norm = points
        .iter()
        .map(|p| libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]))
        .fold(0.0, f64::max);
    // Residue left by averaging identical points is rounding noise, not extent.
    let scale_floor = 1e-12 * (1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if max_norm <= scale_floor {
        points.iter_mut().for_each(|p| *p = [0.0; 3]);
    } else {
        for p in &mut points {
            for v in p.iter_mut() {
                *v /= max_norm;
            }
        }
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "normalization overflowed; coordinates are too large".into(),
        ));
    }
    Ok(PointCloud {
        points,
        label: cloud.label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleStrategy {
    /// Keep the first `n` rows.
    #[default]
    FirstN,
    /// `n` distinct rows drawn with a seeded generator, kept in file order.
    Random,
}

impl core::str::FromStr for SampleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-n" => Ok(Self::FirstN),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown sample strategy {other:?} (expected first-n or random)"
            ))),
        }
    }
}

impl core::fmt::Display for SampleStrategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Self::FirstN => "first-n",
            Self::Random => "random",
        })
    }
}

pub fn sample_points(
    cloud: &PointCloud,
    n: usize,
    strategy: SampleStrategy,
    seed: u64,
) -> Result<PointCloud> {
    if n == 0 || n > cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} points from a cloud of {}",
            cloud.len()
        )));
    }
    let points = match strategy {
        SampleStrategy::FirstN => cloud.points[..n].to_vec(),
        SampleStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), n).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| cloud.points[i]).collect()
        }
    };
    Ok(PointCloud {
        points,
        label: cloud.label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: Point, b: Point) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn two_point_cloud_normalizes_to_unit_pair() {
        let c = PointCloud::new(vec![[2.0, 0.0, 0.0], [0.0, 0.0, 0.0]], Some(3)).unwrap();
        let n = normalize_unit_sphere(&c).unwrap();
        assert!(close(n.points()[0], [1.0, 0.0, 0.0]));
        assert!(close(n.points()[1], [-1.0, 0.0, 0.0]));
        assert_eq!(n.label(), Some(3));
    }

    #[test]
    fn single_point_maps_to_origin() {
        let c = PointCloud::new(vec![[0.0, 0.0, 0.0]], None).unwrap();
        assert_eq!(normalize_unit_sphere(&c).unwrap().points(), &[[0.0; 3]]);
        let c = PointCloud::new(vec![[0.1, 0.7, -3.3]; 7], None).unwrap();
        assert!(normalize_unit_sphere(&c)
            .unwrap()
            .points()
            .iter()
            .all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn tetrahedron_corner_matches_direct_arithmetic() {
        let pts = vec![
            [1.0, 1.0, 1.0],
            [3.0, 1.0, 1.0],
            [1.0, 3.0, 1.0],
            [1.0, 1.0, 3.0],
        ];
        let c = PointCloud::new(pts.clone(), None).unwrap();
        let n = normalize_unit_sphere(&c).unwrap();
        // centroid (1.5,1.5,1.5); offsets (-.5,-.5,-.5) norm sqrt(.75),
        // (1.5,-.5,-.5) norm sqrt(2.75) is the max.
        let s = 2.75f64.sqrt();
        let expected = [
            [-0.5 / s, -0.5 / s, -0.5 / s],
            [1.5 / s, -0.5 / s, -0.5 / s],
            [-0.5 / s, 1.5 / s, -0.5 / s],
            [-0.5 / s, -0.5 / s, 1.5 / s],
        ];
        for (a, b) in n.points().iter().zip(expected) {
            assert!(close(*a, b), "{a:?} vs {b:?}");
        }
        let cen = centroid(n.points());
        assert!(cen.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            PointCloud::new(vec![[0.0, f64::NAN, 0.0]], None),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            PointCloud::new(vec![[f64::INFINITY, 0.0, 0.0]], None),
            Err(Error::InvalidInput(_))
        ));
        assert!(PointCloud::new(vec![], None).is_err());
    }

    #[test]
    fn sampling_first_n_and_random() {
        let pts: Vec<Point> = (0..5).map(|i| [i as f64, 0.0, 0.0]).collect();
        let c = PointCloud::new(pts.clone(), Some(1)).unwrap();
        let s = sample_points(&c, 2, SampleStrategy::FirstN, 0).unwrap();
        assert_eq!(s.points(), &pts[..2]);
        assert_eq!(s.label(), Some(1));

        assert_eq!(sample_points(&c, 5, SampleStrategy::FirstN, 0).unwrap(), c);
        let all = sample_points(&c, 5, SampleStrategy::Random, 9).unwrap();
        assert_eq!(all.points(), c.points());

        let a = sample_points(&c, 3, SampleStrategy::Random, 42).unwrap();
        let b = sample_points(&c, 3, SampleStrategy::Random, 42).unwrap();
        assert_eq!(a, b);
        assert!(sample_points(&c, 6, SampleStrategy::FirstN, 0).is_err());
    }
}
