//! Seeded synthetic shape families for tests and benchmarks that must run
//! without the real archives.

use pointgn_core::{Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::LabeledDataset;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFamily {
    /// Uniform samples on a sphere surface.
    Sphere,
    /// Uniform samples on the surface of an axis-aligned cube.
    Cube,
    /// Uniform samples on a flat disk in the xy-plane.
    Disk,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 3] = [Self::Sphere, Self::Cube, Self::Disk];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Cube => "cube",
            Self::Disk => "disk",
        }
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> Point {
        use std::f64::consts::TAU;
        match self {
            Self::Sphere => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi = rng.random_range(0.0..TAU);
                let r = (1.0 - z * z).sqrt();
                [r * phi.cos(), r * phi.sin(), z]
            }
            Self::Cube => {
                let face = rng.random_range(0..6usize);
                let u = rng.random_range(-1.0..=1.0);
                let v = rng.random_range(-1.0..=1.0);
                let s = if face % 2 == 0 { 1.0 } else { -1.0 };
                match face / 2 {
                    0 => [s, u, v],
                    1 => [u, s, v],
                    _ => [u, v, s],
                }
            }
            Self::Disk => {
                let r = rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..TAU);
                [r * phi.cos(), r * phi.sin(), 0.0]
            }
        }
    }
}

/// `n` points of one shape, randomly scaled and shifted.
pub fn synthetic_cloud(family: ShapeFamily, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = rng.random_range(0.5..2.0);
    let shift: [f64; 3] = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    (0..n)
        .map(|_| {
            let p = family.sample(&mut rng);
            [
                p[0] * scale + shift[0],
                p[1] * scale + shift[1],
                p[2] * scale + shift[2],
            ]
        })
        .collect()
}

/// `per_class` clouds of each family in `families`, labelled by position
/// in that list. Different `seed`s give disjoint draws.
pub fn synthetic_dataset(
    families: &[ShapeFamily],
    per_class: usize,
    points: usize,
    seed: u64,
    split_name: &str,
) -> Result<LabeledDataset> {
    let mut clouds = Vec::with_capacity(families.len() * per_class);
    for i in 0..per_class {
        for (label, &family) in families.iter().enumerate() {
            let cloud_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((i * families.len() + label) as u64);
            clouds.push(PointCloud::new(
                synthetic_cloud(family, points, cloud_seed),
                Some(label),
            )?);
        }
    }
    let names = families.iter().map(|f| f.name().to_string()).collect();
    LabeledDataset::new(clouds, names, split_name)
}
