//! Rough single-thread timing of `encode` on random 1024-point clouds.

use std::time::Instant;

use pointgn_core::{encode, EncoderConfig, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = EncoderConfig::default();
    let clouds: Vec<PointCloud> = (0..std::env::args().nth(1).map_or(20, |a| a.parse().unwrap()))
        .map(|_| {
            let pts = (0..1024)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect();
            PointCloud::new(pts, None).unwrap()
        })
        .collect();
    let start = Instant::now();
    for c in &clouds {
        encode(c, &cfg).unwrap();
    }
    let per = start.elapsed().as_secs_f64() / clouds.len() as f64;
    println!("{:.2} ms per cloud ({:.1} clouds/s)", per * 1e3, 1.0 / per);
}
