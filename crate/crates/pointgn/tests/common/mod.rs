#![allow(dead_code)]

use std::fs;
use std::path::Path;

use pointgn::dataset::write_h5_clouds;
use pointgn::synthetic::{synthetic_dataset, ShapeFamily};
use pointgn_core::PointCloud;

/// A ModelNet40-layout directory of synthetic shapes: train shards split in
/// two files, one test file, three classes.
pub fn modelnet_dir(
    dir: &Path,
    train_per_class: usize,
    test_per_class: usize,
    points: usize,
) -> (Vec<PointCloud>, Vec<PointCloud>) {
    let train = synthetic_dataset(&ShapeFamily::ALL, train_per_class, points, 11, "train")
        .unwrap()
        .clouds;
    let test = synthetic_dataset(&ShapeFamily::ALL, test_per_class, points, 22, "test")
        .unwrap()
        .clouds;
    let half = train.len() / 2;
    write_h5_clouds(&dir.join("ply_data_train0.h5"), &train[..half], true).unwrap();
    write_h5_clouds(&dir.join("ply_data_train1.h5"), &train[half..], true).unwrap();
    write_h5_clouds(&dir.join("ply_data_test0.h5"), &test, true).unwrap();
    fs::write(dir.join("shape_names.txt"), "sphere\ncube\ndisk\n").unwrap();
    (train, test)
}

/// Rounds coordinates to f32 as the archives store them.
pub fn as_stored(clouds: &[PointCloud]) -> Vec<Vec<[f64; 3]>> {
    clouds
        .iter()
        .map(|c| {
            c.points()
                .iter()
                .map(|p| p.map(|v| f64::from(v as f32)))
                .collect()
        })
        .collect()
}
