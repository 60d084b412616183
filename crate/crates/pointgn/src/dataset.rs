//! Loading the benchmark archives and single-cloud text files.

use std::fs;
use std::path::{Path, PathBuf};

use pointgn_core::{
    make_fewshot_episodes, sample_points, FewShotEpisode, Point, PointCloud, SampleStrategy,
};

use crate::error::{Error, Result};
use crate::hdf5::{DataType, H5File, H5Writer, WriteData};

pub const MODELNET40_HINT: &str = "Download modelnet40_ply_hdf5_2048.zip (the 2048-point HDF5 release of \
ModelNet40) and unpack it so that the directory holds ply_data_train*.h5, ply_data_test*.h5 and shape_names.txt.";

pub const SCANOBJECTNN_HINT: &str = "Request the ScanObjectNN h5_files archive from \
https://hkust-vgd.github.io/scanobjectnn/ and unpack it so that the directory holds main_split/ and main_split_nobg/.";

/// Class names of the ScanObjectNN archives, in label order.
pub const SCANOBJECTNN_CLASSES: [&str; 15] = [
    "bag", "bin", "box", "cabinet", "chair", "desk", "display", "door", "shelf", "table", "bed",
    "pillow", "sink", "sofa", "toilet",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// Every cloud carries `Some(label)` with `label < class_names.len()`.
    pub clouds: Vec<PointCloud>,
    pub class_names: Vec<String>,
    pub split_name: String,
}

impl LabeledDataset {
    pub fn new(
        clouds: Vec<PointCloud>,
        class_names: Vec<String>,
        split_name: impl Into<String>,
    ) -> Result<Self> {
        let c = class_names.len();
        for (i, cloud) in clouds.iter().enumerate() {
            match cloud.label() {
                Some(l) if l < c => {}
                other => {
                    return Err(Error::Config(format!(
                        "cloud {i} has label {other:?}, expected one in [0, {c})"
                    )))
                }
            }
        }
        Ok(Self {
            clouds,
            class_names,
            split_name: split_name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.clouds.iter().map(|c| c.label().unwrap_or(0)).collect()
    }

    /// Keeps at most `n` clouds, evenly spaced over the split.
    pub fn limit(&self, n: usize) -> Self {
        let len = self.len();
        if n >= len {
            return self.clone();
        }
        let clouds = (0..n).map(|i| self.clouds[i * len / n].clone()).collect();
        Self {
            clouds,
            class_names: self.class_names.clone(),
            split_name: format!("{}[limit {n}]", self.split_name),
        }
    }

    /// Both splits back to back, e.g. as a pool for few-shot episodes.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.class_names != other.class_names {
            return Err(Error::Config(
                "cannot join splits with different class lists".into(),
            ));
        }
        let mut clouds = self.clouds.clone();
        clouds.extend(other.clouds.iter().cloned());
        Ok(Self {
            clouds,
            class_names: self.class_names.clone(),
            split_name: format!("{}+{}", self.split_name, other.split_name),
        })
    }

    /// Few-shot episodes over this dataset's labels.
    pub fn fewshot_episodes(
        &self,
        way: usize,
        shot: usize,
        queries_per_class: usize,
        runs: usize,
        seed: u64,
    ) -> Result<Vec<FewShotEpisode>> {
        make_fewshot_episodes(
            &self.labels(),
            self.num_classes(),
            way,
            shot,
            queries_per_class,
            runs,
            seed,
        )
        .map_err(|e| match e {
            pointgn_core::Error::InsufficientSamples {
                class,
                available,
                required,
            } => Error::Config(format!(
                "class {class} ({}) has {available} samples, episodes need {required}",
                self.class_names[class]
            )),
            e => e.into(),
        })
    }
}

/// How many points to keep from every archived cloud, and how to pick them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub points: usize,
    pub strategy: SampleStrategy,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            points: 1024,
            strategy: SampleStrategy::FirstN,
            seed: 0,
        }
    }
}

impl Sampling {
    /// Seed of cloud `index` in split `salt`, so random draws differ between
    /// clouds yet do not depend on load order.
    fn cloud_seed(&self, salt: u64, index: usize) -> u64 {
        self.seed ^ (index as u64 ^ salt << 40).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanObjectNNSplit {
    ObjBg,
    ObjOnly,
    PbT50Rs,
}

impl std::str::FromStr for ScanObjectNNSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "OBJ-BG" => Ok(Self::ObjBg),
            "OBJ-ONLY" => Ok(Self::ObjOnly),
            "PB-T50-RS" => Ok(Self::PbT50Rs),
            other => Err(Error::Config(format!(
                "unknown ScanObjectNN split {other:?} (expected OBJ-BG, OBJ-ONLY or PB-T50-RS)"
            ))),
        }
    }
}

impl std::fmt::Display for ScanObjectNNSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ObjBg => "OBJ-BG",
            Self::ObjOnly => "OBJ-ONLY",
            Self::PbT50Rs => "PB-T50-RS",
        })
    }
}

impl ScanObjectNNSplit {
    /// Sub-directory and train/test file names of the split.
    pub fn files(self) -> (&'static str, &'static str, &'static str) {
        match self {
            Self::ObjBg => (
                "main_split",
                "training_objectdataset.h5",
                "test_objectdataset.h5",
            ),
            Self::ObjOnly => (
                "main_split_nobg",
                "training_objectdataset.h5",
                "test_objectdataset.h5",
            ),
            Self::PbT50Rs => (
                "main_split",
                "training_objectdataset_augmentedrot_scale75.h5",
                "test_objectdataset_augmentedrot_scale75.h5",
            ),
        }
    }
}

fn require_dir(dir: &Path, hint: &str) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::MissingDataset {
            path: dir.to_path_buf(),
            hint: hint.to_string(),
        })
    }
}

/// Loads the train and test splits of the ModelNet40 HDF5 release.
///
/// `dir` may be the unpacked `modelnet40_ply_hdf5_2048` directory or its
/// parent. Shards are read in numeric order (`ply_data_train0.h5`,
/// `ply_data_train1.h5`, ...).
pub fn load_modelnet40(
    dir: &Path,
    sampling: &Sampling,
) -> Result<(LabeledDataset, LabeledDataset)> {
    require_dir(dir, MODELNET40_HINT)?;
    let nested = dir.join("modelnet40_ply_hdf5_2048");
    let dir = if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    };
    let names_path = dir.join("shape_names.txt");
    let text = fs::read_to_string(&names_path).map_err(|e| Error::io(&names_path, e))?;
    let class_names: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if class_names.len() < 2 {
        return Err(Error::ingest(
            &names_path,
            format!("lists {} classes", class_names.len()),
        ));
    }
    let mut out = Vec::new();
    for (salt, split) in [(0, "train"), (1, "test")] {
        let shards = modelnet_shards(&dir, split)?;
        let mut clouds = Vec::new();
        for shard in &shards {
            read_h5_clouds(shard, class_names.len(), sampling, salt, &mut clouds)?;
        }
        out.push(LabeledDataset::new(
            clouds,
            class_names.clone(),
            format!("modelnet40/{split}"),
        )?);
    }
    let test = out.pop().unwrap();
    Ok((out.pop().unwrap(), test))
}

fn modelnet_shards(dir: &Path, split: &str) -> Result<Vec<PathBuf>> {
    let prefix = format!("ply_data_{split}");
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut shards = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(n) = name
            .strip_prefix(&prefix)
            .and_then(|r| r.strip_suffix(".h5"))
            .and_then(|n| n.parse::<u32>().ok())
        else {
            continue;
        };
        shards.push((n, entry.path()));
    }
    if shards.is_empty() {
        return Err(Error::ingest(
            dir,
            format!("no {prefix}<n>.h5 files found\n{MODELNET40_HINT}"),
        ));
    }
    shards.sort();
    Ok(shards.into_iter().map(|(_, p)| p).collect())
}

/// Loads one ScanObjectNN split. `dir` may be the unpacked `h5_files`
/// directory or its parent.
pub fn load_scanobjectnn(
    dir: &Path,
    split: ScanObjectNNSplit,
    sampling: &Sampling,
) -> Result<(LabeledDataset, LabeledDataset)> {
    require_dir(dir, SCANOBJECTNN_HINT)?;
    let nested = dir.join("h5_files");
    let dir = if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    };
    let (sub, train_file, test_file) = split.files();
    let class_names: Vec<String> = SCANOBJECTNN_CLASSES.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for (salt, (file, name)) in [(train_file, "train"), (test_file, "test")]
        .into_iter()
        .enumerate()
    {
        let path = dir.join(sub).join(file);
        if !path.is_file() {
            return Err(Error::ingest(
                &path,
                format!("missing split file\n{SCANOBJECTNN_HINT}"),
            ));
        }
        let mut clouds = Vec::new();
        read_h5_clouds(&path, class_names.len(), sampling, salt as u64, &mut clouds)?;
        out.push(LabeledDataset::new(
            clouds,
            class_names.clone(),
            format!("scanobjectnn/{split}/{name}"),
        )?);
    }
    let test = out.pop().unwrap();
    Ok((out.pop().unwrap(), test))
}

/// Appends the clouds of one file holding `data` (B x N x 3 floats) and
/// `label` (B or B x 1 integers).
fn read_h5_clouds(
    path: &Path,
    num_classes: usize,
    sampling: &Sampling,
    salt: u64,
    out: &mut Vec<PointCloud>,
) -> Result<()> {
    let h5 = |source| Error::Hdf5 {
        path: path.to_path_buf(),
        source,
    };
    let file = H5File::open(path).map_err(h5)?;
    let data = file.dataset("data").map_err(h5)?;
    let label = file.dataset("label").map_err(h5)?;
    let &[b, n, 3] = data.shape() else {
        return Err(Error::ingest(
            path,
            format!("\"data\" has shape {:?}, expected B x N x 3", data.shape()),
        ));
    };
    if !matches!(data.dtype(), DataType::Float { .. }) {
        return Err(Error::ingest(path, "\"data\" is not a float dataset"));
    }
    let label_ok = match label.shape() {
        [lb] | [lb, 1] => *lb == b,
        _ => false,
    };
    if !label_ok {
        return Err(Error::ingest(
            path,
            format!(
                "\"label\" has shape {:?}, expected [{b}] or [{b}, 1]",
                label.shape()
            ),
        ));
    }
    let (b, n) = (b as usize, n as usize);
    if n < sampling.points {
        return Err(Error::ingest(
            path,
            format!("clouds hold {n} points, {} requested", sampling.points),
        ));
    }
    let coords = data.read_f32().map_err(h5)?;
    let labels = label.read_i64().map_err(h5)?;
    for (i, &l) in labels.iter().enumerate() {
        if l < 0 || l as usize >= num_classes {
            return Err(Error::ingest(
                path,
                format!("sample {i} has label {l}, outside [0, {num_classes})"),
            ));
        }
    }
    for i in 0..b {
        let points: Vec<Point> = coords[i * n * 3..(i + 1) * n * 3]
            .chunks_exact(3)
            .map(|p| [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])])
            .collect();
        let index = out.len();
        let cloud = PointCloud::new(points, Some(labels[i] as usize))
            .map_err(|e| Error::ingest(path, format!("sample {i}: {e}")))?;
        let cloud = sample_points(
            &cloud,
            sampling.points,
            sampling.strategy,
            sampling.cloud_seed(salt, index),
        )?;
        out.push(cloud);
    }
    Ok(())
}

/// Writes clouds in the archive layout: `data` as B x N x 3 float32 and
/// `label` as B x 1 uint8 (`label_column`) or B int64. All clouds must have
/// the same size.
pub fn write_h5_clouds(path: &Path, clouds: &[PointCloud], label_column: bool) -> Result<()> {
    let n = clouds.first().map_or(0, PointCloud::len);
    if clouds.iter().any(|c| c.len() != n) {
        return Err(Error::Config(
            "all clouds in one file must have the same point count".into(),
        ));
    }
    let data: Vec<f32> = clouds
        .iter()
        .flat_map(|c| c.points().iter().flat_map(|p| p.map(|v| v as f32)))
        .collect();
    let labels: Vec<usize> = clouds.iter().map(|c| c.label().unwrap_or(0)).collect();
    let b = clouds.len() as u64;
    let mut w = H5Writer::new();
    w.add("data", &[b, n as u64, 3], WriteData::F32(data));
    if label_column {
        if labels.iter().any(|&l| l > 255) {
            return Err(Error::Config("uint8 labels cannot exceed 255".into()));
        }
        w.add(
            "label",
            &[b, 1],
            WriteData::U8(labels.iter().map(|&l| l as u8).collect()),
        );
    } else {
        w.add(
            "label",
            &[b],
            WriteData::I64(labels.iter().map(|&l| l as i64).collect()),
        );
    }
    w.write(path).map_err(|source| Error::Hdf5 {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads whitespace-separated `x y z` lines. Blank lines and lines starting
/// with `#` are skipped.
pub fn load_xyz_text(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses XYZ text; errors carry the 1-based line number.
pub fn parse_xyz(text: &str) -> std::result::Result<PointCloud, (usize, String)> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err((
                i + 1,
                format!("expected 3 coordinates, found {}", fields.len()),
            ));
        }
        let mut p = [0.0f64; 3];
        for (slot, f) in p.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| (i + 1, format!("{f:?} is not a number")))?;
            if !slot.is_finite() {
                return Err((i + 1, format!("{f:?} is not finite")));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err((0, "no points".into()));
    }
    PointCloud::new(points, None).map_err(|e| (0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_examples() {
        assert_eq!(parse_xyz("0 0 0\n1 0 0\n").unwrap().len(), 2);
        let c = parse_xyz("# comment\n0 0 1\n").unwrap();
        assert_eq!(c.points(), &[[0.0, 0.0, 1.0]]);
        assert_eq!(parse_xyz("0 0\n").unwrap_err().0, 1);
        assert_eq!(parse_xyz("\n1 2 3\n1 2 x\n").unwrap_err().0, 3);
        assert_eq!(parse_xyz("1 2 inf\n").unwrap_err().0, 1);
    }

    #[test]
    fn split_names() {
        for s in ["OBJ-BG", "OBJ-ONLY", "PB-T50-RS"] {
            assert_eq!(s.parse::<ScanObjectNNSplit>().unwrap().to_string(), s);
        }
        assert!("bogus".parse::<ScanObjectNNSplit>().is_err());
    }

    #[test]
    fn limit_is_evenly_spaced() {
        let clouds = (0..10)
            .map(|i| PointCloud::new(vec![[i as f64, 0.0, 0.0]], Some(i % 2)).unwrap())
            .collect();
        let d = LabeledDataset::new(clouds, vec!["a".into(), "b".into()], "t").unwrap();
        let firsts: Vec<f64> = d.limit(4).clouds.iter().map(|c| c.points()[0][0]).collect();
        assert_eq!(firsts, [0.0, 2.0, 5.0, 7.0]);
        assert_eq!(d.limit(20).len(), 10);
    }
}
