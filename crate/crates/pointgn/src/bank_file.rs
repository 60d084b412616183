//! Bank files on disk: the binary `PGNB` blob plus a `.meta` text sidecar
//! holding class names, the encoder fingerprint and the encoder settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pointgn_core::bank_codec::{decode_bank, encode_bank};
use pointgn_core::{EncoderConfig, FeatureBank};

use crate::error::{Error, Result};

/// `bank.pgnb` -> `bank.pgnb.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

#[derive(Debug, Clone)]
pub struct LoadedBank {
    pub bank: FeatureBank,
    /// Encoder settings recorded at build time, `key -> value`.
    pub encoder: BTreeMap<String, String>,
}

pub fn write_bank(path: &Path, bank: &FeatureBank, config: &EncoderConfig) -> Result<()> {
    let blob = encode_bank(bank.features(), bank.labels(), bank.num_classes())?;
    fs::write(path, blob).map_err(|e| Error::io(path, e))?;
    let mut meta = String::from("format=pgnb-sidecar\n");
    meta += &format!("fingerprint={:016x}\n", bank.fingerprint());
    for (i, name) in bank.class_names().iter().enumerate() {
        if name.contains('\n') {
            return Err(Error::Config(format!(
                "class name {name:?} contains a newline"
            )));
        }
        meta += &format!("class.{i}={name}\n");
    }
    for line in config.canonical().lines() {
        meta += &format!("encoder.{line}\n");
    }
    let side = sidecar_path(path);
    fs::write(&side, meta).map_err(|e| Error::io(&side, e))
}

pub fn read_bank(path: &Path) -> Result<LoadedBank> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let blob = decode_bank(&bytes).map_err(|e| Error::ingest(path, e.to_string()))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let bad = |line: usize, message: String| Error::Parse {
        path: side.clone(),
        line,
        message,
    };
    let mut fingerprint = None;
    let mut names = BTreeMap::new();
    let mut encoder = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(i + 1, "expected key=value".into()))?;
        if key == "fingerprint" {
            let fp = u64::from_str_radix(value, 16)
                .map_err(|_| bad(i + 1, format!("bad fingerprint {value:?}")))?;
            fingerprint = Some(fp);
        } else if let Some(idx) = key.strip_prefix("class.") {
            let idx: usize = idx
                .parse()
                .map_err(|_| bad(i + 1, format!("bad class index {idx:?}")))?;
            names.insert(idx, value.to_string());
        } else if let Some(k) = key.strip_prefix("encoder.") {
            encoder.insert(k.to_string(), value.to_string());
        }
    }
    let fingerprint = fingerprint.ok_or_else(|| bad(0, "no fingerprint line".into()))?;
    let class_names: Vec<String> = (0..blob.num_classes)
        .map(|c| {
            names
                .remove(&c)
                .ok_or_else(|| bad(0, format!("no name for class {c}")))
        })
        .collect::<Result<_>>()?;
    if let Some((extra, _)) = names.into_iter().next() {
        return Err(bad(
            0,
            format!(
                "class {extra} is beyond the bank's {} classes",
                blob.num_classes
            ),
        ));
    }
    let bank = FeatureBank::from_parts(blob.features, blob.labels, class_names, fingerprint)
        .map_err(|e| Error::ingest(path, e.to_string()))?;
    Ok(LoadedBank { bank, encoder })
}
