//! Binary bank layout.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "PGNB"
//! 4       4         version (u32 LE, currently 1)
//! 8       4         M, rows (u32 LE)
//! 12      4         C, classes (u32 LE)
//! 16      4         D, feature length (u32 LE)
//! 20      4*M*D     features, row-major f32 LE
//! ..      2*M       class index per row, u16 LE
//! ```
//!
//! Class names and the encoder fingerprint are not part of this blob; the
//! `pointgn` crate keeps them in a text sidecar.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: [u8; 4] = *b"PGNB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// Raw contents of a bank blob.
#[derive(Debug, Clone, PartialEq)]
pub struct BankBlob {
    pub num_classes: usize,
    /// `M x D`, each value exactly representable as `f32`.
    pub features: Matrix,
    pub labels: Vec<usize>,
}

pub fn encode_bank(features: &Matrix, labels: &[usize], num_classes: usize) -> Result<Vec<u8>> {
    let m = features.rows();
    let d = features.cols();
    if labels.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{m} feature rows but {} labels",
            labels.len()
        )));
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
    };
    if num_classes > usize::from(u16::MAX) + 1 {
        return Err(Error::Format(format!(
            "{num_classes} classes cannot be indexed by u16"
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m * d + 2 * m);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(m, "M")?.to_le_bytes());
    out.extend_from_slice(&to_u32(num_classes, "C")?.to_le_bytes());
    out.extend_from_slice(&to_u32(d, "D")?.to_le_bytes());
    for &v in features.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for &l in labels {
        if l >= num_classes {
            return Err(Error::Format(format!(
                "label {l} outside [0, {num_classes})"
            )));
        }
        out.extend_from_slice(&(l as u16).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_bank(bytes: &[u8]) -> Result<BankBlob> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a PGNB bank".into()));
    }
    let word =
        |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported bank version {version}")));
    }
    let m = word(8) as usize;
    let c = word(12) as usize;
    let d = word(16) as usize;
    let expected = m
        .checked_mul(d)
        .and_then(|md| md.checked_mul(4))
        .and_then(|f| f.checked_add(2 * m))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "bank declares M={m}, D={d} ({expected} bytes) but holds {} bytes",
            bytes.len()
        )));
    }
    let feat_end = HEADER_LEN + 4 * m * d;
    let values = bytes[HEADER_LEN..feat_end]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    let labels: Vec<usize> = bytes[feat_end..]
        .chunks_exact(2)
        .map(|b| usize::from(u16::from_le_bytes([b[0], b[1]])))
        .collect();
    if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| **l >= c) {
        return Err(Error::Format(format!(
            "row {i} has label {l}, outside [0, {c})"
        )));
    }
    Ok(BankBlob {
        num_classes: c,
        features: Matrix::from_vec(m, d, values)?,
        labels,
    })
}
