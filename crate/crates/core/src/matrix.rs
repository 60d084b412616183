use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Column-wise mean plus column-wise max over all rows.
    ///
    /// Column sums use the same fixed-point accumulation as
    /// [`order_free_sum`], so the result is bit-identical under any
    /// reordering of the rows. Returns `None` for a matrix without rows.
    pub fn mean_plus_max(&self) -> Option<Vec<f64>> {
        if self.rows == 0 {
            return None;
        }
        let mut max = self.row(0).to_vec();
        let mut amax = vec![0.0f64; self.cols];
        for r in self.iter_rows() {
            for ((m, a), &v) in max.iter_mut().zip(amax.iter_mut()).zip(r) {
                *m = m.max(v);
                *a = a.max(libm::fabs(v));
            }
        }
        let plan: Vec<FixedPoint> = amax
            .iter()
            .map(|&a| FixedPoint::new(a, self.rows))
            .collect();
        let mut acc = vec![0i64; self.cols];
        for r in self.iter_rows() {
            for ((s, p), &v) in acc.iter_mut().zip(&plan).zip(r) {
                *s += p.to_fixed(v);
            }
        }
        let n = self.rows as f64;
        Some(
            acc.iter()
                .zip(&plan)
                .zip(&max)
                .map(|((&s, p), m)| p.to_float(s) / n + m)
                .collect(),
        )
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Sum of finite values whose result does not depend on their order.
///
/// Every value is scaled by the same power of two, chosen from the largest
/// magnitude and the count so the total cannot overflow 63 bits, truncated
/// to an integer and accumulated exactly. Each term keeps about
/// `62 - log2(n)` bits relative to the largest magnitude, which is on par
/// with the rounding of an ordinary floating-point sum.
pub fn order_free_sum(values: &[f64]) -> f64 {
    let amax = values.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let plan = FixedPoint::new(amax, values.len());
    plan.to_float(values.iter().map(|&v| plan.to_fixed(v)).sum())
}

/// Shared power-of-two scale for one fixed-point accumulation.
#[derive(Clone, Copy)]
struct FixedPoint {
    shift: i32,
    scale: f64,
}

impl FixedPoint {
    fn new(amax: f64, count: usize) -> Self {
        if amax == 0.0 || !amax.is_finite() {
            return Self {
                shift: 0,
                scale: 1.0,
            };
        }
        let headroom = (usize::BITS - count.leading_zeros()) as i32;
        let (_, exp) = libm::frexp(amax);
        // amax < 2^exp, so every scaled term stays below 2^(62 - headroom).
        let shift = 62 - headroom - exp;
        let scale = if (-1022..=1023).contains(&shift) {
            libm::ldexp(1.0, shift)
        } else {
            0.0
        };
        Self { shift, scale }
    }

    #[inline]
    fn to_fixed(self, v: f64) -> i64 {
        if self.scale != 0.0 {
            (v * self.scale) as i64
        } else {
            libm::ldexp(v, self.shift) as i64
        }
    }

    #[inline]
    fn to_float(self, total: i64) -> f64 {
        libm::ldexp(total as f64, -self.shift)
    }
}
