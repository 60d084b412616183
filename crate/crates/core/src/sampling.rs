//! Farthest point sampling and exact k-nearest-neighbor search.
//!
//! Both routines break distance ties by lexicographic `(x, y, z)` order and
//! then by index, so their output depends only on the geometry of the cloud
//! and not on the order the points were supplied in (for clouds without
//! duplicate points).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::cloud::{centroid, Point};
use crate::error::{Error, Result};

#[inline]
pub fn squared_distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Lexicographic coordinate order, then index.
#[inline]
fn canonical_order(points: &[Point], a: usize, b: usize) -> Ordering {
    let (pa, pb) = (&points[a], &points[b]);
    pa[0]
        .total_cmp(&pb[0])
        .then(pa[1].total_cmp(&pb[1]))
        .then(pa[2].total_cmp(&pb[2]))
        .then(a.cmp(&b))
}

/// Greedy farthest point sampling of `m` indices.
///
/// The seed is the point farthest from the centroid. Every later pick
/// maximizes the distance to its nearest already-selected point. Among equal
/// candidates the lexicographically smallest point wins.
pub fn fps(points: &[Point], m: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "fps needs 1 <= m <= {n}, got m = {m}"
        )));
    }

    let c = centroid(points);
    let mut best = 0;
    let mut best_d = squared_distance(&points[0], &c);
    for i in 1..n {
        let d = squared_distance(&points[i], &c);
        if prefer(points, i, d, best, best_d) {
            best = i;
            best_d = d;
        }
    }

    let mut selected = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let mut min_d = vec![f64::INFINITY; n];
    let mut last = best;
    selected.push(last);
    taken[last] = true;

    while selected.len() < m {
        let anchor = points[last];
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..n {
            let d = squared_distance(&points[i], &anchor);
            if d < min_d[i] {
                min_d[i] = d;
            }
            if taken[i] {
                continue;
            }
            match pick {
                Some((j, dj)) if !prefer(points, i, min_d[i], j, dj) => {}
                _ => pick = Some((i, min_d[i])),
            }
        }
        // m <= n guarantees an untaken point remains.
        let (next, _) = pick.expect("untaken point");
        selected.push(next);
        taken[next] = true;
        last = next;
    }
    Ok(selected)
}

/// True when candidate `i` (score `di`) beats the incumbent `j` (score `dj`)
/// in a maximization.
#[inline]
fn prefer(points: &[Point], i: usize, di: f64, j: usize, dj: f64) -> bool {
    match di.total_cmp(&dj) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => canonical_order(points, i, j) == Ordering::Less,
    }
}

/// Row-major `queries x k` neighbor table.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl Neighbors {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn row(&self, q: usize) -> &[usize] {
        &self.indices[q * self.k..(q + 1) * self.k]
    }

    /// Euclidean distances matching [`Neighbors::row`].
    pub fn distances(&self, q: usize) -> &[f64] {
        &self.distances[q * self.k..(q + 1) * self.k]
    }
}

/// Exact k-NN of every query among `points`, rows sorted by ascending distance.
///
/// When `k` exceeds the number of points the call fails, unless `clamp_k` is
/// set, in which case every point is returned.
pub fn knn(queries: &[Point], points: &[Point], k: usize, clamp_k: bool) -> Result<Neighbors> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("knn over an empty point set".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("knn needs k >= 1".into()));
    }
    let k = if k > n {
        if !clamp_k {
            return Err(Error::InvalidArgument(format!(
                "k = {k} exceeds the {n} available points (enable clamp_k to allow)"
            )));
        }
        n
    } else {
        k
    };

    let mut indices = Vec::with_capacity(queries.len() * k);
    let mut distances = Vec::with_capacity(queries.len() * k);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for q in queries {
        scratch.clear();
        scratch.extend(
            points
                .iter()
                .enumerate()
                .map(|(i, p)| (squared_distance(q, p), i)),
        );
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.total_cmp(&b.0)
                .then_with(|| canonical_order(points, a.1, b.1))
        };
        if k < n {
            scratch.select_nth_unstable_by(k - 1, cmp);
        }
        let head = &mut scratch[..k];
        head.sort_unstable_by(cmp);
        for &(d, i) in head.iter() {
            indices.push(i);
            distances.push(libm::sqrt(d));
        }
    }
    Ok(Neighbors {
        k,
        indices,
        distances,
    })
}
