//! Brute-force reference implementations used by the test suites.
//!
//! These deliberately avoid the library's code paths: every quantity is
//! recomputed from scratch with plain loops.

#![allow(dead_code, clippy::needless_range_loop)]

use std::cmp::Ordering;

pub type P = [f64; 3];

pub fn sq(a: &P, b: &P) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn lex(points: &[P], a: usize, b: usize) -> Ordering {
    for axis in 0..3 {
        match points[a][axis].total_cmp(&points[b][axis]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.cmp(&b)
}

/// Index maximizing `score`, ties to the lexicographically smallest point.
fn best_by(points: &[P], candidates: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|&a, &b| {
        score(b)
            .total_cmp(&score(a))
            .then_with(|| lex(points, a, b))
    });
    sorted[0]
}

/// Greedy farthest point sampling recomputing every min-distance from scratch.
pub fn fps(points: &[P], m: usize) -> Vec<usize> {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let c = c.map(|v| v / n);
    let all: Vec<usize> = (0..points.len()).collect();
    let mut chosen = vec![best_by(points, &all, |i| sq(&points[i], &c))];
    while chosen.len() < m {
        let rest: Vec<usize> = all
            .iter()
            .copied()
            .filter(|i| !chosen.contains(i))
            .collect();
        let min_to_chosen = |i: usize| {
            chosen
                .iter()
                .map(|&j| sq(&points[i], &points[j]))
                .fold(f64::INFINITY, f64::min)
        };
        chosen.push(best_by(points, &rest, min_to_chosen));
    }
    chosen
}

/// Full sort of all points by (distance, x, y, z, index); first k.
pub fn knn(query: &P, points: &[P], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        sq(query, &points[a])
            .total_cmp(&sq(query, &points[b]))
            .then_with(|| lex(points, a, b))
    });
    idx.truncate(k);
    idx
}

/// Cosine-similarity cache logits, one scalar at a time.
pub fn cache_logits(
    query: &[f64],
    bank_rows: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    gamma: f64,
) -> Vec<f64> {
    let mut qn = 0.0;
    for v in query {
        qn += v * v;
    }
    let qn = qn.sqrt();
    let mut logits = vec![0.0; classes];
    for (row, &label) in bank_rows.iter().zip(labels) {
        let mut rn = 0.0;
        for v in row {
            rn += v * v;
        }
        let rn = rn.sqrt();
        let mut sim = 0.0;
        for i in 0..query.len() {
            sim += (query[i] / qn) * (row[i] / rn);
        }
        let w = (-gamma * (1.0 - sim)).exp();
        for (c, y) in logits.iter_mut().enumerate() {
            let one_hot = if c == label { 1.0 } else { 0.0 };
            *y += w * one_hot;
        }
    }
    logits
}

/// Scalar Gaussian response.
pub fn gaussian(c: f64, v: f64, sigma: f64) -> f64 {
    (-(c - v) * (c - v) / (2.0 * sigma * sigma)).exp()
}
