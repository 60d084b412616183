//! Latency and throughput measurement of encode + classify.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use pointgn_core::classifier::classify_values;
use pointgn_core::{encode, EncoderConfig, FeatureBank, PointCloud};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::pipeline::thread_pool;
use crate::report::{config_comment, config_json, with_ext, write_csv, write_jsonl};

/// Latency summary in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latency {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

impl Latency {
    /// Nearest-rank percentiles of `samples_ms`; panics when empty.
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        let mut s = samples_ms.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            p50_ms: rank(0.5),
            p95_ms: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub samples: usize,
    pub warmup: usize,
    pub bank_rows: usize,
    pub encode: Latency,
    pub classify: Latency,
    pub total: Latency,
    /// Samples per second with one worker.
    pub single_thread_throughput: f64,
    /// Samples per second with `threads` workers.
    pub multi_thread_throughput: f64,
    pub threads: usize,
}

impl BenchReport {
    /// p95 over p50 of the end-to-end latency.
    pub fn spread(&self) -> f64 {
        self.total.p95_ms / self.total.p50_ms
    }

    pub fn text(&self, config: &[(String, String)]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} timed samples after {} warmup, bank of {} rows",
            self.samples, self.warmup, self.bank_rows
        );
        for (name, l) in [
            ("encode", self.encode),
            ("classify", self.classify),
            ("total", self.total),
        ] {
            let _ = writeln!(
                s,
                "  {name:<9} mean {:>9.3} ms  p50 {:>9.3} ms  p95 {:>9.3} ms",
                l.mean_ms, l.p50_ms, l.p95_ms
            );
        }
        let _ = writeln!(s, "p95/p50 {:.3}", self.spread());
        let _ = writeln!(
            s,
            "throughput, 1 thread    {:.2} samples/s",
            self.single_thread_throughput
        );
        let _ = writeln!(
            s,
            "throughput, {} threads  {:.2} samples/s",
            self.threads, self.multi_thread_throughput
        );
        let _ = writeln!(s, "config:");
        for (k, v) in config {
            let _ = writeln!(s, "  {k}={v}");
        }
        s
    }

    pub fn write(&self, prefix: &Path, config: &[(String, String)]) -> Result<()> {
        write_csv(&with_ext(prefix, "csv"), &config_comment(config), |w| {
            w.write_record(["stage", "mean_ms", "p50_ms", "p95_ms"])?;
            for (name, l) in [
                ("encode", self.encode),
                ("classify", self.classify),
                ("total", self.total),
            ] {
                w.write_record([
                    name.to_string(),
                    l.mean_ms.to_string(),
                    l.p50_ms.to_string(),
                    l.p95_ms.to_string(),
                ])?;
            }
            Ok(())
        })?;
        let lat =
            |l: Latency| json!({"mean_ms": l.mean_ms, "p50_ms": l.p50_ms, "p95_ms": l.p95_ms});
        write_jsonl(
            &with_ext(prefix, "jsonl"),
            &[json!({
                "type": "bench",
                "samples": self.samples,
                "warmup": self.warmup,
                "bank_rows": self.bank_rows,
                "encode": lat(self.encode),
                "classify": lat(self.classify),
                "total": lat(self.total),
                "p95_over_p50": self.spread(),
                "single_thread_throughput": self.single_thread_throughput,
                "multi_thread_throughput": self.multi_thread_throughput,
                "threads": self.threads,
                "config": config_json(config),
            })],
        )
    }
}

/// Times `repeat` samples drawn cyclically from `clouds` after `warmup`
/// untimed ones, then measures throughput with one and with `threads`
/// workers (0 = one per core).
pub fn run_bench(
    clouds: &[PointCloud],
    bank: &FeatureBank,
    config: &EncoderConfig,
    gamma: f64,
    repeat: usize,
    warmup: usize,
    threads: usize,
) -> Result<BenchReport> {
    if repeat == 0 {
        return Err(Error::Config("repeat must be >= 1".into()));
    }
    if clouds.is_empty() {
        return Err(Error::Config("no clouds to benchmark".into()));
    }
    let step = |c: &PointCloud| -> Result<(f64, f64)> {
        let t0 = Instant::now();
        let f = encode(c, config)?;
        let t1 = Instant::now();
        let r = classify_values(&f.values, bank, gamma)?;
        std::hint::black_box(r.predicted_class);
        Ok((
            (t1 - t0).as_secs_f64() * 1e3,
            t1.elapsed().as_secs_f64() * 1e3,
        ))
    };
    let cycle = |i: usize| &clouds[i % clouds.len()];
    for i in 0..warmup {
        step(cycle(i))?;
    }
    let mut enc = Vec::with_capacity(repeat);
    let mut cls = Vec::with_capacity(repeat);
    for i in 0..repeat {
        let (e, c) = step(cycle(warmup + i))?;
        enc.push(e);
        cls.push(c);
    }
    let total: Vec<f64> = enc.iter().zip(&cls).map(|(e, c)| e + c).collect();
    let throughput = |workers: usize| -> Result<(f64, usize)> {
        let pool = thread_pool(workers)?;
        let t = Instant::now();
        pool.install(|| {
            (0..repeat)
                .into_par_iter()
                .try_for_each(|i| step(cycle(i)).map(|_| ()))
        })?;
        Ok((
            repeat as f64 / t.elapsed().as_secs_f64(),
            pool.current_num_threads(),
        ))
    };
    let (single, _) = throughput(1)?;
    let (multi, used) = throughput(threads)?;
    Ok(BenchReport {
        samples: repeat,
        warmup,
        bank_rows: bank.len(),
        encode: Latency::from_samples(&enc),
        classify: Latency::from_samples(&cls),
        total: Latency::from_samples(&total),
        single_thread_throughput: single,
        multi_thread_throughput: multi,
        threads: used,
    })
}
