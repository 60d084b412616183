//! Rendering reports as text, CSV and JSON lines. CSV files start with
//! `# key=value` lines echoing the resolved settings.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::pipeline::{EvalReport, FewShotReport};

/// `prefix` with `ext` appended: `runs/eval` -> `runs/eval.csv`.
pub fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn config_comment(config: &[(String, String)]) -> String {
    config.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

pub fn config_json(config: &[(String, String)]) -> Value {
    Value::Object(
        config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect(),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `comment` then the CSV rows produced by `fill`.
pub fn write_csv<F>(path: &Path, comment: &str, fill: F) -> Result<()>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = comment.as_bytes().to_vec();
    let mut body = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut body);
        fill(&mut w).map_err(|e| Error::Eval(format!("csv: {e}")))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    buf.extend_from_slice(&body);
    write_text(path, &String::from_utf8_lossy(&buf))
}

pub fn write_jsonl(path: &Path, lines: &[Value]) -> Result<()> {
    let mut buf = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut buf, l).map_err(|e| Error::Eval(format!("json: {e}")))?;
        buf.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    write_text(path, &String::from_utf8_lossy(&buf))
}

impl EvalReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        let cm = &self.confusion;
        let _ = writeln!(
            s,
            "overall accuracy   {:.4} ({}/{})",
            self.overall_accuracy,
            cm.trace(),
            cm.total()
        );
        let _ = writeln!(s, "mean class acc.    {:.4}", self.mean_class_accuracy);
        let _ = writeln!(s, "gamma              {}", self.gamma);
        let _ = writeln!(
            s,
            "time               {:.2} s (encode {:.2} s, classify {:.2} s), {:.1} samples/s on {} threads",
            self.wall_time_s, self.encode_time_s, self.classify_time_s, self.throughput, self.threads
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(s, "per class:");
        for (c, name) in self.class_names.iter().enumerate() {
            let count: u64 = cm.row(c).iter().sum();
            let _ = writeln!(
                s,
                "  {c:>3} {name:<16} {:>5}/{:<5} {:.4}",
                cm.get(c, c),
                count,
                self.per_class_accuracy[c]
            );
        }
        let _ = writeln!(s, "config:");
        for (k, v) in &self.config_echo {
            let _ = writeln!(s, "  {k}={v}");
        }
        s
    }

    pub fn summary_json(&self) -> Value {
        let rows: Vec<&[u64]> = (0..self.confusion.classes())
            .map(|c| self.confusion.row(c))
            .collect();
        json!({
            "type": "summary",
            "overall_accuracy": self.overall_accuracy,
            "mean_class_accuracy": self.mean_class_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "class_names": self.class_names,
            "confusion": rows,
            "samples": self.confusion.total(),
            "gamma": self.gamma,
            "wall_time_s": self.wall_time_s,
            "encode_time_s": self.encode_time_s,
            "classify_time_s": self.classify_time_s,
            "throughput": self.throughput,
            "threads": self.threads,
            "warnings": self.warnings,
            "config": config_json(&self.config_echo),
        })
    }

    /// One line per test sample, then the summary line.
    pub fn jsonl(&self) -> Vec<Value> {
        let mut lines: Vec<Value> = self
            .predictions
            .iter()
            .map(|p| {
                json!({
                    "type": "prediction",
                    "index": p.index,
                    "label": p.label,
                    "predicted": p.predicted,
                    "correct": p.label == p.predicted,
                    "top_similarity": p.top_similarity,
                    "probability": p.probability,
                })
            })
            .collect();
        lines.push(self.summary_json());
        lines
    }

    /// Writes `<prefix>.csv` (per-class rows plus an `all` row) and
    /// `<prefix>.jsonl`.
    pub fn write(&self, prefix: &Path) -> Result<()> {
        write_csv(
            &with_ext(prefix, "csv"),
            &config_comment(&self.config_echo),
            |w| {
                w.write_record(["class_index", "class_name", "count", "correct", "accuracy"])?;
                for (c, name) in self.class_names.iter().enumerate() {
                    let count: u64 = self.confusion.row(c).iter().sum();
                    w.write_record([
                        c.to_string(),
                        name.clone(),
                        count.to_string(),
                        self.confusion.get(c, c).to_string(),
                        self.per_class_accuracy[c].to_string(),
                    ])?;
                }
                w.write_record([
                    String::new(),
                    "all".into(),
                    self.confusion.total().to_string(),
                    self.confusion.trace().to_string(),
                    self.overall_accuracy.to_string(),
                ])
            },
        )?;
        write_jsonl(&with_ext(prefix, "jsonl"), &self.jsonl())
    }
}

impl FewShotReport {
    pub fn text(&self, config: &[(String, String)]) -> String {
        let mut s = format!(
            "{}-way {}-shot, {} queries per class\n",
            self.way, self.shot, self.queries_per_class
        );
        for (r, a) in self.per_run.iter().enumerate() {
            let _ = writeln!(s, "  run {r:>2}: {:.4}", a);
        }
        let _ = writeln!(
            s,
            "mean accuracy {:.4} +- {:.4} over {} runs",
            self.mean,
            self.std,
            self.per_run.len()
        );
        let _ = writeln!(s, "config:");
        for (k, v) in config {
            let _ = writeln!(s, "  {k}={v}");
        }
        s
    }

    pub fn write(&self, prefix: &Path, config: &[(String, String)]) -> Result<()> {
        write_csv(&with_ext(prefix, "csv"), &config_comment(config), |w| {
            w.write_record(["run", "accuracy"])?;
            for (r, a) in self.per_run.iter().enumerate() {
                w.write_record([r.to_string(), a.to_string()])?;
            }
            Ok(())
        })?;
        let mut lines: Vec<Value> = self
            .per_run
            .iter()
            .enumerate()
            .map(|(r, a)| json!({"type": "run", "run": r, "accuracy": a}))
            .collect();
        lines.push(json!({
            "type": "summary",
            "way": self.way,
            "shot": self.shot,
            "queries_per_class": self.queries_per_class,
            "mean": self.mean,
            "std": self.std,
            "config": config_json(config),
        }));
        write_jsonl(&with_ext(prefix, "jsonl"), &lines)
    }
}
