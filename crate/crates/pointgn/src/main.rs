use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pointgn::bank_file::{read_bank, write_bank, LoadedBank};
use pointgn::bench::run_bench;
use pointgn::dataset::{
    load_modelnet40, load_scanobjectnn, load_xyz_text, LabeledDataset, MODELNET40_HINT,
    SCANOBJECTNN_HINT,
};
use pointgn::error::{Error, Result};
use pointgn::pipeline::{
    build_dataset_bank, check_fingerprint, evaluate, run_fewshot, select_gamma, thread_pool,
};
use pointgn::report::{config_comment, config_json, with_ext, write_csv, write_jsonl};
use pointgn::settings::{DatasetKind, Settings};
use pointgn::sweep::{run_sweep, CoGrid, SweepAxis};
use pointgn::synthetic::{synthetic_dataset, ShapeFamily};
use pointgn_core::{classify, encode, AggregationMode, FeatureBank};
use serde_json::json;

/// Training-free point cloud classification with Gaussian positional
/// encodings and a similarity-weighted feature bank.
#[derive(Parser)]
#[command(name = "pointgn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode the training split and write a bank file.
    BuildBank {
        #[command(flatten)]
        common: Common,
    },
    /// Classify the test split and report accuracy.
    Eval {
        /// Bank file; built from the training split when omitted.
        #[arg(long)]
        bank: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Classify one XYZ text file against a bank.
    Classify {
        /// Whitespace-separated "x y z" lines.
        input: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        /// Number of most likely classes to print.
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[command(flatten)]
        common: Common,
    },
    /// N-way K-shot episodes drawn from both splits.
    Fewshot {
        #[arg(long, default_value_t = 5)]
        way: usize,
        #[arg(long, default_value_t = 10)]
        shot: usize,
        /// Query samples per episode class.
        #[arg(long, default_value_t = 20)]
        queries: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Time encode and classify per sample and overall throughput.
    Bench {
        /// Bank to classify against; a small synthetic bank otherwise.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Timed samples.
        #[arg(long, default_value_t = 50)]
        repeat: usize,
        /// Untimed samples run first.
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        /// Use generated shapes even when --dataset-dir is given.
        #[arg(long)]
        synthetic: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Vary one hyperparameter and record accuracy per value.
    Sweep {
        /// k, dimension, stages or sigma.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 2,3,4.
        #[arg(long)]
        values: String,
        /// Aggregation modes swept under every value.
        #[arg(long, default_value = "paper-literal,multiplicative")]
        co_modes: String,
        /// Gammas swept under every value.
        #[arg(long, default_value = "1,3,10,30,100,300,1000")]
        co_gammas: String,
        #[command(flatten)]
        common: Common,
    },
    /// Pick gamma by leave-one-out accuracy on the bank.
    SelectGamma {
        /// Bank file; built from the training split when omitted.
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long, default_value = "1,3,10,30,100,300,1000")]
        candidates: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Flags shared by every subcommand. Unset flags fall back to the bank's
/// recorded encoder settings, then the --config file, then the defaults.
#[derive(Args)]
struct Common {
    /// Flat key=value settings file, applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// [default: modelnet40]
    #[arg(long, value_parser = ["modelnet40", "scanobjectnn"])]
    dataset: Option<String>,
    /// ScanObjectNN split [default: PB-T50-RS]
    #[arg(long, value_parser = ["OBJ-BG", "OBJ-ONLY", "PB-T50-RS"])]
    split: Option<String>,
    /// Points kept per cloud [default: 1024]
    #[arg(long)]
    points: Option<String>,
    /// [default: first-n]
    #[arg(long, value_parser = ["first-n", "random"])]
    sample: Option<String>,
    /// Seed for random sampling and few-shot episodes [default: 0]
    #[arg(long)]
    seed: Option<String>,
    /// [default: 9]
    #[arg(long)]
    refs_per_axis: Option<String>,
    /// [default: 0.35]
    #[arg(long)]
    sigma: Option<String>,
    /// Neighbors per group [default: 120]
    #[arg(long)]
    k: Option<String>,
    /// [default: 4]
    #[arg(long)]
    stages: Option<String>,
    /// [default: paper-literal]
    #[arg(long, value_parser = ["paper-literal", "multiplicative"])]
    agg_mode: Option<String>,
    /// [default: 100]
    #[arg(long)]
    gamma: Option<String>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long)]
    threads: Option<String>,
    /// Output path (bank file for build-bank, report prefix elsewhere).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate on at most this many evenly spaced test clouds.
    #[arg(long)]
    limit: Option<String>,
    /// Proceed when the bank was built with different encoder settings.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn settings(&self, bank: Option<&LoadedBank>) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(b) = bank {
            s.apply_encoder_record(b.encoder.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        }
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("split", &self.split),
            ("points", &self.points),
            ("sample", &self.sample),
            ("seed", &self.seed),
            ("refs-per-axis", &self.refs_per_axis),
            ("sigma", &self.sigma),
            ("k", &self.k),
            ("stages", &self.stages),
            ("agg-mode", &self.agg_mode),
            ("gamma", &self.gamma),
            ("threads", &self.threads),
            ("limit", &self.limit),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if let Some(dir) = &self.dataset_dir {
            s.dataset_dir = Some(dir.clone());
        }
        if self.force {
            s.force = true;
        }
        s.validate()?;
        Ok(s)
    }
}

fn echo(s: &Settings) -> Vec<(String, String)> {
    s.resolved()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn load_splits(s: &Settings) -> Result<(LabeledDataset, LabeledDataset)> {
    let hint = match s.dataset {
        DatasetKind::ModelNet40 => MODELNET40_HINT,
        DatasetKind::ScanObjectNN => SCANOBJECTNN_HINT,
    };
    let dir = s
        .dataset_dir
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--dataset-dir is required\n{hint}")))?;
    match s.dataset {
        DatasetKind::ModelNet40 => load_modelnet40(dir, &s.sampling),
        DatasetKind::ScanObjectNN => load_scanobjectnn(dir, s.split, &s.sampling),
    }
}

fn limited(test: LabeledDataset, s: &Settings) -> LabeledDataset {
    match s.limit {
        Some(n) => test.limit(n),
        None => test,
    }
}

fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> Result<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("{what}: cannot parse {t:?}")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{what}: empty list")));
    }
    Ok(items)
}

/// Loads `path` if given, otherwise encodes the training split.
fn bank_or_train(
    path: Option<&Path>,
    common: &Common,
) -> Result<(FeatureBank, Settings, Vec<String>)> {
    let mut warnings = Vec::new();
    if let Some(path) = path {
        let loaded = read_bank(path)?;
        let s = common.settings(Some(&loaded))?;
        if let Some(w) = check_fingerprint(&loaded.bank, &s.encoder, s.force)? {
            warnings.push(w);
        }
        return Ok((loaded.bank, s, warnings));
    }
    let s = common.settings(None)?;
    let (train, _) = load_splits(&s)?;
    let bank = build_dataset_bank(&thread_pool(s.threads)?, &train, &s.encoder)?;
    Ok((bank, s, warnings))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildBank { common } => {
            let s = common.settings(None)?;
            let out = common
                .out
                .clone()
                .ok_or_else(|| Error::Config("build-bank needs --out <bank file>".into()))?;
            let (train, _) = load_splits(&s)?;
            let start = Instant::now();
            let bank = build_dataset_bank(&thread_pool(s.threads)?, &train, &s.encoder)?;
            let wall = start.elapsed().as_secs_f64();
            write_bank(&out, &bank, &s.encoder)?;
            println!("wrote {}", out.display());
            println!(
                "M={} C={} D={} wall_time={wall:.2}s",
                bank.len(),
                bank.num_classes(),
                bank.dim()
            );
            println!("config:\n{}", indent(&s.echo()));
        }
        Command::Eval { bank, common } => {
            let (bank, s, warnings) = bank_or_train(bank.as_deref(), &common)?;
            let (_, test) = load_splits(&s)?;
            let test = limited(test, &s);
            let mut report = evaluate(&thread_pool(s.threads)?, &bank, &test, &s.encoder, s.gamma)?;
            report.warnings = warnings;
            report.config_echo = echo(&s);
            print!("{}", report.text());
            if let Some(prefix) = &common.out {
                report.write(prefix)?;
            }
        }
        Command::Classify {
            input,
            bank,
            top,
            common,
        } => {
            let loaded = read_bank(&bank)?;
            let s = common.settings(Some(&loaded))?;
            let warning = check_fingerprint(&loaded.bank, &s.encoder, s.force)?;
            let cloud = load_xyz_text(&input)?;
            let feature = encode(&cloud, &s.encoder)?;
            let result = classify(&feature, &loaded.bank, s.gamma)?;
            let names = loaded.bank.class_names();
            println!("{}: {}", input.display(), names[result.predicted_class]);
            let mut order: Vec<usize> = (0..names.len()).collect();
            order.sort_by(|&a, &b| {
                result.probabilities[b]
                    .total_cmp(&result.probabilities[a])
                    .then(a.cmp(&b))
            });
            for &c in order.iter().take(top) {
                println!("  {:<16} {:.6}", names[c], result.probabilities[c]);
            }
            println!("top similarity {:.6}", result.top_similarity);
            if let Some(w) = warning {
                println!("warning: {w}");
            }
            println!("config:\n{}", indent(&s.echo()));
        }
        Command::Fewshot {
            way,
            shot,
            queries,
            runs,
            common,
        } => {
            let s = common.settings(None)?;
            let (train, test) = load_splits(&s)?;
            let all = train.concat(&test)?;
            let report = run_fewshot(
                &thread_pool(s.threads)?,
                &all,
                &s.encoder,
                s.gamma,
                way,
                shot,
                queries,
                runs,
                s.sampling.seed,
            )?;
            let config = echo(&s);
            print!("{}", report.text(&config));
            if let Some(prefix) = &common.out {
                report.write(prefix, &config)?;
            }
        }
        Command::Bench {
            bank,
            repeat,
            warmup,
            synthetic,
            common,
        } => {
            let loaded = bank.as_deref().map(read_bank).transpose()?;
            let s = common.settings(loaded.as_ref())?;
            let clouds = if synthetic || s.dataset_dir.is_none() {
                synthetic_dataset(
                    &ShapeFamily::ALL,
                    (repeat + warmup).div_ceil(3),
                    s.sampling.points,
                    s.sampling.seed ^ 1,
                    "bench",
                )?
                .clouds
            } else {
                load_splits(&s)?.1.clouds
            };
            let bank = match loaded {
                Some(l) => {
                    check_fingerprint(&l.bank, &s.encoder, s.force)?;
                    l.bank
                }
                None => {
                    let train = synthetic_dataset(
                        &ShapeFamily::ALL,
                        20,
                        s.sampling.points,
                        s.sampling.seed,
                        "bench-bank",
                    )?;
                    build_dataset_bank(&thread_pool(s.threads)?, &train, &s.encoder)?
                }
            };
            let report = run_bench(
                &clouds, &bank, &s.encoder, s.gamma, repeat, warmup, s.threads,
            )?;
            let config = echo(&s);
            print!("{}", report.text(&config));
            if let Some(prefix) = &common.out {
                report.write(prefix, &config)?;
            }
        }
        Command::Sweep {
            axis,
            values,
            co_modes,
            co_gammas,
            common,
        } => {
            let s = common.settings(None)?;
            let axis: SweepAxis = axis.parse()?;
            let values: Vec<f64> = parse_list("--values", &values)?;
            let modes = parse_list::<AggregationMode>("--co-modes", &co_modes)?;
            let gammas = parse_list::<f64>("--co-gammas", &co_gammas)?;
            let (train, test) = load_splits(&s)?;
            let test = limited(test, &s);
            let co = CoGrid { modes, gammas };
            let (grid, details) = run_sweep(
                &thread_pool(s.threads)?,
                &train,
                &test,
                &s.encoder,
                axis,
                &values,
                &co,
            )?;
            let mut config = echo(&s);
            config.push(("co-modes".into(), co_modes));
            config.push(("co-gammas".into(), co_gammas));
            print!("{}", grid.text(&config));
            if let Some(prefix) = &common.out {
                grid.write(prefix, &config, &details)?;
            }
        }
        Command::SelectGamma {
            bank,
            candidates,
            common,
        } => {
            let candidates: Vec<f64> = parse_list("--candidates", &candidates)?;
            let (bank, s, warnings) = bank_or_train(bank.as_deref(), &common)?;
            let sel = select_gamma(&thread_pool(s.threads)?, &bank, &candidates)?;
            println!("{:>10}  loo accuracy", "gamma");
            for &(g, a) in &sel.per_candidate {
                println!("{g:>10}  {a:.4}");
            }
            println!(
                "selected gamma {} (loo accuracy {:.4})",
                sel.gamma, sel.loo_accuracy
            );
            for w in &warnings {
                println!("warning: {w}");
            }
            let config = echo(&s);
            println!("config:\n{}", indent(&s.echo()));
            if let Some(prefix) = &common.out {
                write_csv(&with_ext(prefix, "csv"), &config_comment(&config), |w| {
                    w.write_record(["gamma", "loo_accuracy"])?;
                    for &(g, a) in &sel.per_candidate {
                        w.write_record([g.to_string(), a.to_string()])?;
                    }
                    Ok(())
                })?;
                write_jsonl(
                    &with_ext(prefix, "jsonl"),
                    &[json!({
                        "type": "gamma_selection",
                        "gamma": sel.gamma,
                        "loo_accuracy": sel.loo_accuracy,
                        "per_candidate": sel.per_candidate,
                        "config": config_json(&config),
                    })],
                )?;
            }
        }
    }
    Ok(())
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| format!("  {l}\n"))
        .collect::<String>()
        .trim_end()
        .to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
