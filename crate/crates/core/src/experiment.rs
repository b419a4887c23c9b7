//! Repeated-trial evaluation harness.
//!
//! Each trial splits the data with seed `base_seed + trial`, then trains and
//! scores every configured method on that same split: training time (TT),
//! time to classify the whole test part (CT) and test accuracy (AC).
//! Data loading is outside both timers.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bonmf::{factorize_bonmf, update_h_cosine_with};
use crate::classify::{
    accuracy, build_label_map, BasisLabelClassifier, BasisMemberClassifier, Classifier,
    CoefficientAngleClassifier, CoefficientArgmaxClassifier,
};
use crate::data::{
    load_dataset, train_test_split, train_test_split_stratified, DataFormat, DatasetSpec,
    LabelColumn, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::matrix::{DataMatrix, Matrix};
use crate::nmf::{
    factorize_nmf, FactorizeOptions, DEFAULT_EPSILON_GUARD, DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
};
use crate::onmf::{factorize_onmf, DEFAULT_ENCODE_ITERATIONS};
use crate::semi_binary::factorize_zhang;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Onmf,
    Nmf,
    Bonmf,
    OnmfCos,
    Zhang,
}

impl Method {
    /// Column order of the comparison table.
    pub const ALL: [Method; 5] = [
        Method::Onmf,
        Method::Nmf,
        Method::Bonmf,
        Method::OnmfCos,
        Method::Zhang,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Onmf => "onmf",
            Method::Nmf => "nmf",
            Method::Bonmf => "bonmf",
            Method::OnmfCos => "onmf-cos",
            Method::Zhang => "zhang",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Method::Onmf => "ONMF",
            Method::Nmf => "NMF (Lee-Seung)",
            Method::Bonmf => "BONMF",
            Method::OnmfCos => "ONMF+cos",
            Method::Zhang => "Semi-binary (Zhang)",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Factorization rank: a fixed number or the dataset's class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Classes,
    Fixed(usize),
}

impl Rank {
    pub fn resolve(self, ds: &LabeledDataset) -> usize {
        match self {
            Rank::Classes => ds.class_count,
            Rank::Fixed(k) => k,
        }
    }
}

impl FromStr for Rank {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("classes") {
            return Ok(Rank::Classes);
        }
        s.parse()
            .map(Rank::Fixed)
            .map_err(|_| Error::Config(format!("rank must be a count or \"classes\", got {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub rank: Rank,
    pub train_fraction: f64,
    pub stratified: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub epsilon_guard: f64,
    pub encode_iterations: usize,
    pub base_seed: u64,
    /// Trials run concurrently. Values above 1 share cores between timed
    /// phases and distort TT/CT.
    pub jobs: usize,
    pub execution: Execution,
    pub out_dir: Option<PathBuf>,
    pub emit: Vec<ReportFormat>,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        ExperimentConfig {
            dataset,
            methods: Method::ALL.to_vec(),
            trials: 30,
            rank: Rank::Classes,
            train_fraction: 0.8,
            stratified: false,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            epsilon_guard: DEFAULT_EPSILON_GUARD,
            encode_iterations: DEFAULT_ENCODE_ITERATIONS,
            base_seed: 0,
            jobs: 1,
            execution: Execution::default(),
            out_dir: None,
            emit: vec![ReportFormat::Markdown],
        }
    }

    /// Builds a config from `key = value` pairs; later pairs override
    /// earlier ones. `dataset` is required.
    pub fn from_pairs<K, V>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let pairs: Vec<(String, String)> = pairs
            .into_iter()
            .map(|(k, v)| (k.as_ref().trim().to_string(), v.as_ref().trim().to_string()))
            .collect();
        let path = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "dataset")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Config("missing required key \"dataset\"".into()))?;
        let mut cfg = ExperimentConfig::new(DatasetSpec::csv(path));
        for (key, value) in &pairs {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Parses the flat `key = value` config format (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        ExperimentConfig::from_pairs(parse_pairs(text)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key}: {what}, got {value:?}"));
        match key {
            "dataset" => self.dataset.path = PathBuf::from(value),
            "format" => self.dataset.format = value.parse::<DataFormat>()?,
            "label_column" => self.dataset.label_column = value.parse::<LabelColumn>()?,
            "delimiter" => {
                let mut chars = value.chars();
                self.dataset.delimiter = match (chars.next(), chars.next()) {
                    (Some(c), None) => c,
                    _ if value == "\\t" || value == "tab" => '\t',
                    _ => return Err(bad("expected a single character")),
                };
            }
            "header" => {
                self.dataset.has_header =
                    parse_bool(value).ok_or_else(|| bad("expected a boolean"))?
            }
            "shift_nonneg" => {
                self.dataset.shift_nonneg =
                    parse_bool(value).ok_or_else(|| bad("expected a boolean"))?
            }
            "scale_max" => {
                self.dataset.scale_max =
                    parse_bool(value).ok_or_else(|| bad("expected a boolean"))?
            }
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "trials" => self.trials = value.parse().map_err(|_| bad("expected a count"))?,
            "rank" => self.rank = value.parse()?,
            "train_frac" => {
                self.train_fraction = value.parse().map_err(|_| bad("expected a number"))?
            }
            "stratified" => {
                self.stratified = parse_bool(value).ok_or_else(|| bad("expected a boolean"))?
            }
            "max_iters" => {
                self.max_iterations = value.parse().map_err(|_| bad("expected a count"))?
            }
            "tol" => self.tolerance = value.parse().map_err(|_| bad("expected a number"))?,
            "epsilon" => {
                self.epsilon_guard = value.parse().map_err(|_| bad("expected a number"))?
            }
            "encode_iters" => {
                self.encode_iterations = value.parse().map_err(|_| bad("expected a count"))?
            }
            "seed" => self.base_seed = value.parse().map_err(|_| bad("expected an integer"))?,
            "jobs" => self.jobs = value.parse().map_err(|_| bad("expected a count"))?,
            "execution" => {
                self.execution = match value {
                    "sequential" => Execution::Sequential,
                    "parallel" => Execution::Parallel,
                    _ => return Err(bad("expected sequential or parallel")),
                }
            }
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "emit" => {
                self.emit = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.rank == Rank::Fixed(0) {
            return Err(Error::Config("rank must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_frac must be in (0, 1)".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        self.factorize_options(0)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn factorize_options(&self, seed: u64) -> FactorizeOptions {
        FactorizeOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            seed,
            epsilon_guard: self.epsilon_guard,
            execution: self.execution,
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub train_seconds: f64,
    pub classify_seconds: f64,
    pub accuracy: f64,
    pub iterations: usize,
    /// Set when the method failed in this trial; the other fields are then 0.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Summary { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub train_seconds: Option<Summary>,
    pub classify_seconds: Option<Summary>,
    pub accuracy: Option<Summary>,
}

impl MethodSummary {
    pub fn from_records(method: Method, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.method == method && r.error.is_none())
            .collect();
        let failed = records
            .iter()
            .filter(|r| r.method == method && r.error.is_some())
            .count();
        let collect =
            |f: fn(&TrialRecord) -> f64| Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        MethodSummary {
            method,
            completed: ok.len(),
            failed,
            train_seconds: collect(|r| r.train_seconds),
            classify_seconds: collect(|r| r.classify_seconds),
            accuracy: collect(|r| r.accuracy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub dataset: String,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub rank: usize,
    pub trials: usize,
    pub methods: Vec<MethodSummary>,
    pub records: Vec<TrialRecord>,
}

impl TrialReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }

    pub fn all_failed(&self) -> bool {
        self.records.iter().all(|r| r.error.is_some())
    }

    /// Copy with every timing field zeroed, for run-to-run comparison.
    pub fn without_timings(&self) -> TrialReport {
        let mut out = self.clone();
        for r in &mut out.records {
            r.train_seconds = 0.0;
            r.classify_seconds = 0.0;
        }
        for s in &mut out.methods {
            s.train_seconds = None;
            s.classify_seconds = None;
        }
        out
    }
}

/// Loads the configured dataset, runs every trial, and writes the manifest
/// and reports when `out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    let name = cfg.dataset.path.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let report = run_on_dataset(cfg, &ds, &name)?;
    if let Some(dir) = &cfg.out_dir {
        write_outputs(cfg, &report, dir)?;
    }
    Ok(report)
}

/// Runs the trial protocol on an in-memory dataset.
pub fn run_on_dataset(
    cfg: &ExperimentConfig,
    ds: &LabeledDataset,
    name: &str,
) -> Result<TrialReport> {
    cfg.validate()?;
    let rank = cfg.rank.resolve(ds);
    if rank == 0 {
        return Err(Error::Config("rank resolves to 0".into()));
    }
    let records: Vec<TrialRecord> = run_trials(cfg, ds, rank)?.into_iter().flatten().collect();
    let methods = cfg
        .methods
        .iter()
        .map(|&m| MethodSummary::from_records(m, &records))
        .collect();
    Ok(TrialReport {
        dataset: name.to_string(),
        samples: ds.samples(),
        features: ds.features(),
        classes: ds.class_count,
        rank,
        trials: cfg.trials,
        methods,
        records,
    })
}

fn run_trials(
    cfg: &ExperimentConfig,
    ds: &LabeledDataset,
    rank: usize,
) -> Result<Vec<Vec<TrialRecord>>> {
    #[cfg(feature = "parallel")]
    if cfg.jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        return Ok(pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, ds, rank, t))
                .collect()
        }));
    }
    Ok((0..cfg.trials)
        .map(|t| run_trial(cfg, ds, rank, t))
        .collect())
}

fn run_trial(
    cfg: &ExperimentConfig,
    ds: &LabeledDataset,
    rank: usize,
    trial: usize,
) -> Vec<TrialRecord> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let split = if cfg.stratified {
        train_test_split_stratified(ds, cfg.train_fraction, seed)
    } else {
        train_test_split(ds, cfg.train_fraction, seed)
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let outcome = split
                .as_ref()
                .map_err(|e| Error::InvalidArgument(e.to_string()))
                .and_then(|(train, test)| {
                    run_method(
                        method,
                        train,
                        test,
                        rank,
                        &cfg.factorize_options(seed),
                        cfg.encode_iterations,
                    )
                });
            match outcome {
                Ok(o) => TrialRecord {
                    trial,
                    seed,
                    method,
                    train_seconds: o.train_seconds,
                    classify_seconds: o.classify_seconds,
                    accuracy: o.accuracy,
                    iterations: o.iterations,
                    error: None,
                },
                Err(e) => {
                    log::warn!("trial {trial}: {method} failed: {e}");
                    TrialRecord {
                        trial,
                        seed,
                        method,
                        train_seconds: 0.0,
                        classify_seconds: 0.0,
                        accuracy: 0.0,
                        iterations: 0,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

/// Outcome of training and scoring one method on one split.
#[derive(Debug, Clone, Copy)]
pub struct MethodOutcome {
    pub train_seconds: f64,
    pub classify_seconds: f64,
    pub accuracy: f64,
    pub iterations: usize,
}

fn predict_all(clf: &dyn Classifier, test: &LabeledDataset, exec: Execution) -> Vec<usize> {
    exec::map_range(exec, test.samples(), |j| {
        clf.classify(test.data.col(j)).label
    })
}

/// Trains `method` on `train` and scores it on `test`.
pub fn run_method(
    method: Method,
    train: &LabeledDataset,
    test: &LabeledDataset,
    rank: usize,
    opts: &FactorizeOptions,
    encode_iterations: usize,
) -> Result<MethodOutcome> {
    let exec = opts.execution;
    let x = &train.data;
    let started = Instant::now();
    let (train_seconds, classify_seconds, predictions, iterations) = match method {
        Method::Bonmf => {
            let model = factorize_bonmf(x, rank, opts)?;
            let labels = build_label_map(&model.assignments, &train.labels)?;
            let tt = started.elapsed().as_secs_f64();
            let t = Instant::now();
            let clf = BasisLabelClassifier::new(&model.basis, &labels)?;
            let pred = predict_all(&clf, test, exec);
            (
                tt,
                t.elapsed().as_secs_f64(),
                pred,
                model.trace.iterations_run,
            )
        }
        Method::Zhang => {
            let model = factorize_zhang(x, rank, opts)?;
            let clusters = update_h_cosine_with(x, &model.basis, exec)?.assignment;
            let labels = build_label_map(&clusters, &train.labels)?;
            let tt = started.elapsed().as_secs_f64();
            let t = Instant::now();
            let clf = BasisLabelClassifier::new(&model.basis, &labels)?;
            let pred = predict_all(&clf, test, exec);
            (
                tt,
                t.elapsed().as_secs_f64(),
                pred,
                model.trace.iterations_run,
            )
        }
        Method::Nmf => {
            let model = factorize_nmf(x, rank, opts)?;
            let tt = started.elapsed().as_secs_f64();
            let t = Instant::now();
            let clf = CoefficientAngleClassifier::new(&model, train, encode_iterations)?;
            let pred = predict_all(&clf, test, exec);
            (
                tt,
                t.elapsed().as_secs_f64(),
                pred,
                model.trace.iterations_run,
            )
        }
        Method::Onmf => {
            let model = factorize_onmf(x, rank, opts)?;
            let tt = started.elapsed().as_secs_f64();
            let t = Instant::now();
            let clf = CoefficientArgmaxClassifier::new(&model, train, encode_iterations)?;
            let pred = predict_all(&clf, test, exec);
            (
                tt,
                t.elapsed().as_secs_f64(),
                pred,
                model.trace.iterations_run,
            )
        }
        Method::OnmfCos => {
            let model = factorize_onmf(x, rank, opts)?;
            let tt = started.elapsed().as_secs_f64();
            let t = Instant::now();
            let clf = BasisMemberClassifier::new(&model.basis, train)?;
            let pred = predict_all(&clf, test, exec);
            (
                tt,
                t.elapsed().as_secs_f64(),
                pred,
                model.trace.iterations_run,
            )
        }
    };
    Ok(MethodOutcome {
        train_seconds,
        classify_seconds,
        accuracy: accuracy(&predictions, &test.labels)?,
        iterations,
    })
}

/// Renders a report. Markdown is the method × {TT, CT, AC} grid; JSON is
/// the full report; CSV lists the raw per-trial records.
pub fn emit_report(report: &TrialReport, format: ReportFormat) -> Result<String> {
    if report.records.is_empty() {
        return Err(Error::InvalidArgument("report has no records".into()));
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &report.records {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
        ReportFormat::Markdown => Ok(markdown_table(report)),
    }
}

fn markdown_table(report: &TrialReport) -> String {
    let cell = |s: Option<Summary>, scale: f64, digits: usize| match s {
        Some(s) => format!("{:.*}", digits, s.mean * scale),
        None => "failed".to_string(),
    };
    let mut out = String::new();
    out.push_str("| Name | |");
    for s in &report.methods {
        out.push_str(&format!(" {} |", s.method.title()));
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(report.methods.len()));
    out.push('\n');
    type Row = (
        &'static str,
        fn(&MethodSummary) -> Option<Summary>,
        f64,
        usize,
    );
    let rows: [Row; 3] = [
        ("TT (s)", |s| s.train_seconds, 1.0, 3),
        ("CT (s)", |s| s.classify_seconds, 1.0, 3),
        ("AC (%)", |s| s.accuracy, 100.0, 2),
    ];
    for (i, (label, get, scale, digits)) in rows.into_iter().enumerate() {
        let name = if i == 0 { report.dataset.as_str() } else { "" };
        out.push_str(&format!("| {name} | {label} |"));
        for s in &report.methods {
            out.push_str(&format!(" {} |", cell(get(s), scale, digits)));
        }
        out.push('\n');
    }
    out
}

/// Writes `manifest.json` plus one `report.<ext>` per configured format.
pub fn write_outputs(cfg: &ExperimentConfig, report: &TrialReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "trial_seeds": (0..cfg.trials).map(|t| cfg.base_seed.wrapping_add(t as u64)).collect::<Vec<_>>(),
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    for &format in &cfg.emit {
        std::fs::write(
            dir.join(format!("report.{}", format.extension())),
            emit_report(report, format)?,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Class `c` samples are supported on feature block `c`.
    Blocks,
    /// As `Blocks`, with each sample additionally scaled by a random factor
    /// in `[0.5, 2)`; angles are unchanged, distances are not.
    NoisyBlocks,
}

impl FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blocks" => Ok(SynthKind::Blocks),
            "noisy-blocks" => Ok(SynthKind::NoisyBlocks),
            other => Err(Error::Config(format!("unknown synthetic kind {other:?}"))),
        }
    }
}

/// Block-structured synthetic data with `k` classes.
///
/// Features are cut into `k` contiguous blocks; sample `j` has class
/// `j mod k` and draws its block's features from `U(0.5, 1.5)`. Every
/// feature then gets `noise · U(0, 1)` added.
pub fn synth_dataset(
    kind: SynthKind,
    m: usize,
    n: usize,
    k: usize,
    noise: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= m, got k = {k}, m = {m}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidArgument("noise must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|j| j % k).collect();
    let mut x = Matrix::zeros(m, n);
    for (j, &class) in labels.iter().enumerate() {
        let (start, end) = (class * m / k, (class + 1) * m / k);
        let scale = match kind {
            SynthKind::Blocks => 1.0,
            SynthKind::NoisyBlocks => rng.gen_range(0.5..2.0),
        };
        let col = x.col_mut(j);
        for v in &mut col[start..end] {
            *v = scale * rng.gen_range(0.5..1.5);
        }
        if noise > 0.0 {
            for v in col.iter_mut() {
                *v += noise * rng.gen_range(0.0..1.0);
            }
        }
    }
    LabeledDataset::new(DataMatrix::new(x)?, labels, k)
}
