use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bonmf::data::write_csv;
use bonmf::experiment::{emit_report, parse_pairs, ReportFormat, SynthKind};
use bonmf::{run_experiment, synth_dataset, Error, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Train/test benchmark for BONMF and baseline factorizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated train/test trials on a dataset.
    Run(Box<RunArgs>),
    /// Write a synthetic block-structured dataset as CSV (label last).
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    /// csv or libsvm.
    #[arg(long)]
    format: Option<String>,
    /// `last` or a zero-based column index.
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
    /// The CSV file has a header row.
    #[arg(long)]
    header: bool,
    /// Shift features with negative values so their minimum is 0.
    #[arg(long)]
    shift_nonneg: bool,
    /// Comma-separated: onmf, nmf, bonmf, onmf-cos, zhang.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// A number, or `classes` for the dataset's class count.
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    train_frac: Option<String>,
    /// Split each class separately.
    #[arg(long)]
    stratified: bool,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Trials run concurrently.
    #[arg(long)]
    jobs: Option<String>,
    /// sequential or parallel.
    #[arg(long)]
    execution: Option<String>,
    /// Directory for manifest.json and report files.
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated: json, csv, markdown.
    #[arg(long)]
    emit: Option<String>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = Vec::new();
        let values = [
            ("dataset", &self.dataset),
            ("format", &self.format),
            ("label_column", &self.label_column),
            ("delimiter", &self.delimiter),
            ("methods", &self.methods),
            ("trials", &self.trials),
            ("rank", &self.rank),
            ("train_frac", &self.train_frac),
            ("max_iters", &self.max_iters),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("jobs", &self.jobs),
            ("execution", &self.execution),
            ("out", &self.out),
            ("emit", &self.emit),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                pairs.push((key, v.clone()));
            }
        }
        for (key, set) in [
            ("header", self.header),
            ("shift_nonneg", self.shift_nonneg),
            ("stratified", self.stratified),
        ] {
            if set {
                pairs.push((key, "true".to_string()));
            }
        }
        pairs
    }
}

#[derive(Args)]
struct SynthArgs {
    /// blocks or noisy-blocks.
    #[arg(long, default_value = "blocks")]
    kind: String,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    pairs.extend(args.pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
    let cfg = ExperimentConfig::from_pairs(pairs)?;
    let report = run_experiment(&cfg)?;
    print!("{}", emit_report(&report, ReportFormat::Markdown)?);
    for s in &report.methods {
        if s.failed > 0 {
            eprintln!(
                "{}: {} of {} trials failed",
                s.method,
                s.failed,
                s.failed + s.completed
            );
        }
    }
    if report.all_failed() {
        eprintln!("error: every trial failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(args: &SynthArgs) -> anyhow::Result<ExitCode> {
    let kind: SynthKind = args.kind.parse()?;
    let ds = synth_dataset(kind, args.m, args.n, args.k, args.noise, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(&ds, &args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
