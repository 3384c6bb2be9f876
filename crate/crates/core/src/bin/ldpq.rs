//! Command-line front end for the quantile-estimation simulator.
//!
//! Subcommands: `gen` writes a dataset file, `run` executes one experiment,
//! `sweep` runs a grid over eps/B/n, `report` aggregates trial CSVs.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ldp_quantile::harness::{
    parse_trials_csv, run_experiment, summarize, write_summary_csv, write_trials_csv,
    DatasetSpec, ExperimentConfig,
};
use ldp_quantile::metrics::Protocol;
use ldp_quantile::rational::Rational;
use ldp_quantile::rng::{derive_seed, stream};
use ldp_quantile::{datagen, Error};

#[derive(Parser)]
#[command(name = "ldpq", version, about = "Locally private quantile estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file.
    Gen(GenArgs),
    /// Run one experiment (one protocol, one or more eps values).
    Run(RunArgs),
    /// Run a grid over eps, B, and n.
    Sweep(SweepArgs),
    /// Aggregate trial CSVs into summary rows.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// pareto | uniform-interval
    #[arg(long)]
    dataset: String,
    #[arg(long)]
    n: usize,
    #[arg(long = "B")]
    b: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat key/value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bayess | naive | hier | shuffle-naive
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "B")]
    b: Option<u32>,
    /// Repeatable.
    #[arg(long = "eps")]
    eps: Vec<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "alpha-test")]
    alpha_test: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// pareto | uniform-interval | file:PATH
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write aggregated summary rows here.
    #[arg(long = "summary-out")]
    summary_out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Regenerate the dataset for every trial instead of once per experiment.
    #[arg(long, default_value_t = false)]
    regen_per_trial: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    base: RunArgs,
    /// Repeatable domain sizes (overrides --B).
    #[arg(long = "B-grid")]
    b_grid: Vec<u32>,
    /// Repeatable population sizes (overrides --n).
    #[arg(long = "n-grid")]
    n_grid: Vec<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trial CSVs to aggregate (repeatable).
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flat key/value config document mirroring the run flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    protocol: Option<String>,
    n: Option<usize>,
    #[serde(rename = "B", alias = "b")]
    b: Option<u32>,
    eps: Option<EpsValue>,
    delta: Option<f64>,
    #[serde(alias = "alpha-test")]
    alpha_test: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    dataset: Option<String>,
    out: Option<PathBuf>,
    summary_out: Option<PathBuf>,
    threads: Option<usize>,
    regen_per_trial: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EpsValue {
    One(f64),
    Many(Vec<f64>),
}

fn resolve_config(args: &RunArgs) -> Result<(ExperimentConfig, Option<PathBuf>, Option<PathBuf>), String> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            toml::from_str(&text).map_err(|e| format!("bad config file: {e}"))?
        }
        None => FileConfig::default(),
    };
    let protocol = args
        .protocol
        .clone()
        .or(file.protocol)
        .ok_or("missing --protocol")?;
    let protocol = Protocol::parse(&protocol).map_err(|e| e.to_string())?;
    let eps = if !args.eps.is_empty() {
        args.eps.clone()
    } else {
        match file.eps {
            Some(EpsValue::One(e)) => vec![e],
            Some(EpsValue::Many(v)) => v,
            None => return Err("missing --eps".into()),
        }
    };
    let dataset_str = args
        .dataset
        .clone()
        .or(file.dataset)
        .unwrap_or_else(|| "pareto".to_string());
    let alpha_test = args
        .alpha_test
        .clone()
        .or(file.alpha_test)
        .unwrap_or_else(|| "0.04".to_string());
    let cfg = ExperimentConfig {
        protocol,
        n: args.n.or(file.n).ok_or("missing --n")?,
        b: args.b.or(file.b).ok_or("missing --B")?,
        eps,
        delta: args.delta.or(file.delta).unwrap_or(0.0).max(0.0),
        alpha_test: Rational::parse(&alpha_test).map_err(|e| e.to_string())?,
        trials: args.trials.or(file.trials).unwrap_or(200),
        seed: args.seed.or(file.seed).unwrap_or(1),
        dataset: DatasetSpec::parse(&dataset_str).map_err(|e| e.to_string())?,
        regen_per_trial: args.regen_per_trial || file.regen_per_trial.unwrap_or(false),
        threads: args.threads.or(file.threads).unwrap_or(1),
    };
    let out = args.out.clone().or(file.out);
    let summary_out = args.summary_out.clone().or(file.summary_out);
    Ok((cfg, out, summary_out))
}

fn emit(records: &[ldp_quantile::metrics::TrialRecord], out: Option<&PathBuf>) -> Result<String, String> {
    let mut buf = Vec::new();
    write_trials_csv(records, &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).expect("utf8");
    match out {
        Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string())?,
        None => print!("{text}"),
    }
    Ok(text)
}

fn emit_summary(trials_text: &str, out: Option<&PathBuf>) -> Result<(), String> {
    let rows = parse_trials_csv(trials_text).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_summary_csv(&summarize(&rows), &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).expect("utf8");
    match out {
        Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), String> {
    let data_seed = derive_seed(args.seed, stream::DATA);
    let ds = match args.dataset.as_str() {
        "pareto" => datagen::gen_pareto(args.n, args.b, data_seed),
        "uniform-interval" | "uniform_interval" => {
            datagen::gen_uniform_interval(args.n, args.b, data_seed)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown generator {other:?} (expected pareto | uniform-interval)"
        ))),
    }
    .map_err(|e| e.to_string())?;
    datagen::write_dataset(&ds, &args.out).map_err(|e| e.to_string())?;
    eprintln!("wrote {} values (B={}) to {}", ds.n(), ds.domain_size(), args.out.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), String> {
    let (cfg, out, summary_out) = resolve_config(args)?;
    let records = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let text = emit(&records, out.as_ref())?;
    if let Some(path) = summary_out {
        emit_summary(&text, Some(&path))?;
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), String> {
    let (base, out, summary_out) = resolve_config(&args.base)?;
    let b_grid = if args.b_grid.is_empty() {
        vec![base.b]
    } else {
        args.b_grid.clone()
    };
    let n_grid = if args.n_grid.is_empty() {
        vec![base.n]
    } else {
        args.n_grid.clone()
    };
    let mut all = Vec::new();
    for &b in &b_grid {
        for &n in &n_grid {
            let mut cfg = base.clone();
            cfg.b = b;
            cfg.n = n;
            // Decorrelate grid cells while keeping the sweep reproducible.
            cfg.seed = derive_seed(base.seed, ((b as u64) << 32) | n as u64);
            all.extend(run_experiment(&cfg).map_err(|e| e.to_string())?);
        }
    }
    let text = emit(&all, out.as_ref())?;
    if let Some(path) = summary_out {
        emit_summary(&text, Some(&path))?;
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), String> {
    if args.inputs.is_empty() {
        return Err("need at least one --input".into());
    }
    let mut rows = Vec::new();
    for path in &args.inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        rows.extend(parse_trials_csv(&text).map_err(|e| e.to_string())?);
    }
    let mut buf = Vec::new();
    write_summary_csv(&summarize(&rows), &mut buf).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => std::fs::write(path, &buf).map_err(|e| e.to_string())?,
        None => std::io::stdout().write_all(&buf).map_err(|e| e.to_string())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
