//! Experiment runner: seeded trials, metrics, CSV output.
//!
//! A run is fully determined by its configuration (including the master
//! seed): per-trial seeds are derived, trials may execute on a thread pool,
//! and results are sorted back into trial order before anything is written,
//! so output bytes never depend on scheduling.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::bayess::dp_bayess;
use crate::dataset::Dataset;
use crate::datagen;
use crate::error::{invalid, Error, Result};
use crate::hier::{hier_median, DEFAULT_BRANCHING};
use crate::metrics::{evaluate_trial, CoinResult, Protocol, TrialRecord};
use crate::naive::{allocate_batches, dp_naive_nbs};
use crate::oracle::EmpiricalOracle;
use crate::rational::Rational;
use crate::rng::{derive_seed, seeded_rng, stream};
use crate::rr::RRChannel;
use crate::shuffle::shuffle_nbs;

pub const TRIAL_CSV_HEADER: &str =
    "protocol,seed,trial,n,B,eps,delta,alpha_test,m_tilde,abs_error,success,users_consumed,reason";
pub const SUMMARY_CSV_HEADER: &str =
    "protocol,eps,B,n,trials,success_rate,success_std,mean_abs_error,err_p50,err_p90";

/// Where the experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSpec {
    Pareto,
    UniformInterval,
    File(PathBuf),
}

impl DatasetSpec {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pareto" => Ok(Self::Pareto),
            "uniform-interval" | "uniform_interval" => Ok(Self::UniformInterval),
            other => match other.strip_prefix("file:") {
                Some(p) => Ok(Self::File(PathBuf::from(p))),
                None => Err(invalid(format!("unknown dataset spec {other:?}"))),
            },
        }
    }

    fn build(&self, n: usize, b: u32, data_seed: u64) -> Result<Dataset> {
        match self {
            Self::Pareto => datagen::gen_pareto(n, b, data_seed),
            Self::UniformInterval => datagen::gen_uniform_interval(n, b, data_seed),
            Self::File(path) => datagen::read_dataset(path),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub n: usize,
    pub b: u32,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub alpha_test: Rational,
    pub trials: u64,
    pub seed: u64,
    pub dataset: DatasetSpec,
    /// Regenerate the dataset per trial instead of once per experiment.
    pub regen_per_trial: bool,
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(invalid("trials must be >= 1"));
        }
        if self.b < 2 {
            return Err(invalid("B must be >= 2"));
        }
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(invalid("need at least one eps value, all > 0"));
        }
        if self.alpha_test <= Rational::zero() {
            return Err(invalid("alpha-test must be > 0"));
        }
        Ok(())
    }
}

/// Runs one protocol once. Stochastic choices derive from `trial_seed` only.
pub fn run_protocol(
    protocol: Protocol,
    ds: &Dataset,
    eps: f64,
    delta: f64,
    trial_seed: u64,
) -> Result<CoinResult> {
    match protocol {
        Protocol::Bayess => dp_bayess(ds, Some(RRChannel::new(eps)?), trial_seed),
        Protocol::Naive => {
            let plan = allocate_batches(ds.n() as u64, ds.domain_size())?;
            let mut perm = seeded_rng(derive_seed(trial_seed, stream::PERMUTATION));
            let noise = seeded_rng(derive_seed(trial_seed, stream::NOISE));
            let mut oracle =
                EmpiricalOracle::new(ds, Some(RRChannel::new(eps)?), &mut perm, noise);
            dp_naive_nbs(&mut oracle, ds.domain_size(), &plan)
        }
        Protocol::Hierarchical => hier_median(ds, eps, DEFAULT_BRANCHING, trial_seed),
        Protocol::ShuffleNaive => shuffle_nbs(ds, eps, delta, trial_seed),
    }
}

fn run_one_trial(
    cfg: &ExperimentConfig,
    base_dataset: &Dataset,
    eps_idx: usize,
    eps: f64,
    trial: u64,
) -> TrialRecord {
    let trial_seed = derive_seed(cfg.seed, ((eps_idx as u64) << 40) | trial);
    let regenerated;
    let ds = if cfg.regen_per_trial {
        regenerated = cfg
            .dataset
            .build(cfg.n, cfg.b, derive_seed(trial_seed, stream::DATA))
            .expect("dataset spec already validated");
        &regenerated
    } else {
        base_dataset
    };
    let half = Rational::new(1, 2).expect("const");
    match run_protocol(cfg.protocol, ds, eps, cfg.delta, trial_seed) {
        Ok(res) => {
            let (abs_error, success) =
                evaluate_trial(ds, res.index, half, cfg.alpha_test).expect("index in range");
            TrialRecord {
                protocol: cfg.protocol,
                seed: trial_seed,
                trial,
                n: ds.n(),
                b: ds.domain_size(),
                eps,
                delta: cfg.delta,
                alpha_test: cfg.alpha_test,
                m_tilde: Some(res.index),
                abs_error: Some(abs_error),
                success,
                users_consumed: res.users_consumed,
                reason: String::new(),
            }
        }
        Err(e) => TrialRecord {
            protocol: cfg.protocol,
            seed: trial_seed,
            trial,
            n: ds.n(),
            b: ds.domain_size(),
            eps,
            delta: cfg.delta,
            alpha_test: cfg.alpha_test,
            m_tilde: None,
            abs_error: None,
            success: false,
            users_consumed: 0,
            reason: e.to_string().replace(',', ";"),
        },
    }
}

/// Runs every (eps, trial) combination and returns records in deterministic
/// order (eps values in the configured order, trials ascending).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let base_dataset = cfg
        .dataset
        .build(cfg.n, cfg.b, derive_seed(cfg.seed, stream::DATA))?;
    if let DatasetSpec::File(_) = cfg.dataset {
        // File datasets fix n and B themselves.
        if base_dataset.n() == 0 {
            return Err(invalid("empty dataset file"));
        }
    }

    // Per-trial seeds must be pairwise distinct (checked, not assumed).
    {
        let mut seen = std::collections::HashSet::new();
        for eps_idx in 0..cfg.eps.len() {
            for trial in 0..cfg.trials {
                if !seen.insert(derive_seed(cfg.seed, ((eps_idx as u64) << 40) | trial)) {
                    return Err(invalid("trial seed collision"));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;

    let mut records = Vec::with_capacity(cfg.eps.len() * cfg.trials as usize);
    for (eps_idx, &eps) in cfg.eps.iter().enumerate() {
        let mut batch: Vec<TrialRecord> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| run_one_trial(cfg, &base_dataset, eps_idx, eps, trial))
                .collect()
        });
        batch.sort_by_key(|r| r.trial);
        records.extend(batch);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

pub fn write_trials_csv<W: Write>(records: &[TrialRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.protocol.name(),
            r.seed,
            r.trial,
            r.n,
            r.b,
            r.eps,
            r.delta,
            r.alpha_test.to_f64(),
            r.m_tilde.map(|m| m.to_string()).unwrap_or_default(),
            r.abs_error.map(|e| e.to_f64().to_string()).unwrap_or_default(),
            r.success,
            r.users_consumed,
            r.reason,
        )?;
    }
    Ok(())
}

/// Minimal parsed view of a trial row, enough to aggregate.
#[derive(Debug, Clone)]
pub struct TrialRow {
    pub protocol: String,
    pub n: u64,
    pub b: u64,
    pub eps: f64,
    pub success: bool,
    pub abs_error: Option<f64>,
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| invalid("empty CSV"))?;
    if header.trim() != TRIAL_CSV_HEADER {
        return Err(invalid("unrecognized trial CSV header"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 13 {
            return Err(invalid(format!("short CSV row {}", i + 2)));
        }
        rows.push(TrialRow {
            protocol: f[0].to_string(),
            n: f[3].parse().map_err(|_| invalid("bad n"))?,
            b: f[4].parse().map_err(|_| invalid("bad B"))?,
            eps: f[5].parse().map_err(|_| invalid("bad eps"))?,
            success: f[10] == "true",
            abs_error: if f[9].is_empty() {
                None
            } else {
                Some(f[9].parse().map_err(|_| invalid("bad abs_error"))?)
            },
        });
    }
    Ok(rows)
}

/// Aggregate of one (protocol, eps, B, n) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub protocol: String,
    pub eps: f64,
    pub b: u64,
    pub n: u64,
    pub trials: u64,
    pub success_rate: f64,
    /// Standard deviation of the sample-average success rate:
    /// sqrt(p(1-p)/trials).
    pub success_std: f64,
    pub mean_abs_error: f64,
    pub err_p50: f64,
    pub err_p90: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Groups rows by (protocol, eps, B, n), preserving first-appearance order.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, u64, u64, u64)> = Vec::new();
    let mut groups: std::collections::HashMap<(String, u64, u64, u64), Vec<&TrialRow>> =
        std::collections::HashMap::new();
    for r in rows {
        let key = (r.protocol.clone(), r.eps.to_bits(), r.b, r.n);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let trials = rows.len() as u64;
            let successes = rows.iter().filter(|r| r.success).count() as f64;
            let p = successes / trials as f64;
            let mut errors: Vec<f64> = rows.iter().filter_map(|r| r.abs_error).collect();
            errors.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let mean = if errors.is_empty() {
                f64::NAN
            } else {
                errors.iter().sum::<f64>() / errors.len() as f64
            };
            SummaryRow {
                protocol: key.0,
                eps: f64::from_bits(key.1),
                b: key.2,
                n: key.3,
                trials,
                success_rate: p,
                success_std: (p * (1.0 - p) / trials as f64).sqrt(),
                mean_abs_error: mean,
                err_p50: percentile(&errors, 0.5),
                err_p90: percentile(&errors, 0.9),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.protocol,
            r.eps,
            r.b,
            r.n,
            r.trials,
            r.success_rate,
            r.success_std,
            r.mean_abs_error,
            r.err_p50,
            r.err_p90,
        )?;
    }
    Ok(())
}

/// Convenience: run, then render both CSVs to strings.
pub fn run_to_csv(cfg: &ExperimentConfig) -> Result<(String, String)> {
    let records = run_experiment(cfg)?;
    let mut trials = Vec::new();
    write_trials_csv(&records, &mut trials).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let text = String::from_utf8(trials).expect("utf8");
    let rows = parse_trials_csv(&text)?;
    let mut summary = Vec::new();
    write_summary_csv(&summarize(&rows), &mut summary)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((text, String::from_utf8(summary).expect("utf8")))
}
