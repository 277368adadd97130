use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParameter};
use super::{generate_scenario, run_trial, trial_seeds, TrialRecord};
use crate::error::{Error, Result};
use crate::saho::SolveMode;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RA_MEC_THREADS";

/// Worker cap from `RA_MEC_THREADS`; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Aggregate of one (sweep value, mode) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: Option<SweepParameter>,
    pub value: Option<f64>,
    pub mode: SolveMode,
    /// Successful trials entering the statistics.
    pub trials: usize,
    pub failed: usize,
    pub mean_objective_bits: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single trial.
    pub std_objective_bits: f64,
    pub mean_outer_iterations: f64,
    pub converged_fraction: f64,
}

impl SweepRow {
    /// False when any trial at this point failed.
    pub fn complete(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub seeds: Vec<u64>,
    pub records: Vec<TrialRecord>,
    pub table: Vec<SweepRow>,
}

fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.trial.cmp(&b.trial))
            .then(a.mode.cmp(&b.mode))
            .then(a.sweep_value.unwrap_or(0.0).total_cmp(&b.sweep_value.unwrap_or(0.0)))
    });
}

/// Mean and spread of the successful records per (mode, value), ordered by
/// mode then value.
pub fn aggregate(records: &[TrialRecord], parameter: Option<SweepParameter>) -> Vec<SweepRow> {
    let mut keys: Vec<(SolveMode, Option<f64>)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(m, v)| m == r.mode && same_value(v, r.sweep_value)) {
            keys.push((r.mode, r.sweep_value));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.unwrap_or(0.0).total_cmp(&b.1.unwrap_or(0.0))));
    keys.into_iter()
        .map(|(mode, value)| {
            let point: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.mode == mode && same_value(r.sweep_value, value))
                .collect();
            let ok: Vec<&&TrialRecord> = point.iter().filter(|r| r.ok).collect();
            let n = ok.len();
            let nf = n as f64;
            let (mean, std, iters, conv) = if n == 0 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                let mean = ok.iter().map(|r| r.objective_bits).sum::<f64>() / nf;
                let std = if n > 1 {
                    (ok.iter().map(|r| (r.objective_bits - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
                } else {
                    0.0
                };
                let iters = ok.iter().map(|r| r.outer_iterations as f64).sum::<f64>() / nf;
                let conv = ok.iter().filter(|r| r.converged).count() as f64 / nf;
                (mean, std, iters, conv)
            };
            SweepRow {
                parameter,
                value,
                mode,
                trials: n,
                failed: point.len() - n,
                mean_objective_bits: mean,
                std_objective_bits: std,
                mean_outer_iterations: iters,
                converged_fraction: conv,
            }
        })
        .collect()
}

fn same_value(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: Vec<T>, threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: Vec<T>, _threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    F: Fn(T) -> R,
{
    Ok(items.into_iter().map(f).collect())
}

/// Runs every configured mode on every trial seed, at every sweep value if
/// the config has a sweep block. All modes and sweep values share the same
/// seeds. `threads` caps the worker count; results do not depend on it.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    config.validate()?;
    let seeds = trial_seeds(config);
    let parameter = config.sweep.as_ref().map(|s| s.parameter);
    let points: Vec<(Option<f64>, ExperimentConfig)> = match &config.sweep {
        Some(s) => s
            .values
            .iter()
            .map(|&v| Ok((Some(v), config.with_value(s.parameter, v)?)))
            .collect::<Result<_>>()?,
        None => vec![(None, config.clone())],
    };

    let mut jobs = Vec::with_capacity(points.len() * seeds.len());
    for (p, _) in points.iter().enumerate() {
        for (i, &seed) in seeds.iter().enumerate() {
            jobs.push((p, i, seed));
        }
    }

    let modes = &config.run.modes;
    let per_job = par_map(jobs, threads, |(p, trial, seed)| {
        let (value, cfg) = &points[p];
        let settings = cfg.ao_settings();
        let records: Vec<TrialRecord> = match generate_scenario(cfg, seed) {
            Ok((scenario, channels)) => modes
                .iter()
                .map(|&mode| run_trial(&scenario, &channels, mode, &settings))
                .collect(),
            Err(e) => modes
                .iter()
                .map(|&mode| TrialRecord::failed(seed, mode, e.to_string()))
                .collect(),
        };
        records
            .into_iter()
            .map(|mut r| {
                r.trial = trial;
                r.sweep_value = *value;
                r
            })
            .collect::<Vec<_>>()
    })?;

    let mut records: Vec<TrialRecord> = per_job.into_iter().flatten().collect();
    sort_records(&mut records);
    let table = aggregate(&records, parameter);
    Ok(ExperimentOutcome { seeds, records, table })
}
