//! Scenario generation, Monte Carlo trials, sweeps and result files.

mod config;
mod emit;
mod sweep;

pub use config::{
    ArrayConfig, ChannelConfig, ExperimentConfig, G0Keyword, G0Mode, RunConfig, SweepConfig, SweepParameter,
    TaskConfig, UsersConfig, SPEED_OF_LIGHT,
};
pub use emit::{
    fmt_float, render_sweep_csv, write_run_json, write_sweep_csv, write_trace_csv, write_trials_csv, RunDocument,
    TraceRow, SWEEP_HEADER, TRACE_HEADER, TRIALS_HEADER,
};
pub use sweep::{aggregate, run_experiment, threads_from_env, ExperimentOutcome, SweepRow, THREADS_ENV};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{build_array, synthesize_channels, user_position, ChannelSet};
use crate::pointing::{dynamic_pointing, Pointing};
use crate::resource::{max_achievable_bits, validate_allocation, ResidualReport};
use crate::saho::{gains_for, solve, AoSettings, Solution, SolveMode};
use crate::scenario::Scenario;

/// SplitMix64 output for `master` advanced `index + 1` steps.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seeds(config: &ExperimentConfig) -> Vec<u64> {
    match &config.run.seeds {
        Some(s) => s.clone(),
        None => (0..config.run.seed_count as u64)
            .map(|i| trial_seed(config.run.master_seed, i))
            .collect(),
    }
}

fn uniform<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    range[0] + (range[1] - range[0]) * rng.random::<f64>()
}

/// Draws users and fading for one trial. Positions and fading use separate
/// streams of the seed, so a change of array size leaves the users in place.
pub fn generate_scenario(config: &ExperimentConfig, seed: u64) -> Result<(Scenario, ChannelSet)> {
    config.validate()?;
    let array = build_array(config.array.kx, config.array.ky, config.spacing(), config.theta_max())?;
    let channel = config.channel_params()?;

    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed);
    pos_rng.set_stream(0);
    let mut fade_rng = ChaCha8Rng::seed_from_u64(seed);
    fade_rng.set_stream(1);

    let u = &config.users;
    let users = (0..u.count)
        .map(|_| {
            let rho = if u.area_uniform {
                let [lo, hi] = u.horiz_dist_range_m;
                uniform(&mut pos_rng, [lo * lo, hi * hi]).sqrt()
            } else {
                uniform(&mut pos_rng, u.horiz_dist_range_m)
            };
            let height = uniform(&mut pos_rng, u.height_range_m);
            let draw = pos_rng.random::<f64>();
            let azimuth = if u.azimuth_halfspace {
                PI * draw - PI / 2.0
            } else {
                PI - 2.0 * PI * draw
            };
            user_position(rho.hypot(height), rho.atan2(height), azimuth)
        })
        .collect::<Result<Vec<_>>>()?;

    let channels = synthesize_channels(&array, &users, &channel, &mut fade_rng)?;
    let scenario = Scenario {
        array,
        channel,
        users,
        tasks: config.task_params(),
        seed,
    };
    scenario.validate()?;
    Ok((scenario, channels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub tau_s: f64,
    pub y_j: f64,
    pub p_w: f64,
    pub f_hz: f64,
    pub r_loc_bits: f64,
    pub r_off_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub mode: SolveMode,
    pub sweep_value: Option<f64>,
    pub ok: bool,
    pub error: Option<String>,
    pub objective_bits: f64,
    pub users: Vec<UserRecord>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub residuals: ResidualReport,
    /// Worst constraint violation relative to its budget.
    pub max_residual: f64,
    pub kkt_residual: f64,
    /// Objective after each outer round (one entry for single-shot modes).
    pub trace: Vec<f64>,
}

impl TrialRecord {
    pub fn failed(seed: u64, mode: SolveMode, error: String) -> Self {
        TrialRecord {
            trial: 0,
            seed,
            mode,
            sweep_value: None,
            ok: false,
            error: Some(error),
            objective_bits: 0.0,
            users: Vec::new(),
            outer_iterations: 0,
            converged: false,
            wall_time_s: 0.0,
            residuals: ResidualReport::default(),
            max_residual: 0.0,
            kkt_residual: 0.0,
            trace: Vec::new(),
        }
    }
}

impl TrialRecord {
    /// Record of a finished solve, with residuals recomputed from the allocation.
    pub fn from_solution(scenario: &Scenario, sol: Solution) -> Self {
        let residuals = validate_allocation(&sol.allocation, &sol.gains, &scenario.tasks);
        TrialRecord {
            trial: 0,
            seed: scenario.seed,
            mode: sol.mode,
            sweep_value: None,
            ok: true,
            error: None,
            objective_bits: sol.objective,
            users: sol
                .allocation
                .users
                .iter()
                .map(|u| UserRecord {
                    tau_s: u.slot,
                    y_j: u.offload_energy,
                    p_w: u.transmit_power,
                    f_hz: u.cpu_freq,
                    r_loc_bits: u.r_loc,
                    r_off_bits: u.r_off,
                })
                .collect(),
            outer_iterations: sol.report.outer_iterations,
            converged: sol.report.converged,
            wall_time_s: sol.report.wall_time,
            max_residual: residuals.max_relative(&scenario.tasks),
            residuals,
            kkt_residual: sol.report.kkt_residual,
            trace: sol.report.objective_trace,
        }
    }
}

/// Solves one scenario in one mode. Solver failures are recorded in the
/// returned record rather than propagated.
pub fn run_trial(scenario: &Scenario, channels: &ChannelSet, mode: SolveMode, settings: &AoSettings) -> TrialRecord {
    match solve(scenario, channels, mode, settings) {
        Ok(sol) => TrialRecord::from_solution(scenario, sol),
        Err(e) => TrialRecord::failed(scenario.seed, mode, e.to_string()),
    }
}

/// Problems a config is certain to hit, found by solving nothing: a user
/// whose minimum bits exceed what it could deliver even with every antenna
/// aimed at it is reported. Checks the first trial seed.
pub fn feasibility_precheck(config: &ExperimentConfig) -> Result<Vec<String>> {
    let seed = trial_seeds(config)[0];
    let (scenario, channels) = generate_scenario(config, seed)?;
    let slots = (0..channels.num_users())
        .map(|m| dynamic_pointing(&scenario.array, &channels, m))
        .collect::<Result<Vec<_>>>()?;
    let gains = gains_for(&Pointing::PerSlot(slots), &channels, &scenario)?;
    Ok(gains
        .iter()
        .zip(&scenario.tasks)
        .enumerate()
        .filter_map(|(m, (&g, t))| {
            let ub = max_achievable_bits(g, t);
            (t.r_min > ub).then(|| {
                format!(
                    "seed {seed}: user {m} needs {:.3e} bits but at most {ub:.3e} are achievable",
                    t.r_min
                )
            })
        })
        .collect())
}
