//! Browser bindings for the demo page.
//!
//! Every entry point takes plain numbers or TOML text and returns a JSON
//! string; the `*_json` functions are the same operations for native callers.

use ra_mec::geometry::Vec3;
use ra_mec::harness::{generate_scenario, run_experiment, ExperimentConfig, SweepConfig, SweepParameter};
use ra_mec::pointing::{optimal_pointing, Pointing};
use ra_mec::saho::{solve, SolveMode};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest seed count the page may request; sweeps run on the UI thread.
pub const MAX_SEEDS: usize = 50;
const PATTERN_POINTS: usize = 181;

#[derive(Debug, Serialize)]
pub struct PatternView {
    pub boresight: [f64; 3],
    pub user: [f64; 3],
    pub zenith_deg: f64,
    pub azimuth_deg: f64,
    /// Gain towards the user with the best feasible boresight.
    pub gain: f64,
    /// Gain towards the user with the boresight fixed at zenith.
    pub fixed_gain: f64,
    pub peak_gain: f64,
    /// Gain against angle off boresight, 0 to 180 degrees.
    pub pattern: Vec<f64>,
}

fn gain_of(cos: f64, g0: f64, p: u32) -> f64 {
    g0 * cos.clamp(0.0, 1.0).powi(2 * p as i32)
}

/// Best boresight for a user seen at the given angles and the resulting
/// `G0 cos^(2p)` pattern.
pub fn pointing_pattern(
    p: u32,
    theta_max_deg: f64,
    user_zenith_deg: f64,
    user_azimuth_deg: f64,
) -> Result<PatternView, String> {
    if p == 0 {
        return Err("directivity must be at least 1".into());
    }
    if !(0.0..=90.0).contains(&theta_max_deg) {
        return Err(format!(
            "rotation limit must lie in [0, 90] degrees, got {theta_max_deg}"
        ));
    }
    let (z, a) = (user_zenith_deg.to_radians(), user_azimuth_deg.to_radians());
    let q = Vec3::new(z.sin() * a.cos(), z.sin() * a.sin(), z.cos());
    let f = optimal_pointing(&q, theta_max_deg.to_radians()).map_err(|e| e.to_string())?;
    let g0 = 2.0 * (2.0 * p as f64 + 1.0);
    let pattern = (0..PATTERN_POINTS)
        .map(|i| gain_of((i as f64).to_radians().cos(), g0, p))
        .collect();
    Ok(PatternView {
        boresight: [f.x, f.y, f.z],
        user: [q.x, q.y, q.z],
        zenith_deg: f.z.clamp(-1.0, 1.0).acos().to_degrees(),
        azimuth_deg: f.y.atan2(f.x).to_degrees(),
        gain: gain_of(f.dot(&q), g0, p),
        fixed_gain: gain_of(q.z, g0, p),
        peak_gain: g0,
        pattern,
    })
}

#[derive(Debug, Serialize)]
pub struct UserView {
    pub position: [f64; 3],
    pub slot_s: f64,
    pub power_w: f64,
    pub cpu_hz: f64,
    pub local_bits: f64,
    pub offload_bits: f64,
    pub gain: f64,
}

#[derive(Debug, Serialize)]
pub struct ModeView {
    pub mode: SolveMode,
    pub objective_bits: f64,
    pub outer_iterations: usize,
    pub trace: Vec<f64>,
    pub users: Vec<UserView>,
    /// Boresights shared by the frame, or those of the first user's slot in
    /// dynamic mode.
    pub boresights: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize)]
pub struct ScenarioView {
    pub seed: u64,
    pub antennas: Vec<[f64; 3]>,
    pub modes: Vec<ModeView>,
}

fn parse_config(toml_text: &str) -> Result<ExperimentConfig, String> {
    let cfg = ExperimentConfig::from_toml_str(toml_text).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Draws one scenario and solves it in every mode.
pub fn solve_scenario(toml_text: &str, seed: u64) -> Result<ScenarioView, String> {
    let cfg = parse_config(toml_text)?;
    let (scenario, channels) = generate_scenario(&cfg, seed).map_err(|e| e.to_string())?;
    let settings = cfg.ao_settings();
    let modes = SolveMode::ALL
        .iter()
        .map(|&mode| {
            let sol = solve(&scenario, &channels, mode, &settings).map_err(|e| e.to_string())?;
            let frame = match &sol.pointing {
                Pointing::Frame(f) => f,
                Pointing::PerSlot(slots) => &slots[0],
            };
            Ok(ModeView {
                mode,
                objective_bits: sol.objective,
                outer_iterations: sol.report.outer_iterations,
                trace: sol.report.objective_trace.clone(),
                users: sol
                    .allocation
                    .users
                    .iter()
                    .zip(&scenario.users)
                    .zip(&sol.gains)
                    .map(|((u, g), &gain)| UserView {
                        position: [g.position.x, g.position.y, g.position.z],
                        slot_s: u.slot,
                        power_w: u.transmit_power,
                        cpu_hz: u.cpu_freq,
                        local_bits: u.r_loc,
                        offload_bits: u.r_off,
                        gain,
                    })
                    .collect(),
                boresights: frame.columns().iter().map(|c| [c.x, c.y, c.z]).collect(),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(ScenarioView {
        seed,
        antennas: scenario.array.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
        modes,
    })
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mode: SolveMode,
    pub mean_bits: f64,
    pub std_bits: f64,
    pub failed: usize,
}

/// Mean objective of every mode over `seed_count` seeds at each value.
pub fn sweep_points(
    toml_text: &str,
    parameter: &str,
    values: &[f64],
    seed_count: usize,
) -> Result<Vec<SweepPoint>, String> {
    if seed_count == 0 || seed_count > MAX_SEEDS {
        return Err(format!("seed count must lie in [1, {MAX_SEEDS}], got {seed_count}"));
    }
    let parameter = match parameter {
        "directivity_p" => SweepParameter::DirectivityP,
        "theta_max_deg" => SweepParameter::ThetaMaxDeg,
        "antenna_count" => SweepParameter::AntennaCount,
        other => return Err(format!("unknown sweep parameter {other:?}")),
    };
    let mut cfg = parse_config(toml_text)?;
    cfg.run.seed_count = seed_count;
    cfg.run.seeds = None;
    cfg.run.modes = SolveMode::ALL.to_vec();
    cfg.sweep = Some(SweepConfig {
        parameter,
        values: values.to_vec(),
    });
    let out = run_experiment(&cfg, None).map_err(|e| e.to_string())?;
    Ok(out
        .table
        .iter()
        .map(|r| SweepPoint {
            value: r.value.unwrap_or(f64::NAN),
            mode: r.mode,
            mean_bits: r.mean_objective_bits,
            std_bits: r.std_objective_bits,
            failed: r.failed,
        })
        .collect())
}

fn to_json<T: Serialize>(v: Result<T, String>) -> Result<String, String> {
    v.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

pub fn pointing_pattern_json(p: u32, theta_max_deg: f64, zenith_deg: f64, azimuth_deg: f64) -> Result<String, String> {
    to_json(pointing_pattern(p, theta_max_deg, zenith_deg, azimuth_deg))
}

pub fn solve_scenario_json(toml_text: &str, seed: u64) -> Result<String, String> {
    to_json(solve_scenario(toml_text, seed))
}

pub fn sweep_json(toml_text: &str, parameter: &str, values: &[f64], seed_count: usize) -> Result<String, String> {
    to_json(sweep_points(toml_text, parameter, values, seed_count))
}

/// The built-in default configuration as TOML.
#[wasm_bindgen(js_name = defaultConfig)]
pub fn default_config() -> String {
    ExperimentConfig::default().to_toml_string()
}

#[wasm_bindgen(js_name = pointingPattern)]
pub fn pointing_pattern_js(p: u32, theta_max_deg: f64, zenith_deg: f64, azimuth_deg: f64) -> Result<String, JsError> {
    pointing_pattern_json(p, theta_max_deg, zenith_deg, azimuth_deg).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = solveScenario)]
pub fn solve_scenario_js(toml_text: &str, seed: u64) -> Result<String, JsError> {
    solve_scenario_json(toml_text, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sweep)]
pub fn sweep_js(toml_text: &str, parameter: &str, values: Vec<f64>, seed_count: usize) -> Result<String, JsError> {
    sweep_json(toml_text, parameter, &values, seed_count).map_err(|e| JsError::new(&e))
}
