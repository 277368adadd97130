//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ChannelParams;
use crate::resource::{SolverSettings, UserTaskParams};
use crate::saho::{AoSettings, SolveMode, StaticInit};
use crate::sca::ScaSettings;

pub const SPEED_OF_LIGHT: f64 = 3e8;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub array: ArrayConfig,
    pub channel: ChannelConfig,
    pub users: UsersConfig,
    pub task: TaskConfig,
    pub run: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub kx: usize,
    pub ky: usize,
    pub spacing_wavelengths: f64,
    pub theta_max_deg: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            kx: 3,
            ky: 3,
            spacing_wavelengths: 0.5,
            theta_max_deg: 60.0,
        }
    }
}

/// Either the keyword `"normalized"` or an explicit peak gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum G0Mode {
    Named(G0Keyword),
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum G0Keyword {
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub carrier_hz: f64,
    pub directivity_p: u32,
    pub g0_mode: G0Mode,
    /// Reference gain at 1 m. Absent means free-space `(lambda / 4 pi)^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0_db: Option<f64>,
    pub pathloss_exp: f64,
    pub rician_k: f64,
    pub noise_dbm: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            carrier_hz: 2.4e9,
            directivity_p: 4,
            g0_mode: G0Mode::Named(G0Keyword::Normalized),
            a0_db: None,
            pathloss_exp: 2.8,
            rician_k: 1.0,
            noise_dbm: -100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersConfig {
    pub count: usize,
    pub horiz_dist_range_m: [f64; 2],
    pub height_range_m: [f64; 2],
    /// Draw the horizontal distance with uniform density over the annulus
    /// instead of uniformly over the range.
    pub area_uniform: bool,
    /// Restrict azimuths to `[-pi/2, pi/2]`.
    pub azimuth_halfspace: bool,
}

impl Default for UsersConfig {
    fn default() -> Self {
        UsersConfig {
            count: 4,
            horiz_dist_range_m: [20.0, 50.0],
            height_range_m: [10.0, 30.0],
            area_uniform: false,
            azimuth_halfspace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub frame_s: f64,
    pub bandwidth_hz: f64,
    pub overhead_v: f64,
    pub cycles_per_bit: f64,
    pub e_max_j: f64,
    pub circuit_power_w: f64,
    pub capacitance_rc: f64,
    pub r_min_bits: f64,
    /// One weight per user; absent means all ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        let d = UserTaskParams::default();
        TaskConfig {
            frame_s: d.frame,
            bandwidth_hz: d.bandwidth,
            overhead_v: d.overhead,
            cycles_per_bit: d.cycles_per_bit,
            e_max_j: d.e_max,
            circuit_power_w: d.circuit_power,
            capacitance_rc: d.capacitance,
            r_min_bits: d.r_min,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub modes: Vec<SolveMode>,
    pub master_seed: u64,
    pub seed_count: usize,
    /// Explicit trial seeds; overrides `master_seed` and `seed_count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    pub ao_tol: f64,
    pub kkt_tol: f64,
    pub max_outer: usize,
    pub sca_max_iters: usize,
    pub sca_rel_tol: f64,
    pub init: StaticInit,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ao = AoSettings::default();
        RunConfig {
            modes: SolveMode::ALL.to_vec(),
            master_seed: 0,
            seed_count: 100,
            seeds: None,
            ao_tol: ao.ao_tol,
            kkt_tol: ao.solver.kkt_tol,
            max_outer: ao.max_outer,
            sca_max_iters: ao.sca.max_iters,
            sca_rel_tol: ao.sca.rel_tol,
            init: ao.init,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    DirectivityP,
    ThetaMaxDeg,
    /// Square arrays only: `K = n * n`.
    AntennaCount,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::DirectivityP => "directivity_p",
            SweepParameter::ThetaMaxDeg => "theta_max_deg",
            SweepParameter::AntennaCount => "antenna_count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn whole(v: f64) -> Option<u64> {
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u64)
}

fn square_side(k: f64) -> Option<usize> {
    let k = whole(k)? as usize;
    let n = (k as f64).sqrt().round() as usize;
    (k >= 1 && n * n == k).then_some(n)
}

fn check_range(name: &str, r: [f64; 2], min: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(config_err(format!(
            "{name} must be an ordered pair [lo, hi], got {r:?}"
        )));
    }
    if r[0] < min {
        return Err(config_err(format!("{name} lower end must be >= {min}, got {}", r[0])));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.array;
        if a.kx < 1 || a.ky < 1 {
            return Err(config_err("array kx and ky must be >= 1"));
        }
        if !(a.spacing_wavelengths > 0.0 && a.spacing_wavelengths.is_finite()) {
            return Err(config_err("array spacing_wavelengths must be positive"));
        }
        if !(0.0..=90.0).contains(&a.theta_max_deg) {
            return Err(config_err("array theta_max_deg must lie in [0, 90]"));
        }
        let c = &self.channel;
        if !(c.carrier_hz > 0.0 && c.carrier_hz.is_finite()) {
            return Err(config_err("channel carrier_hz must be positive"));
        }
        if c.a0_db.is_some_and(|v| !v.is_finite()) || !c.noise_dbm.is_finite() {
            return Err(config_err("channel a0_db and noise_dbm must be finite"));
        }
        let u = &self.users;
        if u.count < 1 {
            return Err(config_err("users count must be >= 1"));
        }
        check_range("users horiz_dist_range_m", u.horiz_dist_range_m, 0.0)?;
        check_range("users height_range_m", u.height_range_m, 0.0)?;
        if u.height_range_m[0] == 0.0 && u.horiz_dist_range_m[0] == 0.0 {
            return Err(config_err(
                "users could be placed on the array; raise a range lower end above 0",
            ));
        }
        if let Some(w) = &self.task.weights {
            if w.len() != u.count {
                return Err(config_err(format!(
                    "task weights has {} entries for {} users",
                    w.len(),
                    u.count
                )));
            }
        }
        let r = &self.run;
        if r.modes.is_empty() {
            return Err(config_err("run modes must not be empty"));
        }
        match &r.seeds {
            Some(s) if s.is_empty() => return Err(config_err("run seeds must not be empty")),
            None if r.seed_count == 0 => return Err(config_err("run seed_count must be >= 1")),
            _ => {}
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_err("sweep values must not be empty"));
            }
            for &v in &s.values {
                let ok = match s.parameter {
                    SweepParameter::DirectivityP => whole(v).is_some_and(|p| p >= 1),
                    SweepParameter::ThetaMaxDeg => (0.0..=90.0).contains(&v),
                    SweepParameter::AntennaCount => square_side(v).is_some(),
                };
                if !ok {
                    return Err(config_err(format!(
                        "sweep value {v} is not valid for {}",
                        s.parameter.as_str()
                    )));
                }
            }
        }
        // Derived physical parameters carry their own checks.
        self.channel_params()?.validate()?;
        for t in self.task_params() {
            t.validate()?;
        }
        self.ao_settings().validate()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.channel.carrier_hz
    }

    pub fn theta_max(&self) -> f64 {
        self.array.theta_max_deg * PI / 180.0
    }

    pub fn spacing(&self) -> f64 {
        self.array.spacing_wavelengths * self.wavelength()
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        let c = &self.channel;
        let p = c.directivity_p;
        let lambda = self.wavelength();
        let g0 = match c.g0_mode {
            G0Mode::Named(G0Keyword::Normalized) => ChannelParams::normalized_g0(p),
            G0Mode::Explicit(v) => v,
        };
        let ref_gain = match c.a0_db {
            Some(db) => 10f64.powf(db / 10.0),
            None => (lambda / (4.0 * PI)).powi(2),
        };
        let params = ChannelParams {
            g0,
            directivity: p,
            ref_gain,
            pathloss_exp: c.pathloss_exp,
            rician_k: c.rician_k,
            wavelength: lambda,
            noise_power: 10f64.powf((c.noise_dbm - 30.0) / 10.0),
        };
        params.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(params)
    }

    pub fn task_params(&self) -> Vec<UserTaskParams> {
        let t = &self.task;
        (0..self.users.count)
            .map(|m| UserTaskParams {
                bandwidth: t.bandwidth_hz,
                overhead: t.overhead_v,
                cycles_per_bit: t.cycles_per_bit,
                frame: t.frame_s,
                e_max: t.e_max_j,
                circuit_power: t.circuit_power_w,
                capacitance: t.capacitance_rc,
                r_min: t.r_min_bits,
                weight: t.weights.as_ref().map_or(1.0, |w| w[m]),
            })
            .collect()
    }

    pub fn ao_settings(&self) -> AoSettings {
        let r = &self.run;
        AoSettings {
            ao_tol: r.ao_tol,
            max_outer: r.max_outer,
            sca: ScaSettings {
                max_iters: r.sca_max_iters,
                rel_tol: r.sca_rel_tol,
                ..ScaSettings::default()
            },
            solver: SolverSettings {
                kkt_tol: r.kkt_tol,
                ..SolverSettings::default()
            },
            init: r.init,
        }
    }

    /// Copy of this config with one sweep parameter replaced.
    pub fn with_value(&self, parameter: SweepParameter, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match parameter {
            SweepParameter::DirectivityP => {
                c.channel.directivity_p = whole(value)
                    .filter(|&p| p >= 1)
                    .ok_or_else(|| config_err(format!("directivity {value} must be a positive integer")))?
                    as u32;
            }
            SweepParameter::ThetaMaxDeg => c.array.theta_max_deg = value,
            SweepParameter::AntennaCount => {
                let n = square_side(value)
                    .ok_or_else(|| config_err(format!("antenna count {value} must be a perfect square")))?;
                c.array.kx = n;
                c.array.ky = n;
            }
        }
        c.sweep = None;
        c.validate()?;
        Ok(c)
    }
}
