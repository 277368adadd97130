//! Frame-wide antenna pointing by successive convex approximation.
//!
//! With the resource allocation fixed, the offloading sum rate
//!
//! ```text
//! Phi(F) = sum_m w_m (tau_m B / v_m) log2(1 + y_m ||h_m(F)||^2 / (tau_m sigma^2))
//! ```
//!
//! is linearised around the current pointing. The linear model separates
//! across antennas, and each antenna's piece is maximized in closed form over
//! the relaxed set `{||f|| <= 1, cos(theta_max) <= f_z <= 1}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{channel_power, ChannelParams, ChannelSet, Vec3};
use crate::pointing::PointingMatrix;
use crate::resource::{Allocation, UserTaskParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaSettings {
    pub max_iters: usize,
    /// Stop once the relative objective change drops below this.
    pub rel_tol: f64,
    /// Floor applied to positive projections `f . q` in gradients.
    pub min_projection: f64,
}

impl Default for ScaSettings {
    fn default() -> Self {
        ScaSettings {
            max_iters: 20,
            rel_tol: 1e-6,
            min_projection: 0.0,
        }
    }
}

impl ScaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(invalid("sca max_iters must be >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid("sca rel_tol must be positive"));
        }
        if !(0.0..1.0).contains(&self.min_projection) {
            return Err(invalid("sca min_projection must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Gradient of `beta (f . q)^p` with respect to `f`.
pub fn channel_gradient(f: &Vec3, direction: &Vec3, beta: Complex64, directivity: u32) -> [Complex64; 3] {
    let proj = f.dot(direction);
    if proj <= 0.0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let p = directivity as i32;
    let s = beta * (p as f64 * proj.powi(p - 1));
    [s * direction.x, s * direction.y, s * direction.z]
}

fn check_shapes(
    pointing: &PointingMatrix,
    channels: &ChannelSet,
    allocation: &Allocation,
    tasks: &[UserTaskParams],
) -> Result<()> {
    if pointing.len() != channels.num_antennas() {
        return Err(invalid("pointing does not match the channel set"));
    }
    let m = channels.num_users();
    if allocation.users.len() != m || tasks.len() != m {
        return Err(invalid(format!(
            "expected {m} users, got {} allocations and {} task parameter sets",
            allocation.users.len(),
            tasks.len()
        )));
    }
    Ok(())
}

fn user_snr_scale(alloc: &crate::resource::UserAllocation, noise: f64) -> Option<f64> {
    if alloc.slot > 0.0 && alloc.offload_energy > 0.0 {
        Some(alloc.offload_energy / (alloc.slot * noise))
    } else {
        None
    }
}

/// Weighted offloading bits when every user sees the same pointing.
pub fn offload_objective(
    pointing: &PointingMatrix,
    channels: &ChannelSet,
    allocation: &Allocation,
    channel: &ChannelParams,
    tasks: &[UserTaskParams],
) -> Result<f64> {
    check_shapes(pointing, channels, allocation, tasks)?;
    let mut total = 0.0;
    for (m, (u, t)) in allocation.users.iter().zip(tasks).enumerate() {
        if let Some(scale) = user_snr_scale(u, channel.noise_power) {
            let snr = scale * channel_power(pointing, channels, channel.directivity, m);
            total += t.weight * u.slot * t.bandwidth / t.overhead * snr.ln_1p() / std::f64::consts::LN_2;
        }
    }
    Ok(total)
}

/// Linear model of the offloading objective around an expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCoefficients {
    /// Gradient of the objective with respect to each boresight.
    pub per_antenna: Vec<Vec3>,
    /// Outer multiplier of each user's `||h_m||^2` term.
    pub weights: Vec<f64>,
    /// Operating SNR of each user at the expansion point.
    pub snr: Vec<f64>,
    /// Objective value at the expansion point.
    pub base: f64,
    pub expansion: PointingMatrix,
}

impl SurrogateCoefficients {
    /// `base + sum_k c_k . (f_k - f_k^0)`.
    pub fn value(&self, pointing: &PointingMatrix) -> f64 {
        self.base
            + self
                .per_antenna
                .iter()
                .zip(pointing.columns().iter().zip(self.expansion.columns()))
                .map(|(c, (f, f0))| c.dot(&(f - f0)))
                .sum::<f64>()
    }
}

pub fn surrogate_coefficients(
    pointing: &PointingMatrix,
    channels: &ChannelSet,
    allocation: &Allocation,
    channel: &ChannelParams,
    tasks: &[UserTaskParams],
    settings: &ScaSettings,
) -> Result<SurrogateCoefficients> {
    check_shapes(pointing, channels, allocation, tasks)?;
    let p = channel.directivity as i32;
    let num_users = channels.num_users();
    let mut per_antenna = vec![Vec3::zeros(); pointing.len()];
    let mut weights = vec![0.0; num_users];
    let mut snr = vec![0.0; num_users];
    let mut base = 0.0;
    for (m, (u, t)) in allocation.users.iter().zip(tasks).enumerate() {
        let Some(scale) = user_snr_scale(u, channel.noise_power) else {
            continue;
        };
        let s = scale * channel_power(pointing, channels, channel.directivity, m);
        let rate_scale = t.weight * u.slot * t.bandwidth / t.overhead;
        base += rate_scale * s.ln_1p() / std::f64::consts::LN_2;
        let w = rate_scale * scale / (std::f64::consts::LN_2 * (1.0 + s));
        weights[m] = w;
        snr[m] = s;
        for ((c, f), l) in per_antenna
            .iter_mut()
            .zip(pointing.columns())
            .zip(channels.user_links(m))
        {
            let proj = f.dot(&l.link.direction);
            if proj <= 0.0 {
                continue;
            }
            let proj = proj.max(settings.min_projection);
            *c += l.link.direction * (w * 2.0 * l.beta.norm_sqr() * p as f64 * proj.powi(2 * p - 1));
        }
    }
    Ok(SurrogateCoefficients {
        per_antenna,
        weights,
        snr,
        base,
        expansion: pointing.clone(),
    })
}

/// Maximizes `c . f` over `{||f|| <= 1, cos(theta_max) <= f_z <= 1}`.
pub fn solve_linear_ball_slab(c: &Vec3, theta_max: f64) -> Vec3 {
    let norm = c.norm();
    if norm == 0.0 {
        return Vec3::z();
    }
    let t = (c.z / norm).clamp(theta_max.cos(), 1.0);
    let cxy = c.x.hypot(c.y);
    if cxy == 0.0 {
        return Vec3::new(0.0, 0.0, t);
    }
    let r = (1.0 - t * t).max(0.0).sqrt();
    Vec3::new(r * c.x / cxy, r * c.y / cxy, t)
}

fn normalize_columns(columns: Vec<Vec3>, fallback: &PointingMatrix) -> PointingMatrix {
    let columns = columns
        .into_iter()
        .zip(fallback.columns())
        .map(|(f, old)| {
            let n = f.norm();
            if n > 1e-12 {
                f / n
            } else {
                *old
            }
        })
        .collect();
    PointingMatrix::from_columns_unchecked(columns)
}

fn check_feasible(pointing: &PointingMatrix, theta_max: f64) -> Result<()> {
    if !pointing.is_feasible(theta_max) {
        return Err(invalid("initial pointing violates the rotation limit"));
    }
    Ok(())
}

/// One SCA update: solve the per-antenna linear problems and renormalize.
pub fn sca_step(
    pointing: &PointingMatrix,
    channels: &ChannelSet,
    allocation: &Allocation,
    channel: &ChannelParams,
    tasks: &[UserTaskParams],
    theta_max: f64,
    settings: &ScaSettings,
) -> Result<PointingMatrix> {
    let coeffs = surrogate_coefficients(pointing, channels, allocation, channel, tasks, settings)?;
    let columns = coeffs
        .per_antenna
        .iter()
        .map(|c| solve_linear_ball_slab(c, theta_max))
        .collect();
    Ok(normalize_columns(columns, pointing))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticPointingResult {
    pub pointing: PointingMatrix,
    /// True objective of every accepted iterate, starting with the initial one.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_BACKTRACKS: usize = 30;

/// Iterates [`sca_step`] from `init`, only accepting iterates that improve
/// the true objective. A step that does not improve is retried along the
/// normalized chord towards it with halving step length.
pub fn static_pointing_solve(
    init: &PointingMatrix,
    channels: &ChannelSet,
    allocation: &Allocation,
    channel: &ChannelParams,
    tasks: &[UserTaskParams],
    theta_max: f64,
    settings: &ScaSettings,
) -> Result<StaticPointingResult> {
    settings.validate()?;
    check_feasible(init, theta_max)?;
    let objective = |f: &PointingMatrix| offload_objective(f, channels, allocation, channel, tasks);

    let mut current = init.clone();
    let mut value = objective(&current)?;
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        iterations += 1;
        let target = sca_step(&current, channels, allocation, channel, tasks, theta_max, settings)?;
        let mut candidate = target.clone();
        let mut cand_value = objective(&candidate)?;
        let mut eta = 1.0;
        let mut backtracks = 0;
        while !(cand_value > value) && backtracks < MAX_BACKTRACKS {
            eta *= 0.5;
            backtracks += 1;
            let mixed = current
                .columns()
                .iter()
                .zip(target.columns())
                .map(|(a, b)| a * (1.0 - eta) + b * eta)
                .collect();
            candidate = normalize_columns(mixed, &current);
            cand_value = objective(&candidate)?;
        }
        if !(cand_value > value) {
            // No ascent available from here: a stationary point of the model.
            converged = true;
            break;
        }
        let rel = (cand_value - value) / value.abs().max(f64::MIN_POSITIVE);
        current = candidate;
        value = cand_value;
        trace.push(value);
        if rel < settings.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(StaticPointingResult {
        pointing: current,
        trace,
        iterations,
        converged,
    })
}
