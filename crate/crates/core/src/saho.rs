//! Scenario-adaptive joint optimization of pointing and resources.
//!
//! * `Dynamic`: every antenna re-points at the active user in each slot
//!   (closed form), followed by a single resource solve.
//! * `Static`: one frame-wide pointing, alternating SCA pointing updates and
//!   resource solves from the fixed-antenna starting point.
//! * `Fixed`: all boresights along `+z`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{channel_power, ChannelSet, Vec3};
use crate::pointing::{dynamic_pointing, optimal_pointing, Pointing, PointingMatrix};
use crate::resource::{
    local_rate_energy, offload_rate, solve_resource_allocation, validate_allocation, Allocation, AllocationReport,
    SolverSettings,
};
use crate::sca::{static_pointing_solve, ScaSettings};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Dynamic,
    Static,
    Fixed,
}

impl SolveMode {
    pub const ALL: [SolveMode; 3] = [SolveMode::Dynamic, SolveMode::Static, SolveMode::Fixed];

    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::Dynamic => "dynamic",
            SolveMode::Static => "static",
            SolveMode::Fixed => "fixed",
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(SolveMode::Dynamic),
            "static" => Ok(SolveMode::Static),
            "fixed" => Ok(SolveMode::Fixed),
            other => Err(invalid(format!(
                "unknown mode {other:?} (expected dynamic, static or fixed)"
            ))),
        }
    }
}

/// Starting pointing for the static branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StaticInit {
    /// All boresights along `+z`.
    #[default]
    Fixed,
    /// Each antenna aims at the mean direction of the users it sees.
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoSettings {
    /// Stop once the relative objective change between rounds drops below this.
    pub ao_tol: f64,
    pub max_outer: usize,
    pub sca: ScaSettings,
    pub solver: SolverSettings,
    pub init: StaticInit,
}

impl Default for AoSettings {
    fn default() -> Self {
        AoSettings {
            ao_tol: 1e-3,
            max_outer: 30,
            sca: ScaSettings::default(),
            solver: SolverSettings::default(),
            init: StaticInit::Fixed,
        }
    }
}

impl AoSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.ao_tol > 0.0) {
            return Err(invalid("ao_tol must be positive"));
        }
        if self.max_outer < 1 {
            return Err(invalid("max_outer must be >= 1"));
        }
        self.sca.validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub outer_iterations: usize,
    /// Best objective after each outer round, starting with the initial point.
    pub objective_trace: Vec<f64>,
    /// Objective of each outer round's iterate, before taking the best.
    pub raw_trace: Vec<f64>,
    pub converged: bool,
    /// Largest constraint violation relative to its budget.
    pub max_constraint_residual: f64,
    pub kkt_residual: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub mode: SolveMode,
    pub pointing: Pointing,
    pub allocation: Allocation,
    /// `||h_m||^2 / sigma^2` per user under `pointing`.
    pub gains: Vec<f64>,
    pub objective: f64,
    pub report: SolveReport,
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }
    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

// No monotonic clock without JS bindings; timings read as zero.
#[cfg(target_arch = "wasm32")]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Clock
    }
    fn elapsed(&self) -> f64 {
        0.0
    }
}

fn check_dims(pointing: &Pointing, channels: &ChannelSet, scenario: &Scenario) -> Result<()> {
    let k = channels.num_antennas();
    let m = channels.num_users();
    if scenario.tasks.len() != m {
        return Err(invalid(format!("{} task sets for {m} users", scenario.tasks.len())));
    }
    let ok = match pointing {
        Pointing::Frame(f) => f.len() == k,
        Pointing::PerSlot(slots) => slots.len() == m && slots.iter().all(|f| f.len() == k),
    };
    if !ok {
        return Err(invalid("pointing does not match the channel set"));
    }
    Ok(())
}

/// `||h_m||^2 / sigma^2` for every user.
pub fn gains_for(pointing: &Pointing, channels: &ChannelSet, scenario: &Scenario) -> Result<Vec<f64>> {
    check_dims(pointing, channels, scenario)?;
    let p = scenario.channel.directivity;
    Ok((0..channels.num_users())
        .map(|m| channel_power(pointing.for_user(m), channels, p, m) / scenario.channel.noise_power)
        .collect())
}

/// Weighted computation bits recomputed from the pointing and the decision
/// variables alone.
pub fn objective_of(
    pointing: &Pointing,
    allocation: &Allocation,
    channels: &ChannelSet,
    scenario: &Scenario,
) -> Result<f64> {
    let gains = gains_for(pointing, channels, scenario)?;
    if allocation.users.len() != gains.len() {
        return Err(invalid("allocation does not match the number of users"));
    }
    Ok(allocation
        .users
        .iter()
        .zip(&scenario.tasks)
        .zip(&gains)
        .map(|((u, t), &g)| {
            let local = local_rate_energy(u.cpu_freq, t).0;
            let off = offload_rate(u.offload_energy, u.slot, g, t.bandwidth, t.overhead);
            t.weight * (local + off)
        })
        .sum())
}

fn finish(
    mode: SolveMode,
    pointing: Pointing,
    allocation: Allocation,
    gains: Vec<f64>,
    scenario: &Scenario,
    channels: &ChannelSet,
    mut report: SolveReport,
) -> Result<Solution> {
    let objective = objective_of(&pointing, &allocation, channels, scenario)?;
    report.max_constraint_residual =
        validate_allocation(&allocation, &gains, &scenario.tasks).max_relative(&scenario.tasks);
    Ok(Solution {
        mode,
        pointing,
        allocation,
        gains,
        objective,
        report,
    })
}

fn single_solve(
    mode: SolveMode,
    pointing: Pointing,
    scenario: &Scenario,
    channels: &ChannelSet,
    solver: &SolverSettings,
) -> Result<Solution> {
    let clock = Clock::start();
    let gains = gains_for(&pointing, channels, scenario)?;
    let (allocation, rep) = solve_resource_allocation(&gains, &scenario.tasks, solver)?;
    let objective = objective_of(&pointing, &allocation, channels, scenario)?;
    let report = SolveReport {
        outer_iterations: 0,
        objective_trace: vec![objective],
        raw_trace: vec![objective],
        converged: rep.converged,
        max_constraint_residual: 0.0,
        kkt_residual: rep.kkt_residual,
        wall_time: clock.elapsed(),
    };
    finish(mode, pointing, allocation, gains, scenario, channels, report)
}

/// Fixed antennas: every boresight along `+z`.
pub fn solve_fixed(scenario: &Scenario, channels: &ChannelSet, solver: &SolverSettings) -> Result<Solution> {
    let pointing = Pointing::Frame(PointingMatrix::fixed(channels.num_antennas()));
    single_solve(SolveMode::Fixed, pointing, scenario, channels, solver)
}

/// Per-slot re-pointing at the active user.
pub fn solve_dynamic(scenario: &Scenario, channels: &ChannelSet, solver: &SolverSettings) -> Result<Solution> {
    let slots = (0..channels.num_users())
        .map(|m| dynamic_pointing(&scenario.array, channels, m))
        .collect::<Result<Vec<_>>>()?;
    single_solve(SolveMode::Dynamic, Pointing::PerSlot(slots), scenario, channels, solver)
}

fn centroid_pointing(scenario: &Scenario, channels: &ChannelSet) -> Result<PointingMatrix> {
    let columns = (0..channels.num_antennas())
        .map(|k| {
            let sum: Vec3 = (0..channels.num_users())
                .map(|m| channels.get(k, m).link.direction)
                .sum();
            let n = sum.norm();
            if n < 1e-12 {
                Ok(Vec3::z())
            } else {
                optimal_pointing(&(sum / n), scenario.array.theta_max)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PointingMatrix::new(columns, scenario.array.theta_max)
}

/// Alternates SCA pointing updates and resource solves; returns the best
/// iterate seen.
pub fn solve_static(scenario: &Scenario, channels: &ChannelSet, settings: &AoSettings) -> Result<Solution> {
    settings.validate()?;
    let clock = Clock::start();
    let theta_max = scenario.array.theta_max;
    let mut pointing = match settings.init {
        StaticInit::Fixed => PointingMatrix::fixed(channels.num_antennas()),
        StaticInit::Centroid => centroid_pointing(scenario, channels)?,
    };

    let solve_at = |f: &PointingMatrix| -> Result<(Vec<f64>, Allocation, AllocationReport, f64)> {
        let frame = Pointing::Frame(f.clone());
        let gains = gains_for(&frame, channels, scenario)?;
        let (alloc, rep) = solve_resource_allocation(&gains, &scenario.tasks, &settings.solver)?;
        let obj = objective_of(&frame, &alloc, channels, scenario)?;
        Ok((gains, alloc, rep, obj))
    };

    let (mut gains, mut allocation, mut rep, mut value) = solve_at(&pointing)?;
    let mut best = (pointing.clone(), allocation.clone(), gains.clone(), rep.clone(), value);
    let mut trace = vec![value];
    let mut raw = vec![value];
    let mut converged = false;
    let mut outer = 0;

    while outer < settings.max_outer {
        outer += 1;
        let sca = static_pointing_solve(
            &pointing,
            channels,
            &allocation,
            &scenario.channel,
            &scenario.tasks,
            theta_max,
            &settings.sca,
        )?;
        pointing = sca.pointing;
        let previous = value;
        (gains, allocation, rep, value) = solve_at(&pointing)?;
        raw.push(value);
        if value > best.4 {
            best = (pointing.clone(), allocation.clone(), gains.clone(), rep.clone(), value);
        }
        trace.push(best.4);
        let change = (value - previous).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if change < settings.ao_tol {
            converged = true;
            break;
        }
    }

    let (pointing, allocation, gains, rep, _) = best;
    let report = SolveReport {
        outer_iterations: outer,
        objective_trace: trace,
        raw_trace: raw,
        converged: converged && rep.converged,
        max_constraint_residual: 0.0,
        kkt_residual: rep.kkt_residual,
        wall_time: clock.elapsed(),
    };
    finish(
        SolveMode::Static,
        Pointing::Frame(pointing),
        allocation,
        gains,
        scenario,
        channels,
        report,
    )
}

pub fn solve(scenario: &Scenario, channels: &ChannelSet, mode: SolveMode, settings: &AoSettings) -> Result<Solution> {
    match mode {
        SolveMode::Dynamic => solve_dynamic(scenario, channels, &settings.solver),
        SolveMode::Static => solve_static(scenario, channels, settings),
        SolveMode::Fixed => solve_fixed(scenario, channels, &settings.solver),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_array, synthesize_channels, user_position, ChannelParams, PURE_LOS_RICIAN_K};
    use crate::resource::{UserAllocation, UserTaskParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(kx: usize, users: Vec<(f64, f64, f64)>, rician_k: f64, seed: u64) -> (Scenario, ChannelSet) {
        let array = build_array(kx, kx, 0.0625, std::f64::consts::FRAC_PI_3).unwrap();
        let users: Vec<_> = users
            .into_iter()
            .map(|(r, z, a)| user_position(r, z, a).unwrap())
            .collect();
        let channel = ChannelParams {
            g0: ChannelParams::normalized_g0(4),
            directivity: 4,
            ref_gain: 10f64.powf(-4.005),
            pathloss_exp: 2.8,
            rician_k,
            wavelength: 0.125,
            noise_power: 1e-13,
        };
        let channels = synthesize_channels(&array, &users, &channel, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let tasks = vec![UserTaskParams::default(); users.len()];
        (
            Scenario {
                array,
                channel,
                users,
                tasks,
                seed,
            },
            channels,
        )
    }

    fn four_users(seed: u64) -> (Scenario, ChannelSet) {
        scenario(
            3,
            vec![(35.0, 1.1, 0.3), (40.0, 0.9, 2.0), (30.0, 1.2, -1.5), (45.0, 1.3, -2.8)],
            1.0,
            seed,
        )
    }

    #[test]
    fn mode_strings_round_trip() {
        for m in SolveMode::ALL {
            assert_eq!(m.to_string().parse::<SolveMode>().unwrap(), m);
        }
        assert!("both".parse::<SolveMode>().is_err());
    }

    #[test]
    fn objective_of_examples() {
        let (s, ch) = four_users(1);
        let fa = Pointing::Frame(PointingMatrix::fixed(9));
        assert_eq!(objective_of(&fa, &Allocation::zeros(4), &ch, &s).unwrap(), 0.0);
        let mut alloc = Allocation::zeros(4);
        alloc.users[2] = UserAllocation::new(0.0, 0.0, 2e8, 0.0, &s.tasks[2]);
        let v = objective_of(&fa, &alloc, &ch, &s).unwrap();
        assert!((v - 2e8 / 1000.0).abs() < 1e-6);
    }

    #[test]
    fn boresight_user_gives_same_fixed_and_dynamic() {
        let (s, ch) = scenario(1, vec![(20.0, 0.0, 0.0)], PURE_LOS_RICIAN_K, 0);
        let solver = SolverSettings::default();
        let a = solve_fixed(&s, &ch, &solver).unwrap();
        let b = solve_dynamic(&s, &ch, &solver).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-12 * a.objective);
    }

    #[test]
    fn dynamic_gain_is_sum_of_peaks_inside_cone() {
        let (s, ch) = scenario(2, vec![(30.0, 0.5, 0.4), (25.0, 0.8, -2.0)], 1.0, 3);
        let sol = solve_dynamic(&s, &ch, &SolverSettings::default()).unwrap();
        for m in 0..2 {
            let peak: f64 = ch.user_links(m).iter().map(|l| l.beta.norm_sqr()).sum::<f64>() / s.channel.noise_power;
            assert!((sol.gains[m] - peak).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn static_starts_at_fixed_and_orders_modes() {
        for seed in 0..5 {
            let (s, ch) = four_users(seed);
            let ao = AoSettings::default();
            let fixed = solve_fixed(&s, &ch, &ao.solver).unwrap();
            let stat = solve_static(&s, &ch, &ao).unwrap();
            let dynamic = solve_dynamic(&s, &ch, &ao.solver).unwrap();
            assert_eq!(stat.report.objective_trace[0], fixed.objective);
            assert!(stat.report.objective_trace.windows(2).all(|w| w[1] >= w[0]));
            assert!(stat.objective >= fixed.objective);
            assert!(dynamic.objective >= stat.objective, "seed {seed}");
            for sol in [&fixed, &stat, &dynamic] {
                let again = objective_of(&sol.pointing, &sol.allocation, &ch, &s).unwrap();
                assert!((again - sol.objective).abs() <= 1e-9 * sol.objective);
                assert!(sol.report.max_constraint_residual <= 1e-6);
                assert!(sol.pointing.is_feasible(s.array.theta_max));
            }
        }
    }

    #[test]
    fn back_lobe_user_is_local_only() {
        // A user below the array plane sees no forward-hemisphere gain.
        let (s, ch) = scenario(1, vec![(30.0, 3.0, 0.0)], 1.0, 0);
        let sol = solve_fixed(&s, &ch, &SolverSettings::default()).unwrap();
        assert_eq!(sol.gains[0], 0.0);
        let local = s.tasks[0].frame * s.tasks[0].max_cpu_freq() / s.tasks[0].cycles_per_bit;
        assert!((sol.objective - local).abs() <= 1e-6 * local);
    }

    #[test]
    fn centroid_init_is_feasible() {
        let (s, ch) = four_users(4);
        let ao = AoSettings {
            init: StaticInit::Centroid,
            ..Default::default()
        };
        let sol = solve_static(&s, &ch, &ao).unwrap();
        assert!(sol.pointing.is_feasible(s.array.theta_max));
    }
}
