//! Computation/communication resource allocation for a fixed antenna pointing.
//!
//! Per user `m` the decision is the offload energy `y_m = tau_m * p_m`, the
//! TDMA slot `tau_m` and the local CPU frequency `f_m`. With the channel fixed
//! the problem
//!
//! ```text
//! max  sum_m w_m (T f_m / C + tau_m (B / v_m) log2(1 + y_m gamma_m / tau_m))
//! s.t. y_m + tau_m p_c + T r_c f_m^3 <= E_max        (energy)
//!      sum_m tau_m <= T                               (frame)
//!      T f_m / C + R_off,m >= R_min                   (minimum bits)
//!      y, tau, f >= 0
//! ```
//!
//! is jointly concave (the rate term is a perspective of `log2(1 + y gamma)`),
//! and is solved with a log-barrier Newton method on a rescaled copy where
//! every variable and the objective are O(1).

mod barrier;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use barrier::{BarrierSettings, ConcaveProgram, Term};

/// Slots below this fraction of the frame are snapped to zero after solving.
const SLOT_SNAP: f64 = 1e-9;
/// Floor on the scaled slot inside rate evaluations.
const SLOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTaskParams {
    /// Hz.
    pub bandwidth: f64,
    /// Communication overhead factor, > 1.
    pub overhead: f64,
    pub cycles_per_bit: f64,
    /// Frame length in seconds; must be the same for every user.
    pub frame: f64,
    /// Joules.
    pub e_max: f64,
    /// Watts.
    pub circuit_power: f64,
    /// Effective capacitance. `f64::INFINITY` disables local computing.
    pub capacitance: f64,
    /// Bits.
    pub r_min: f64,
    pub weight: f64,
}

impl Default for UserTaskParams {
    fn default() -> Self {
        UserTaskParams {
            bandwidth: 10e6,
            overhead: 1.1,
            cycles_per_bit: 1000.0,
            frame: 1.0,
            e_max: 10.0,
            circuit_power: 0.1,
            capacitance: 1e-28,
            r_min: 0.0,
            weight: 1.0,
        }
    }
}

impl UserTaskParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let checks = [
            (pos(self.bandwidth), "bandwidth must be positive"),
            (
                self.overhead > 1.0 && self.overhead.is_finite(),
                "overhead factor must exceed 1",
            ),
            (pos(self.cycles_per_bit), "cycles_per_bit must be positive"),
            (pos(self.frame), "frame must be positive"),
            (
                self.e_max >= 0.0 && self.e_max.is_finite(),
                "e_max must be non-negative",
            ),
            (
                self.circuit_power >= 0.0 && self.circuit_power.is_finite(),
                "circuit_power must be non-negative",
            ),
            (self.capacitance > 0.0, "capacitance must be positive"),
            (
                self.r_min >= 0.0 && self.r_min.is_finite(),
                "r_min must be non-negative",
            ),
            (pos(self.weight), "weight must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(invalid(msg));
            }
        }
        Ok(())
    }

    /// CPU frequency that spends the whole energy budget locally.
    pub fn max_cpu_freq(&self) -> f64 {
        if self.capacitance.is_infinite() {
            0.0
        } else {
            (self.e_max / (self.frame * self.capacitance)).cbrt()
        }
    }
}

/// `(T f / C, T r_c f^3)`.
pub fn local_rate_energy(cpu_freq: f64, params: &UserTaskParams) -> (f64, f64) {
    if cpu_freq == 0.0 {
        return (0.0, 0.0);
    }
    (
        params.frame * cpu_freq / params.cycles_per_bit,
        params.frame * params.capacitance * cpu_freq.powi(3),
    )
}

/// Offloaded bits `tau (B/v) log2(1 + y gamma / tau)`, zero at `tau = 0`.
pub fn offload_rate(offload_energy: f64, slot: f64, gain: f64, bandwidth: f64, overhead: f64) -> f64 {
    if slot <= 0.0 || offload_energy <= 0.0 || gain <= 0.0 {
        return 0.0;
    }
    slot * bandwidth / overhead * (offload_energy * gain / slot).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserAllocation {
    /// `y = tau * p`, joules.
    pub offload_energy: f64,
    pub slot: f64,
    pub cpu_freq: f64,
    /// `y / tau`, zero when the slot is empty.
    pub transmit_power: f64,
    pub r_loc: f64,
    pub r_off: f64,
    pub e_loc: f64,
    pub e_off: f64,
}

impl UserAllocation {
    pub fn new(offload_energy: f64, slot: f64, cpu_freq: f64, gain: f64, params: &UserTaskParams) -> Self {
        let (r_loc, e_loc) = local_rate_energy(cpu_freq, params);
        let transmit_power = if slot > 0.0 { offload_energy / slot } else { 0.0 };
        UserAllocation {
            offload_energy,
            slot,
            cpu_freq,
            transmit_power,
            r_loc,
            r_off: offload_rate(offload_energy, slot, gain, params.bandwidth, params.overhead),
            e_loc,
            e_off: offload_energy + slot * params.circuit_power,
        }
    }

    pub fn bits(&self) -> f64 {
        self.r_loc + self.r_off
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub users: Vec<UserAllocation>,
}

impl Allocation {
    pub fn zeros(num_users: usize) -> Self {
        Allocation {
            users: vec![UserAllocation::default(); num_users],
        }
    }

    /// Rebuilds the derived quantities for new channel gains.
    pub fn with_gains(&self, gains: &[f64], params: &[UserTaskParams]) -> Self {
        Allocation {
            users: self
                .users
                .iter()
                .zip(gains.iter().zip(params))
                .map(|(u, (&g, p))| UserAllocation::new(u.offload_energy, u.slot, u.cpu_freq, g, p))
                .collect(),
        }
    }

    /// `sum_m w_m (R_loc,m + R_off,m)` using the stored per-user rates.
    pub fn weighted_bits(&self, params: &[UserTaskParams]) -> f64 {
        self.users.iter().zip(params).map(|(u, p)| p.weight * u.bits()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub kkt_tol: f64,
    /// Reduction factor applied to the barrier weight `1/t` per round.
    pub barrier_mu: f64,
    pub max_newton_iters: usize,
    pub max_outer_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            kkt_tol: 1e-6,
            barrier_mu: 0.1,
            max_newton_iters: 100,
            max_outer_iters: 40,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > 0.0) {
            return Err(invalid("kkt_tol must be positive"));
        }
        if !(self.barrier_mu > 0.0 && self.barrier_mu < 1.0) {
            return Err(invalid("barrier_mu must lie in (0, 1)"));
        }
        if self.max_newton_iters == 0 || self.max_outer_iters == 0 {
            return Err(invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub converged: bool,
    /// Max of normalized stationarity, complementarity and primal violation.
    pub kkt_residual: f64,
    pub barrier_rounds: usize,
    pub newton_iters: usize,
    /// A phase-one search was needed to satisfy the minimum-bit constraints.
    pub phase_one: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy)]
struct UserBlock {
    f: Option<usize>,
    /// Indices of (y, tau).
    link: Option<(usize, usize)>,
    f_scale: f64,
    /// Bits per unit scaled frequency.
    local_bits: f64,
    /// Bits per unit scaled slot and nat of spectral efficiency.
    rate_bits: f64,
    /// `E_max gamma / T`: SNR per unit of scaled y / tau.
    snr: f64,
    /// `T p_c / E_max`.
    circuit_frac: f64,
    weight: f64,
    r_min: f64,
}

impl UserBlock {
    fn bits(&self, x: &[f64]) -> f64 {
        let mut b = 0.0;
        if let Some(i) = self.f {
            b += self.local_bits * x[i];
        }
        if let Some((iy, it)) = self.link {
            b += self.rate_bits * perspective(self.snr, x[iy], x[it]).0;
        }
        b
    }

    /// Bits with gradient and Hessian, scaled by `c`.
    fn bits_term(&self, x: &[f64], c: f64, derivs: bool, term: &mut Term) {
        term.value += c * self.bits(x);
        if !derivs {
            return;
        }
        if let Some(i) = self.f {
            term.grad.push((i, c * self.local_bits));
        }
        if let Some((iy, it)) = self.link {
            let (_, gy, gt, hyy, hyt, htt) = perspective(self.snr, x[iy], x[it]);
            let k = c * self.rate_bits;
            term.grad.push((iy, k * gy));
            term.grad.push((it, k * gt));
            let (a, b) = if iy <= it { (iy, it) } else { (it, iy) };
            term.hess.push((iy, iy, k * hyy));
            term.hess.push((a, b, k * hyt));
            term.hess.push((it, it, k * htt));
        }
    }
}

/// `tau ln(1 + a y / tau)` with value, gradient `(d/dy, d/dtau)` and Hessian
/// `(yy, y tau, tau tau)`.
fn perspective(a: f64, y: f64, tau: f64) -> (f64, f64, f64, f64, f64, f64) {
    let tau = tau.max(SLOT_FLOOR);
    let y = y.max(0.0);
    let u = a * y / tau;
    let d = 1.0 + u;
    let value = tau * u.ln_1p();
    let gy = a / d;
    let gt = u.ln_1p() - u / d;
    let s = 1.0 / (tau * d * d);
    (value, gy, gt, -a * a * s, a * u * s, -u * u * s)
}

struct ResourceProblem {
    blocks: Vec<UserBlock>,
    n: usize,
    has_time: bool,
    /// Index of the phase-one slack variable, if solving phase one.
    slack: Option<usize>,
}

impl ResourceProblem {
    fn dim_with_slack(&self) -> usize {
        self.n + usize::from(self.slack.is_some())
    }

    /// Scaled minimum-bit slack `(R - R_min) / R_min` for users with `R_min > 0`.
    fn bit_slacks(&self, x: &[f64]) -> Vec<(usize, f64)> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.r_min > 0.0)
            .map(|(m, b)| (m, b.bits(x) / b.r_min - 1.0))
            .collect()
    }
}

impl ConcaveProgram for ResourceProblem {
    fn dim(&self) -> usize {
        self.dim_with_slack()
    }

    fn objective(&self, x: &[f64], derivs: bool) -> Term {
        if let Some(s) = self.slack {
            let mut t = Term::value(x[s]);
            if derivs {
                t.grad.push((s, 1.0));
            }
            return t;
        }
        let mut t = Term::default();
        for b in &self.blocks {
            b.bits_term(x, b.weight, derivs, &mut t);
        }
        t
    }

    fn constraints(&self, x: &[f64], derivs: bool, out: &mut Vec<Term>) {
        for b in &self.blocks {
            let mut energy = Term::value(1.0);
            if let Some(i) = b.f {
                out.push(bound(x, i, derivs));
                energy.value -= x[i].powi(3);
                if derivs {
                    energy.grad.push((i, -3.0 * x[i] * x[i]));
                    energy.hess.push((i, i, -6.0 * x[i]));
                }
            }
            if let Some((iy, it)) = b.link {
                out.push(bound(x, iy, derivs));
                out.push(bound(x, it, derivs));
                energy.value -= x[iy] + b.circuit_frac * x[it];
                if derivs {
                    energy.grad.push((iy, -1.0));
                    energy.grad.push((it, -b.circuit_frac));
                }
            }
            if b.f.is_some() || b.link.is_some() {
                out.push(energy);
            }
            if b.r_min > 0.0 {
                let mut t = Term::value(-1.0);
                b.bits_term(x, 1.0 / b.r_min, derivs, &mut t);
                if let Some(s) = self.slack {
                    t.value -= x[s];
                    if derivs {
                        t.grad.push((s, -1.0));
                    }
                }
                out.push(t);
            }
        }
        if self.has_time {
            let mut t = Term::value(1.0);
            for b in &self.blocks {
                if let Some((_, it)) = b.link {
                    t.value -= x[it];
                    if derivs {
                        t.grad.push((it, -1.0));
                    }
                }
            }
            out.push(t);
        }
    }
}

fn bound(x: &[f64], i: usize, derivs: bool) -> Term {
    let mut t = Term::value(x[i]);
    if derivs {
        t.grad.push((i, 1.0));
    }
    t
}

fn check_inputs(gains: &[f64], params: &[UserTaskParams]) -> Result<f64> {
    if gains.len() != params.len() {
        return Err(invalid(format!("{} gains for {} users", gains.len(), params.len())));
    }
    for (m, (g, p)) in gains.iter().zip(params).enumerate() {
        if !(*g >= 0.0 && g.is_finite()) {
            return Err(invalid(format!(
                "gain of user {m} must be finite and non-negative, got {g}"
            )));
        }
        p.validate()?;
    }
    let frame = params.first().map_or(1.0, |p| p.frame);
    if params.iter().any(|p| p.frame != frame) {
        return Err(invalid("all users must share one frame length"));
    }
    Ok(frame)
}

/// Upper bound on the bits user `m` can deliver on its own: full energy
/// locally plus full energy and the whole frame for offloading.
pub fn max_achievable_bits(gain: f64, params: &UserTaskParams) -> f64 {
    let local = local_rate_energy(params.max_cpu_freq(), params).0;
    local + offload_rate(params.e_max, params.frame, gain, params.bandwidth, params.overhead)
}

/// Solves the resource problem for per-user SNR gains `gamma_m = ||h_m||^2 / sigma^2`.
pub fn solve_resource_allocation(
    gains: &[f64],
    params: &[UserTaskParams],
    settings: &SolverSettings,
) -> Result<(Allocation, AllocationReport)> {
    settings.validate()?;
    let frame = check_inputs(gains, params)?;

    for (m, (&g, p)) in gains.iter().zip(params).enumerate() {
        let ub = max_achievable_bits(g, p);
        if p.r_min > ub {
            return Err(Error::Infeasible {
                user: m,
                required: p.r_min,
                achievable: ub,
            });
        }
    }

    let mut n = 0;
    let mut blocks = Vec::with_capacity(params.len());
    for (&g, p) in gains.iter().zip(params) {
        let f_scale = p.max_cpu_freq();
        let active = p.e_max > 0.0;
        let f = (active && f_scale > 0.0).then(|| {
            n += 1;
            n - 1
        });
        let link = (active && g > 0.0).then(|| {
            n += 2;
            (n - 2, n - 1)
        });
        blocks.push(UserBlock {
            f,
            link,
            f_scale,
            local_bits: frame * f_scale / p.cycles_per_bit,
            rate_bits: frame * p.bandwidth / p.overhead / std::f64::consts::LN_2,
            snr: if active { p.e_max * g / frame } else { 0.0 },
            circuit_frac: if active { frame * p.circuit_power / p.e_max } else { 0.0 },
            weight: p.weight,
            r_min: p.r_min,
        });
    }

    let upper: f64 = blocks
        .iter()
        .map(|b| {
            let mut s = 0.0;
            if b.f.is_some() {
                s += b.local_bits;
            }
            if b.link.is_some() {
                s += b.rate_bits * b.snr.ln_1p();
            }
            b.weight * s
        })
        .sum();

    if n == 0 {
        let alloc = Allocation::zeros(params.len());
        return Ok((
            alloc,
            AllocationReport {
                converged: true,
                ..Default::default()
            },
        ));
    }

    // Rescale bits so the objective is O(1).
    let bit_scale = if upper > 0.0 { upper } else { 1.0 };
    for b in &mut blocks {
        b.local_bits /= bit_scale;
        b.rate_bits /= bit_scale;
        b.r_min /= bit_scale;
    }

    let num_links = blocks.iter().filter(|b| b.link.is_some()).count();
    let mut x0 = vec![0.0; n];
    for b in &blocks {
        if let Some(i) = b.f {
            x0[i] = 0.5;
        }
        if let Some((iy, it)) = b.link {
            x0[iy] = 0.25;
            let share = 1.0 / (num_links as f64 + 1.0);
            x0[it] = if b.circuit_frac > 0.0 {
                share.min(0.25 / b.circuit_frac)
            } else {
                share
            };
        }
    }

    let barrier = BarrierSettings {
        gap_tol: settings.kkt_tol * 1e-2,
        mu: settings.barrier_mu,
        max_newton_iters: settings.max_newton_iters,
        max_outer_iters: settings.max_outer_iters,
    };

    let mut problem = ResourceProblem {
        blocks,
        n,
        has_time: num_links > 0,
        slack: None,
    };

    let mut phase_one = false;
    let mut newton_iters = 0;
    let slacks = problem.bit_slacks(&x0);
    if slacks.iter().any(|&(_, s)| s <= 0.0) {
        phase_one = true;
        let worst = slacks.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
        problem.slack = Some(n);
        let mut start = x0.clone();
        start.push(worst - 1.0);
        let out = barrier::maximize(&problem, start, 1.0, &barrier, |x| x[n] > 0.0);
        newton_iters += out.newton_iters;
        problem.slack = None;
        let x = &out.x[..n];
        let slacks = problem.bit_slacks(x);
        match slacks.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)) {
            Some((_, s)) if s > 0.0 => x0 = x.to_vec(),
            Some((m, s)) => {
                let b = &problem.blocks[m];
                return Err(Error::Infeasible {
                    user: m,
                    required: params[m].r_min,
                    achievable: (s + 1.0) * b.r_min * bit_scale,
                });
            }
            None => unreachable!("phase one only runs with minimum-bit constraints"),
        }
    }

    let out = barrier::maximize(&problem, x0, 1.0, &barrier, |_| false);
    newton_iters += out.newton_iters;

    let mut alloc = Allocation::zeros(params.len());
    for (m, (b, p)) in problem.blocks.iter().zip(params).enumerate() {
        let cpu = b.f.map_or(0.0, |i| out.x[i] * b.f_scale);
        let (mut y, mut tau) = b
            .link
            .map_or((0.0, 0.0), |(iy, it)| (out.x[iy] * p.e_max, out.x[it] * frame));
        if tau < SLOT_SNAP * frame {
            tau = 0.0;
            y = 0.0;
        }
        alloc.users[m] = UserAllocation::new(y, tau, cpu, gains[m], p);
    }

    let kkt = out.kkt.max();
    let report = AllocationReport {
        converged: out.converged && kkt <= settings.kkt_tol,
        kkt_residual: kkt,
        barrier_rounds: out.outer_iters,
        newton_iters,
        phase_one,
        objective: alloc.weighted_bits(params),
    };
    Ok((alloc, report))
}

/// Constraint violations of an allocation in natural units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Max over users of `(E_loc + E_off - E_max)+`, joules.
    pub energy: f64,
    /// `(sum tau - T)+`, seconds.
    pub time: f64,
    /// Max over users of `(R_min - R_loc - R_off)+`, bits.
    pub min_bits: f64,
    /// Most negative decision variable, reported as a positive number.
    pub nonnegativity: f64,
    /// Users that spend offload energy without any airtime.
    pub energy_without_slot: usize,
    pub objective: f64,
}

impl ResidualReport {
    /// Largest violation normalized by the budget it violates.
    pub fn max_relative(&self, params: &[UserTaskParams]) -> f64 {
        let e = params.iter().map(|p| p.e_max).fold(0.0, f64::max).max(1e-300);
        let t = params.first().map_or(1.0, |p| p.frame);
        let r = params.iter().map(|p| p.r_min).fold(0.0, f64::max);
        let bits = if r > 0.0 { self.min_bits / r } else { 0.0 };
        (self.energy / e.max(1.0))
            .max(self.time / t)
            .max(bits)
            .max(self.nonnegativity)
    }
}

pub fn validate_allocation(allocation: &Allocation, gains: &[f64], params: &[UserTaskParams]) -> ResidualReport {
    let mut rep = ResidualReport::default();
    let frame = params.first().map_or(0.0, |p| p.frame);
    let mut total_slot = 0.0;
    for ((u, &g), p) in allocation.users.iter().zip(gains).zip(params) {
        let (r_loc, e_loc) = local_rate_energy(u.cpu_freq, p);
        let r_off = offload_rate(u.offload_energy, u.slot, g, p.bandwidth, p.overhead);
        let e_off = u.offload_energy + u.slot * p.circuit_power;
        rep.energy = rep.energy.max(e_loc + e_off - p.e_max);
        rep.min_bits = rep.min_bits.max(p.r_min - r_loc - r_off);
        rep.nonnegativity = rep.nonnegativity.max(-u.offload_energy).max(-u.slot).max(-u.cpu_freq);
        if u.slot <= 0.0 && u.offload_energy > 0.0 {
            rep.energy_without_slot += 1;
        }
        total_slot += u.slot;
        rep.objective += p.weight * (r_loc + r_off);
    }
    rep.time = (total_slot - frame).max(0.0);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params2() -> Vec<UserTaskParams> {
        vec![UserTaskParams::default(); 2]
    }

    #[test]
    fn local_examples() {
        let p = UserTaskParams::default();
        assert_eq!(local_rate_energy(0.0, &p), (0.0, 0.0));
        let (bits, _) = local_rate_energy(1e6, &p);
        assert_eq!(bits, 1000.0);
        let (_, e) = local_rate_energy(1e9, &p);
        assert!((e - 0.1).abs() < 1e-15);
    }

    #[test]
    fn offload_examples() {
        assert_eq!(offload_rate(1.0, 0.0, 1e6, 1e7, 1.1), 0.0);
        assert_eq!(offload_rate(0.0, 0.5, 1e6, 1e7, 1.1), 0.0);
        let r = offload_rate(0.25, 0.25, 1.0, 1e7, 1.0);
        assert!((r - 2.5e6).abs() < 1e-6);
    }

    #[test]
    fn zero_gain_single_user_is_local_only() {
        let p = vec![UserTaskParams::default()];
        let (a, rep) = solve_resource_allocation(&[0.0], &p, &SolverSettings::default()).unwrap();
        let fstar = (p[0].e_max / (p[0].frame * p[0].capacitance)).cbrt();
        assert_eq!(a.users[0].slot, 0.0);
        assert_eq!(a.users[0].offload_energy, 0.0);
        assert!((a.users[0].cpu_freq - fstar).abs() / fstar < 1e-7);
        assert!((rep.objective - fstar / 1000.0).abs() / rep.objective < 1e-7);
        assert!(rep.converged, "{rep:?}");
    }

    #[test]
    fn empty_budget_gives_zero_allocation() {
        let p = vec![UserTaskParams {
            e_max: 0.0,
            ..Default::default()
        }];
        let (a, rep) = solve_resource_allocation(&[1e6], &p, &SolverSettings::default()).unwrap();
        assert_eq!(a, Allocation::zeros(1));
        assert_eq!(rep.objective, 0.0);
    }

    #[test]
    fn unreachable_minimum_bits_names_user() {
        let mut p = params2();
        p[1].r_min = 1e12;
        match solve_resource_allocation(&[1e6, 1e4], &p, &SolverSettings::default()) {
            Err(Error::Infeasible { user, .. }) => assert_eq!(user, 1),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn jointly_infeasible_minimum_bits_detected_by_phase_one() {
        // Each user alone can reach the target with the full frame but not
        // both together.
        let mut p = params2();
        let solo = max_achievable_bits(1e4, &p[0]);
        p[0].r_min = 0.8 * solo;
        p[1].r_min = 0.8 * solo;
        assert!(matches!(
            solve_resource_allocation(&[1e4, 1e4], &p, &SolverSettings::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn minimum_bits_are_enforced() {
        let mut p = params2();
        let (free, _) = solve_resource_allocation(&[1e6, 1e2], &p, &SolverSettings::default()).unwrap();
        // Ask the weak user for more than it gets unconstrained.
        p[1].r_min = free.users[1].bits() * 1.5;
        let (a, rep) = solve_resource_allocation(&[1e6, 1e2], &p, &SolverSettings::default()).unwrap();
        assert!(a.users[1].bits() >= p[1].r_min * (1.0 - 1e-9));
        let res = validate_allocation(&a, &[1e6, 1e2], &p);
        assert!(res.max_relative(&p) <= 1e-6, "{res:?}");
        assert!(rep.converged, "{rep:?}");
    }

    #[test]
    fn residual_examples() {
        let p = params2();
        let r = validate_allocation(&Allocation::zeros(2), &[1.0, 1.0], &p);
        assert_eq!(r, ResidualReport::default());

        let mut a = Allocation::zeros(2);
        a.users[0].slot = 0.51;
        a.users[1].slot = 0.5;
        let r = validate_allocation(&a, &[1.0, 1.0], &p);
        assert!((r.time - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params2();
        assert!(solve_resource_allocation(&[1.0], &p, &SolverSettings::default()).is_err());
        assert!(solve_resource_allocation(&[-1.0, 1.0], &p, &SolverSettings::default()).is_err());
        let mut q = p.clone();
        q[1].frame = 2.0;
        assert!(solve_resource_allocation(&[1.0, 1.0], &q, &SolverSettings::default()).is_err());
        let bad = SolverSettings {
            barrier_mu: 1.0,
            ..Default::default()
        };
        assert!(solve_resource_allocation(&[1.0, 1.0], &p, &bad).is_err());
    }

    #[test]
    fn perspective_derivatives_match_finite_differences() {
        let (a, y, t) = (40.0, 0.3, 0.2);
        let (v, gy, gt, hyy, hyt, htt) = perspective(a, y, t);
        let h = 1e-6;
        let fy = |y: f64| perspective(a, y, t).0;
        let ft = |t: f64| perspective(a, y, t).0;
        assert!(((fy(y + h) - fy(y - h)) / (2.0 * h) - gy).abs() < 1e-6);
        assert!(((ft(t + h) - ft(t - h)) / (2.0 * h) - gt).abs() < 1e-6);
        let gyf = |y: f64, t: f64| perspective(a, y, t).1;
        let gtf = |y: f64, t: f64| perspective(a, y, t).2;
        assert!(((gyf(y + h, t) - gyf(y - h, t)) / (2.0 * h) - hyy).abs() < 1e-5);
        assert!(((gyf(y, t + h) - gyf(y, t - h)) / (2.0 * h) - hyt).abs() < 1e-5);
        assert!(((gtf(y, t + h) - gtf(y, t - h)) / (2.0 * h) - htt).abs() < 1e-5);
        assert!(v > 0.0);
    }
}
