#![allow(dead_code)]

use ra_mec::resource::{local_rate_energy, offload_rate, UserTaskParams};

pub const GRID: usize = 200;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Best weighted bits of one user holding slot `tau`, searched over a grid
/// of offload energies and CPU frequencies. `None` if no grid point meets the
/// energy budget and the minimum-bits requirement.
pub fn best_user_value(tau: f64, gain: f64, p: &UserTaskParams) -> Option<f64> {
    let f_max = p.max_cpu_freq();
    let mut ys = vec![0.0];
    if tau > 0.0 && p.e_max > 0.0 {
        ys.extend(log_grid(1e-6 * p.e_max, p.e_max, GRID - 1));
    }
    let mut fs = vec![0.0];
    if f_max > 0.0 {
        fs.extend(log_grid(1e-3 * f_max, f_max, GRID - 2));
    }
    let mut best: Option<f64> = None;
    for &y in &ys {
        let left = p.e_max - y - tau * p.circuit_power;
        if left < 0.0 {
            continue;
        }
        let r_off = offload_rate(y, tau, gain, p.bandwidth, p.overhead);
        // Grid frequencies plus the one that spends the remaining energy.
        let f_fill = if f_max > 0.0 {
            (left / (p.frame * p.capacitance)).cbrt()
        } else {
            0.0
        };
        for &f in fs.iter().chain(std::iter::once(&f_fill)) {
            let (r_loc, e_loc) = local_rate_energy(f, p);
            if e_loc > left * (1.0 + 1e-12) {
                continue;
            }
            if r_loc + r_off < p.r_min {
                continue;
            }
            let v = p.weight * (r_loc + r_off);
            if best.is_none_or(|b| v > b) {
                best = Some(v);
            }
        }
    }
    best
}

/// Brute-force optimum of the resource problem for one or two users.
///
/// One user: slots on a log grid up to the frame. Two users: user 0 takes
/// grid slots; user 1 takes either the exact remainder of the frame or any
/// grid slot that fits.
pub fn grid_oracle(gains: &[f64], params: &[UserTaskParams]) -> Option<f64> {
    let t = params[0].frame;
    let mut taus = vec![0.0];
    taus.extend(log_grid(1e-4 * t, t, GRID - 1));
    match gains.len() {
        1 => taus
            .iter()
            .filter_map(|&tau| best_user_value(tau, gains[0], &params[0]))
            .reduce(f64::max),
        2 => {
            let v1: Vec<Option<f64>> = taus
                .iter()
                .map(|&tau| best_user_value(tau, gains[1], &params[1]))
                .collect();
            let mut best: Option<f64> = None;
            for &tau0 in &taus {
                let Some(a) = best_user_value(tau0, gains[0], &params[0]) else {
                    continue;
                };
                let rest = (t - tau0).max(0.0);
                let mut cands = vec![best_user_value(rest, gains[1], &params[1])];
                for (i, &tau1) in taus.iter().enumerate() {
                    if tau0 + tau1 <= t {
                        cands.push(v1[i]);
                    }
                }
                for b in cands.into_iter().flatten() {
                    if best.is_none_or(|x| a + b > x) {
                        best = Some(a + b);
                    }
                }
            }
            best
        }
        _ => panic!("grid oracle handles one or two users"),
    }
}

/// The fixed 20-instance corpus of one- and two-user resource problems.
pub fn resource_corpus() -> Vec<(Vec<f64>, Vec<UserTaskParams>)> {
    let base = UserTaskParams::default();
    let mut out = Vec::new();
    let gains = [1e2, 1e4, 1e6, 1e8, 3e5];
    for (i, &g) in gains.iter().enumerate() {
        let mut p = base.clone();
        p.circuit_power = [0.1, 0.0, 1.0, 0.5, 2.0][i];
        out.push((vec![g], vec![p]));
    }
    let pairs = [
        (1e6, 1e4),
        (1e2, 1e2),
        (1e7, 1e7),
        (1e8, 1e3),
        (5e4, 2e6),
        (1e5, 1e5),
        (3e3, 8e7),
        (1e6, 0.0),
        (2e5, 4e5),
        (1e4, 1e6),
    ];
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let mut p0 = base.clone();
        let mut p1 = base.clone();
        p0.overhead = 1.1;
        p1.overhead = 1.1;
        p0.circuit_power = [0.1, 0.5, 0.0, 0.2, 1.0, 0.1, 0.3, 0.1, 0.05, 0.1][i];
        p1.circuit_power = p0.circuit_power;
        p1.weight = [1.0, 2.0, 1.0, 0.5, 1.0, 3.0, 1.0, 1.0, 1.0, 1.0][i];
        p0.e_max = [10.0, 5.0, 10.0, 20.0, 1.0, 10.0, 10.0, 10.0, 2.0, 10.0][i];
        out.push((vec![a, b], vec![p0, p1]));
    }
    // Instances with a binding minimum-bits requirement.
    let mut p0 = base.clone();
    let mut p1 = base.clone();
    p0.r_min = 2e7;
    p1.r_min = 1e7;
    out.push((vec![1e3, 1e6], vec![p0.clone(), p1.clone()]));
    p0.r_min = 4.5e6;
    out.push((vec![0.0, 1e6], vec![p0, p1]));
    let mut p = base.clone();
    p.r_min = 3e7;
    out.push((vec![1e4], vec![p]));
    let mut p = base.clone();
    p.capacitance = f64::INFINITY;
    out.push((vec![1e6], vec![p]));
    let mut p = base;
    p.bandwidth = 2e7;
    p.cycles_per_bit = 500.0;
    out.push((vec![1e5], vec![p]));
    out
}
