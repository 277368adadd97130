//! Small dense log-barrier method for concave maximization.
//!
//! Maximizes a concave `f0(x)` subject to concave constraints `g_i(x) >= 0`
//! by following the central path of `t * f0(x) + sum_i ln g_i(x)` with damped
//! Newton steps. Problems here have at most a few dozen variables, so the
//! Newton system is assembled densely and factored with Cholesky.

use nalgebra::{DMatrix, DVector};

/// Value and (optionally) sparse first and second derivatives of a scalar
/// function. Hessian entries are listed once per unordered pair with `i <= j`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Term {
    pub value: f64,
    pub grad: Vec<(usize, f64)>,
    pub hess: Vec<(usize, usize, f64)>,
}

impl Term {
    pub fn value(value: f64) -> Self {
        Term {
            value,
            ..Default::default()
        }
    }
}

pub(crate) trait ConcaveProgram {
    fn dim(&self) -> usize;
    fn objective(&self, x: &[f64], derivs: bool) -> Term;
    /// Appends one term per constraint `g_i(x) >= 0`, always in the same order.
    fn constraints(&self, x: &[f64], derivs: bool, out: &mut Vec<Term>);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierSettings {
    /// Stop once the duality-gap bound `m / t` falls below this.
    pub gap_tol: f64,
    /// Multiplicative reduction of `1/t` between centering rounds.
    pub mu: f64,
    pub max_newton_iters: usize,
    pub max_outer_iters: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub x: Vec<f64>,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub converged: bool,
    pub kkt: KktResidual,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KktResidual {
    pub stationarity: f64,
    pub complementarity: f64,
    pub primal: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.primal)
    }
}

fn add_term(t: &Term, scale: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
    for &(i, g) in &t.grad {
        grad[i] += scale * g;
    }
    for &(i, j, h) in &t.hess {
        hess[(i, j)] += scale * h;
        if i != j {
            hess[(j, i)] += scale * h;
        }
    }
}

fn all_strict(cons: &[Term]) -> bool {
    cons.iter().all(|c| c.value > 0.0 && c.value.is_finite())
}

fn barrier_value<P: ConcaveProgram + ?Sized>(p: &P, x: &[f64], t: f64, buf: &mut Vec<Term>) -> Option<f64> {
    buf.clear();
    p.constraints(x, false, buf);
    if !all_strict(buf) {
        return None;
    }
    let f = p.objective(x, false).value;
    if !f.is_finite() {
        return None;
    }
    Some(t * f + buf.iter().map(|c| c.value.ln()).sum::<f64>())
}

/// Gradient and Hessian of the barrier function at `x`. `x` must be strictly
/// feasible.
fn barrier_derivs<P: ConcaveProgram + ?Sized>(
    p: &P,
    x: &[f64],
    t: f64,
    buf: &mut Vec<Term>,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = p.dim();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    add_term(&p.objective(x, true), t, &mut grad, &mut hess);
    buf.clear();
    p.constraints(x, true, buf);
    for c in buf.iter() {
        let inv = 1.0 / c.value;
        add_term(c, inv, &mut grad, &mut hess);
        // -grad grad^T / g^2
        for &(i, gi) in &c.grad {
            for &(j, gj) in &c.grad {
                hess[(i, j)] -= gi * gj * inv * inv;
            }
        }
    }
    (grad, hess)
}

/// Newton direction for maximizing: solves `(-H) d = g`.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let neg = -hess;
    let diag_scale = (0..n).map(|i| neg[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = neg.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-12 * diag_scale } else { reg * 100.0 };
    }
    None
}

pub(crate) fn kkt_residual<P: ConcaveProgram + ?Sized>(p: &P, x: &[f64], t: f64) -> KktResidual {
    let n = p.dim();
    let obj = p.objective(x, true);
    let mut g0 = DVector::zeros(n);
    let mut scratch = DMatrix::zeros(n, n);
    add_term(&obj, 1.0, &mut g0, &mut scratch);
    let mut cons = Vec::new();
    p.constraints(x, true, &mut cons);
    let mut lag = g0.clone();
    let mut primal = 0.0f64;
    for c in &cons {
        primal = primal.max(-c.value);
        if c.value > 0.0 {
            let lambda = 1.0 / (t * c.value);
            for &(i, gi) in &c.grad {
                lag[i] += lambda * gi;
            }
        }
    }
    let g0_norm = g0.amax();
    KktResidual {
        stationarity: lag.amax() / (1.0 + g0_norm),
        complementarity: (cons.len() as f64 / t) / (1.0 + obj.value.abs()),
        primal,
    }
}

/// Runs the barrier method from the strictly feasible `x0`. `early_exit` is
/// checked after every accepted Newton step.
pub(crate) fn maximize<P, F>(
    problem: &P,
    x0: Vec<f64>,
    t0: f64,
    settings: &BarrierSettings,
    mut early_exit: F,
) -> BarrierOutcome
where
    P: ConcaveProgram + ?Sized,
    F: FnMut(&[f64]) -> bool,
{
    let mut buf = Vec::new();
    problem.constraints(&x0, false, &mut buf);
    debug_assert!(all_strict(&buf), "barrier start must be strictly feasible");
    let m = buf.len().max(1) as f64;

    let mut x = x0;
    let mut t = t0;
    let mut newton_iters = 0;
    let mut outer = 0;
    let mut converged = false;

    'outer: while outer < settings.max_outer_iters {
        outer += 1;
        for _ in 0..settings.max_newton_iters {
            let (grad, hess) = barrier_derivs(problem, &x, t, &mut buf);
            let Some(dir) = newton_direction(&grad, &hess) else {
                break;
            };
            let decrement = grad.dot(&dir);
            if !(decrement > 1e-14) {
                break;
            }
            newton_iters += 1;
            let phi0 = barrier_value(problem, &x, t, &mut buf).unwrap_or(f64::NEG_INFINITY);
            // Close to the centre the barrier value is dominated by rounding
            // (t can reach 1e11); take pure Newton steps there.
            let pure = decrement < 1e-2;
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(phi) = barrier_value(problem, &trial, t, &mut buf) {
                    if pure || phi >= phi0 + 0.25 * step * decrement {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            if early_exit(&x) {
                break 'outer;
            }
            if decrement < 1e-10 {
                break;
            }
        }
        // An uncentred round still tightens t; the KKT check has the final say.
        if m / t < settings.gap_tol {
            converged = true;
            break;
        }
        t /= settings.mu;
    }

    let kkt = kkt_residual(problem, &x, t);
    BarrierOutcome {
        x,
        outer_iters: outer,
        newton_iters,
        converged,
        kkt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max  ln(1 + x0) + 2 ln(1 + x1)  s.t. x0 + x1 <= 2, x >= 0.
    struct WaterFill;

    impl ConcaveProgram for WaterFill {
        fn dim(&self) -> usize {
            2
        }
        fn objective(&self, x: &[f64], derivs: bool) -> Term {
            let mut t = Term::value((1.0 + x[0]).ln() + 2.0 * (1.0 + x[1]).ln());
            if derivs {
                t.grad = vec![(0, 1.0 / (1.0 + x[0])), (1, 2.0 / (1.0 + x[1]))];
                t.hess = vec![(0, 0, -1.0 / (1.0 + x[0]).powi(2)), (1, 1, -2.0 / (1.0 + x[1]).powi(2))];
            }
            t
        }
        fn constraints(&self, x: &[f64], derivs: bool, out: &mut Vec<Term>) {
            let mut a = Term::value(x[0]);
            let mut b = Term::value(x[1]);
            let mut c = Term::value(2.0 - x[0] - x[1]);
            if derivs {
                a.grad = vec![(0, 1.0)];
                b.grad = vec![(1, 1.0)];
                c.grad = vec![(0, -1.0), (1, -1.0)];
            }
            out.extend([a, b, c]);
        }
    }

    #[test]
    fn water_filling_optimum() {
        // Equal marginal values 1/(1+x0) = 2/(1+x1) on the budget line.
        let s = BarrierSettings {
            gap_tol: 1e-8,
            mu: 0.1,
            max_newton_iters: 100,
            max_outer_iters: 60,
        };
        let out = maximize(&WaterFill, vec![0.3, 0.3], 1.0, &s, |_| false);
        assert!(out.converged);
        assert!((out.x[0] - 1.0 / 3.0).abs() < 1e-8, "{:?}", out.x);
        assert!((out.x[1] - 5.0 / 3.0).abs() < 1e-8);
        assert!(out.kkt.max() < 1e-6, "{:?}", out.kkt);
    }
}
