//! i²Piano: inertial proximal gradient with an inexact prox and backtracking
//! on the Lipschitz estimate `L_k`.

use ndarray::{Array1, ArrayView1};

use super::{backtrack, check_start, ignore_row, positive, BacktrackSpec, ProxSettings, Recorder, SolveOutput};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::prox::theta;
use crate::trace::TraceRow;

#[derive(Debug, Clone)]
pub struct I2PianoConfig {
    pub delta: f64,
    pub gamma: f64,
    /// Multiplier applied to `L_k` on a failed descent test.
    pub eta: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub tau: f64,
    pub omega: f64,
    pub l0: f64,
    pub max_outer: usize,
    /// Stop once `d_k ≤ stop_tol`.
    pub stop_tol: f64,
    /// Start each iteration from `max(L_{k−1}/η, L_min)` instead of `L_{k−1}`.
    pub adaptive_decrease: bool,
    pub prox: ProxSettings,
}

impl Default for I2PianoConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            gamma: 1e-5,
            eta: 1.5,
            l_min: 1e-8,
            l_max: 1e10,
            tau: 1e6,
            omega: 0.95,
            l0: 1.0,
            max_outer: 1000,
            stop_tol: 1e-10,
            adaptive_decrease: false,
            prox: ProxSettings::default(),
        }
    }
}

impl I2PianoConfig {
    pub fn validate(&self) -> Result<()> {
        positive("gamma", self.gamma)?;
        positive("l_min", self.l_min)?;
        positive("l_max", self.l_max)?;
        positive("l0", self.l0)?;
        if !(self.delta >= self.gamma && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta must satisfy delta >= gamma, got delta = {}, gamma = {}",
                self.delta, self.gamma
            )));
        }
        if !(self.eta > 1.0) {
            return Err(Error::InvalidConfig(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be nonnegative, got {}", self.tau)));
        }
        let omega_ok = if self.tau > 0.0 {
            (0.0..1.0).contains(&self.omega)
        } else {
            (0.0..=1.0).contains(&self.omega)
        };
        if !omega_ok {
            return Err(Error::InvalidConfig(format!(
                "omega = {} out of range (must be in [0,1) when tau > 0, [0,1] when tau = 0)",
                self.omega
            )));
        }
        if self.l_min > self.l_max {
            return Err(Error::InvalidConfig("l_min exceeds l_max".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `(b_k, β_k, α_k)` for a given `L_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub b: f64,
    pub beta: f64,
    pub alpha: f64,
}

/// Step parameters for `L` with `θ` taken from `τ`.
pub fn compute_params(l: f64, delta: f64, gamma: f64, tau: f64, omega: f64) -> StepParams {
    let t = 1.0 + theta(tau) * omega;
    let b = (l + 2.0 * delta) / (l + 2.0 * gamma);
    // b − 1 and b − ½ expanded so that δ ≈ γ does not cancel against L
    let denom = 0.5 * l + 2.0 * delta - gamma;
    let beta = t * (delta - gamma) / denom;
    let alpha = t / (2.0 * denom);
    StepParams { b, beta, alpha }
}

/// Relative residuals of the three identities tying `(α, β)` to `(L, δ, γ)`:
/// `(1+θω)/(2α) − L/2 − β/(2α) = δ`, `δ − β/(2α) = γ` and
/// `α = (1+θω−β)/(L+2δ)`. Each is scaled by the magnitude of its terms.
pub fn identity_residuals(p: StepParams, l: f64, delta: f64, gamma: f64, theta_omega: f64) -> [f64; 3] {
    let t = 1.0 + theta_omega;
    let a = t / (2.0 * p.alpha);
    let c = p.beta / (2.0 * p.alpha);
    let r1 = (a - 0.5 * l - c - delta).abs() / (a.abs() + 0.5 * l.abs() + c.abs() + delta.abs());
    let r2 = (delta - c - gamma).abs() / (delta.abs() + c.abs() + gamma.abs());
    let alt = (t - p.beta) / (l + 2.0 * delta);
    let r3 = (p.alpha - alt).abs() / p.alpha.abs().max(alt.abs());
    [r1, r2, r3]
}

pub fn solve(problem: &CompositeProblem, x0: ArrayView1<f64>, cfg: &I2PianoConfig) -> Result<SolveOutput> {
    solve_with(problem, x0, cfg, &mut ignore_row)
}

/// Runs i²Piano from `x^{−1} = x^0 = x0`, streaming each row to `observer`.
pub fn solve_with(
    problem: &CompositeProblem,
    x0: ArrayView1<f64>,
    cfg: &I2PianoConfig,
    observer: &mut dyn FnMut(&TraceRow),
) -> Result<SolveOutput> {
    cfg.validate()?;
    let mut f = check_start(problem, x0)?;
    let mut x: Array1<f64> = x0.to_owned();
    let mut x_prev = x.clone();
    let mut phi = f;
    let mut l = cfg.l0.clamp(cfg.l_min, cfg.l_max);
    let mut warm = None;
    let mut rec = Recorder::new(observer);
    let mut converged = false;
    let mut k = 0;

    while k < cfg.max_outer {
        if cfg.adaptive_decrease {
            l = (l / cfg.eta).max(cfg.l_min);
        }
        let grad = problem.f0.gradient(x.view())?;
        let spec = BacktrackSpec {
            x: x.view(),
            s: x_prev.view(),
            grad: grad.view(),
            l_start: l,
            eta: cfg.eta,
            l_max: cfg.l_max,
            tau: cfg.tau,
            prox: cfg.prox,
        };
        let bt = backtrack(problem, &spec, &mut warm, |l| {
            let p = compute_params(l, cfg.delta, cfg.gamma, cfg.tau, cfg.omega);
            (p.alpha, p.beta)
        })?;
        l = bt.l;
        let r = bt.prox;
        let inertia_sq = linalg::dist_sq(x.view(), x_prev.view());
        let d_sq = cfg.gamma * inertia_sq - (1.0 - cfg.omega) * r.h_value;
        let step = linalg::dist(r.y_tilde.view(), x.view());

        let mut row = TraceRow::terminal(k, rec.elapsed(), f, phi);
        row.h = r.h_value;
        row.d_k = d_sq.sqrt();
        row.alpha_k = bt.alpha;
        row.beta_k = bt.beta;
        row.l_or_gamma = l;
        row.inner_iters = bt.inner_total;
        row.backtracks = bt.backtracks;
        row.psi = r.psi_value;
        row.x_step_norm = step;
        row.y_step_norm = step;
        row.s_step_norm = inertia_sq.sqrt();
        row.prox_stop = Some(r.reason);
        row.duality_residual = bt.residual;
        row.abs_tol = r.abs_tol;
        row.gamma_k = cfg.gamma;
        rec.push(row);

        x_prev = std::mem::replace(&mut x, r.y_tilde);
        f = problem.eval_f(x.view())?;
        phi = f + cfg.delta * linalg::dist_sq(x.view(), x_prev.view());
        k += 1;
        if d_sq.sqrt() <= cfg.stop_tol {
            converged = true;
            break;
        }
    }

    let trace = rec.finish(k, f, phi);
    Ok(SolveOutput { x, s: x_prev, trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_parameter_example() {
        let p = compute_params(1.0, 0.5, 1e-5, 0.0, 1.0);
        assert!((p.b - 2.0 / 1.00002).abs() < 1e-15);
        assert!((p.beta - 0.66666).abs() < 1e-5);
        assert!((p.alpha - 0.66667).abs() < 1e-5);
        for r in identity_residuals(p, 1.0, 0.5, 1e-5, 1.0) {
            assert!(r <= 1e-12);
        }
    }

    #[test]
    fn equal_delta_gamma_removes_inertia() {
        let p = compute_params(3.0, 0.2, 0.2, 1.0, 0.5);
        assert_eq!(p.b, 1.0);
        assert_eq!(p.beta, 0.0);
        let t = 1.0 + theta(1.0) * 0.5;
        assert!((p.alpha - t / 3.4).abs() < 1e-15);
    }

    #[test]
    fn omega_range_depends_on_tau() {
        let mut cfg = I2PianoConfig { omega: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.tau = 0.0;
        assert!(cfg.validate().is_ok());
        cfg.gamma = 1.0;
        assert!(cfg.validate().is_err());
    }
}
