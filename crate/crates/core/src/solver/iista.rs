//! Inexact ISTA: forward–backward with `α_k = 1/L_k`, no inertia, and the
//! same backtracking and inexact prox as i²Piano.

use ndarray::ArrayView1;

use super::{backtrack, check_start, ignore_row, positive, BacktrackSpec, ProxSettings, Recorder, SolveOutput};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::trace::TraceRow;

#[derive(Debug, Clone)]
pub struct IistaConfig {
    pub l0: f64,
    pub eta: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub tau: f64,
    pub max_outer: usize,
    /// Stop once `‖x^{k+1} − x^k‖ ≤ stop_tol`.
    pub stop_tol: f64,
    pub prox: ProxSettings,
}

impl Default for IistaConfig {
    fn default() -> Self {
        Self { l0: 1.0, eta: 1.5, l_min: 1e-8, l_max: 1e10, tau: 1e6, max_outer: 1000, stop_tol: 1e-10, prox: ProxSettings::default() }
    }
}

impl IistaConfig {
    pub fn validate(&self) -> Result<()> {
        positive("l0", self.l0)?;
        positive("l_min", self.l_min)?;
        positive("l_max", self.l_max)?;
        if !(self.eta > 1.0) {
            return Err(Error::InvalidConfig(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

pub fn solve(problem: &CompositeProblem, x0: ArrayView1<f64>, cfg: &IistaConfig) -> Result<SolveOutput> {
    solve_with(problem, x0, cfg, &mut ignore_row)
}

pub fn solve_with(
    problem: &CompositeProblem,
    x0: ArrayView1<f64>,
    cfg: &IistaConfig,
    observer: &mut dyn FnMut(&TraceRow),
) -> Result<SolveOutput> {
    cfg.validate()?;
    let mut f = check_start(problem, x0)?;
    let mut x = x0.to_owned();
    let mut x_prev = x.clone();
    let mut l = cfg.l0.clamp(cfg.l_min, cfg.l_max);
    let mut warm = None;
    let mut rec = Recorder::new(observer);
    let mut converged = false;
    let mut k = 0;

    while k < cfg.max_outer {
        let grad = problem.f0.gradient(x.view())?;
        let spec = BacktrackSpec {
            x: x.view(),
            s: x.view(),
            grad: grad.view(),
            l_start: l,
            eta: cfg.eta,
            l_max: cfg.l_max,
            tau: cfg.tau,
            prox: cfg.prox,
        };
        let bt = backtrack(problem, &spec, &mut warm, |l| (1.0 / l, 0.0))?;
        l = bt.l;
        let r = bt.prox;
        let step = linalg::dist(r.y_tilde.view(), x.view());

        let mut row = TraceRow::terminal(k, rec.elapsed(), f, f);
        row.h = r.h_value;
        row.d_k = (-r.h_value).sqrt();
        row.alpha_k = bt.alpha;
        row.beta_k = 0.0;
        row.l_or_gamma = l;
        row.inner_iters = bt.inner_total;
        row.backtracks = bt.backtracks;
        row.psi = r.psi_value;
        row.x_step_norm = step;
        row.y_step_norm = step;
        row.s_step_norm = 0.0;
        row.prox_stop = Some(r.reason);
        row.duality_residual = bt.residual;
        row.abs_tol = r.abs_tol;
        rec.push(row);

        x_prev = std::mem::replace(&mut x, r.y_tilde);
        f = problem.eval_f(x.view())?;
        k += 1;
        if step <= cfg.stop_tol {
            converged = true;
            break;
        }
    }

    let trace = rec.finish(k, f, f);
    Ok(SolveOutput { x, s: x_prev, trace, converged })
}
