//! iPila: inexact inertial proximal step followed by an Armijo line search on
//! the merit function `Φ(x, s) = f(x) + ½‖x − s‖²`.

use ndarray::{Array1, ArrayView1, Zip};

use super::{check_start, ignore_row, positive, ProxSettings, Recorder, SolveOutput};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::prox::{self, ProxQuery};
use crate::trace::{Branch, TraceRow};

/// Below this multiple of `1 + |Φ|`, `−Δ_k` is indistinguishable from zero.
pub const STATIONARITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IPilaVariant {
    /// Fixed `(α, β, γ)`; line search every iteration, then the acceptance
    /// test with the line-search `λ_k`.
    Strict,
    /// `(α_k, β_k)` from a Lipschitz estimate; the inertial point is tried
    /// first with `λ = 1` and the line search runs only when it fails.
    Practical,
}

#[derive(Debug, Clone)]
pub struct IPilaConfig {
    pub variant: IPilaVariant,
    pub sigma: f64,
    /// Line-search reduction factor.
    pub ls_shrink: f64,
    pub max_halvings: usize,
    pub tau: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Strict variant step size.
    pub alpha: f64,
    /// Strict variant inertial weight.
    pub beta: f64,
    /// `γ_k`, both variants.
    pub gamma: f64,
    /// Practical variant: `δ` in `b_k = (L_k + 2δ)/(L_k + 2γ)`.
    pub delta: f64,
    pub eta: f64,
    pub l0: f64,
    pub l_max: f64,
    pub max_outer: usize,
    /// Stop once `√(−Δ_k) ≤ stop_tol`.
    pub stop_tol: f64,
    pub prox: ProxSettings,
}

impl Default for IPilaConfig {
    fn default() -> Self {
        Self {
            variant: IPilaVariant::Practical,
            sigma: 1e-4,
            ls_shrink: 0.5,
            max_halvings: 60,
            tau: 1e6,
            alpha_min: 1e-10,
            alpha_max: 1e10,
            beta_max: 1.0,
            gamma_min: 1e-10,
            gamma_max: 1e10,
            alpha: 1.0,
            beta: 0.5,
            gamma: 1e-5,
            delta: 0.5,
            eta: 1.5,
            l0: 1.0,
            l_max: 1e10,
            max_outer: 1000,
            stop_tol: 1e-10,
            prox: ProxSettings::default(),
        }
    }
}

impl IPilaConfig {
    pub fn strict() -> Self {
        Self { variant: IPilaVariant::Strict, ..Default::default() }
    }

    pub fn practical() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in (0,1), got {v}")))
            }
        };
        unit("sigma", self.sigma)?;
        unit("ls_shrink", self.ls_shrink)?;
        positive("alpha_min", self.alpha_min)?;
        positive("gamma_min", self.gamma_min)?;
        positive("gamma", self.gamma)?;
        if !(self.alpha_min <= self.alpha_max) {
            return Err(Error::InvalidConfig("alpha_min exceeds alpha_max".into()));
        }
        if !(self.gamma_min <= self.gamma_max) {
            return Err(Error::InvalidConfig("gamma_min exceeds gamma_max".into()));
        }
        if !(self.beta_max >= 0.0) {
            return Err(Error::InvalidConfig("beta_max must be nonnegative".into()));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be nonnegative".into()));
        }
        match self.variant {
            IPilaVariant::Strict => {
                if !(self.alpha >= self.alpha_min && self.alpha <= self.alpha_max) {
                    return Err(Error::InvalidConfig(format!(
                        "alpha = {} outside [{}, {}]",
                        self.alpha, self.alpha_min, self.alpha_max
                    )));
                }
                if !(self.beta >= 0.0 && self.beta <= self.beta_max) {
                    return Err(Error::InvalidConfig(format!("beta = {} outside [0, {}]", self.beta, self.beta_max)));
                }
                if !(self.gamma >= self.gamma_min && self.gamma <= self.gamma_max) {
                    return Err(Error::InvalidConfig(format!(
                        "gamma = {} outside [{}, {}]",
                        self.gamma, self.gamma_min, self.gamma_max
                    )));
                }
            }
            IPilaVariant::Practical => {
                positive("l0", self.l0)?;
                positive("l_max", self.l_max)?;
                if !(self.delta >= self.gamma) {
                    return Err(Error::InvalidConfig("delta must be at least gamma".into()));
                }
                if !(self.eta > 1.0) {
                    return Err(Error::InvalidConfig(format!("eta must exceed 1, got {}", self.eta)));
                }
            }
        }
        Ok(())
    }
}

/// `(α_k, β_k)` of the practical variant for a given `L_k`.
pub fn practical_params(l: f64, delta: f64, gamma: f64) -> (f64, f64) {
    // same expansion as the i²Piano parameters with 1 + θω = 2
    let denom = 0.5 * l + 2.0 * delta - gamma;
    (1.0 / denom, 2.0 * (delta - gamma) / denom)
}

/// `d_x = ỹ − x`, `d_s = (1 + β/α)(ỹ − x) + γ_k (x − s)`.
pub fn descent_direction(
    x: ArrayView1<f64>,
    s: ArrayView1<f64>,
    y_tilde: ArrayView1<f64>,
    alpha: f64,
    beta: f64,
    gamma_k: f64,
) -> (Array1<f64>, Array1<f64>) {
    let dx = &y_tilde - &x;
    let c = 1.0 + beta / alpha;
    let ds = Zip::from(&dx).and(x).and(s).map_collect(|&d, &x, &s| c * d + gamma_k * (x - s));
    (dx, ds)
}

/// `Δ_k = h − γ_k ‖x − s‖²`.
pub fn compute_delta(h: f64, gamma_k: f64, x: ArrayView1<f64>, s: ArrayView1<f64>) -> Result<f64> {
    if h > 0.0 {
        return Err(Error::PositiveH(h));
    }
    Ok(h - gamma_k * linalg::dist_sq(x, s))
}

/// `Φ(x + e_x, s + e_s) − Φ(x, s)`.
pub fn merit_change(
    problem: &CompositeProblem,
    x: ArrayView1<f64>,
    s: ArrayView1<f64>,
    ex: ArrayView1<f64>,
    es: ArrayView1<f64>,
) -> f64 {
    let df = problem.value_change(x, ex);
    if !df.is_finite() {
        return df;
    }
    // ½‖r + e‖² − ½‖r‖² = ⟨r, e⟩ + ½‖e‖² with r = x − s, e = e_x − e_s
    let mut quad = 0.0;
    Zip::from(x).and(s).and(ex).and(es).for_each(|&x, &s, &a, &b| {
        let e = a - b;
        quad += (x - s) * e + 0.5 * e * e;
    });
    df + quad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub lambda: f64,
    pub halvings: usize,
    pub evals: usize,
    /// `Φ(x + λd_x, s + λd_s) − Φ(x, s)`.
    pub merit_change: f64,
}

/// Largest `λ ∈ {1, δ, δ², …}` with `Φ(x + λd_x, s + λd_s) ≤ Φ(x, s) + σλΔ`.
#[allow(clippy::too_many_arguments)]
pub fn armijo_linesearch(
    problem: &CompositeProblem,
    x: ArrayView1<f64>,
    s: ArrayView1<f64>,
    dx: ArrayView1<f64>,
    ds: ArrayView1<f64>,
    delta_k: f64,
    sigma: f64,
    shrink: f64,
    max_halvings: usize,
) -> Result<LineSearch> {
    if !(delta_k < 0.0) {
        return Err(Error::InvalidConfig(format!("line search needs delta_k < 0, got {delta_k}")));
    }
    let mut lambda = 1.0;
    for j in 0..=max_halvings {
        let ex = dx.mapv(|t| lambda * t);
        let es = ds.mapv(|t| lambda * t);
        let change = merit_change(problem, x, s, ex.view(), es.view());
        if change <= sigma * lambda * delta_k {
            return Ok(LineSearch { lambda, halvings: j, evals: j + 1, merit_change: change });
        }
        lambda *= shrink;
    }
    Err(Error::LineSearchFailed { halvings: max_halvings, delta: delta_k })
}

/// Constant `C` in `‖(d_x, d_s)‖² ≤ (a‖ỹ − x‖² + γ_k‖x − s‖²)/C`, with
/// `a = θ/(2α_max)` and `δ̄ = 1 + β_max/α_min`.
pub fn direction_norm_constant(theta: f64, alpha_min: f64, alpha_max: f64, beta_max: f64, gamma_max: f64) -> f64 {
    let a = theta / (2.0 * alpha_max);
    let db = 1.0 + beta_max / alpha_min;
    1.0 / ((1.0 + db * db + db * gamma_max) / a).max(gamma_max + db)
}

pub fn solve(problem: &CompositeProblem, x0: ArrayView1<f64>, s0: Option<ArrayView1<f64>>, cfg: &IPilaConfig) -> Result<SolveOutput> {
    solve_with(problem, x0, s0, cfg, &mut ignore_row)
}

/// Runs iPila from `(x0, s0)`; `s0` defaults to `x0`.
pub fn solve_with(
    problem: &CompositeProblem,
    x0: ArrayView1<f64>,
    s0: Option<ArrayView1<f64>>,
    cfg: &IPilaConfig,
    observer: &mut dyn FnMut(&TraceRow),
) -> Result<SolveOutput> {
    cfg.validate()?;
    let mut f = check_start(problem, x0)?;
    let mut x = x0.to_owned();
    let mut s = match s0 {
        Some(s0) => {
            Error::check_dim(x.len(), s0.len())?;
            s0.to_owned()
        }
        None => x.clone(),
    };
    let mut phi = f + 0.5 * linalg::dist_sq(x.view(), s.view());
    let mut l = cfg.l0;
    let mut warm: Option<Vec<Array1<f64>>> = None;
    let mut rec = Recorder::new(observer);
    let mut converged = false;
    let mut k = 0;

    while k < cfg.max_outer {
        let (alpha, beta, gamma_k) = match cfg.variant {
            IPilaVariant::Strict => (cfg.alpha, cfg.beta, cfg.gamma),
            IPilaVariant::Practical => {
                let (a, b) = practical_params(l, cfg.delta, cfg.gamma);
                (a, b, cfg.gamma)
            }
        };
        let l_used = l;
        let grad = problem.f0.gradient(x.view())?;
        let mut q = ProxQuery::new(x.view(), s.view(), alpha, beta, cfg.tau).with_grad(grad.view());
        q.max_inner = cfg.prox.max_inner;
        q.abs_tol = cfg.prox.abs_tol;
        let r = prox::solve_inexact_prox(problem, &q, warm.as_deref())?;
        if !r.converged() && !cfg.prox.allow_unconverged {
            return Err(Error::ProxNotConverged { iters: r.inner_iters, h: r.h_value, psi: r.psi_value });
        }
        warm = Some(r.w_tilde.clone());
        let delta_k = compute_delta(r.h_value, gamma_k, x.view(), s.view())?;

        let mut row = TraceRow::terminal(k, f64::NAN, f, phi);
        row.h = r.h_value;
        row.delta_k = delta_k;
        row.d_k = (-delta_k).sqrt();
        row.alpha_k = alpha;
        row.beta_k = beta;
        row.l_or_gamma = match cfg.variant {
            IPilaVariant::Strict => gamma_k,
            IPilaVariant::Practical => l_used,
        };
        row.inner_iters = r.inner_iters;
        row.psi = r.psi_value;
        row.y_step_norm = linalg::dist(r.y_tilde.view(), x.view());
        row.prox_stop = Some(r.reason);
        row.duality_residual = r.duality_residual;
        row.abs_tol = r.abs_tol;
        row.gamma_k = gamma_k;

        // Δ_k = 0 only at a stationary pair; a search there compares equal values
        let stationary = |mut row: TraceRow, rec: &mut Recorder| {
            row.x_step_norm = 0.0;
            row.s_step_norm = 0.0;
            row.time_s = rec.elapsed();
            rec.push(row);
        };
        if delta_k == 0.0 {
            stationary(row, &mut rec);
            k += 1;
            converged = true;
            break;
        }

        let (dx, ds) = descent_direction(x.view(), s.view(), r.y_tilde.view(), alpha, beta, gamma_k);
        // moving to (ỹ, x) means e_x = d_x and e_s = x − s
        let x_minus_s = &x - &s;
        let inertial_change = merit_change(problem, x.view(), s.view(), dx.view(), x_minus_s.view());

        let (lambda, halvings, branch) = if cfg.variant == IPilaVariant::Practical
            && inertial_change <= cfg.sigma * delta_k
        {
            (1.0, 0, Branch::Inertial)
        } else {
            if cfg.variant == IPilaVariant::Practical {
                l *= cfg.eta;
                if l > cfg.eta * cfg.l_max {
                    return Err(Error::BacktrackingFailed { l, bound: cfg.eta * cfg.l_max });
                }
            }
            let ls = match armijo_linesearch(
                problem,
                x.view(),
                s.view(),
                dx.view(),
                ds.view(),
                delta_k,
                cfg.sigma,
                cfg.ls_shrink,
                cfg.max_halvings,
            ) {
                Ok(ls) => ls,
                // Δ_k lost in roundoff: treat as stationary rather than failing
                Err(Error::LineSearchFailed { .. }) if -delta_k <= STATIONARITY_FLOOR * (1.0 + phi.abs()) => {
                    stationary(row, &mut rec);
                    k += 1;
                    converged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let branch = if inertial_change <= cfg.sigma * ls.lambda * delta_k {
                Branch::Inertial
            } else {
                Branch::LineSearch
            };
            (ls.lambda, ls.halvings, branch)
        };

        let (x_new, s_new) = match branch {
            Branch::Inertial => (r.y_tilde, x.clone()),
            Branch::LineSearch => (linalg::axpy(x.view(), lambda, dx.view()), linalg::axpy(s.view(), lambda, ds.view())),
        };
        row.lambda_k = lambda;
        row.backtracks = halvings;
        row.halvings = halvings;
        row.branch = Some(branch);
        row.x_step_norm = linalg::dist(x_new.view(), x.view());
        row.s_step_norm = linalg::dist(s_new.view(), s.view());
        row.time_s = rec.elapsed();
        rec.push(row);

        x = x_new;
        s = s_new;
        f = problem.eval_f(x.view())?;
        phi = f + 0.5 * linalg::dist_sq(x.view(), s.view());
        k += 1;
        if (-delta_k).sqrt() <= cfg.stop_tol {
            converged = true;
            break;
        }
    }

    let trace = rec.finish(k, f, phi);
    Ok(SolveOutput { x, s, trace, converged })
}
