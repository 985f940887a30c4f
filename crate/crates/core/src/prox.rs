//! Inexact inertial proximal-gradient points computed through the dual of the
//! prox subproblem.
//!
//! For an anchor `(x, s)` and parameters `(α, β)` the subproblem is
//! `min_y h(y; x, s)` with
//!
//! ```text
//! h(y; x, s) = f1(y) − f1(x) + ⟨∇f0(x) − (β/α)(x − s), y − x⟩ + ‖y − x‖²/(2α).
//! ```
//!
//! FISTA is run on the dual `ψ(w) = G(w) − Σ g_i*(w_i)` until a primal
//! candidate `ỹ` satisfies `h(ỹ) ≤ 2/(2+τ)·ψ(w̃)`.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;

pub const DEFAULT_MAX_INNER: usize = 2000;
/// Relative factor of the default absolute tolerance `1e-12·(1 + |f(x)|)`.
pub const DEFAULT_ABS_TOL_FACTOR: f64 = 1e-12;

/// `η = 2/(2+τ)`, the factor in the gap criterion.
pub fn eta(tau: f64) -> f64 {
    2.0 / (2.0 + tau)
}

/// `θ = 1/(√(1+τ/2) + √(τ/2))²`.
pub fn theta(tau: f64) -> f64 {
    let r = (1.0 + 0.5 * tau).sqrt() + (0.5 * tau).sqrt();
    1.0 / (r * r)
}

#[derive(Debug, Clone, Copy)]
pub struct ProxQuery<'a> {
    pub x: ArrayView1<'a, f64>,
    pub s: ArrayView1<'a, f64>,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub max_inner: usize,
    /// `None` selects `1e-12·(1 + |f(x)|)`.
    pub abs_tol: Option<f64>,
    /// `∇f0(x)` when the caller already has it.
    pub grad: Option<ArrayView1<'a, f64>>,
}

impl<'a> ProxQuery<'a> {
    pub fn new(x: ArrayView1<'a, f64>, s: ArrayView1<'a, f64>, alpha: f64, beta: f64, tau: f64) -> Self {
        Self { x, s, alpha, beta, tau, max_inner: DEFAULT_MAX_INNER, abs_tol: None, grad: None }
    }

    pub fn with_grad(mut self, grad: ArrayView1<'a, f64>) -> Self {
        self.grad = Some(grad);
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        Error::check_dim(n, self.x.len())?;
        Error::check_dim(n, self.s.len())?;
        if let Some(g) = self.grad {
            Error::check_dim(n, g.len())?;
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if self.max_inner == 0 {
            return Err(Error::InvalidConfig("max_inner must be positive".into()));
        }
        if let Some(t) = self.abs_tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig(format!("abs_tol must be nonnegative, got {t}")));
            }
        }
        Ok(())
    }
}

/// Which test ended the dual iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `h(ỹ) ≤ 2/(2+τ)·ψ(w̃)`.
    DualityGap,
    /// `|h| ≤ abs_tol` and `h − ψ ≤ abs_tol` (or `h − ψ ≤ abs_tol` when `τ = 0`).
    AbsoluteTolerance,
    MaxInner,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::DualityGap => "gap",
            StopReason::AbsoluteTolerance => "abs_tol",
            StopReason::MaxInner => "max_inner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gap" => Some(StopReason::DualityGap),
            "abs_tol" => Some(StopReason::AbsoluteTolerance),
            "max_inner" => Some(StopReason::MaxInner),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProxResult {
    pub y_tilde: Array1<f64>,
    pub h_value: f64,
    pub psi_value: f64,
    /// `ε = −(τ/2)·h`.
    pub epsilon: f64,
    pub w_tilde: Vec<Array1<f64>>,
    /// Dual iterates evaluated, the starting one included.
    pub inner_iters: usize,
    pub reason: StopReason,
    pub abs_tol: f64,
    /// Largest `(ψ_G(w) − h(p(w)))/(1 + |h|)` over the dual iterates, with
    /// `ψ_G` the closed-form dual value; nonpositive up to roundoff.
    pub duality_residual: f64,
}

impl ProxResult {
    pub fn converged(&self) -> bool {
        self.reason != StopReason::MaxInner
    }
}

/// Dual value at a given `w`.
#[derive(Debug, Clone)]
pub struct DualValue {
    /// `ψ(w)`, evaluated as `h(p) − Σ FY_i(M_i p, w_i)`; `−∞` off the dual domain.
    pub psi: f64,
    /// `ψ(w)` from the closed form through `G`.
    pub psi_closed_form: f64,
    /// `p(w) = prox_{αξ}(x̄ − αMᵀw)`.
    pub primal_candidate: Array1<f64>,
    /// `h(p(w))`.
    pub h_candidate: f64,
    pub dual_feasible: bool,
}

/// Quantities fixed by the anchor `(x, s, α, β)`.
struct Anchor<'p> {
    problem: &'p CompositeProblem,
    x: Array1<f64>,
    /// `∇f0(x) − (β/α)(x − s)`.
    v: Array1<f64>,
    /// `x̄ = x − α v`.
    xbar: Array1<f64>,
    mx: Vec<Array1<f64>>,
    f1x: f64,
    f0x: f64,
    alpha: f64,
}

struct Candidate {
    p: Array1<f64>,
    h: f64,
    psi: f64,
    psi_g: f64,
}

impl<'p> Anchor<'p> {
    fn new(problem: &'p CompositeProblem, q: &ProxQuery<'_>) -> Result<Self> {
        q.validate(problem.dim())?;
        let f1x = problem.f1.value(q.x);
        if !f1x.is_finite() {
            return Err(Error::OutsideDomain("f1"));
        }
        let grad = match q.grad {
            Some(g) => g.to_owned(),
            None => problem.f0.gradient(q.x)?,
        };
        let f0x = problem.f0.value(q.x);
        let ratio = q.beta / q.alpha;
        let mut v = grad;
        ndarray::Zip::from(&mut v).and(q.x).and(q.s).for_each(|v, &x, &s| *v -= ratio * (x - s));
        let xbar = linalg::axpy(q.x, -q.alpha, v.view());
        let mx = problem.f1.apply_blocks(q.x);
        Ok(Self { problem, x: q.x.to_owned(), v, xbar, mx, f1x, f0x, alpha: q.alpha })
    }

    /// `h(x + d)` given `M d`.
    fn h_of_step(&self, d: ArrayView1<f64>, md: &[Array1<f64>]) -> f64 {
        let df1 = self.problem.f1.value_change(self.x.view(), &self.mx, d, md);
        if df1 == f64::INFINITY {
            return f64::INFINITY;
        }
        df1 + linalg::dot(self.v.view(), d) + linalg::norm_sq(d) / (2.0 * self.alpha)
    }

    fn h(&self, y: ArrayView1<f64>) -> f64 {
        let d = &y - &self.x;
        let md = self.problem.f1.apply_blocks(d.view());
        self.h_of_step(d.view(), &md)
    }

    /// `p(w)` from a cached `Mᵀw`.
    fn primal(&self, mtw: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let u = linalg::axpy(self.xbar.view(), -self.alpha, mtw.view());
        let p = self.problem.f1.xi().prox(u.view(), self.alpha);
        (p, u)
    }

    fn candidate(&self, w: &[Array1<f64>], mtw: &Array1<f64>) -> Candidate {
        let (p, u) = self.primal(mtw);
        let d = &p - &self.x;
        let md = self.problem.f1.apply_blocks(d.view());
        let h = self.h_of_step(d.view(), &md);
        let blocks = self.problem.f1.blocks();
        let mut fy = 0.0;
        let mut conj = 0.0;
        for (i, b) in blocks.iter().enumerate() {
            let mp = &self.mx[i] + &md[i];
            fy += b.func.fenchel_young_gap(mp.view(), w[i].view());
            conj += b.func.conjugate(w[i].view());
        }
        let psi = if fy.is_finite() { h - fy } else { f64::NEG_INFINITY };
        let psi_g = if conj.is_finite() {
            let a = self.alpha;
            let c = -0.5 * a * linalg::norm_sq(self.v.view()) - self.f1x;
            self.problem.f1.xi().value(p.view()) + linalg::dist_sq(p.view(), u.view()) / (2.0 * a)
                + linalg::dot(self.xbar.view(), mtw.view())
                - 0.5 * a * linalg::norm_sq(mtw.view())
                - conj
                + c
        } else {
            f64::NEG_INFINITY
        };
        Candidate { p, h, psi, psi_g }
    }
}

/// `h(y; x, s)` for step `α` and inertial weight `β`; `+∞` iff `y ∉ dom(f1)`.
pub fn eval_h(
    problem: &CompositeProblem,
    x: ArrayView1<f64>,
    s: ArrayView1<f64>,
    alpha: f64,
    beta: f64,
    y: ArrayView1<f64>,
) -> Result<f64> {
    let q = ProxQuery::new(x, s, alpha, beta, 0.0);
    let anchor = Anchor::new(problem, &q)?;
    Error::check_dim(problem.dim(), y.len())?;
    Ok(anchor.h(y))
}

/// `ψ(w; x, s)` together with its primal candidate.
pub fn dual_objective(problem: &CompositeProblem, query: &ProxQuery<'_>, w: &[Array1<f64>]) -> Result<DualValue> {
    let anchor = Anchor::new(problem, query)?;
    let blocks = problem.f1.blocks();
    if w.len() != blocks.len() {
        return Err(Error::DimensionMismatch { expected: blocks.len(), got: w.len() });
    }
    for (b, wi) in blocks.iter().zip(w) {
        Error::check_dim(b.op.output_dim(), wi.len())?;
    }
    let mtw = problem.f1.adjoint_sum(w);
    let c = anchor.candidate(w, &mtw);
    Ok(DualValue {
        psi: c.psi,
        psi_closed_form: c.psi_g,
        primal_candidate: c.p,
        h_candidate: c.h,
        dual_feasible: c.psi > f64::NEG_INFINITY,
    })
}

/// Runs FISTA on the dual until the primal candidate is accurate enough.
///
/// The best (lowest `h`) candidate seen so far is paired with the best dual
/// value seen so far; `x` itself enters as a candidate with `h = 0`.
pub fn solve_inexact_prox(
    problem: &CompositeProblem,
    query: &ProxQuery<'_>,
    warm_start: Option<&[Array1<f64>]>,
) -> Result<ProxResult> {
    let anchor = Anchor::new(problem, query)?;
    let f1 = &problem.f1;
    let blocks = f1.blocks();
    let abs_tol = query
        .abs_tol
        .unwrap_or(DEFAULT_ABS_TOL_FACTOR * (1.0 + (anchor.f0x + anchor.f1x).abs()));
    let tau = query.tau;
    let eta = eta(tau);
    let theta = theta(tau);
    let alpha = query.alpha;

    let mut w: Vec<Array1<f64>> = match warm_start {
        Some(ws) if ws.len() == blocks.len()
            && ws.iter().zip(blocks).all(|(wi, b)| wi.len() == b.op.output_dim()) =>
        {
            ws.to_vec()
        }
        _ => blocks.iter().map(|b| Array1::zeros(b.op.output_dim())).collect(),
    };
    if !blocks.is_empty() && !(f1.op_norm_sq_bound() > 0.0) {
        return Err(Error::InvalidConfig("operator norm bound must be positive".into()));
    }
    let step = if blocks.is_empty() { 0.0 } else { 1.0 / (alpha * f1.op_norm_sq_bound()) };

    let mut best_y = anchor.x.clone();
    let mut best_h = 0.0;
    let mut best_psi = f64::NEG_INFINITY;
    let mut best_w = w.clone();
    let mut residual = f64::NEG_INFINITY;
    let mut inner = 0usize;

    let mut mtw = f1.adjoint_sum(&w);
    let mut cand = anchor.candidate(&w, &mtw);
    let mut t_k = 1.0f64;
    let mut extrapolated: Option<(Vec<Array1<f64>>, Array1<f64>)> = None;

    let reason = loop {
        inner += 1;
        if cand.h.is_finite() && cand.psi_g.is_finite() {
            residual = residual.max((cand.psi_g - cand.h) / (1.0 + cand.h.abs()));
        }
        if cand.h < best_h {
            best_h = cand.h;
            best_y = cand.p.clone();
        }
        if cand.psi > best_psi {
            best_psi = cand.psi;
            best_w = w.clone();
        }

        let gap = best_h - best_psi;
        if tau == 0.0 {
            if gap <= abs_tol {
                break StopReason::AbsoluteTolerance;
            }
        } else {
            // with h = 0 the gap test holds trivially and says nothing
            if best_h < 0.0 && best_h <= eta * best_psi {
                break StopReason::DualityGap;
            }
            if best_h.abs() <= abs_tol && gap <= abs_tol {
                break StopReason::AbsoluteTolerance;
            }
        }
        if inner >= query.max_inner || blocks.is_empty() {
            break StopReason::MaxInner;
        }

        // one FISTA step from the extrapolated point z
        let (z, mtz) = if inner == 1 {
            (w.clone(), mtw.clone())
        } else {
            extrapolated.take().expect("extrapolation is set after the first step")
        };
        let (pz, _) = anchor.primal(&mtz);
        let grad = f1.apply_blocks(pz.view());
        let w_new: Vec<Array1<f64>> = blocks
            .iter()
            .zip(z.iter().zip(&grad))
            .map(|(b, (zi, gi))| {
                let v = linalg::axpy(zi.view(), step, gi.view());
                b.func.conjugate_prox(v.view(), step)
            })
            .collect();
        let mtw_new = f1.adjoint_sum(&w_new);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let mom = (t_k - 1.0) / t_next;
        t_k = t_next;
        let z_next: Vec<Array1<f64>> = w_new
            .iter()
            .zip(&w)
            .map(|(a, b)| {
                let mut out = a * (1.0 + mom);
                out.scaled_add(-mom, b);
                out
            })
            .collect();
        let mut mtz_next = &mtw_new * (1.0 + mom);
        mtz_next.scaled_add(-mom, &mtw);
        extrapolated = Some((z_next, mtz_next));
        w = w_new;
        mtw = mtw_new;
        cand = anchor.candidate(&w, &mtw);
    };

    let (y_tilde, h_value) = if reason == StopReason::AbsoluteTolerance {
        let dist = linalg::dist_sq(best_y.view(), anchor.x.view());
        if theta / (2.0 * alpha) * dist <= -best_h {
            (best_y, best_h)
        } else {
            (anchor.x.clone(), 0.0)
        }
    } else {
        (best_y, best_h)
    };

    Ok(ProxResult {
        epsilon: -0.5 * tau * h_value,
        y_tilde,
        h_value,
        psi_value: best_psi,
        w_tilde: best_w,
        inner_iters: inner,
        reason,
        abs_tol,
        duality_residual: residual,
    })
}
