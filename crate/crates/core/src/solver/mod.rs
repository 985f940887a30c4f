//! Outer loops: i²Piano, iPila and the inexact ISTA baseline.

pub mod i2piano;
pub mod iista;
pub mod ipila;

use std::time::Instant;

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::CompositeProblem;
use crate::prox::{self, ProxQuery, ProxResult, DEFAULT_MAX_INNER};
use crate::trace::{Trace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    I2Piano,
    IPilaStrict,
    IPilaPractical,
    Iista,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] =
        [SolverKind::I2Piano, SolverKind::IPilaStrict, SolverKind::IPilaPractical, SolverKind::Iista];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::I2Piano => "i2piano",
            SolverKind::IPilaStrict => "ipila-strict",
            SolverKind::IPilaPractical => "ipila-practical",
            SolverKind::Iista => "iista",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inner-solver settings shared by all outer loops.
#[derive(Debug, Clone, Copy)]
pub struct ProxSettings {
    pub max_inner: usize,
    /// `None` selects the engine default `1e-12·(1 + |f(x)|)`.
    pub abs_tol: Option<f64>,
    /// Keep going with the best candidate when the dual iterations hit
    /// `max_inner` instead of failing.
    pub allow_unconverged: bool,
}

impl Default for ProxSettings {
    fn default() -> Self {
        Self { max_inner: DEFAULT_MAX_INNER, abs_tol: None, allow_unconverged: false }
    }
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: Array1<f64>,
    /// Last anchor `s` (`x^{k−1}` for i²Piano and iISTA).
    pub s: Array1<f64>,
    pub trace: Trace,
    /// The outer stopping rule fired before `max_outer`.
    pub converged: bool,
}

/// No-op observer.
pub fn ignore_row(_: &TraceRow) {}

pub(crate) fn check_start(problem: &CompositeProblem, x0: ArrayView1<f64>) -> Result<f64> {
    let f = problem.eval_f(x0)?;
    if !f.is_finite() {
        return Err(Error::OutsideDomain("f1"));
    }
    Ok(f)
}

/// Streams rows to the observer and keeps them.
pub(crate) struct Recorder<'o> {
    start: Instant,
    trace: Trace,
    observer: &'o mut dyn FnMut(&TraceRow),
}

impl<'o> Recorder<'o> {
    pub(crate) fn new(observer: &'o mut dyn FnMut(&TraceRow)) -> Self {
        Self { start: Instant::now(), trace: Trace::new(), observer }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub(crate) fn push(&mut self, row: TraceRow) {
        (self.observer)(&row);
        self.trace.push(row);
    }

    pub(crate) fn finish(mut self, k: usize, f: f64, phi: f64) -> Trace {
        let row = TraceRow::terminal(k, self.elapsed(), f, phi);
        self.push(row);
        self.trace
    }
}

/// `f0(x + d) ≤ f0(x) + ⟨∇f0(x), d⟩ + (L/2)‖d‖²`, with a few ulps of slack
/// on the two terms that are formed from large quantities.
pub fn descent_holds(problem: &CompositeProblem, x: ArrayView1<f64>, grad: ArrayView1<f64>, d: ArrayView1<f64>, l: f64) -> bool {
    let df0 = problem.f0.value_change(x, d);
    if !df0.is_finite() {
        return false;
    }
    let lin = linalg::dot(grad, d);
    let slack = 8.0 * f64::EPSILON * (df0.abs() + lin.abs());
    df0 - lin <= 0.5 * l * linalg::norm_sq(d) + slack
}

/// Outcome of the `L_k` backtracking loop.
pub(crate) struct Backtracked {
    pub prox: ProxResult,
    pub l: f64,
    pub alpha: f64,
    pub beta: f64,
    pub backtracks: usize,
    pub inner_total: usize,
    pub residual: f64,
}

pub(crate) struct BacktrackSpec<'a> {
    pub x: ArrayView1<'a, f64>,
    pub s: ArrayView1<'a, f64>,
    pub grad: ArrayView1<'a, f64>,
    pub l_start: f64,
    pub eta: f64,
    pub l_max: f64,
    pub tau: f64,
    pub prox: ProxSettings,
}

/// Increases `L` by `η` until the descent test accepts the inexact prox
/// point; `params` maps `L` to `(α, β)`.
pub(crate) fn backtrack(
    problem: &CompositeProblem,
    spec: &BacktrackSpec<'_>,
    warm: &mut Option<Vec<Array1<f64>>>,
    params: impl Fn(f64) -> (f64, f64),
) -> Result<Backtracked> {
    let mut l = spec.l_start;
    let mut backtracks = 0;
    let mut inner_total = 0;
    let mut residual = f64::NEG_INFINITY;
    loop {
        let (alpha, beta) = params(l);
        let mut q = ProxQuery::new(spec.x, spec.s, alpha, beta, spec.tau).with_grad(spec.grad);
        q.max_inner = spec.prox.max_inner;
        q.abs_tol = spec.prox.abs_tol;
        let r = prox::solve_inexact_prox(problem, &q, warm.as_deref())?;
        inner_total += r.inner_iters;
        residual = residual.max(r.duality_residual);
        if !r.converged() && !spec.prox.allow_unconverged {
            return Err(Error::ProxNotConverged { iters: r.inner_iters, h: r.h_value, psi: r.psi_value });
        }
        if r.h_value > 0.0 {
            return Err(Error::PositiveH(r.h_value));
        }
        *warm = Some(r.w_tilde.clone());
        let d = &r.y_tilde - &spec.x;
        if descent_holds(problem, spec.x, spec.grad, d.view(), l) {
            return Ok(Backtracked { prox: r, l, alpha, beta, backtracks, inner_total, residual });
        }
        l *= spec.eta;
        backtracks += 1;
        if l > spec.eta * spec.l_max {
            return Err(Error::BacktrackingFailed { l, bound: spec.eta * spec.l_max });
        }
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
    }
}
