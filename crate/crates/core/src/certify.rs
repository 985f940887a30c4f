//! Replays the checkable inequalities of the convergence theory over a
//! finished trace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::prox::{eta, theta, StopReason};
use crate::solver::i2piano::{identity_residuals, StepParams};
use crate::solver::SolverKind;
use crate::trace::{Trace, TraceRow};

pub const H1_TOL: f64 = 1e-9;
pub const PROX_TOL: f64 = 1e-10;
pub const ARMIJO_TOL: f64 = 1e-12;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const DUALITY_TOL: f64 = 1e-10;
pub const MONOTONE_TOL: f64 = 1e-9;

/// Solver parameters the certifier needs besides the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub solver: SolverKind,
    pub tau: f64,
    pub delta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub sigma: f64,
    pub max_halvings: usize,
}

impl RunInfo {
    pub fn to_kv(&self) -> String {
        format!(
            "solver={}\ntau={}\ndelta={}\ngamma={}\nomega={}\nsigma={}\nmax_halvings={}\n",
            self.solver, self.tau, self.delta, self.gamma, self.omega, self.sigma, self.max_halvings
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = parse_kv(text)?;
        let get = |key: &str| map.get(key).ok_or_else(|| Error::Parse(format!("run info lacks {key}")));
        let num = |key: &str| -> Result<f64> {
            get(key)?.parse().map_err(|_| Error::Parse(format!("bad value for {key}")))
        };
        let solver = SolverKind::parse(get("solver")?)
            .ok_or_else(|| Error::Parse(format!("unknown solver {}", map["solver"])))?;
        Ok(Self {
            solver,
            tau: num("tau")?,
            delta: num("delta")?,
            gamma: num("gamma")?,
            omega: num("omega")?,
            sigma: num("sigma")?,
            max_halvings: get("max_halvings")?
                .parse()
                .map_err(|_| Error::Parse("bad value for max_halvings".into()))?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_kv(&text)
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        map.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Fields needed by the check are missing from the trace.
    Incomplete,
    /// The check does not apply to this solver.
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Incomplete => "incomplete",
            Verdict::NotApplicable => "n/a",
        }
    }
}

/// Result of one check: the worst scaled excess `(lhs − rhs)/scale` and
/// where it happened.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub verdict: Verdict,
    pub checked: usize,
    pub violations: usize,
    pub worst_residual: f64,
    pub worst_k: Option<usize>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self { name, verdict: Verdict::Pass, checked: 0, violations: 0, worst_residual: f64::NEG_INFINITY, worst_k: None }
    }

    fn not_applicable(name: &'static str) -> Self {
        Self { verdict: Verdict::NotApplicable, ..Self::new(name) }
    }

    fn incomplete(mut self) -> Self {
        self.verdict = Verdict::Incomplete;
        self
    }

    /// Records `residual`; it is a violation when `residual > 0`.
    fn record(&mut self, k: usize, residual: f64) {
        self.checked += 1;
        let bad = !(residual <= 0.0);
        if bad {
            self.violations += 1;
            self.verdict = Verdict::Fail;
        }
        if residual.is_nan() || residual > self.worst_residual || self.worst_k.is_none() {
            self.worst_residual = residual;
            self.worst_k = Some(k);
        }
    }
}

fn pairs(trace: &Trace) -> impl Iterator<Item = (&TraceRow, &TraceRow)> {
    trace.rows.windows(2).filter(|w| !w[0].is_terminal()).map(|w| (&w[0], &w[1]))
}

/// Weight `a_k` in the sufficient-decrease condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum H1Weight {
    /// `a_k = 1`.
    Unit,
    /// `a_k = σ·λ_min` with `λ_min` the smallest step in the trace.
    Armijo { sigma: f64 },
}

/// `Φ_{k+1} + a_k d_k² ≤ Φ_k` up to `1e-9·(1 + |Φ_k|)`.
pub fn check_h1(trace: &Trace, weight: H1Weight) -> Check {
    let mut c = Check::new("H1");
    let a = match weight {
        H1Weight::Unit => 1.0,
        H1Weight::Armijo { sigma } => {
            let lmin = trace.rows.iter().filter(|r| !r.is_terminal()).map(|r| r.lambda_k).fold(f64::INFINITY, f64::min);
            if lmin.is_nan() {
                return c.incomplete();
            }
            sigma * if lmin.is_finite() { lmin } else { 1.0 }
        }
    };
    for (cur, next) in pairs(trace) {
        if cur.d_k.is_nan() || cur.phi.is_nan() || next.phi.is_nan() {
            return c.incomplete();
        }
        let tol = H1_TOL * (1.0 + cur.phi.abs());
        let excess = next.phi + a * cur.d_k * cur.d_k - cur.phi - tol;
        c.record(cur.k, excess / (1.0 + cur.phi.abs()));
    }
    c
}

/// `‖x^{k+1} − x^k‖ ≤ p·d_{k+k'}`, relative slack `1e-9`.
pub fn check_h4(trace: &Trace, p: f64, k_shift: usize) -> Check {
    let mut c = Check::new("H4");
    let rows = &trace.rows;
    for (i, r) in rows.iter().enumerate() {
        if r.is_terminal() {
            continue;
        }
        let Some(target) = rows.get(i + k_shift) else { continue };
        if target.is_terminal() {
            continue;
        }
        if r.x_step_norm.is_nan() || target.d_k.is_nan() {
            return c.incomplete();
        }
        let bound = p * target.d_k;
        let excess = r.x_step_norm - bound - H1_TOL * (bound + 1e-300);
        c.record(r.k, excess / (1.0 + bound));
    }
    c
}

/// `(θ/2α)‖ỹ − x‖² ≤ −h`, `h ≤ 0`, and the stopping test that ended each
/// prox solve: `h ≤ 2/(2+τ)·ψ` exactly for gap rows, `h − ψ ≤ abs_tol` for
/// absolute-tolerance rows.
pub fn check_prox_certificates(trace: &Trace, tau: f64) -> Check {
    let mut c = Check::new("prox-certificates");
    if !trace.has_aux {
        return c.incomplete();
    }
    let th = theta(tau);
    let et = eta(tau);
    for r in trace.rows.iter().filter(|r| !r.is_terminal()) {
        if r.y_step_norm.is_nan() || r.alpha_k.is_nan() {
            return c.incomplete();
        }
        let scale = 1.0 + r.h.abs();
        let lhs = th / (2.0 * r.alpha_k) * r.y_step_norm * r.y_step_norm;
        let mut worst = (lhs + r.h - PROX_TOL * scale) / scale;
        worst = worst.max(r.h / scale);
        match r.prox_stop {
            Some(StopReason::DualityGap) => {
                worst = worst.max(if r.h <= et * r.psi { 0.0 } else { (r.h - et * r.psi) / scale });
            }
            Some(StopReason::AbsoluteTolerance) => {
                worst = worst.max((r.h - r.psi - r.abs_tol) / scale);
                if tau > 0.0 {
                    worst = worst.max((r.h.abs() - r.abs_tol) / scale);
                }
            }
            Some(StopReason::MaxInner) | None => {}
        }
        c.record(r.k, worst);
    }
    c
}

/// `Φ_{k+1} ≤ Φ_k + σλ_kΔ_k` up to `1e-12·(1 + |Φ_k|)`, with
/// `0 < λ_k ≤ 1` and at most `max_halvings` reductions.
pub fn check_armijo(trace: &Trace, sigma: f64, max_halvings: usize) -> Check {
    let mut c = Check::new("armijo");
    for (cur, next) in pairs(trace) {
        if cur.lambda_k.is_nan() {
            // stationary exit: no line search was run
            if cur.x_step_norm == 0.0 {
                continue;
            }
            return c.incomplete();
        }
        let scale = 1.0 + cur.phi.abs();
        let mut excess = (next.phi - cur.phi - sigma * cur.lambda_k * cur.delta_k - ARMIJO_TOL * scale) / scale;
        if !(cur.lambda_k > 0.0 && cur.lambda_k <= 1.0) || (trace.has_aux && cur.halvings > max_halvings) {
            excess = excess.max(1.0);
        }
        c.record(cur.k, excess);
    }
    c
}

/// Step-parameter identities, relative `1e-12`.
pub fn check_param_identities(trace: &Trace, info: &RunInfo) -> Check {
    let mut c = Check::new("param-identities");
    let theta_omega = match info.solver {
        SolverKind::I2Piano => theta(info.tau) * info.omega,
        SolverKind::IPilaPractical => 1.0,
        SolverKind::Iista => {
            for r in trace.rows.iter().filter(|r| !r.is_terminal()) {
                let res = (r.alpha_k * r.l_or_gamma - 1.0).abs().max(r.beta_k.abs());
                c.record(r.k, res - IDENTITY_TOL);
            }
            return c;
        }
        SolverKind::IPilaStrict => return Check::not_applicable("param-identities"),
    };
    for r in trace.rows.iter().filter(|r| !r.is_terminal()) {
        if r.alpha_k.is_nan() || r.beta_k.is_nan() || r.l_or_gamma.is_nan() {
            return c.incomplete();
        }
        let p = StepParams { b: f64::NAN, beta: r.beta_k, alpha: r.alpha_k };
        let res = identity_residuals(p, r.l_or_gamma, info.delta, info.gamma, theta_omega);
        let worst = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let beta_hi = 0.5 * (1.0 + theta_omega);
        let range = if r.beta_k >= 0.0 && r.beta_k <= beta_hi { 0.0 } else { 1.0 };
        c.record(r.k, (worst - IDENTITY_TOL).max(range));
    }
    c
}

/// `ψ ≤ h + 1e-10·(1 + |h|)` for the returned pair, and the per-solve weak
/// duality residual recorded by the engine.
pub fn check_duality(trace: &Trace) -> Check {
    let mut c = Check::new("duality-gap");
    for r in trace.rows.iter().filter(|r| !r.is_terminal()) {
        let scale = 1.0 + r.h.abs();
        let mut worst = (r.psi - r.h) / scale - DUALITY_TOL;
        if trace.has_aux && r.duality_residual.is_finite() {
            worst = worst.max(r.duality_residual - DUALITY_TOL);
        }
        c.record(r.k, worst);
    }
    if !trace.has_aux {
        c.verdict = if c.verdict == Verdict::Fail { Verdict::Fail } else { Verdict::Incomplete };
    }
    c
}

/// `Φ_{k+1} ≤ Φ_k` up to `1e-9·(1 + |Φ_k|)`.
pub fn check_monotone_phi(trace: &Trace) -> Check {
    let mut c = Check::new("phi-monotone");
    for w in trace.rows.windows(2) {
        let scale = 1.0 + w[0].phi.abs();
        c.record(w[0].k, (w[1].phi - w[0].phi) / scale - MONOTONE_TOL);
    }
    c
}

/// Solver-specific `(p, k')` for the distance condition.
pub fn h4_constants(trace: &Trace, info: &RunInfo) -> (f64, usize) {
    match info.solver {
        SolverKind::I2Piano => (1.0 / info.gamma.sqrt(), 1),
        _ => {
            let alpha_max = trace.rows.iter().map(|r| r.alpha_k).filter(|a| !a.is_nan()).fold(0.0, f64::max);
            ((2.0 * alpha_max / theta(info.tau)).sqrt(), 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub iterations: usize,
    pub last_f: f64,
    pub last_phi: f64,
    pub sum_d: f64,
    /// Share of `Σ d_k` contributed by the last tenth of the run.
    pub sum_d_tail_share: f64,
    pub min_lambda: f64,
    pub total_inner_iters: usize,
    pub total_backtracks: usize,
    pub last_x_step: f64,
}

pub fn summarize(trace: &Trace) -> Result<Summary> {
    let last = trace.last().ok_or(Error::EmptyTrace)?;
    let iter_rows: Vec<&TraceRow> = trace.rows.iter().filter(|r| !r.is_terminal()).collect();
    let d: Vec<f64> = iter_rows.iter().map(|r| r.d_k).collect();
    let sum_d: f64 = d.iter().sum();
    let tail_start = d.len() - d.len() / 10;
    let tail: f64 = d[tail_start..].iter().sum();
    let min_lambda = iter_rows.iter().map(|r| r.lambda_k).filter(|l| !l.is_nan()).fold(f64::NAN, f64::min);
    Ok(Summary {
        iterations: iter_rows.len(),
        last_f: last.f,
        last_phi: last.phi,
        sum_d,
        sum_d_tail_share: if sum_d > 0.0 { tail / sum_d } else { 0.0 },
        min_lambda,
        total_inner_iters: trace.total_inner_iters(),
        total_backtracks: trace.rows.iter().map(|r| r.backtracks).sum(),
        last_x_step: iter_rows.last().map_or(f64::NAN, |r| r.x_step_norm),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub solver: SolverKind,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl CertReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn complete(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Incomplete)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "solver={}", self.solver);
        let _ = writeln!(s, "verdict={}", if self.passed() { "pass" } else { "fail" });
        for c in &self.checks {
            let _ = writeln!(s, "{}.verdict={}", c.name, c.verdict.as_str());
            let _ = writeln!(s, "{}.checked={}", c.name, c.checked);
            let _ = writeln!(s, "{}.violations={}", c.name, c.violations);
            let _ = writeln!(s, "{}.worst_residual={}", c.name, c.worst_residual);
            let _ = writeln!(s, "{}.worst_k={}", c.name, c.worst_k.map_or("none".to_owned(), |k| k.to_string()));
        }
        let m = &self.summary;
        let _ = writeln!(s, "iterations={}", m.iterations);
        let _ = writeln!(s, "last_f={}", m.last_f);
        let _ = writeln!(s, "last_phi={}", m.last_phi);
        let _ = writeln!(s, "sum_d={}", m.sum_d);
        let _ = writeln!(s, "sum_d_tail_share={}", m.sum_d_tail_share);
        let _ = writeln!(s, "min_lambda={}", m.min_lambda);
        let _ = writeln!(s, "total_inner_iters={}", m.total_inner_iters);
        let _ = writeln!(s, "total_backtracks={}", m.total_backtracks);
        let _ = writeln!(s, "last_x_step={}", m.last_x_step);
        s
    }
}

/// Runs every check that applies to `info.solver`.
pub fn certify(trace: &Trace, info: &RunInfo) -> Result<CertReport> {
    let summary = summarize(trace)?;
    let weight = match info.solver {
        SolverKind::IPilaStrict | SolverKind::IPilaPractical => H1Weight::Armijo { sigma: info.sigma },
        SolverKind::I2Piano | SolverKind::Iista => H1Weight::Unit,
    };
    let (p, k_shift) = h4_constants(trace, info);
    let armijo = match info.solver {
        SolverKind::IPilaStrict | SolverKind::IPilaPractical => check_armijo(trace, info.sigma, info.max_halvings),
        _ => Check::not_applicable("armijo"),
    };
    let checks = vec![
        check_h1(trace, weight),
        check_h4(trace, p, k_shift),
        check_prox_certificates(trace, info.tau),
        armijo,
        check_param_identities(trace, info),
        check_duality(trace),
        check_monotone_phi(trace),
    ];
    Ok(CertReport { solver: info.solver, checks, summary })
}

/// Reads `trace.csv`, `trace_aux.csv` and `run.cfg` from `dir` and certifies.
pub fn certify_dir(dir: &Path) -> Result<CertReport> {
    let trace = Trace::read_csv(dir)?;
    let info = RunInfo::read(&dir.join("run.cfg"))?;
    certify(&trace, &info)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, phi: f64, d: f64) -> TraceRow {
        let mut r = TraceRow::terminal(k, 0.0, phi, phi);
        r.h = -d * d;
        r.psi = r.h;
        r.d_k = d;
        r.alpha_k = 1.0;
        r.beta_k = 0.0;
        r.l_or_gamma = 1.0;
        r.x_step_norm = 0.0;
        r.y_step_norm = 0.0;
        r.prox_stop = Some(StopReason::DualityGap);
        r.duality_residual = 0.0;
        r
    }

    fn trace(rows: Vec<TraceRow>) -> Trace {
        let mut t = Trace::new();
        rows.into_iter().for_each(|r| t.push(r));
        t
    }

    #[test]
    fn constant_trace_passes_h1() {
        let t = trace(vec![row(0, 2.0, 0.0), row(1, 2.0, 0.0), TraceRow::terminal(2, 0.0, 2.0, 2.0)]);
        let c = check_h1(&t, H1Weight::Unit);
        assert_eq!(c.verdict, Verdict::Pass);
        assert!(c.worst_residual <= 0.0);
        assert_eq!(check_h4(&t, 1.0, 0).verdict, Verdict::Pass);
    }

    #[test]
    fn injected_increase_fails_h1_at_that_row() {
        let t = trace(vec![row(0, 2.0, 0.5), row(1, 1.75, 0.1), row(2, 1.9, 0.0), TraceRow::terminal(3, 0.0, 1.9, 1.9)]);
        let c = check_h1(&t, H1Weight::Unit);
        assert_eq!(c.verdict, Verdict::Fail);
        assert_eq!(c.violations, 1);
        assert_eq!(c.worst_k, Some(1));
    }

    #[test]
    fn worked_certificate_row_passes() {
        // h = −1.5, α = 1, τ = 0, ‖ỹ − x‖ = 1: 0.5 ≤ 1.5
        let mut r = row(0, 1.0, 1.5f64.sqrt());
        r.y_step_norm = 1.0;
        let t = trace(vec![r, TraceRow::terminal(1, 0.0, 0.0, 0.0)]);
        assert_eq!(check_prox_certificates(&t, 0.0).verdict, Verdict::Pass);
    }

    #[test]
    fn missing_aux_is_incomplete_not_failed() {
        let mut t = trace(vec![row(0, 2.0, 0.0), TraceRow::terminal(1, 0.0, 2.0, 2.0)]);
        t.has_aux = false;
        assert_eq!(check_prox_certificates(&t, 1.0).verdict, Verdict::Incomplete);
    }

    #[test]
    fn summary_sums_d() {
        let t = trace(vec![row(0, 2.0, 0.25), row(1, 2.0, 0.25)]);
        let s = summarize(&t).unwrap();
        assert_eq!(s.sum_d, 0.5);
        assert!(matches!(summarize(&Trace::new()), Err(Error::EmptyTrace)));
    }

    #[test]
    fn run_info_round_trip() {
        let info = RunInfo {
            solver: SolverKind::IPilaPractical,
            tau: 1e6,
            delta: 0.5,
            gamma: 1e-5,
            omega: 0.95,
            sigma: 1e-4,
            max_halvings: 60,
        };
        assert_eq!(RunInfo::from_kv(&info.to_kv()).unwrap(), info);
    }
}
