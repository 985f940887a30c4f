//! Acceptance suite. Runs every criterion, prints one `[PASS]`/`[FAIL]` line
//! per criterion and exits nonzero if any failed.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use inertiafb::certify::{check_armijo, check_duality, check_prox_certificates, CertReport, Verdict};
use inertiafb::imaging::{gaussian_kernel, tv_term, ConvOperator, FilterBank, GaussianSdFidelity, GradientOp, ImageGrid, LogFilter};
use inertiafb::problem::{
    adjoint_residual, check_gradient, Block, CompositeProblem, IdentityOp, L1Norm, Quadratic, StructuredConvexTerm,
    ZeroFunction,
};
use inertiafb::prox::{solve_inexact_prox, theta, ProxQuery};
use inertiafb::solver::i2piano::{compute_params, identity_residuals};
use inertiafb::solver::SolverKind;
use inertiafb::trace::Trace;
use inertiafb_cli::{expand_solvers, problems, run, run_suite, ProblemKind, RunConfig, RunOutcome};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// A finished run kept for the cross-run criteria.
struct Run {
    label: String,
    solver: SolverKind,
    tau: f64,
    sigma: f64,
    max_halvings: usize,
    outcome: RunOutcome,
}

impl Run {
    fn trace(&self) -> &Trace {
        &self.outcome.trace
    }

    fn report(&self) -> &CertReport {
        &self.outcome.report
    }

    fn is_ipila(&self) -> bool {
        matches!(self.solver, SolverKind::IPilaStrict | SolverKind::IPilaPractical)
    }
}

fn collect(configs: &[RunConfig], prefix: &str) -> Result<Vec<Run>, String> {
    run_suite(configs)
        .into_iter()
        .zip(configs)
        .map(|(r, c)| {
            let outcome = r.map_err(|e| format!("{prefix}/{}: {e}", c.solver))?;
            Ok(Run {
                label: format!("{prefix}/{}", c.solver),
                solver: c.solver,
                tau: c.tau,
                sigma: c.sigma,
                max_halvings: c.max_halvings,
                outcome,
            })
        })
        .collect()
}

fn bench_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig { problem: ProblemKind::ImpulseL1, ..Default::default() };
    cfg.height = 64;
    cfg.width = 64;
    cfg.seed = 2024;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn smoke_config(dir: &Path, seed: u64, dim: usize) -> RunConfig {
    let mut cfg = RunConfig { problem: ProblemKind::SyntheticQuadraticL1, ..Default::default() };
    cfg.seed = seed;
    cfg.dim = dim;
    cfg.max_outer = 5000;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

fn soft(t: f64, thr: f64) -> f64 {
    t.signum() * (t.abs() - thr).max(0.0)
}

// ---- criteria ----

fn c1_prox_oracle() -> Outcome {
    let start = Instant::now();
    let n = 100;
    let lam = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let b: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
        let x: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
        let s: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
        let alpha: f64 = rng.random_range(0.1..2.0);
        let beta: f64 = rng.random_range(0.0..0.9);
        let f0 = Arc::new(Quadratic::isotropic(b.clone(), 1.0));
        let block = Block::new(Arc::new(IdentityOp::new(n)), Arc::new(L1Norm::new(lam)));
        let f1 = StructuredConvexTerm::new(n, vec![block], Arc::new(ZeroFunction)).map_err(|e| e.to_string())?;
        let p = CompositeProblem::new(f0, f1).map_err(|e| e.to_string())?;
        let mut q = ProxQuery::new(x.view(), s.view(), alpha, beta, 0.0);
        q.abs_tol = Some(1e-10);
        let r = solve_inexact_prox(&p, &q, None).map_err(|e| e.to_string())?;
        for i in 0..n {
            let xbar = x[i] - alpha * (x[i] - b[i]) + beta * (x[i] - s[i]);
            worst = worst.max((r.y_tilde[i] - soft(xbar, alpha * lam)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("50 instances, max componentwise error {worst:.2e}, {secs:.2} s");
    if worst <= 1e-6 && secs < 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn check_all(runs: &[&Run], mut f: impl FnMut(&Run) -> inertiafb::certify::Check) -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for r in runs {
        let c = f(r);
        checked += c.checked;
        worst = worst.max(c.worst_residual);
        if c.verdict != Verdict::Pass || c.violations > 0 {
            failures.push(format!("{} ({:?}, {} violations)", r.label, c.verdict, c.violations));
        }
    }
    let detail = format!("{} runs, {checked} rows checked, worst residual {worst:.2e}", runs.len());
    if failures.is_empty() && checked > 0 {
        Ok(detail)
    } else {
        Err(format!("{detail}; failing: {}", failures.join(", ")))
    }
}

fn c4_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_id = 0.0f64;
    let mut worst_theta = 0.0f64;
    for i in 0..1000 {
        let l = 10f64.powf(rng.random_range(-3.0..3.0));
        let gamma = 10f64.powf(rng.random_range(-6.0..0.0));
        let delta = if i % 10 == 0 { gamma } else { gamma + 10f64.powf(rng.random_range(-4.0..1.0)) };
        let tau = if i % 7 == 0 { 0.0 } else { 10f64.powf(rng.random_range(-3.0..8.0)) };
        let omega = if tau == 0.0 && i % 2 == 0 { 1.0 } else { rng.random_range(0.0..1.0) };
        let p = compute_params(l, delta, gamma, tau, omega);
        for r in identity_residuals(p, l, delta, gamma, theta(tau) * omega) {
            worst_id = worst_id.max(r);
        }
        let alt = ((1.0 + 0.5 * tau).sqrt() - (0.5 * tau).sqrt()).powi(2);
        worst_theta = worst_theta.max((theta(tau) - alt).abs());
    }
    let detail = format!("1000 tuples, worst identity residual {worst_id:.2e}, theta mismatch {worst_theta:.2e}");
    if worst_id <= 1e-12 && worst_theta <= 1e-15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c5_h1(bench: &[Run]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for r in bench.iter().filter(|r| r.solver != SolverKind::Iista) {
        let rep = r.report();
        let iters = rep.summary.iterations;
        for name in ["H1", "prox-certificates", "phi-monotone"] {
            let c = rep.check(name).ok_or_else(|| format!("{} lacks {name}", r.label))?;
            if c.verdict != Verdict::Pass || c.violations > 0 || c.checked == 0 {
                ok = false;
                parts.push(format!("{} {name}: {:?} ({} violations)", r.label, c.verdict, c.violations));
            }
        }
        if iters < 2000 {
            ok = false;
            parts.push(format!("{} stopped after {iters} iterations", r.label));
        }
        parts.push(format!("{} {iters} it", r.solver));
    }
    let detail = parts.join(", ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c6_armijo(all: &[&Run]) -> Outcome {
    let ipila: Vec<&Run> = all.iter().copied().filter(|r| r.is_ipila()).collect();
    let base = check_all(&ipila, |r| check_armijo(r.trace(), r.sigma, r.max_halvings))?;
    let mut min_lambda = f64::INFINITY;
    let mut max_halvings = 0;
    for r in &ipila {
        for row in r.trace().rows.iter().filter(|row| !row.is_terminal()) {
            if !row.lambda_k.is_nan() {
                min_lambda = min_lambda.min(row.lambda_k);
            }
            max_halvings = max_halvings.max(row.halvings);
        }
    }
    let detail = format!("{base}, min lambda {min_lambda:e}, max halvings {max_halvings}");
    if min_lambda > 0.0 && max_halvings <= 60 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c7_gradients() -> Outcome {
    let (h, w) = (16, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lf = LogFilter::new(&FilterBank::dct3x3(0.08), h, w).map_err(|e| e.to_string())?;
    let op = ConvOperator::new(gaussian_kernel(5, 1.0).unwrap(), h, w).map_err(|e| e.to_string())?;
    let g = ImageGrid::new(h, w, Array1::from_shape_fn(h * w, |_| rng.random_range(0.0..255.0))).unwrap();
    let sd = GaussianSdFidelity::constant(op, &g, 0.01, 1.0).map_err(|e| e.to_string())?;
    let (mut w_lf, mut w_sd) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let x: Array1<f64> = Array1::from_shape_fn(h * w, |_| rng.random_range(0.0..1.0));
        w_lf = w_lf.max(check_gradient(&lf, x.view(), 1e-6, None).map_err(|e| e.to_string())?.max_rel_error);
        let x: Array1<f64> = Array1::from_shape_fn(h * w, |_| rng.random_range(1.0..255.0));
        let rep = check_gradient(&sd, x.view(), 1e-5, None).map_err(|e| e.to_string())?;
        if !rep.skipped.is_empty() {
            return Err("Gaussian-SD probe left the domain".into());
        }
        w_sd = w_sd.max(rep.max_rel_error);
    }
    let detail = format!("log-filter {w_lf:.2e}, Gaussian-SD {w_sd:.2e} over 20 points each");
    if w_lf <= 1e-4 && w_sd <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_adjoints() -> Outcome {
    let (h, w) = (64, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let blur = ConvOperator::new(gaussian_kernel(5, 1.0).unwrap(), h, w).unwrap();
    let random = ConvOperator::new(Array2::from_shape_fn((7, 5), |_| rng.random_range(-1.0..1.0)), h, w).unwrap();
    let grad = GradientOp::new(h, w);
    let mut worst = 0.0f64;
    for seed in 0..5 {
        worst = worst.max(adjoint_residual(&blur, seed));
        worst = worst.max(adjoint_residual(&random, seed));
        worst = worst.max(adjoint_residual(&grad, seed));
    }
    let est = tv_term(h, w, 1.0).map_err(|e| e.to_string())?.estimate_op_norm_sq(500);
    let detail = format!("worst adjoint residual {worst:.2e}, TV norm^2 estimate {est:.5}");
    if worst <= 1e-12 && est <= 8.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_ordering(bench: &[Run], elapsed: Duration) -> Outcome {
    let f_star = bench.iter().map(|r| r.outcome.final_f).fold(f64::INFINITY, f64::min);
    let get = |s: SolverKind| bench.iter().find(|r| r.solver == s).ok_or(format!("missing {s} run"));
    let (i2, ip, ips, ista) = (
        get(SolverKind::I2Piano)?,
        get(SolverKind::IPilaPractical)?,
        get(SolverKind::IPilaStrict)?,
        get(SolverKind::Iista)?,
    );
    let reach = |r: &Run, gap: f64| r.trace().first_k_below_gap(f_star, gap);
    let inner = |r: &Run, gap: f64| reach(r, gap).map(|k| r.trace().inner_iters_before(k));
    let fmt = |v: Option<usize>| v.map_or("never".to_string(), |k| k.to_string());

    let (in_i2, in_ip) = (inner(i2, 1e-4), inner(ip, 1e-4));
    let (k_i2, k_ip, k_ista) = (reach(i2, 1e-3), reach(ip, 1e-3), reach(ista, 1e-3));
    let beats = |k: Option<usize>| match (k, k_ista) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let inner_ok = match (in_ip, in_i2) {
        (Some(a), Some(b)) => a <= b,
        _ => false,
    };
    let time_ok = elapsed.as_secs_f64() < 600.0;
    let detail = format!(
        "f*={f_star}; inner iters to gap 1e-4: iPila {} vs i2Piano {} (strict iPila {}); \
         outer iters to gap 1e-3: i2Piano {}, iPila {}, iISTA {}; suite {:.0} s",
        fmt(in_ip),
        fmt(in_i2),
        fmt(inner(ips, 1e-4)),
        fmt(k_i2),
        fmt(k_ip),
        fmt(k_ista),
        elapsed.as_secs_f64()
    );
    if inner_ok && beats(k_i2) && beats(k_ip) && time_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c10_iterates(smoke: &[(Run, Array1<f64>)]) -> Outcome {
    let mut worst_step = 0.0f64;
    let mut worst_dist = 0.0f64;
    let mut worst_tail = 0.0f64;
    for (r, xs) in smoke {
        let rows: Vec<_> = r.trace().rows.iter().filter(|row| !row.is_terminal()).collect();
        let min_step = rows.iter().map(|row| row.x_step_norm).fold(f64::INFINITY, f64::min);
        worst_step = worst_step.max(min_step);
        let dist = r.outcome.x.iter().zip(xs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_dist = worst_dist.max(dist);
        // share of Σ d_k contributed by the last tenth of the run
        worst_tail = worst_tail.max(r.report().summary.sum_d_tail_share);
    }
    let detail = format!(
        "{} runs; worst min step {worst_step:.2e}, worst distance to minimizer {worst_dist:.2e}, \
         worst last-tenth share of sum d_k {worst_tail:.2e}",
        smoke.len()
    );
    if worst_step <= 1e-8 && worst_dist <= 1e-6 && worst_tail <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn without_time(path: &Path) -> Result<String, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells[1] = "";
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n"))
}

fn c11_determinism(root: &Path) -> Outcome {
    let mut compared = 0;
    for solver in [SolverKind::I2Piano, SolverKind::IPilaPractical, SolverKind::Iista] {
        let mut dirs = Vec::new();
        for rep in 0..2 {
            let mut cfg = bench_config(&root.join(format!("{solver}-{rep}")));
            cfg.solver = solver;
            cfg.max_outer = 200;
            run(&cfg).map_err(|e| e.to_string())?;
            dirs.push(cfg.out_dir);
        }
        if without_time(&dirs[0].join("trace.csv"))? != without_time(&dirs[1].join("trace.csv"))? {
            return Err(format!("{solver}: trace.csv differs between replays"));
        }
        let aux = |d: &Path| fs::read(d.join("trace_aux.csv")).map_err(|e| e.to_string());
        if aux(&dirs[0])? != aux(&dirs[1])? {
            return Err(format!("{solver}: trace_aux.csv differs between replays"));
        }
        compared += 1;
    }
    Ok(format!("{compared} solvers replayed twice on the 64x64 benchmark, traces identical"))
}

fn report(id: usize, name: &str, verdict: Outcome) -> bool {
    match verdict {
        Ok(d) => {
            println!("[PASS] criterion {id:>2} {name}: {d}");
            true
        }
        Err(d) => {
            println!("[FAIL] criterion {id:>2} {name}: {d}");
            false
        }
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    // `cargo test -- --list` and filters: nothing to enumerate here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let root = tempfile::tempdir().expect("temporary directory");
    let root = root.path();

    let start = Instant::now();
    let bench = collect(
        &expand_solvers(
            &RunConfig { max_outer: inertiafb_cli::run::FSTAR_ITERS, ..bench_config(&root.join("bench")) },
            &SolverKind::ALL,
        ),
        "bench",
    );
    let bench_time = start.elapsed();

    let mut smoke = Vec::new();
    let mut smoke_err = None;
    for (seed, dim) in [(1, 50), (2, 200)] {
        let base = smoke_config(&root.join(format!("smoke-{seed}")), seed, dim);
        let xs = problems::build(&base).ok().and_then(|b| b.minimizer);
        match (collect(&expand_solvers(&base, &SolverKind::ALL), &format!("smoke-{seed}")), xs) {
            (Ok(runs), Some(xs)) => smoke.extend(runs.into_iter().map(|r| (r, xs.clone()))),
            (Err(e), _) => smoke_err = Some(e),
            (_, None) => smoke_err = Some("smoke problem has no closed-form minimizer".into()),
        }
    }

    let bench_ref = bench.as_ref().map_err(Clone::clone);
    let mut all: Vec<&Run> = smoke.iter().map(|(r, _)| r).collect();
    if let Ok(b) = &bench {
        all.extend(b.iter());
    }
    let runs_ok = |v: Outcome| -> Outcome {
        match (&bench_ref, &smoke_err) {
            (Err(e), _) | (_, Some(e)) => Err(format!("run failed: {e}")),
            _ => v,
        }
    };

    let mut pass = true;
    pass &= report(1, "prox-engine oracle equivalence", guarded(c1_prox_oracle));
    pass &= report(
        2,
        "inexactness certificates",
        runs_ok(guarded(|| check_all(&all, |r| check_prox_certificates(r.trace(), r.tau)))),
    );
    pass &= report(3, "weak duality", runs_ok(guarded(|| check_all(&all, |r| check_duality(r.trace())))));
    pass &= report(4, "parameter identities", guarded(c4_identities));
    pass &= report(
        5,
        "H1 certification on 64x64 deblurring",
        guarded(|| bench_ref.clone().and_then(|b| c5_h1(b))),
    );
    pass &= report(6, "Armijo soundness", runs_ok(guarded(|| c6_armijo(&all))));
    pass &= report(7, "gradient checks", guarded(c7_gradients));
    pass &= report(8, "adjoint and operator norm", guarded(c8_adjoints));
    pass &= report(
        9,
        "convergence ordering on impulse benchmark",
        guarded(|| bench_ref.clone().and_then(|b| c9_ordering(b, bench_time))),
    );
    pass &= report(
        10,
        "iterate convergence on smoke problems",
        guarded(|| match &smoke_err {
            Some(e) => Err(e.clone()),
            None => c10_iterates(&smoke),
        }),
    );
    pass &= report(11, "determinism", guarded(|| c11_determinism(&root.join("replay"))));

    if !pass {
        std::process::exit(1);
    }
}
