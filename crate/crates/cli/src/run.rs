use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use inertiafb::certify::{certify, CertReport, RunInfo};
use inertiafb::imaging::io::{write_pgm, write_raw};
use inertiafb::imaging::psnr;
use inertiafb::linalg;
use inertiafb::problem::CompositeProblem;
use inertiafb::solver::ipila::IPilaVariant;
use inertiafb::solver::{i2piano, iista, ipila, SolveOutput, SolverKind};
use inertiafb::trace::{relative_gap, Trace, TraceRow, TraceWriter};
use ndarray::{Array1, ArrayView1};

use crate::config::RunConfig;
use crate::problems::{build, BuiltProblem};
use crate::CliError;

/// Caps the number of concurrent runs in [`run_suite`].
pub const THREADS_ENV: &str = "INERTIAFB_THREADS";

/// Default outer iteration count for f* estimation.
pub const FSTAR_ITERS: usize = 20_000;

pub struct RunOutcome {
    pub x: Array1<f64>,
    pub trace: Trace,
    pub converged: bool,
    pub report: CertReport,
    pub summary: BTreeMap<String, String>,
    pub final_f: f64,
}

pub fn run_info(cfg: &RunConfig) -> RunInfo {
    RunInfo {
        solver: cfg.solver,
        tau: cfg.tau,
        delta: cfg.delta,
        gamma: cfg.gamma,
        omega: cfg.omega,
        sigma: cfg.sigma,
        max_halvings: cfg.max_halvings,
    }
}

/// Dispatches to the configured solver.
pub fn solve(
    cfg: &RunConfig,
    problem: &CompositeProblem,
    x0: ArrayView1<f64>,
    observer: &mut dyn FnMut(&TraceRow),
) -> inertiafb::Result<SolveOutput> {
    match cfg.solver {
        SolverKind::I2Piano => i2piano::solve_with(problem, x0, &cfg.i2piano(), observer),
        SolverKind::IPilaStrict => ipila::solve_with(problem, x0, None, &cfg.ipila(IPilaVariant::Strict), observer),
        SolverKind::IPilaPractical => {
            ipila::solve_with(problem, x0, None, &cfg.ipila(IPilaVariant::Practical), observer)
        }
        SolverKind::Iista => iista::solve_with(problem, x0, &cfg.iista(), observer),
    }
}

/// Builds the problem, solves it and writes `trace.csv`, `trace_aux.csv`,
/// `config.cfg`, `run.cfg`, `report.txt`, `summary.txt` and, for imaging
/// problems, the restored, observed and clean images.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let built = build(cfg)?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    fs::write(dir.join("config.cfg"), cfg.to_kv())?;

    let mut writer = TraceWriter::create(dir, cfg.f_star)?;
    let mut write_err = None;
    let out = {
        let mut observer = |row: &TraceRow| {
            if write_err.is_none() {
                if let Err(e) = writer.write_row(row) {
                    write_err = Some(e);
                }
            }
        };
        solve(cfg, &built.problem, built.x0.view(), &mut observer).map_err(CliError::Solver)?
    };
    if let Some(e) = write_err {
        return Err(e.into());
    }
    writer.finish()?;

    let info = run_info(cfg);
    info.write(&dir.join("run.cfg"))?;
    let report = certify(&out.trace, &info)?;
    fs::write(dir.join("report.txt"), report.to_kv())?;

    let final_f = out.trace.last().map(|r| r.f).unwrap_or(f64::NAN);
    let summary = summarize(cfg, &built, &out, &report, final_f, dir)?;
    let text: String = summary.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(dir.join("summary.txt"), text)?;

    Ok(RunOutcome { x: out.x, trace: out.trace, converged: out.converged, report, summary, final_f })
}

fn summarize(
    cfg: &RunConfig,
    built: &BuiltProblem,
    out: &SolveOutput,
    report: &CertReport,
    final_f: f64,
    dir: &Path,
) -> Result<BTreeMap<String, String>, CliError> {
    let mut s = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        s.insert(k.to_owned(), v);
    };
    put("problem", cfg.problem.as_str().into());
    put("solver", cfg.solver.as_str().into());
    put("iterations", report.summary.iterations.to_string());
    put("converged", out.converged.to_string());
    put("final_f", final_f.to_string());
    put("final_phi", report.summary.last_phi.to_string());
    put("total_inner_iters", report.summary.total_inner_iters.to_string());
    put("total_backtracks", report.summary.total_backtracks.to_string());
    put("certified", report.passed().to_string());
    if let Some(fs) = cfg.f_star {
        put("f_star", fs.to_string());
        put("rel_gap", relative_gap(final_f, fs).to_string());
    }
    if let (Some(xs), Some(fm)) = (&built.minimizer, built.f_min) {
        put("f_min", fm.to_string());
        put("dist_to_minimizer", linalg::dist(out.x.view(), xs.view()).to_string());
    }
    if let (Some(truth), Some(obs)) = (&built.truth, &built.observed) {
        let peak = cfg.peak();
        let restored = truth.with_data(out.x.clone())?;
        put("psnr_observed", psnr(obs, truth, peak)?.to_string());
        put("psnr_restored", psnr(&restored, truth, peak)?.to_string());
        write_pgm(&dir.join("restored.pgm"), &restored, peak)?;
        write_raw(&dir.join("restored.raw"), &restored)?;
        write_pgm(&dir.join("observed.pgm"), obs, peak)?;
        write_pgm(&dir.join("clean.pgm"), truth, peak)?;
    }
    Ok(s)
}

/// Worker count: `INERTIAFB_THREADS` if set, else the available cores,
/// never more than `jobs`.
pub fn suite_threads(jobs: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.min(jobs).max(1)
}

/// Runs independent configurations concurrently, one thread per run.
/// Results come back in input order.
pub fn run_suite(configs: &[RunConfig]) -> Vec<Result<RunOutcome, CliError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunOutcome, CliError>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..suite_threads(configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                *slots[i].lock().unwrap() = Some(run(cfg));
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot is filled")).collect()
}

/// One configuration per solver, each writing to `out_dir/<solver>`.
pub fn expand_solvers(base: &RunConfig, solvers: &[SolverKind]) -> Vec<RunConfig> {
    solvers
        .iter()
        .map(|&s| {
            let mut c = base.clone();
            c.solver = s;
            c.out_dir = base.out_dir.join(s.as_str());
            c
        })
        .collect()
}

/// Smallest final objective over the given runs; written to
/// `out_dir/fstar.txt` when `out_dir` is given.
pub fn estimate_fstar(configs: &[RunConfig], out_dir: Option<&Path>) -> Result<f64, CliError> {
    if configs.is_empty() {
        return Err(CliError::Config("f* estimation needs at least one configuration".into()));
    }
    let mut best = f64::INFINITY;
    for r in run_suite(configs) {
        best = best.min(r?.final_f);
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("fstar.txt"), format!("{best}\n"))?;
    }
    Ok(best)
}

pub fn read_fstar(path: &Path) -> Result<f64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    text.trim().parse().map_err(|_| CliError::Config(format!("{}: not a number", path.display())))
}
