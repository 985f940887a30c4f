use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inertiafb::certify::certify_dir;
use inertiafb::solver::SolverKind;
use inertiafb_cli::run::{read_fstar, FSTAR_ITERS};
use inertiafb_cli::{estimate_fstar, expand_solvers, run, run_suite, CliError, RunConfig};

/// Inertial inexact forward-backward solvers on deblurring and synthetic problems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write trace, report, summary and images.
    Run(ConfigArgs),
    /// Run several solvers on the same problem concurrently
    /// (INERTIAFB_THREADS caps the thread count).
    Suite {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated solver list; defaults to all four.
        #[arg(long)]
        solvers: Option<String>,
        /// File holding f*, used for the rel_gap column.
        #[arg(long)]
        fstar_file: Option<PathBuf>,
    },
    /// Estimate f* as the smallest final objective over long runs.
    Fstar {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        solvers: Option<String>,
        /// Outer iterations per solver.
        #[arg(long, default_value_t = FSTAR_ITERS)]
        iters: usize,
    },
    /// Re-check a finished run directory (exit 4 on failure).
    Certify { dir: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` pairs, applied after the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        Ok(cfg)
    }
}

fn parse_solvers(list: Option<&str>) -> Result<Vec<SolverKind>, CliError> {
    match list {
        None => Ok(SolverKind::ALL.to_vec()),
        Some(s) => s
            .split(',')
            .map(|t| SolverKind::parse(t.trim()).ok_or_else(|| CliError::Config(format!("unknown solver {t:?}"))))
            .collect(),
    }
}

fn print_summary(out: &inertiafb_cli::RunOutcome) {
    let line: Vec<String> = out.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{}", line.join(" "));
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let out = run(&args.load()?)?;
            print_summary(&out);
        }
        Command::Suite { cfg, solvers, fstar_file } => {
            let mut base = cfg.load()?;
            if let Some(p) = fstar_file {
                base.f_star = Some(read_fstar(&p)?);
            }
            let configs = expand_solvers(&base, &parse_solvers(solvers.as_deref())?);
            let mut first_err = None;
            for r in run_suite(&configs) {
                match r {
                    Ok(out) => print_summary(&out),
                    Err(e) => {
                        eprintln!("error: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::Fstar { cfg, solvers, iters } => {
            let mut base = cfg.load()?;
            base.max_outer = iters;
            let configs = expand_solvers(&base, &parse_solvers(solvers.as_deref())?);
            let f = estimate_fstar(&configs, Some(&base.out_dir))?;
            println!("{f}");
        }
        Command::Certify { dir } => {
            let report = certify_dir(&dir)?;
            print!("{}", report.to_kv());
            if !report.passed() {
                return Err(CliError::Certification);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
