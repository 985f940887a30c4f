use std::sync::Arc;

use inertiafb::imaging::io::read_pgm;
use inertiafb::imaging::{
    gaussian_kernel, impulse_noise, l1_fidelity_term, phantom, signal_dependent_noise, tv_term, ConvOperator,
    FilterBank, GaussianSdFidelity, ImageGrid, LogFilter,
};
use inertiafb::problem::{Block, CompositeProblem, IdentityOp, L1Norm, LinearOperator, Quadratic, StructuredConvexTerm, ZeroFunction};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ProblemKind, RunConfig};
use crate::CliError;

/// A problem instance plus whatever ground truth is known about it.
pub struct BuiltProblem {
    pub problem: CompositeProblem,
    pub x0: Array1<f64>,
    /// Clean image and noisy data, for the imaging problems.
    pub truth: Option<ImageGrid>,
    pub observed: Option<ImageGrid>,
    /// Closed-form minimizer and minimum, for the synthetic problem.
    pub minimizer: Option<Array1<f64>>,
    pub f_min: Option<f64>,
}

pub fn build(cfg: &RunConfig) -> Result<BuiltProblem, CliError> {
    match cfg.problem {
        ProblemKind::ImpulseL1 => impulse_l1(cfg),
        ProblemKind::GaussianSdTv => gaussian_sd_tv(cfg),
        ProblemKind::SyntheticQuadraticL1 => synthetic(cfg),
    }
}

fn clean_image(cfg: &RunConfig) -> Result<ImageGrid, CliError> {
    match &cfg.image {
        Some(path) => read_pgm(path, cfg.peak()).map_err(|e| CliError::Config(e.to_string())),
        None => Ok(phantom(cfg.height, cfg.width, cfg.peak())),
    }
}

fn blur(cfg: &RunConfig, img: &ImageGrid) -> Result<ConvOperator, CliError> {
    let k = gaussian_kernel(cfg.blur_size, cfg.blur_sigma).map_err(|e| CliError::Config(e.to_string()))?;
    ConvOperator::new(k, img.height(), img.width()).map_err(|e| CliError::Config(e.to_string()))
}

fn impulse_l1(cfg: &RunConfig) -> Result<BuiltProblem, CliError> {
    let truth = clean_image(cfg)?;
    let h = blur(cfg, &truth)?;
    let blurred = truth.with_data(h.apply(truth.data()))?;
    let g = impulse_noise(&blurred, cfg.noise_fraction, cfg.peak(), cfg.seed)?;
    let f0 = LogFilter::new(&FilterBank::dct3x3(cfg.rho()), truth.height(), truth.width())?;
    let f1 = l1_fidelity_term(h, &g)?;
    let problem = CompositeProblem::new(Arc::new(f0), f1)?;
    Ok(BuiltProblem {
        problem,
        x0: g.data().to_owned(),
        truth: Some(truth),
        observed: Some(g),
        minimizer: None,
        f_min: None,
    })
}

fn gaussian_sd_tv(cfg: &RunConfig) -> Result<BuiltProblem, CliError> {
    let truth = clean_image(cfg)?;
    let h = blur(cfg, &truth)?;
    let blurred = truth.with_data(h.apply(truth.data()))?;
    let g = signal_dependent_noise(&blurred, cfg.noise_a, cfg.noise_c, cfg.seed)?;
    let f0 = GaussianSdFidelity::constant(h, &g, cfg.noise_a, cfg.noise_c)?;
    let f1 = tv_term(truth.height(), truth.width(), cfg.rho())?;
    let problem = CompositeProblem::new(Arc::new(f0), f1)?;
    Ok(BuiltProblem {
        problem,
        x0: g.data().mapv(|v| v.max(0.0)),
        truth: Some(truth),
        observed: Some(g),
        minimizer: None,
        f_min: None,
    })
}

/// `½ Σ d_i (x_i − b_i)² + λ‖x‖₁` with the ℓ1 term handled by the dual
/// engine. The minimizer is `soft(b_i, λ/d_i)`.
fn synthetic(cfg: &RunConfig) -> Result<BuiltProblem, CliError> {
    let n = cfg.dim;
    let lam = cfg.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(1.0..4.0));
    let b: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
    let xs = Array1::from_shape_fn(n, |i| b[i].signum() * (b[i].abs() - lam / d[i]).max(0.0));
    let f_min: f64 = (0..n).map(|i| 0.5 * d[i] * (xs[i] - b[i]).powi(2) + lam * xs[i].abs()).sum();
    let f0 = Quadratic::new(d, b.clone())?;
    let block = Block::new(Arc::new(IdentityOp::new(n)), Arc::new(L1Norm::new(lam)));
    let f1 = StructuredConvexTerm::new(n, vec![block], Arc::new(ZeroFunction))?.with_op_norm_sq_bound(1.0);
    let problem = CompositeProblem::new(Arc::new(f0), f1)?;
    Ok(BuiltProblem { problem, x0: b, truth: None, observed: None, minimizer: Some(xs), f_min: Some(f_min) })
}
