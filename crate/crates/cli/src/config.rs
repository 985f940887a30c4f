use std::path::{Path, PathBuf};

use inertiafb::certify::parse_kv;
use inertiafb::solver::i2piano::I2PianoConfig;
use inertiafb::solver::iista::IistaConfig;
use inertiafb::solver::ipila::{IPilaConfig, IPilaVariant};
use inertiafb::solver::{ProxSettings, SolverKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    ImpulseL1,
    GaussianSdTv,
    SyntheticQuadraticL1,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ImpulseL1 => "impulse-l1",
            Self::GaussianSdTv => "gaussian-sd-tv",
            Self::SyntheticQuadraticL1 => "synthetic-quadratic-l1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "impulse-l1" => Some(Self::ImpulseL1),
            "gaussian-sd-tv" => Some(Self::GaussianSdTv),
            "synthetic-quadratic-l1" => Some(Self::SyntheticQuadraticL1),
            _ => None,
        }
    }
}

/// Everything a single run needs. Unset problem-dependent values are filled
/// in by [`RunConfig::peak`] and [`RunConfig::rho`].
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub solver: SolverKind,
    pub out_dir: PathBuf,
    pub f_star: Option<f64>,
    pub seed: u64,

    // imaging problems
    pub image: Option<PathBuf>,
    pub height: usize,
    pub width: usize,
    pub blur_size: usize,
    pub blur_sigma: f64,
    pub noise_fraction: f64,
    pub noise_a: f64,
    pub noise_c: f64,
    pub peak: Option<f64>,
    pub rho: Option<f64>,

    // synthetic problem
    pub dim: usize,
    pub lambda: f64,

    // solvers
    pub max_outer: usize,
    pub stop_tol: f64,
    pub tau: f64,
    pub l0: f64,
    pub eta: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub delta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub adaptive_decrease: bool,
    pub sigma: f64,
    pub ls_shrink: f64,
    pub max_halvings: usize,
    pub alpha: f64,
    pub beta: f64,
    pub max_inner: usize,
    pub abs_tol: Option<f64>,
    pub allow_unconverged: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let i2 = I2PianoConfig::default();
        let ip = IPilaConfig::default();
        let prox = ProxSettings::default();
        Self {
            problem: ProblemKind::SyntheticQuadraticL1,
            solver: SolverKind::I2Piano,
            out_dir: PathBuf::from("out"),
            f_star: None,
            seed: 0,
            image: None,
            height: 64,
            width: 64,
            blur_size: 5,
            blur_sigma: 1.0,
            noise_fraction: 0.15,
            noise_a: 0.01,
            noise_c: 1.0,
            peak: None,
            rho: None,
            dim: 50,
            lambda: 0.3,
            max_outer: i2.max_outer,
            stop_tol: i2.stop_tol,
            tau: i2.tau,
            l0: i2.l0,
            eta: i2.eta,
            l_min: i2.l_min,
            l_max: i2.l_max,
            delta: i2.delta,
            gamma: i2.gamma,
            omega: i2.omega,
            adaptive_decrease: i2.adaptive_decrease,
            sigma: ip.sigma,
            ls_shrink: ip.ls_shrink,
            max_halvings: ip.max_halvings,
            alpha: ip.alpha,
            beta: ip.beta,
            max_inner: prox.max_inner,
            abs_tol: prox.abs_tol,
            allow_unconverged: prox.allow_unconverged,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_opt_f64(key: &str, value: &str) -> Result<Option<f64>, CliError> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("bad value for {key}: {value:?}"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting. `size` sets both image dimensions.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        match key.as_str() {
            "problem" => {
                self.problem = ProblemKind::parse(value)
                    .ok_or_else(|| CliError::Config(format!("unknown problem {value:?}")))?
            }
            "solver" => {
                self.solver = SolverKind::parse(value)
                    .ok_or_else(|| CliError::Config(format!("unknown solver {value:?}")))?
            }
            "out_dir" | "out" => self.out_dir = PathBuf::from(value),
            "f_star" => self.f_star = parse_opt_f64(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "image" => self.image = (!value.is_empty()).then(|| PathBuf::from(value)),
            "size" => {
                self.height = parse_num(&key, value)?;
                self.width = self.height;
            }
            "height" => self.height = parse_num(&key, value)?,
            "width" => self.width = parse_num(&key, value)?,
            "blur_size" => self.blur_size = parse_num(&key, value)?,
            "blur_sigma" => self.blur_sigma = parse_num(&key, value)?,
            "noise_fraction" => self.noise_fraction = parse_num(&key, value)?,
            "noise_a" => self.noise_a = parse_num(&key, value)?,
            "noise_c" => self.noise_c = parse_num(&key, value)?,
            "peak" => self.peak = parse_opt_f64(&key, value)?,
            "rho" => self.rho = parse_opt_f64(&key, value)?,
            "dim" => self.dim = parse_num(&key, value)?,
            "lambda" => self.lambda = parse_num(&key, value)?,
            "max_outer" => self.max_outer = parse_num(&key, value)?,
            "stop_tol" => self.stop_tol = parse_num(&key, value)?,
            "tau" => self.tau = parse_num(&key, value)?,
            "l0" => self.l0 = parse_num(&key, value)?,
            "eta" => self.eta = parse_num(&key, value)?,
            "l_min" => self.l_min = parse_num(&key, value)?,
            "l_max" => self.l_max = parse_num(&key, value)?,
            "delta" => self.delta = parse_num(&key, value)?,
            "gamma" => self.gamma = parse_num(&key, value)?,
            "omega" => self.omega = parse_num(&key, value)?,
            "adaptive_decrease" => self.adaptive_decrease = parse_bool(&key, value)?,
            "sigma" => self.sigma = parse_num(&key, value)?,
            "ls_shrink" => self.ls_shrink = parse_num(&key, value)?,
            "max_halvings" => self.max_halvings = parse_num(&key, value)?,
            "alpha" => self.alpha = parse_num(&key, value)?,
            "beta" => self.beta = parse_num(&key, value)?,
            "max_inner" => self.max_inner = parse_num(&key, value)?,
            "abs_tol" => self.abs_tol = parse_opt_f64(&key, value)?,
            "allow_unconverged" => self.allow_unconverged = parse_bool(&key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Settings from `key=value` text, applied over the defaults.
    pub fn from_kv(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn apply_kv(&mut self, text: &str) -> Result<(), CliError> {
        let map = parse_kv(text).map_err(|e| CliError::Config(e.to_string()))?;
        for (k, v) in &map {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_kv(&text)
    }

    /// Applies `--key value` (or `--key=value`) pairs.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, args: &[S]) -> Result<(), CliError> {
        let mut it = args.iter().map(|s| s.as_ref());
        while let Some(arg) = it.next() {
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| CliError::Config(format!("expected --key, got {arg:?}")))?;
            if let Some((k, v)) = key.split_once('=') {
                self.set(k, v)?;
            } else {
                let v = it.next().ok_or_else(|| CliError::Config(format!("--{key} needs a value")))?;
                self.set(key, v)?;
            }
        }
        Ok(())
    }

    /// Pixel range; impulse data live in `[0, 1]`, the Gaussian-SD model is
    /// calibrated for 8-bit intensities.
    pub fn peak(&self) -> f64 {
        self.peak.unwrap_or(match self.problem {
            ProblemKind::GaussianSdTv => 255.0,
            _ => 1.0,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(match self.problem {
            ProblemKind::GaussianSdTv => 0.5,
            _ => 0.08,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.image {
            if !p.is_file() {
                return Err(CliError::Config(format!("image file not found: {}", p.display())));
            }
        }
        if self.height == 0 || self.width == 0 || self.dim == 0 {
            return Err(CliError::Config("problem dimensions must be positive".into()));
        }
        self.i2piano().validate().map_err(cfg_err)?;
        self.ipila(IPilaVariant::Strict).validate().map_err(cfg_err)?;
        self.ipila(IPilaVariant::Practical).validate().map_err(cfg_err)?;
        self.iista().validate().map_err(cfg_err)?;
        Ok(())
    }

    pub fn prox(&self) -> ProxSettings {
        ProxSettings { max_inner: self.max_inner, abs_tol: self.abs_tol, allow_unconverged: self.allow_unconverged }
    }

    pub fn i2piano(&self) -> I2PianoConfig {
        I2PianoConfig {
            delta: self.delta,
            gamma: self.gamma,
            eta: self.eta,
            l_min: self.l_min,
            l_max: self.l_max,
            tau: self.tau,
            omega: self.omega,
            l0: self.l0,
            max_outer: self.max_outer,
            stop_tol: self.stop_tol,
            adaptive_decrease: self.adaptive_decrease,
            prox: self.prox(),
        }
    }

    pub fn ipila(&self, variant: IPilaVariant) -> IPilaConfig {
        IPilaConfig {
            variant,
            sigma: self.sigma,
            ls_shrink: self.ls_shrink,
            max_halvings: self.max_halvings,
            tau: self.tau,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            eta: self.eta,
            l0: self.l0,
            l_max: self.l_max,
            max_outer: self.max_outer,
            stop_tol: self.stop_tol,
            prox: self.prox(),
            ..IPilaConfig::default()
        }
    }

    pub fn iista(&self) -> IistaConfig {
        IistaConfig {
            l0: self.l0,
            eta: self.eta,
            l_min: self.l_min,
            l_max: self.l_max,
            tau: self.tau,
            max_outer: self.max_outer,
            stop_tol: self.stop_tol,
            prox: self.prox(),
        }
    }

    /// The effective configuration as `key=value` text, replayable with
    /// [`RunConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "none".into());
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        put("problem", self.problem.as_str().into());
        put("solver", self.solver.as_str().into());
        put("out_dir", self.out_dir.display().to_string());
        put("f_star", opt(self.f_star));
        put("seed", self.seed.to_string());
        put("image", self.image.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("height", self.height.to_string());
        put("width", self.width.to_string());
        put("blur_size", self.blur_size.to_string());
        put("blur_sigma", self.blur_sigma.to_string());
        put("noise_fraction", self.noise_fraction.to_string());
        put("noise_a", self.noise_a.to_string());
        put("noise_c", self.noise_c.to_string());
        put("peak", self.peak().to_string());
        put("rho", self.rho().to_string());
        put("dim", self.dim.to_string());
        put("lambda", self.lambda.to_string());
        put("max_outer", self.max_outer.to_string());
        put("stop_tol", self.stop_tol.to_string());
        put("tau", self.tau.to_string());
        put("l0", self.l0.to_string());
        put("eta", self.eta.to_string());
        put("l_min", self.l_min.to_string());
        put("l_max", self.l_max.to_string());
        put("delta", self.delta.to_string());
        put("gamma", self.gamma.to_string());
        put("omega", self.omega.to_string());
        put("adaptive_decrease", self.adaptive_decrease.to_string());
        put("sigma", self.sigma.to_string());
        put("ls_shrink", self.ls_shrink.to_string());
        put("max_halvings", self.max_halvings.to_string());
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        put("max_inner", self.max_inner.to_string());
        put("abs_tol", opt(self.abs_tol));
        put("allow_unconverged", self.allow_unconverged.to_string());
        s
    }
}

fn cfg_err(e: inertiafb::Error) -> CliError {
    CliError::Config(e.to_string())
}
