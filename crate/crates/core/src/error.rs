use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point lies outside the domain of {0}")]
    OutsideDomain(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("inexact prox did not converge within {iters} dual iterations (h = {h}, psi = {psi})")]
    ProxNotConverged { iters: usize, h: f64, psi: f64 },

    #[error("backtracking on L exceeded the admissible bound: L = {l} > {bound}")]
    BacktrackingFailed { l: f64, bound: f64 },

    #[error("Armijo line search failed after {halvings} reductions (delta = {delta})")]
    LineSearchFailed { halvings: usize, delta: f64 },

    #[error("prox engine returned h = {0} > 0")]
    PositiveH(f64),

    #[error("kernel {kh}x{kw} does not fit image {h}x{w}")]
    KernelTooLarge { kh: usize, kw: usize, h: usize, w: usize },

    #[error("empty trace")]
    EmptyTrace,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
