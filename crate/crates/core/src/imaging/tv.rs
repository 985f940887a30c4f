use std::sync::Arc;

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::problem::{Block, GroupL2Norm, LinearOperator, NonnegIndicator, StructuredConvexTerm};

/// Classical bound on `‖∇‖²` for the 2-D forward-difference gradient.
pub const GRADIENT_NORM_SQ_BOUND: f64 = 8.0;

/// Forward differences with Neumann boundary (the last difference in each
/// direction is zero). Output is component-major: the `n` vertical
/// differences, then the `n` horizontal ones.
#[derive(Debug, Clone, Copy)]
pub struct GradientOp {
    height: usize,
    width: usize,
}

impl GradientOp {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }
}

impl LinearOperator for GradientOp {
    fn input_dim(&self) -> usize {
        self.height * self.width
    }

    fn output_dim(&self) -> usize {
        2 * self.height * self.width
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        let mut out = Array1::zeros(2 * n);
        for i in 0..h {
            for j in 0..w {
                let p = i * w + j;
                if i + 1 < h {
                    out[p] = x[p + w] - x[p];
                }
                if j + 1 < w {
                    out[n + p] = x[p + 1] - x[p];
                }
            }
        }
        out
    }

    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        let mut out = Array1::zeros(n);
        for i in 0..h {
            for j in 0..w {
                let p = i * w + j;
                if i + 1 < h {
                    out[p + w] += y[p];
                    out[p] -= y[p];
                }
                if j + 1 < w {
                    out[p + 1] += y[n + p];
                    out[p] -= y[n + p];
                }
            }
        }
        out
    }
}

/// `ρ Σ_i ‖∇_i x‖ + ι_{≥0}(x)` on an `height × width` image.
pub fn tv_term(height: usize, width: usize, rho: f64) -> Result<StructuredConvexTerm> {
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    let n = height * width;
    let block = Block::new(Arc::new(GradientOp::new(height, width)), Arc::new(GroupL2Norm::new(rho, n, 2)));
    Ok(StructuredConvexTerm::new(n, vec![block], Arc::new(NonnegIndicator))?.with_op_norm_sq_bound(GRADIENT_NORM_SQ_BOUND))
}
