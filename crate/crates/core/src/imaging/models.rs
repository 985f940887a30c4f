use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Zip};

use super::conv::ConvOperator;
use super::grid::ImageGrid;
use crate::error::{Error, Result};
use crate::problem::{Block, L1Norm, LinearOperator, NonnegIndicator, SmoothFunction, StructuredConvexTerm};

/// `‖Hx − g‖₁ + ι_{≥0}(x)` with the ℓ1 term as a single dual block.
pub fn l1_fidelity_term(h: ConvOperator, g: &ImageGrid) -> Result<StructuredConvexTerm> {
    Error::check_dim(h.output_dim(), g.len())?;
    let block = Block::new(Arc::new(h), Arc::new(L1Norm::shifted(1.0, g.data().to_owned())));
    StructuredConvexTerm::new(g.len(), vec![block], Arc::new(NonnegIndicator))
}

/// Convolution filters with positive weights, plus the overall weight `ρ`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub filters: Vec<(Array2<f64>, f64)>,
    pub rho: f64,
}

impl FilterBank {
    /// The eight non-constant 3×3 DCT-II basis filters, equally weighted.
    /// Stands in for trained filter sets, which are not available here.
    pub fn dct3x3(rho: f64) -> Self {
        let basis = |k: usize, m: usize| {
            let s = if k == 0 { (1.0f64 / 3.0).sqrt() } else { (2.0f64 / 3.0).sqrt() };
            s * (std::f64::consts::PI * (2 * m + 1) as f64 * k as f64 / 6.0).cos()
        };
        let mut filters = Vec::with_capacity(8);
        for p in 0..3 {
            for q in 0..3 {
                if p == 0 && q == 0 {
                    continue;
                }
                let k = Array2::from_shape_fn((3, 3), |(i, j)| basis(p, i) * basis(q, j));
                filters.push((k, 1.0 / 8.0));
            }
        }
        Self { filters, rho }
    }
}

/// `ρ Σ_ℓ θ_ℓ Σ_i log(1 + (K_ℓ x)_i²)`.
pub struct LogFilter {
    ops: Vec<(ConvOperator, f64)>,
    rho: f64,
    dim: usize,
}

impl LogFilter {
    pub fn new(bank: &FilterBank, height: usize, width: usize) -> Result<Self> {
        if bank.filters.is_empty() {
            return Err(Error::InvalidConfig("filter bank is empty".into()));
        }
        if !(bank.rho > 0.0) || bank.filters.iter().any(|(_, t)| !(*t > 0.0)) {
            return Err(Error::InvalidConfig("filter weights and rho must be positive".into()));
        }
        let ops = bank
            .filters
            .iter()
            .map(|(k, t)| Ok((ConvOperator::new(k.clone(), height, width)?, *t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ops, rho: bank.rho, dim: height * width })
    }
}

impl SmoothFunction for LogFilter {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let total: f64 = self
            .ops
            .iter()
            .map(|(op, t)| t * op.apply(x).iter().map(|v| (v * v).ln_1p()).sum::<f64>())
            .sum();
        self.rho * total
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Error::check_dim(self.dim, x.len())?;
        let mut g = Array1::zeros(self.dim);
        for (op, t) in &self.ops {
            let kx = op.apply(x);
            let inner = kx.mapv(|v| 2.0 * v / (1.0 + v * v));
            g.scaled_add(self.rho * t, &op.adjoint(inner.view()));
        }
        Ok(g)
    }

    fn value_change(&self, x: ArrayView1<f64>, d: ArrayView1<f64>) -> f64 {
        // log(1+(t+e)²) − log(1+t²) = log1p((2t+e)e / (1+t²))
        let total: f64 = self
            .ops
            .iter()
            .map(|(op, t)| {
                let (kx, kd) = (op.apply(x), op.apply(d));
                let s: f64 = Zip::from(&kx).and(&kd).fold(0.0, |acc, &a, &e| acc + ((2.0 * a + e) * e / (1.0 + a * a)).ln_1p());
                t * s
            })
            .sum();
        self.rho * total
    }
}

/// `½ Σ ((Hx)_i − g_i)² / (a_i (Hx)_i + c_i) + log(a_i (Hx)_i + c_i)`,
/// the discrepancy for signal-dependent Gaussian noise. Defined where every
/// `a_i (Hx)_i + c_i > 0`.
pub struct GaussianSdFidelity {
    h: ConvOperator,
    g: Array1<f64>,
    a: Array1<f64>,
    c: Array1<f64>,
}

impl GaussianSdFidelity {
    pub fn new(h: ConvOperator, g: &ImageGrid, a: Array1<f64>, c: Array1<f64>) -> Result<Self> {
        let n = h.output_dim();
        Error::check_dim(n, g.len())?;
        Error::check_dim(n, a.len())?;
        Error::check_dim(n, c.len())?;
        if a.iter().chain(c.iter()).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig("noise parameters a and c must be positive".into()));
        }
        Ok(Self { h, g: g.data().to_owned(), a, c })
    }

    pub fn constant(h: ConvOperator, g: &ImageGrid, a: f64, c: f64) -> Result<Self> {
        let n = g.len();
        Self::new(h, g, Array1::from_elem(n, a), Array1::from_elem(n, c))
    }

    fn denominators(&self, t: &Array1<f64>) -> Option<Array1<f64>> {
        let den = Zip::from(t).and(&self.a).and(&self.c).map_collect(|&t, &a, &c| a * t + c);
        den.iter().all(|&d| d > 0.0).then_some(den)
    }
}

impl SmoothFunction for GaussianSdFidelity {
    fn dim(&self) -> usize {
        self.h.input_dim()
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let t = self.h.apply(x);
        let Some(den) = self.denominators(&t) else {
            return f64::INFINITY;
        };
        let mut acc = 0.0;
        Zip::from(&t).and(&self.g).and(&den).for_each(|&t, &g, &d| {
            acc += 0.5 * (t - g) * (t - g) / d + d.ln();
        });
        acc
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Error::check_dim(self.dim(), x.len())?;
        let t = self.h.apply(x);
        let den = self.denominators(&t).ok_or(Error::OutsideDomain("the Gaussian-SD fidelity"))?;
        let mut dt = Array1::zeros(t.len());
        Zip::from(&mut dt).and(&t).and(&self.g).and(&self.a).and(&den).for_each(|o, &t, &g, &a, &d| {
            let r = t - g;
            *o = r / d - 0.5 * a * r * r / (d * d) + a / d;
        });
        Ok(self.h.adjoint(dt.view()))
    }

    fn value_change(&self, x: ArrayView1<f64>, e: ArrayView1<f64>) -> f64 {
        let t = self.h.apply(x);
        let te = self.h.apply(e);
        let Some(den) = self.denominators(&t) else {
            return f64::NAN;
        };
        let mut acc = 0.0;
        let mut outside = false;
        Zip::from(&t).and(&te).and(&self.g).and(&self.a).and(&den).for_each(|&t, &e, &g, &a, &d| {
            let dn = d + a * e;
            if dn <= 0.0 {
                outside = true;
                return;
            }
            let r = t - g;
            // (r+e)²/dn − r²/d over a common denominator
            acc += 0.5 * (2.0 * r * e * d + e * e * d - r * r * a * e) / (d * dn) + (a * e / d).ln_1p();
        });
        if outside {
            f64::INFINITY
        } else {
            acc
        }
    }
}
