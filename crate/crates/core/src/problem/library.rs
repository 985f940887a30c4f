use ndarray::{Array1, Array2, ArrayView1, Zip};

use super::{LinearOperator, ProxFunction, SmoothFunction};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative slack when testing membership in the bounded domains of
/// conjugates. Moreau's identity reproduces a boundary point only up to a
/// few ulps, so an exact comparison would reject its own projections.
pub(crate) const CONJ_MEMBERSHIP_TOL: f64 = 1e-12;

fn soft(t: f64, thr: f64) -> f64 {
    if t > thr {
        t - thr
    } else if t < -thr {
        t + thr
    } else {
        0.0
    }
}

/// `g ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFunction;

impl ProxFunction for ZeroFunction {
    fn value(&self, _u: ArrayView1<f64>) -> f64 {
        0.0
    }
    fn prox(&self, u: ArrayView1<f64>, _step: f64) -> Array1<f64> {
        u.to_owned()
    }
    fn conjugate(&self, w: ArrayView1<f64>) -> f64 {
        if w.iter().all(|&t| t == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn conjugate_prox(&self, v: ArrayView1<f64>, _sigma: f64) -> Array1<f64> {
        Array1::zeros(v.len())
    }
    fn value_change(&self, _base: ArrayView1<f64>, _delta: ArrayView1<f64>) -> f64 {
        0.0
    }
}

/// Indicator of the nonnegative orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonnegIndicator;

impl ProxFunction for NonnegIndicator {
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        if u.iter().all(|&t| t >= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, u: ArrayView1<f64>, _step: f64) -> Array1<f64> {
        u.mapv(|t| t.max(0.0))
    }
    /// Indicator of the nonpositive orthant.
    fn conjugate(&self, w: ArrayView1<f64>) -> f64 {
        if w.iter().all(|&t| t <= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    /// `min(v, 0)`, exactly; Moreau's identity would leave tiny positive residues.
    fn conjugate_prox(&self, v: ArrayView1<f64>, _sigma: f64) -> Array1<f64> {
        v.mapv(|t| t.min(0.0))
    }

    fn value_change(&self, base: ArrayView1<f64>, delta: ArrayView1<f64>) -> f64 {
        let ok = Zip::from(base).and(delta).all(|&b, &d| b + d >= 0.0);
        if ok {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `λ‖u − shift‖₁` (shift defaults to zero).
#[derive(Debug, Clone)]
pub struct L1Norm {
    weight: f64,
    shift: Option<Array1<f64>>,
}

impl L1Norm {
    pub fn new(weight: f64) -> Self {
        Self { weight, shift: None }
    }

    pub fn shifted(weight: f64, shift: Array1<f64>) -> Self {
        Self { weight, shift: Some(shift) }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn shift_at(&self, i: usize) -> f64 {
        self.shift.as_ref().map_or(0.0, |s| s[i])
    }
}

impl ProxFunction for L1Norm {
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        let s: f64 = u.iter().enumerate().map(|(i, &t)| (t - self.shift_at(i)).abs()).sum();
        self.weight * s
    }

    fn prox(&self, u: ArrayView1<f64>, step: f64) -> Array1<f64> {
        let thr = self.weight * step;
        Array1::from_shape_fn(u.len(), |i| {
            let g = self.shift_at(i);
            g + soft(u[i] - g, thr)
        })
    }

    /// `⟨w, shift⟩ + ι{‖w‖_∞ ≤ λ}`.
    fn conjugate(&self, w: ArrayView1<f64>) -> f64 {
        let bound = self.weight * (1.0 + CONJ_MEMBERSHIP_TOL);
        if w.iter().any(|&t| t.abs() > bound) {
            return f64::INFINITY;
        }
        match &self.shift {
            Some(s) => linalg::dot(w, s.view()),
            None => 0.0,
        }
    }

    /// Projection of `v − σ·shift` onto `[−λ, λ]ⁿ`; the same point Moreau's
    /// identity gives, without its cancellation for large `|v|`.
    fn conjugate_prox(&self, v: ArrayView1<f64>, sigma: f64) -> Array1<f64> {
        let lam = self.weight;
        Array1::from_shape_fn(v.len(), |i| (v[i] - sigma * self.shift_at(i)).clamp(-lam, lam))
    }

    fn value_change(&self, base: ArrayView1<f64>, delta: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..base.len() {
            let a = base[i] - self.shift_at(i);
            let e = delta[i];
            let b = a + e;
            // |a+e| − |a| is exactly sign(a)·e while the sign is kept
            acc += if a > 0.0 && b >= 0.0 {
                e
            } else if a < 0.0 && b <= 0.0 {
                -e
            } else {
                b.abs() - a.abs()
            };
        }
        self.weight * acc
    }

    fn fenchel_young_gap(&self, u: ArrayView1<f64>, w: ArrayView1<f64>) -> f64 {
        let bound = self.weight * (1.0 + CONJ_MEMBERSHIP_TOL);
        let mut acc = 0.0;
        for i in 0..u.len() {
            if w[i].abs() > bound {
                return f64::INFINITY;
            }
            let r = u[i] - self.shift_at(i);
            // each term λ|r| − w r is nonnegative up to the membership slack
            acc += self.weight * r.abs() - w[i] * r;
        }
        acc
    }
}

/// `ρ Σ_i ‖(u_i, u_{n+i}, …)‖₂` for `u` stored component-major:
/// `components` consecutive blocks of `groups` entries each.
#[derive(Debug, Clone)]
pub struct GroupL2Norm {
    weight: f64,
    groups: usize,
    components: usize,
}

impl GroupL2Norm {
    pub fn new(weight: f64, groups: usize, components: usize) -> Self {
        Self { weight, groups, components }
    }

    fn group_norm(&self, u: ArrayView1<f64>, i: usize) -> f64 {
        (0..self.components)
            .map(|c| u[c * self.groups + i].powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl ProxFunction for GroupL2Norm {
    fn value(&self, u: ArrayView1<f64>) -> f64 {
        self.weight * (0..self.groups).map(|i| self.group_norm(u, i)).sum::<f64>()
    }

    fn prox(&self, u: ArrayView1<f64>, step: f64) -> Array1<f64> {
        let thr = self.weight * step;
        let mut out = u.to_owned();
        for i in 0..self.groups {
            let nrm = self.group_norm(u, i);
            let scale = if nrm > thr { 1.0 - thr / nrm } else { 0.0 };
            for c in 0..self.components {
                out[c * self.groups + i] *= scale;
            }
        }
        out
    }

    fn conjugate(&self, w: ArrayView1<f64>) -> f64 {
        let bound = self.weight * (1.0 + CONJ_MEMBERSHIP_TOL);
        if (0..self.groups).any(|i| self.group_norm(w, i) > bound) {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Projection onto the per-group ball of radius `ρ`.
    fn conjugate_prox(&self, v: ArrayView1<f64>, _sigma: f64) -> Array1<f64> {
        let mut out = v.to_owned();
        for i in 0..self.groups {
            let nrm = self.group_norm(v, i);
            if nrm > self.weight {
                let scale = self.weight / nrm;
                for c in 0..self.components {
                    out[c * self.groups + i] *= scale;
                }
            }
        }
        out
    }

    fn value_change(&self, base: ArrayView1<f64>, delta: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.groups {
            let (mut ae, mut ee, mut aa, mut bb) = (0.0, 0.0, 0.0, 0.0);
            for c in 0..self.components {
                let j = c * self.groups + i;
                let a = base[j];
                let e = delta[j];
                ae += a * e;
                ee += e * e;
                aa += a * a;
                bb += (a + e) * (a + e);
            }
            let denom = bb.sqrt() + aa.sqrt();
            if denom > 0.0 {
                acc += (2.0 * ae + ee) / denom;
            }
        }
        self.weight * acc
    }

    fn fenchel_young_gap(&self, u: ArrayView1<f64>, w: ArrayView1<f64>) -> f64 {
        let bound = self.weight * (1.0 + CONJ_MEMBERSHIP_TOL);
        let mut acc = 0.0;
        for i in 0..self.groups {
            if self.group_norm(w, i) > bound {
                return f64::INFINITY;
            }
            let inner: f64 = (0..self.components)
                .map(|c| u[c * self.groups + i] * w[c * self.groups + i])
                .sum();
            acc += self.weight * self.group_norm(u, i) - inner;
        }
        acc
    }
}

/// Identity map on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOp {
    n: usize,
}

impl IdentityOp {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinearOperator for IdentityOp {
    fn input_dim(&self) -> usize {
        self.n
    }
    fn output_dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.to_owned()
    }
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        y.to_owned()
    }
}

/// Dense matrix operator.
#[derive(Debug, Clone)]
pub struct MatrixOp {
    a: Array2<f64>,
}

impl MatrixOp {
    pub fn new(a: Array2<f64>) -> Self {
        Self { a }
    }
}

impl LinearOperator for MatrixOp {
    fn input_dim(&self) -> usize {
        self.a.ncols()
    }
    fn output_dim(&self) -> usize {
        self.a.nrows()
    }
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.dot(&x)
    }
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        self.a.t().dot(&y)
    }
}

/// `f0 ≡ 0` on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSmooth {
    n: usize,
}

impl ZeroSmooth {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl SmoothFunction for ZeroSmooth {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, _x: ArrayView1<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Error::check_dim(self.n, x.len())?;
        Ok(Array1::zeros(self.n))
    }
    fn value_change(&self, _x: ArrayView1<f64>, _d: ArrayView1<f64>) -> f64 {
        0.0
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Separable quadratic `½ Σ d_i (x_i − c_i)²` with `d_i ≥ 0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: Array1<f64>,
    center: Array1<f64>,
}

impl Quadratic {
    pub fn new(diag: Array1<f64>, center: Array1<f64>) -> Result<Self> {
        Error::check_dim(diag.len(), center.len())?;
        if diag.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidConfig("quadratic curvature must be finite and nonnegative".into()));
        }
        Ok(Self { diag, center })
    }

    /// `(c/2)‖x − center‖²`.
    pub fn isotropic(center: Array1<f64>, c: f64) -> Self {
        let diag = Array1::from_elem(center.len(), c);
        Self { diag, center }
    }

    pub fn diag(&self) -> ArrayView1<'_, f64> {
        self.diag.view()
    }

    pub fn center(&self) -> ArrayView1<'_, f64> {
        self.center.view()
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        Zip::from(x).and(&self.diag).and(&self.center).for_each(|&x, &d, &c| {
            acc += d * (x - c) * (x - c);
        });
        0.5 * acc
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(Zip::from(x).and(&self.diag).and(&self.center).map_collect(|&x, &d, &c| d * (x - c)))
    }

    fn value_change(&self, x: ArrayView1<f64>, e: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        Zip::from(x).and(e).and(&self.diag).and(&self.center).for_each(|&x, &e, &d, &c| {
            acc += d * e * ((x - c) + 0.5 * e);
        });
        acc
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.diag.iter().copied().fold(0.0, f64::max))
    }
}
