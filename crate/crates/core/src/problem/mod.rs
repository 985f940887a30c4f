//! Composite problems `f = f0 + f1`, where `f0` is smooth (possibly nonconvex)
//! and `f1 = Σ g_i(M_i x) + ξ(x)` is convex with closed-form pieces.

mod library;

pub use library::{GroupL2Norm, IdentityOp, L1Norm, MatrixOp, NonnegIndicator, Quadratic, ZeroFunction, ZeroSmooth};

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Safety factor applied to power-iteration estimates of `‖M‖²`.
pub const OP_NORM_SAFETY: f64 = 1.05;
/// Number of power iterations behind the default `‖M‖²` estimate.
pub const OP_NORM_ITERS: usize = 50;

/// Smooth part `f0` of the objective.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Value of `f0`; `+∞` outside the open set where it is defined.
    fn value(&self, x: ArrayView1<f64>) -> f64;

    fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>>;

    /// `f0(x + d) − f0(x)`. Implementations override this when the
    /// difference can be formed without cancelling two large values.
    fn value_change(&self, x: ArrayView1<f64>, d: ArrayView1<f64>) -> f64 {
        let moved = linalg::axpy(x, 1.0, d);
        self.value(moved.view()) - self.value(x)
    }

    /// A priori Lipschitz constant of the gradient, when known.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

/// Proper convex function with a closed-form proximity operator.
pub trait ProxFunction: Send + Sync {
    /// Extended-real value (`+∞` outside the domain).
    fn value(&self, u: ArrayView1<f64>) -> f64;

    /// `argmin_y value(y) + ‖y − u‖² / (2·step)`.
    fn prox(&self, u: ArrayView1<f64>, step: f64) -> Array1<f64>;

    /// Convex conjugate `g*(w)`.
    fn conjugate(&self, w: ArrayView1<f64>) -> f64;

    /// `prox_{σ g*}(v)` through Moreau's identity.
    fn conjugate_prox(&self, v: ArrayView1<f64>, sigma: f64) -> Array1<f64> {
        let scaled = v.mapv(|t| t / sigma);
        let p = self.prox(scaled.view(), 1.0 / sigma);
        let mut out = v.to_owned();
        out.scaled_add(-sigma, &p);
        out
    }

    /// `g(base + delta) − g(base)`.
    fn value_change(&self, base: ArrayView1<f64>, delta: ArrayView1<f64>) -> f64 {
        let moved = linalg::axpy(base, 1.0, delta);
        self.value(moved.view()) - self.value(base)
    }

    /// Fenchel–Young gap `g(u) + g*(w) − ⟨w, u⟩ ≥ 0`.
    fn fenchel_young_gap(&self, u: ArrayView1<f64>, w: ArrayView1<f64>) -> f64 {
        self.value(u) + self.conjugate(w) - linalg::dot(w, u)
    }
}

/// Linear map with its adjoint.
pub trait LinearOperator: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64>;
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64>;
}

/// Relative adjoint residual `|⟨Mx,y⟩ − ⟨x,Mᵀy⟩|` on random vectors, scaled
/// by `½(‖Mx‖‖y‖ + ‖x‖‖Mᵀy‖)` so that nearly orthogonal draws do not blow up
/// the ratio.
pub fn adjoint_residual(op: &dyn LinearOperator, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array1::from_shape_fn(op.input_dim(), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(op.output_dim(), |_| rng.random_range(-1.0..1.0));
    let mx = op.apply(x.view());
    let mty = op.adjoint(y.view());
    let lhs = mx.dot(&y);
    let rhs = x.dot(&mty);
    let scale = 0.5
        * (linalg::norm(mx.view()) * linalg::norm(y.view())
            + linalg::norm(x.view()) * linalg::norm(mty.view()));
    if scale == 0.0 {
        (lhs - rhs).abs()
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// One `g_i ∘ M_i` term of `f1`.
#[derive(Clone)]
pub struct Block {
    pub op: Arc<dyn LinearOperator>,
    pub func: Arc<dyn ProxFunction>,
}

impl Block {
    pub fn new(op: Arc<dyn LinearOperator>, func: Arc<dyn ProxFunction>) -> Self {
        Self { op, func }
    }
}

/// `f1(x) = Σ g_i(M_i x) + ξ(x)`.
///
/// Callers must supply pieces with `dom(g_i ∘ M_i) ⊇ dom(ξ)`; the dual prox
/// procedure relies on it to keep every primal candidate feasible.
#[derive(Clone)]
pub struct StructuredConvexTerm {
    dim: usize,
    blocks: Vec<Block>,
    xi: Arc<dyn ProxFunction>,
    op_norm_sq_bound: f64,
}

impl StructuredConvexTerm {
    /// Builds the term and bounds `‖M‖²` by power iteration on `MᵀM`
    /// (times [`OP_NORM_SAFETY`]).
    pub fn new(dim: usize, blocks: Vec<Block>, xi: Arc<dyn ProxFunction>) -> Result<Self> {
        for b in &blocks {
            Error::check_dim(dim, b.op.input_dim())?;
        }
        let mut term = Self { dim, blocks, xi, op_norm_sq_bound: 0.0 };
        term.op_norm_sq_bound = OP_NORM_SAFETY * term.estimate_op_norm_sq(OP_NORM_ITERS);
        Ok(term)
    }

    /// `f1 = ξ` only.
    pub fn xi_only(dim: usize, xi: Arc<dyn ProxFunction>) -> Self {
        Self { dim, blocks: Vec::new(), xi, op_norm_sq_bound: 0.0 }
    }

    /// Replaces the estimated bound with an analytic one.
    pub fn with_op_norm_sq_bound(mut self, bound: f64) -> Self {
        self.op_norm_sq_bound = bound;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn xi(&self) -> &dyn ProxFunction {
        self.xi.as_ref()
    }

    pub fn op_norm_sq_bound(&self) -> f64 {
        self.op_norm_sq_bound
    }

    /// Total dual dimension `m = Σ m_i`.
    pub fn dual_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.op.output_dim()).sum()
    }

    /// `λ_max(MᵀM)` by `iters` power iterations, no safety factor.
    pub fn estimate_op_norm_sq(&self, iters: usize) -> f64 {
        if self.blocks.is_empty() {
            return 0.0;
        }
        linalg::power_iteration(self.dim, iters, |v| {
            let images: Vec<_> = self.blocks.iter().map(|b| b.op.apply(v)).collect();
            self.adjoint_sum(&images)
        })
    }

    /// `(M_1 x, …, M_p x)`.
    pub fn apply_blocks(&self, x: ArrayView1<f64>) -> Vec<Array1<f64>> {
        self.blocks.iter().map(|b| b.op.apply(x)).collect()
    }

    /// `Mᵀw = Σ M_iᵀ w_i`.
    pub fn adjoint_sum(&self, w: &[Array1<f64>]) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        for (b, wi) in self.blocks.iter().zip(w) {
            out += &b.op.adjoint(wi.view());
        }
        out
    }

    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        let xi = self.xi.value(x);
        if xi == f64::INFINITY {
            return f64::INFINITY;
        }
        self.blocks
            .iter()
            .map(|b| b.func.value(b.op.apply(x).view()))
            .sum::<f64>()
            + xi
    }

    /// `f1(x + d) − f1(x)` given the cached images `M_i x` and `M_i d`.
    pub fn value_change(
        &self,
        x: ArrayView1<f64>,
        mx: &[Array1<f64>],
        d: ArrayView1<f64>,
        md: &[Array1<f64>],
    ) -> f64 {
        let xi_change = self.xi.value_change(x, d);
        if xi_change == f64::INFINITY {
            return f64::INFINITY;
        }
        self.blocks
            .iter()
            .zip(mx.iter().zip(md))
            .map(|(b, (bx, bd))| b.func.value_change(bx.view(), bd.view()))
            .sum::<f64>()
            + xi_change
    }
}

/// The pair `(f0, f1)`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub f0: Arc<dyn SmoothFunction>,
    pub f1: StructuredConvexTerm,
}

impl CompositeProblem {
    pub fn new(f0: Arc<dyn SmoothFunction>, f1: StructuredConvexTerm) -> Result<Self> {
        Error::check_dim(f0.dim(), f1.dim())?;
        Ok(Self { f0, f1 })
    }

    pub fn dim(&self) -> usize {
        self.f1.dim()
    }

    /// `f0(x) + f1(x)`; `+∞` exactly when `x ∉ dom(f1)`.
    pub fn eval_f(&self, x: ArrayView1<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        let f1 = self.f1.value(x);
        if f1 == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        Ok(self.f0.value(x) + f1)
    }

    pub fn in_domain(&self, x: ArrayView1<f64>) -> bool {
        self.f1.xi().value(x) < f64::INFINITY
    }

    /// `f(x + d) − f(x)` for `x ∈ dom(f1)`.
    pub fn value_change(&self, x: ArrayView1<f64>, d: ArrayView1<f64>) -> f64 {
        let mx = self.f1.apply_blocks(x);
        let md = self.f1.apply_blocks(d);
        self.value_change_cached(x, &mx, d, &md)
    }

    pub(crate) fn value_change_cached(
        &self,
        x: ArrayView1<f64>,
        mx: &[Array1<f64>],
        d: ArrayView1<f64>,
        md: &[Array1<f64>],
    ) -> f64 {
        let f1 = self.f1.value_change(x, mx, d, md);
        if f1 == f64::INFINITY {
            return f64::INFINITY;
        }
        self.f0.value_change(x, d) + f1
    }

    pub fn check_gradient(&self, x: ArrayView1<f64>, step: f64) -> Result<GradientReport> {
        Error::check_dim(self.dim(), x.len())?;
        check_gradient(self.f0.as_ref(), x, step, None)
    }
}

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradientReport {
    /// `max_i |fd_i − ∇_i| / (1 + |∇_i|)` over the probed coordinates.
    pub max_rel_error: f64,
    pub worst_coord: Option<usize>,
    pub probed: usize,
    /// Coordinates whose probes left the domain of `f0`.
    pub skipped: Vec<usize>,
}

/// Compares `∇f0` against central differences `(f0(x+he_i) − f0(x−he_i))/2h`
/// on `coords` (all coordinates when `None`).
pub fn check_gradient(
    f0: &dyn SmoothFunction,
    x: ArrayView1<f64>,
    step: f64,
    coords: Option<&[usize]>,
) -> Result<GradientReport> {
    Error::check_dim(f0.dim(), x.len())?;
    let grad = f0.gradient(x)?;
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut report = GradientReport { max_rel_error: 0.0, worst_coord: None, probed: 0, skipped: Vec::new() };
    let mut probe = x.to_owned();
    for &i in coords {
        let xi = probe[i];
        probe[i] = xi + step;
        let fp = f0.value(probe.view());
        probe[i] = xi - step;
        let fm = f0.value(probe.view());
        probe[i] = xi;
        if !fp.is_finite() || !fm.is_finite() {
            report.skipped.push(i);
            continue;
        }
        let fd = (fp - fm) / (2.0 * step);
        let err = (fd - grad[i]).abs() / (1.0 + grad[i].abs());
        report.probed += 1;
        if report.worst_coord.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_coord = Some(i);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn l1_problem() -> CompositeProblem {
        let f0 = Arc::new(Quadratic::isotropic(Array1::zeros(2), 1.0));
        let block = Block::new(Arc::new(IdentityOp::new(2)), Arc::new(L1Norm::new(1.0)));
        let f1 = StructuredConvexTerm::new(2, vec![block], Arc::new(ZeroFunction)).unwrap();
        CompositeProblem::new(f0, f1).unwrap()
    }

    #[test]
    fn eval_f_hand_value() {
        let p = l1_problem();
        assert!((p.eval_f(array![1.0, -2.0].view()).unwrap() - 5.5).abs() < 1e-15);
        assert_eq!(p.eval_f(array![0.0, 0.0].view()).unwrap(), 0.0);
    }

    #[test]
    fn eval_f_outside_indicator_domain() {
        let f0 = Arc::new(ZeroSmooth::new(1));
        let f1 = StructuredConvexTerm::xi_only(1, Arc::new(NonnegIndicator));
        let p = CompositeProblem::new(f0, f1).unwrap();
        assert_eq!(p.eval_f(array![-1.0].view()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn eval_f_dimension_mismatch() {
        let p = l1_problem();
        assert!(matches!(
            p.eval_f(array![1.0].view()),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn quadratic_gradient_check_is_exact() {
        let p = l1_problem();
        let x = array![0.3, -1.7];
        let rep = p.check_gradient(x.view(), 1e-6 * (1.0 + linalg::norm(x.view()))).unwrap();
        assert!(rep.max_rel_error <= 1e-8, "{rep:?}");
        assert_eq!(rep.probed, 2);
    }

    #[test]
    fn op_norm_bound_dominates_power_estimate() {
        let a = array![[1.0, 2.0], [0.0, -3.0], [0.5, 0.5]];
        let op = Arc::new(MatrixOp::new(a));
        let block = Block::new(op, Arc::new(L1Norm::new(1.0)));
        let f1 = StructuredConvexTerm::new(2, vec![block], Arc::new(ZeroFunction)).unwrap();
        assert!(f1.op_norm_sq_bound() >= f1.estimate_op_norm_sq(50));
    }

    #[test]
    fn gradient_check_skips_probes_outside_domain() {
        struct LogBarrier;
        impl SmoothFunction for LogBarrier {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: ArrayView1<f64>) -> f64 {
                if x.iter().any(|&t| t <= 0.0) {
                    f64::INFINITY
                } else {
                    -x.iter().map(|t| t.ln()).sum::<f64>()
                }
            }
            fn gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
                Ok(x.mapv(|t| -1.0 / t))
            }
        }
        let x = array![1e-9, 1.0];
        let rep = check_gradient(&LogBarrier, x.view(), 1e-6, None).unwrap();
        assert_eq!(rep.skipped, vec![0]);
        assert_eq!(rep.probed, 1);
    }
}
