use std::sync::Arc;

use inertiafb::problem::{
    Block, CompositeProblem, IdentityOp, L1Norm, MatrixOp, NonnegIndicator, ProxFunction, Quadratic,
    StructuredConvexTerm, ZeroFunction,
};
use inertiafb::prox::{dual_objective, eval_h, eta, solve_inexact_prox, theta, ProxQuery, StopReason};
use inertiafb::Error;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `½x² + |x|` in one dimension, with `|·|` as a block over the identity.
fn half_sq_plus_abs() -> CompositeProblem {
    let f0 = Arc::new(Quadratic::isotropic(array![0.0], 1.0));
    let block = Block::new(Arc::new(IdentityOp::new(1)), Arc::new(L1Norm::new(1.0)));
    let f1 = StructuredConvexTerm::new(1, vec![block], Arc::new(ZeroFunction)).unwrap();
    CompositeProblem::new(f0, f1).unwrap()
}

fn soft(t: f64, thr: f64) -> f64 {
    t.signum() * (t.abs() - thr).max(0.0)
}

#[test]
fn eval_h_hand_values() {
    let p = half_sq_plus_abs();
    let one = array![1.0];
    let zero = array![0.0];
    assert_eq!(eval_h(&p, one.view(), one.view(), 1.0, 0.0, one.view()).unwrap(), 0.0);
    let h = eval_h(&p, one.view(), one.view(), 1.0, 0.0, zero.view()).unwrap();
    assert!((h + 1.5).abs() < 1e-15, "{h}");
    let h = eval_h(&p, one.view(), zero.view(), 1.0, 0.5, zero.view()).unwrap();
    assert!((h + 1.0).abs() < 1e-15, "{h}");
}

#[test]
fn eval_h_outside_domain_is_infinite_and_bad_anchor_errors() {
    let f0 = Arc::new(Quadratic::isotropic(array![0.0], 1.0));
    let f1 = StructuredConvexTerm::xi_only(1, Arc::new(NonnegIndicator));
    let p = CompositeProblem::new(f0, f1).unwrap();
    let x = array![1.0];
    assert_eq!(eval_h(&p, x.view(), x.view(), 1.0, 0.0, array![-1.0].view()).unwrap(), f64::INFINITY);
    let bad = array![-1.0];
    assert!(matches!(
        eval_h(&p, bad.view(), bad.view(), 1.0, 0.0, x.view()),
        Err(Error::OutsideDomain(_))
    ));
}

#[test]
fn dual_at_zero_equals_constant_term() {
    let p = half_sq_plus_abs();
    let (x, s) = (array![1.7], array![0.4]);
    let (alpha, beta) = (0.8, 0.3);
    let q = ProxQuery::new(x.view(), s.view(), alpha, beta, 1.0);
    let d = dual_objective(&p, &q, &[array![0.0]]).unwrap();
    let v = 1.7 - (beta / alpha) * (1.7 - 0.4);
    let c = -0.5 * alpha * v * v - 1.7;
    assert!((d.psi - c).abs() < 1e-13, "{} vs {c}", d.psi);
    assert!((d.psi_closed_form - c).abs() < 1e-13);
    assert!(d.dual_feasible);
}

#[test]
fn dual_at_exact_optimum_equals_primal_value() {
    // x = 3, α = ½: x̄ = 1.5, ŷ = soft(1.5, ½) = 1, ŵ = (x̄ − ŷ)/α = 1
    let p = half_sq_plus_abs();
    let x = array![3.0];
    let q = ProxQuery::new(x.view(), x.view(), 0.5, 0.0, 1.0);
    let d = dual_objective(&p, &q, &[array![1.0]]).unwrap();
    let h_hat = eval_h(&p, x.view(), x.view(), 0.5, 0.0, array![1.0].view()).unwrap();
    assert!((d.primal_candidate[0] - 1.0).abs() < 1e-15);
    assert!((d.psi - h_hat).abs() < 1e-13, "{} vs {h_hat}", d.psi);
    assert!((d.psi_closed_form - h_hat).abs() < 1e-13);
}

#[test]
fn dual_outside_domain_is_flagged() {
    let p = half_sq_plus_abs();
    let x = array![3.0];
    let q = ProxQuery::new(x.view(), x.view(), 0.5, 0.0, 1.0);
    let d = dual_objective(&p, &q, &[array![1.5]]).unwrap();
    assert!(!d.dual_feasible);
    assert_eq!(d.psi, f64::NEG_INFINITY);
}

#[test]
fn conjugate_prox_examples() {
    let abs = L1Norm::new(1.0);
    assert_eq!(abs.conjugate_prox(array![2.0].view(), 1.0)[0], 1.0);
    let shifted = L1Norm::shifted(1.0, array![3.0]);
    assert_eq!(shifted.conjugate_prox(array![0.0].view(), 2.0)[0], -1.0);
    let cone = NonnegIndicator;
    assert_eq!(cone.conjugate_prox(array![0.7, -0.2].view(), 3.0), array![0.0, -0.2]);
}

#[test]
fn conjugate_prox_matches_brute_force_scalar() {
    // prox_{σg*}(v) = argmin_w σ g*(w) + ½(w − v)² with g* = 3w + ι[−1,1]
    let g = L1Norm::shifted(1.0, array![3.0]);
    for &(v, sigma) in &[(0.0, 2.0), (1.5, 0.1), (-0.4, 0.05), (5.0, 1.0)] {
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=200_000 {
            let w = -1.0 + 2.0 * k as f64 / 200_000.0;
            let obj = sigma * 3.0 * w + 0.5 * (w - v) * (w - v);
            if obj < best.0 {
                best = (obj, w);
            }
        }
        let p = g.conjugate_prox(array![v].view(), sigma)[0];
        assert!((p - best.1).abs() < 2e-5, "v={v} sigma={sigma}: {p} vs {}", best.1);
    }
}

#[test]
fn solve_scalar_soft_threshold() {
    let p = half_sq_plus_abs();
    let x = array![2.0];
    let q = ProxQuery::new(x.view(), x.view(), 1.0, 0.0, 1e-6);
    let r = solve_inexact_prox(&p, &q, None).unwrap();
    assert!(r.converged());
    assert!(r.y_tilde[0].abs() <= 1e-5, "{:?}", r.y_tilde);
}

#[test]
fn solve_100d_matches_soft_threshold() {
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let center = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
    let f0 = Arc::new(Quadratic::isotropic(center, 1.0));
    let block = Block::new(Arc::new(IdentityOp::new(n)), Arc::new(L1Norm::new(0.3)));
    let f1 = StructuredConvexTerm::new(n, vec![block], Arc::new(ZeroFunction)).unwrap();
    let p = CompositeProblem::new(f0.clone(), f1).unwrap();
    let x = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
    let s = Array1::from_shape_fn(n, |_| rng.random_range(-3.0..3.0));
    let (alpha, beta) = (0.7, 0.2);
    let mut q = ProxQuery::new(x.view(), s.view(), alpha, beta, 0.0);
    q.abs_tol = Some(1e-10);
    let r = solve_inexact_prox(&p, &q, None).unwrap();
    assert!(r.converged());
    let grad = &x - &f0.center();
    let xbar = &x - &(grad * alpha) + &((&x - &s) * beta);
    for i in 0..n {
        let exact = soft(xbar[i], alpha * 0.3);
        assert!((r.y_tilde[i] - exact).abs() <= 1e-6, "i={i}: {} vs {exact}", r.y_tilde[i]);
    }
}

#[test]
fn already_optimal_point_uses_absolute_tolerance() {
    let p = half_sq_plus_abs();
    let x = array![0.0];
    let q = ProxQuery::new(x.view(), x.view(), 1.0, 0.0, 1e-6);
    let r = solve_inexact_prox(&p, &q, None).unwrap();
    assert_eq!(r.reason, StopReason::AbsoluteTolerance);
    assert!(r.y_tilde[0].abs() <= 1e-12);
}

#[test]
fn theta_forms_agree() {
    for &tau in &[0.0, 0.5, 1.0, 10.0, 1e6] {
        let alt = 2.0 / ((2.0f64 + tau).sqrt() + tau.sqrt()).powi(2);
        assert!((theta(tau) - alt).abs() <= 1e-15, "tau={tau}");
    }
}

#[test]
fn warm_start_does_not_cost_more() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, n) = (30, 20);
    let a = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0));
    let b = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
    let f0 = Arc::new(Quadratic::isotropic(Array1::zeros(n), 0.5));
    let block = Block::new(Arc::new(MatrixOp::new(a)), Arc::new(L1Norm::shifted(1.0, b)));
    let f1 = StructuredConvexTerm::new(n, vec![block], Arc::new(NonnegIndicator)).unwrap();
    let p = CompositeProblem::new(f0, f1).unwrap();
    let x = Array1::from_elem(n, 0.5);
    let q = ProxQuery::new(x.view(), x.view(), 0.1, 0.0, 1.0);
    let cold = solve_inexact_prox(&p, &q, None).unwrap();
    let x2 = &x * 1.0001;
    let q2 = ProxQuery::new(x2.view(), x.view(), 0.1, 0.0, 1.0);
    let cold2 = solve_inexact_prox(&p, &q2, None).unwrap();
    let warm2 = solve_inexact_prox(&p, &q2, Some(&cold.w_tilde)).unwrap();
    assert!(warm2.inner_iters <= cold2.inner_iters, "{} > {}", warm2.inner_iters, cold2.inner_iters);
}

#[test]
fn invalid_query_is_rejected() {
    let p = half_sq_plus_abs();
    let x = array![1.0];
    let q = ProxQuery::new(x.view(), x.view(), 0.0, 0.0, 1.0);
    assert!(matches!(solve_inexact_prox(&p, &q, None), Err(Error::InvalidConfig(_))));
    let q = ProxQuery::new(x.view(), x.view(), 1.0, 0.0, -1.0);
    assert!(matches!(solve_inexact_prox(&p, &q, None), Err(Error::InvalidConfig(_))));
}

fn random_instance(seed: u64, nonneg: bool) -> (CompositeProblem, Array1<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..12);
    let m = rng.random_range(1..15);
    let a = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0));
    let g0 = Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0));
    let diag = Array1::from_shape_fn(n, |_| rng.random_range(0.0..2.0));
    let center = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
    let f0 = Arc::new(Quadratic::new(diag, center).unwrap());
    let block = Block::new(Arc::new(MatrixOp::new(a)), Arc::new(L1Norm::shifted(0.7, g0)));
    let xi: Arc<dyn ProxFunction> = if nonneg { Arc::new(NonnegIndicator) } else { Arc::new(ZeroFunction) };
    let f1 = StructuredConvexTerm::new(n, vec![block], xi).unwrap();
    let x = Array1::from_shape_fn(n, |_| rng.random_range(0.0..2.0));
    let s = Array1::from_shape_fn(n, |_| rng.random_range(0.0..2.0));
    (CompositeProblem::new(f0, f1).unwrap(), x, s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn returned_point_satisfies_certificates(seed in 0u64..10_000, nonneg in any::<bool>(),
                                             alpha in 0.01f64..2.0, beta in 0.0f64..0.9,
                                             tau_ix in 0usize..5) {
        let tau = [0.0, 0.5, 1.0, 10.0, 1e6][tau_ix];
        let (p, x, s) = random_instance(seed, nonneg);
        let mut q = ProxQuery::new(x.view(), s.view(), alpha, beta, tau);
        q.max_inner = 20_000;
        let r = solve_inexact_prox(&p, &q, None).unwrap();
        prop_assert!(r.converged(), "{:?}", r.reason);
        prop_assert!(r.h_value <= 0.0);
        let h_direct = eval_h(&p, x.view(), s.view(), alpha, beta, r.y_tilde.view()).unwrap();
        prop_assert!((h_direct - r.h_value).abs() <= 1e-10 * (1.0 + r.h_value.abs()));
        prop_assert!(r.psi_value <= r.h_value + 1e-10 * (1.0 + r.h_value.abs()));
        prop_assert!(r.duality_residual <= 1e-10, "residual {}", r.duality_residual);
        let d2 = (&r.y_tilde - &x).mapv(|t| t * t).sum();
        let lhs = theta(tau) / (2.0 * alpha) * d2;
        prop_assert!(lhs <= -r.h_value + 1e-10 * (1.0 + r.h_value.abs()), "{} > {}", lhs, -r.h_value);
        if r.reason == StopReason::DualityGap {
            prop_assert!(r.h_value <= eta(tau) * r.psi_value);
        }
        prop_assert!((r.epsilon + 0.5 * tau * r.h_value).abs() <= 1e-15 * (1.0 + r.epsilon.abs()));
    }
}
