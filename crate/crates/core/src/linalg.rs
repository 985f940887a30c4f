//! Small dense vector helpers shared by the oracles and solvers.

use ndarray::{Array1, ArrayView1, Zip};

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

pub fn norm_sq(a: ArrayView1<f64>) -> f64 {
    a.dot(&a)
}

pub fn norm(a: ArrayView1<f64>) -> f64 {
    norm_sq(a).sqrt()
}

/// `‖a − b‖²` without allocating.
pub fn dist_sq(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| {
        let d = x - y;
        acc + d * d
    })
}

pub fn dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `a + t·d`.
pub fn axpy(a: ArrayView1<f64>, t: f64, d: ArrayView1<f64>) -> Array1<f64> {
    let mut out = a.to_owned();
    out.scaled_add(t, &d);
    out
}

/// Deterministic, well-spread unit vector used to seed power iterations.
pub(crate) fn probe_vector(n: usize) -> Array1<f64> {
    let mut v = Array1::from_shape_fn(n, |i| {
        // golden-ratio sequence keeps every component nonzero and aperiodic
        let t = ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract();
        0.5 + t
    });
    let nrm = norm(v.view());
    if nrm > 0.0 {
        v /= nrm;
    }
    v
}

/// Largest eigenvalue estimate of a symmetric positive semidefinite map by
/// plain power iteration (Rayleigh quotient of the final iterate).
pub fn power_iteration<F>(n: usize, iters: usize, mut apply: F) -> f64
where
    F: FnMut(ArrayView1<f64>) -> Array1<f64>,
{
    if n == 0 {
        return 0.0;
    }
    let mut v = probe_vector(n);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(v.view());
        lambda = dot(v.view(), w.view());
        let nrm = norm(w.view());
        if nrm == 0.0 {
            return 0.0;
        }
        v = w / nrm;
    }
    lambda.max(0.0)
}
