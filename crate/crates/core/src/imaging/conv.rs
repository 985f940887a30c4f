use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::problem::LinearOperator;

/// Whole-sample symmetric reflection: `x[−p] = x[p]`, `x[n−1+p] = x[n−1−p]`.
/// One fold suffices because the kernel radius is at most `(n−1)/2`.
fn reflect(p: isize, n: usize) -> usize {
    let last = n as isize - 1;
    let q = if p < 0 {
        -p
    } else if p > last {
        2 * last - p
    } else {
        p
    };
    q as usize
}

/// 2-D convolution on a fixed image shape with reflective boundaries.
///
/// The adjoint scatters through the same index tables as the forward map,
/// so it is the exact transpose of whatever boundary rule `apply` uses.
#[derive(Debug, Clone)]
pub struct ConvOperator {
    kernel: Array2<f64>,
    height: usize,
    width: usize,
    // row_src[a][i]: source row feeding output row i through kernel row a
    row_src: Vec<Vec<usize>>,
    col_src: Vec<Vec<usize>>,
}

impl ConvOperator {
    pub fn new(kernel: Array2<f64>, height: usize, width: usize) -> Result<Self> {
        let (kh, kw) = kernel.dim();
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidConfig(format!("kernel dimensions must be odd, got {kh}x{kw}")));
        }
        if kh > height || kw > width {
            return Err(Error::KernelTooLarge { kh, kw, h: height, w: width });
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("kernel has non-finite entries".into()));
        }
        let table = |k: usize, n: usize| {
            let r = (k / 2) as isize;
            (0..k)
                .map(|a| (0..n).map(|i| reflect(i as isize + r - a as isize, n)).collect())
                .collect()
        };
        Ok(Self { row_src: table(kh, height), col_src: table(kw, width), kernel, height, width })
    }

    pub fn kernel(&self) -> ArrayView2<'_, f64> {
        self.kernel.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn for_each_tap(&self, mut f: impl FnMut(f64, usize, usize)) {
        let w = self.width;
        for ((a, b), &kv) in self.kernel.indexed_iter() {
            if kv == 0.0 {
                continue;
            }
            for (i, &sr) in self.row_src[a].iter().enumerate() {
                for (j, &sc) in self.col_src[b].iter().enumerate() {
                    f(kv, i * w + j, sr * w + sc);
                }
            }
        }
    }
}

impl LinearOperator for ConvOperator {
    fn input_dim(&self) -> usize {
        self.height * self.width
    }

    fn output_dim(&self) -> usize {
        self.height * self.width
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let x = x.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| x.to_vec());
        let mut y = vec![0.0; self.output_dim()];
        self.for_each_tap(|kv, out, src| y[out] += kv * x[src]);
        Array1::from(y)
    }

    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        let y = y.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| y.to_vec());
        let mut x = vec![0.0; self.input_dim()];
        self.for_each_tap(|kv, out, src| x[src] += kv * y[out]);
        Array1::from(x)
    }
}

/// Normalized `size × size` Gaussian stencil.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Array2<f64>> {
    if size % 2 == 0 || !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("gaussian kernel needs odd size and sigma > 0, got {size}, {sigma}")));
    }
    let r = (size / 2) as f64;
    let mut k = Array2::from_shape_fn((size, size), |(i, j)| {
        let (di, dj) = (i as f64 - r, j as f64 - r);
        (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
    });
    let total = k.sum();
    k /= total;
    Ok(k)
}
