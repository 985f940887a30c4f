use ndarray::Zip;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::grid::ImageGrid;
use crate::error::{Error, Result};

/// Salt-and-pepper noise on exactly `round(fraction·n)` pixels drawn without
/// replacement. The first half (rounded up) of the chosen pixels become
/// `peak`, the rest `0`.
pub fn impulse_noise(x: &ImageGrid, fraction: f64, peak: f64, seed: u64) -> Result<ImageGrid> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("noise fraction must lie in [0, 1], got {fraction}")));
    }
    let n = x.len();
    let count = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, n, count);
    let salt = count.div_ceil(2);
    let mut data = x.data().to_owned();
    for (rank, p) in picked.iter().enumerate() {
        data[p] = if rank < salt { peak } else { 0.0 };
    }
    x.with_data(data)
}

/// `g_i = t_i + √(a t_i + c) · N(0,1)`, the signal-dependent Gaussian model.
pub fn signal_dependent_noise(t: &ImageGrid, a: f64, c: f64, seed: u64) -> Result<ImageGrid> {
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::InvalidConfig("noise parameters a and c must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = t.data().to_owned();
    let mut bad = false;
    Zip::from(&mut data).for_each(|v| {
        let var = a * *v + c;
        if var <= 0.0 {
            bad = true;
            return;
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += var.sqrt() * z;
    });
    if bad {
        return Err(Error::OutsideDomain("the signal-dependent noise model"));
    }
    t.with_data(data)
}
