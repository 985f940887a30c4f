use super::grid::ImageGrid;
use crate::error::{Error, Result};
use crate::linalg;

pub const PSNR_CAP: f64 = 300.0;

/// `10·log10(peak²·n / ‖x − ref‖²)`, capped at [`PSNR_CAP`].
pub fn psnr(x: &ImageGrid, reference: &ImageGrid, peak: f64) -> Result<f64> {
    if !x.same_shape(reference) {
        return Err(Error::DimensionMismatch { expected: reference.len(), got: x.len() });
    }
    let err = linalg::dist_sq(x.data(), reference.data());
    let db = 10.0 * (peak * peak * x.len() as f64 / err).log10();
    Ok(if db.is_nan() { PSNR_CAP } else { db.min(PSNR_CAP) })
}
