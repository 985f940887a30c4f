use super::grid::ImageGrid;

/// Piecewise-smooth test image in `[0, peak]`: a shaded background, a disc,
/// a rectangle, a thin bar and a small bright square. Needs no data files.
pub fn phantom(height: usize, width: usize, peak: f64) -> ImageGrid {
    let (hf, wf) = (height as f64, width as f64);
    ImageGrid::from_fn(height, width, |i, j| {
        let (y, x) = ((i as f64 + 0.5) / hf, (j as f64 + 0.5) / wf);
        let mut v = 0.1 + 0.15 * x;
        if (x - 0.35).powi(2) + (y - 0.4).powi(2) < 0.22f64.powi(2) {
            v = 0.8 - 0.3 * y;
        }
        if (0.55..0.85).contains(&x) && (0.55..0.8).contains(&y) {
            v = 0.5;
        }
        if (0.1..0.9).contains(&x) && (0.86..0.9).contains(&y) {
            v = 0.7;
        }
        if (0.7..0.8).contains(&x) && (0.15..0.25).contains(&y) {
            v = 1.0;
        }
        v * peak
    })
}
