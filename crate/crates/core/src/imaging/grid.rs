use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// A gray-scale image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Array1<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, data: Array1<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidConfig(format!("image must be nonempty, got {height}x{width}")));
        }
        Error::check_dim(height * width, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("image has non-finite pixels".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Self { height, width, data: Array1::from_elem(height * width, value) }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = Array1::from_shape_fn(height * width, |p| f(p / width, p % width));
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    pub fn data(&self) -> ArrayView1<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array1<f64> {
        self.data
    }

    /// Same shape, new pixels.
    pub fn with_data(&self, data: Array1<f64>) -> Result<Self> {
        Self::new(self.height, self.width, data)
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.height == other.height && self.width == other.width
    }
}
