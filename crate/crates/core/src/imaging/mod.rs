//! Deblurring models: reflective convolution, discrete gradient, the data
//! and regularization terms, noise simulation, metrics and image files.

pub mod conv;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod models;
pub mod noise;
pub mod phantom;
pub mod tv;

pub use conv::{gaussian_kernel, ConvOperator};
pub use grid::ImageGrid;
pub use metrics::psnr;
pub use models::{l1_fidelity_term, FilterBank, GaussianSdFidelity, LogFilter};
pub use noise::{impulse_noise, signal_dependent_noise};
pub use phantom::phantom;
pub use tv::{tv_term, GradientOp};
