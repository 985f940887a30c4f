//! Inertial forward–backward methods with inexact proximal steps for
//! nonconvex composite problems, plus the imaging models used to benchmark
//! them.

pub mod certify;
pub mod error;
pub mod imaging;
pub mod linalg;
pub mod problem;
pub mod prox;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
