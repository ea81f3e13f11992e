//! Variable selection in high-dimensional linear models with correlated
//! predictors by whitening the design before a generalized Lasso.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`linalg`]: symmetric eigendecomposition and whitening operators.
//! * [`correlation`]: two-block correlation estimation.
//! * [`lasso`]: coordinate-descent Lasso paths and the whitened generalized Lasso.
//! * [`wlasso`]: the thresholding corrections and parameter selection.
//! * [`baselines`]: classical Lasso and HOLP selectors.
//! * [`diagnostics`]: irrepresentable condition and support-recovery metrics.
//! * [`simulation`]: block-correlated data generation and replication runs.

pub mod baselines;
pub mod correlation;
pub mod diagnostics;
pub mod lasso;
pub mod linalg;
pub mod simulation;
pub mod wlasso;

pub use nalgebra::{DMatrix, DVector};
