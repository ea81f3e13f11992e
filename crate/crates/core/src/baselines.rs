//! Reference selectors: the classical Lasso path and HOLP screening.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lasso::{lasso_path, support_of, LambdaGrid, LassoError, SolverConfig};
use crate::wlasso::magnitude_order;

/// Largest accepted `λ_max / λ_min` of a Gram matrix before it is treated as singular.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("X Xᵀ is not invertible (condition number {condition:e})")]
    SingularGram { condition: f64 },
    #[error("s = {s} outside 1..={p}")]
    InvalidS { s: usize, p: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Lasso(#[from] LassoError),
}

impl BaselineError {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineError::SingularGram { .. } => "SingularGram",
            BaselineError::InvalidS { .. } => "InvalidS",
            BaselineError::DimensionMismatch { .. } => "DimensionMismatch",
            BaselineError::Lasso(e) => e.name(),
        }
    }
}

/// Selections of a method at each value of its sparsity parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorOutput {
    /// λ for the Lasso, `s` for HOLP.
    pub levels: Vec<f64>,
    pub selected_per_level: Vec<Vec<usize>>,
    pub coefficients_per_level: Vec<DVector<f64>>,
}

impl SelectorOutput {
    pub fn from_coefficients(levels: Vec<f64>, coefficients: Vec<DVector<f64>>) -> Self {
        let selected_per_level = coefficients.iter().map(support_of).collect();
        SelectorOutput { levels, selected_per_level, coefficients_per_level: coefficients }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn lasso_select(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
) -> Result<SelectorOutput, BaselineError> {
    let path = lasso_path(x, y, grid, cfg)?;
    Ok(SelectorOutput::from_coefficients(grid.values().to_vec(), path.coefficients))
}

/// `Xᵀ (X Xᵀ)^{-1} y`, via a Cholesky solve on the Gram matrix.
pub fn holp_estimate(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, BaselineError> {
    if x.nrows() != y.len() {
        return Err(BaselineError::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    let gram = x * x.transpose();
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(BaselineError::SingularGram { condition });
    }
    let chol = gram.cholesky().ok_or(BaselineError::SingularGram { condition })?;
    let z = chol.solve(y);
    Ok(x.tr_mul(&z))
}

/// Indices of the `s` largest `|β_j|`, ascending.
pub fn holp_select(beta: &DVector<f64>, s: usize) -> Result<Vec<usize>, BaselineError> {
    let p = beta.len();
    if s == 0 || s > p {
        return Err(BaselineError::InvalidS { s, p });
    }
    let mut top = magnitude_order(beta)[..s].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// HOLP selections for every `s` in `1..=p`.
pub fn holp_output(beta: &DVector<f64>) -> SelectorOutput {
    let order = magnitude_order(beta);
    let p = beta.len();
    let mut levels = Vec::with_capacity(p);
    let mut selected = Vec::with_capacity(p);
    let mut coefs = Vec::with_capacity(p);
    let mut current = DVector::zeros(p);
    let mut set: Vec<usize> = Vec::with_capacity(p);
    for (s, &j) in order.iter().enumerate() {
        current[j] = beta[j];
        let pos = set.binary_search(&j).unwrap_or_else(|e| e);
        set.insert(pos, j);
        levels.push((s + 1) as f64);
        selected.push(set.clone());
        coefs.push(current.clone());
    }
    SelectorOutput { levels, selected_per_level: selected, coefficients_per_level: coefs }
}

/// Nested HOLP selections (`s = 1..=p`) without the coefficient vectors.
pub fn holp_nested_selections(beta: &DVector<f64>) -> Vec<Vec<usize>> {
    let order = magnitude_order(beta);
    let mut set: Vec<usize> = Vec::with_capacity(order.len());
    order
        .iter()
        .map(|&j| {
            let pos = set.binary_search(&j).unwrap_or_else(|e| e);
            set.insert(pos, j);
            set.clone()
        })
        .collect()
}
