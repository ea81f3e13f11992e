//! Dense symmetric kernels: spectral decomposition, matrix square roots and
//! the eigenvalue-floor repair used before whitening.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest tolerated |m[i][j] - m[j][i]| before input is rejected as
/// non-symmetric. Scaled by `max(1, max|m|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Relative eigenvalue floor used when none is supplied.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-8;

const EIGEN_MAX_ITER: usize = 0; // 0 = no limit inside nalgebra

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix of order zero")]
    Empty,
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NonSymmetric { max_asymmetry: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("eigensolver failed: {0}")]
    NumericalFailure(String),
    #[error("all eigenvalues fall below the floor {floor:e}")]
    DegenerateMatrix { floor: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl LinalgError {
    pub fn name(&self) -> &'static str {
        match self {
            LinalgError::NotSquare { .. } => "NotSquare",
            LinalgError::Empty => "Empty",
            LinalgError::NonSymmetric { .. } => "NonSymmetric",
            LinalgError::NonFinite => "NonFinite",
            LinalgError::NumericalFailure(_) => "NumericalFailure",
            LinalgError::DegenerateMatrix { .. } => "DegenerateMatrix",
            LinalgError::DimensionMismatch { .. } => "DimensionMismatch",
        }
    }
}

/// A dense matrix that is exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Validates symmetry and averages away drift up to [`SYMMETRY_TOLERANCE`].
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(LinalgError::Empty);
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let scale = m.amax().max(1.0);
        let mut max_asymmetry = 0.0f64;
        for j in 0..cols {
            for i in 0..j {
                max_asymmetry = max_asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if max_asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(LinalgError::NonSymmetric { max_asymmetry });
        }
        let mut m = m;
        if max_asymmetry > 0.0 {
            symmetrize_in_place(&mut m);
        }
        Ok(SymmetricMatrix(m))
    }

    pub fn identity(order: usize) -> Self {
        assert!(order >= 1, "order must be positive");
        SymmetricMatrix(DMatrix::identity(order, order))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Relabels rows and columns: entry `(a, b)` moves to `(perm[a], perm[b])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.order();
        assert_eq!(perm.len(), p);
        let mut out = DMatrix::zeros(p, p);
        for b in 0..p {
            for a in 0..p {
                out[(perm[a], perm[b])] = self.0[(a, b)];
            }
        }
        SymmetricMatrix(out)
    }
}

fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Eigenvalues sorted descending with the matching orthonormal eigenvectors
/// stored column by column.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralFactorization {
    /// `U diag(f(d)) U^T`, symmetrized.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        let mut out = &scaled * self.eigenvectors.transpose();
        symmetrize_in_place(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(|d| d)
    }
}

pub fn spectral_decompose(m: &SymmetricMatrix) -> Result<SpectralFactorization, LinalgError> {
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| LinalgError::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NumericalFailure("non-finite eigenvalue".into()));
    }
    let p = m.order();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralFactorization { eigenvalues, eigenvectors })
}

/// `Σ^{1/2}` and `Σ^{-1/2}` built from one spectral decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningOperator {
    pub sqrt: SymmetricMatrix,
    pub inv_sqrt: SymmetricMatrix,
    /// Smallest eigenvalue after repair.
    pub min_eigenvalue: f64,
    /// Set when at least one eigenvalue was raised to the floor.
    pub clipped: bool,
}

impl WhiteningOperator {
    pub fn identity(order: usize) -> Self {
        WhiteningOperator {
            sqrt: SymmetricMatrix::identity(order),
            inv_sqrt: SymmetricMatrix::identity(order),
            min_eigenvalue: 1.0,
            clipped: false,
        }
    }

    pub fn order(&self) -> usize {
        self.sqrt.order()
    }

    /// Operator of the relabeled matrix `P Σ P^T`, see [`SymmetricMatrix::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        WhiteningOperator {
            sqrt: self.sqrt.permuted(perm),
            inv_sqrt: self.inv_sqrt.permuted(perm),
            min_eigenvalue: self.min_eigenvalue,
            clipped: self.clipped,
        }
    }
}

/// Builds the whitening pair, clipping eigenvalues below `eig_floor`
/// (default `1e-8 * λ_max`).
pub fn whitening_operator(
    m: &SymmetricMatrix,
    eig_floor: Option<f64>,
) -> Result<WhiteningOperator, LinalgError> {
    let mut fact = spectral_decompose(m)?;
    let largest = fact.eigenvalues[0];
    let floor = match eig_floor {
        Some(f) => f,
        None => DEFAULT_RELATIVE_FLOOR * largest,
    };
    if !(floor > 0.0) || largest < floor {
        return Err(LinalgError::DegenerateMatrix { floor });
    }
    let mut clipped = false;
    for d in fact.eigenvalues.iter_mut() {
        if *d < floor {
            *d = floor;
            clipped = true;
        }
    }
    if clipped {
        log::warn!("covariance estimate repaired: eigenvalues clipped at {floor:e}");
    }
    let min_eigenvalue = fact.eigenvalues.min();
    let sqrt = SymmetricMatrix(fact.reconstruct_with(f64::sqrt));
    let inv_sqrt = SymmetricMatrix(fact.reconstruct_with(|d| 1.0 / d.sqrt()));
    Ok(WhiteningOperator { sqrt, inv_sqrt, min_eigenvalue, clipped })
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
