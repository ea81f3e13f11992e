//! Irrepresentable condition check and support-recovery metrics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{SelectorOutput, GRAM_CONDITION_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("the active Gram matrix X_Sᵀ X_S is singular (condition number {condition:e})")]
    SingularActiveGram { condition: f64 },
    #[error("support must be a non-empty proper subset of the columns")]
    EmptySupport,
    #[error("truth must be a non-empty proper subset of the {p} columns")]
    DegenerateTruth { p: usize },
    #[error("index {index} out of range for {p} columns")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("{signs} signs given for a support of size {support}")]
    SignMismatch { signs: usize, support: usize },
    #[error("η = {0} outside [0, 1]")]
    InvalidEta(f64),
}

impl DiagnosticsError {
    pub fn name(&self) -> &'static str {
        match self {
            DiagnosticsError::SingularActiveGram { .. } => "SingularActiveGram",
            DiagnosticsError::EmptySupport => "EmptySupport",
            DiagnosticsError::DegenerateTruth { .. } => "DegenerateTruth",
            DiagnosticsError::IndexOutOfRange { .. } => "IndexOutOfRange",
            DiagnosticsError::SignMismatch { .. } => "SignMismatch",
            DiagnosticsError::InvalidEta(_) => "InvalidEta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ICReport {
    /// Share of inactive columns whose left-hand side exceeds `1 − η`.
    pub violated_fraction: f64,
    /// Inactive column indices, 0-based, in increasing order.
    pub complement: Vec<usize>,
    /// `|(X_{Sᶜ}ᵀ X_S (X_Sᵀ X_S)^{-1} sign(β_S))_j|` for each entry of `complement`.
    pub per_component: Vec<f64>,
    pub eta: f64,
}

/// Evaluates the irrepresentable condition of `x` for the active set
/// `support` with coefficient signs `signs`. `eta = 0` counts a column as
/// violated when its left-hand side is strictly above 1.
pub fn ic_check(x: &DMatrix<f64>, support: &[usize], signs: &[f64], eta: f64) -> Result<ICReport, DiagnosticsError> {
    let p = x.ncols();
    if !(0.0..=1.0).contains(&eta) {
        return Err(DiagnosticsError::InvalidEta(eta));
    }
    let mut s: Vec<usize> = support.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() || s.len() >= p {
        return Err(DiagnosticsError::EmptySupport);
    }
    if let Some(&bad) = s.iter().find(|&&j| j >= p) {
        return Err(DiagnosticsError::IndexOutOfRange { index: bad, p });
    }
    if signs.len() != support.len() {
        return Err(DiagnosticsError::SignMismatch { signs: signs.len(), support: support.len() });
    }
    // signs follow the caller's support order
    let sign_of = |j: usize| signs[support.iter().position(|&k| k == j).unwrap()];

    let xs = x.select_columns(s.iter());
    let gram = xs.tr_mul(&xs);
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= GRAM_CONDITION_LIMIT) {
        return Err(DiagnosticsError::SingularActiveGram { condition });
    }
    let chol = gram.cholesky().ok_or(DiagnosticsError::SingularActiveGram { condition })?;
    let sgn = DVector::from_iterator(s.len(), s.iter().map(|&j| sign_of(j)));
    let w = chol.solve(&sgn);
    let v = &xs * w;

    let complement: Vec<usize> = (0..p).filter(|j| s.binary_search(j).is_err()).collect();
    let per_component: Vec<f64> = complement.iter().map(|&j| x.column(j).dot(&v).abs()).collect();
    let bound = 1.0 - eta;
    let violated = per_component.iter().filter(|&&l| l > bound).count();
    Ok(ICReport {
        violated_fraction: violated as f64 / complement.len() as f64,
        complement,
        per_component,
        eta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub tpr: f64,
    pub fpr: f64,
    pub diff: f64,
}

pub fn recovery_metrics(selected: &[usize], truth: &[usize], p: usize) -> Result<RecoveryMetrics, DiagnosticsError> {
    let mut in_truth = vec![false; p];
    for &j in truth {
        if j >= p {
            return Err(DiagnosticsError::IndexOutOfRange { index: j, p });
        }
        in_truth[j] = true;
    }
    let n_true = in_truth.iter().filter(|&&b| b).count();
    if n_true == 0 || n_true == p {
        return Err(DiagnosticsError::DegenerateTruth { p });
    }
    let mut seen = vec![false; p];
    let (mut tp, mut fp) = (0usize, 0usize);
    for &j in selected {
        if j >= p {
            return Err(DiagnosticsError::IndexOutOfRange { index: j, p });
        }
        if std::mem::replace(&mut seen[j], true) {
            continue;
        }
        if in_truth[j] {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let tpr = tp as f64 / n_true as f64;
    let fpr = fp as f64 / (p - n_true) as f64;
    Ok(RecoveryMetrics { tpr, fpr, diff: tpr - fpr })
}

/// Level maximizing `TPR − FPR` over a list of selections. Ties go to the
/// smaller selection, then to the lexicographically smaller index set.
pub fn best_diff_over_selections(
    selections: &[Vec<usize>],
    truth: &[usize],
    p: usize,
) -> Result<(usize, RecoveryMetrics), DiagnosticsError> {
    let mut best: Option<(usize, RecoveryMetrics)> = None;
    for (level, sel) in selections.iter().enumerate() {
        let m = recovery_metrics(sel, truth, p)?;
        let better = match &best {
            None => true,
            Some((b, bm)) => {
                m.diff > bm.diff
                    || (m.diff == bm.diff
                        && (sel.len() < selections[*b].len()
                            || (sel.len() == selections[*b].len() && sel < &selections[*b])))
            }
        };
        if better {
            best = Some((level, m));
        }
    }
    best.ok_or(DiagnosticsError::EmptySupport)
}

pub fn best_diff_over_levels(
    outputs: &SelectorOutput,
    truth: &[usize],
    p: usize,
) -> Result<(usize, RecoveryMetrics), DiagnosticsError> {
    best_diff_over_selections(&outputs.selected_per_level, truth, p)
}
