//! JSON result documents. Variable indices are 1-based throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub name: String,
    pub message: String,
    /// Pipeline stage that failed, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameters {
    pub x_path: String,
    pub y_path: String,
    pub sigma_path: Option<String>,
    pub n: usize,
    pub p: usize,
    pub gamma: f64,
    pub grid_count: usize,
    pub grid_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub standardize: bool,
    pub dissimilarity: String,
    /// Target support size for the Lasso and HOLP selections.
    pub select_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    /// `"supplied"` or `"estimated"`.
    pub source: String,
    /// Block correlations `[[ρ₁₁, ρ₁₂], [ρ₂₁, ρ₂₂]]` when estimated.
    pub rho: Option<[[f64; 2]; 2]>,
    pub cluster_sizes: Option<[usize; 2]>,
    /// 1-based members of cluster 1.
    pub cluster_1: Option<Vec<usize>>,
    pub eigenvalues_clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub lambdas: Vec<f64>,
    /// Unthresholded solver output per λ: `β̃̂₀(λ)` for WLasso, `β̂(λ)` for the Lasso.
    pub coefficients: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    /// Selected variables per λ, 1-based.
    pub selected: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_hat: Option<Vec<usize>>,
    /// `MSE_{M̂(λ)}(λ)`, minimized by `λ̂`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCurves {
    /// `MSẼ_K(λ̂)` for `K = 1..p`.
    pub mse_tilde: Vec<f64>,
    /// `MSE_M(λ̂)` for `M = 1..p`.
    pub mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub method: String,
    pub parameters: FitParameters,
    pub selected: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub lambda_hat: Option<f64>,
    pub k_hat: Option<usize>,
    pub m_hat: Option<usize>,
    pub sigma: Option<SigmaReport>,
    pub path: Option<PathReport>,
    pub mse_curves: Option<MseCurves>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub error: Option<ErrorInfo>,
}

impl ResultDocument {
    pub fn new(method: &str, parameters: FitParameters) -> Self {
        ResultDocument {
            schema_version: SCHEMA_VERSION,
            tool: "wlasso".into(),
            version: TOOL_VERSION.into(),
            command: "fit".into(),
            method: method.into(),
            parameters,
            selected: Vec::new(),
            coefficients: Vec::new(),
            lambda_hat: None,
            k_hat: None,
            m_hat: None,
            sigma: None,
            path: None,
            mse_curves: None,
            timings: BTreeMap::new(),
            error: None,
        }
    }
}

pub fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}
