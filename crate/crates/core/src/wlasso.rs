//! The whitening Lasso: estimate the correlation structure, whiten the design,
//! solve the generalized Lasso path, then correct each solution with a Top-K
//! magnitude replacement in the whitened coordinates and a Top-M truncation in
//! the original ones. `K`, `M` and λ are chosen from residual sums of squares.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::{estimate_block_model, BlockCorrelationModel, CorrelationError, Dissimilarity};
use crate::correlation::expand_block_model;
use crate::lasso::{generalized_lasso_on_design, lambda_grid, support_of, GridConfig, LassoError, SolverConfig};
use crate::linalg::{whitening_operator, LinalgError, SymmetricMatrix, WhiteningOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WLassoError {
    #[error("correlation estimation failed: {0}")]
    SigmaEstimation(#[source] CorrelationError),
    #[error("whitening failed: {0}")]
    Whitening(#[source] LinalgError),
    #[error("generalized Lasso path failed: {0}")]
    PathSolve(#[source] LassoError),
    #[error("K = {k} outside 1..={p}")]
    InvalidK { k: usize, p: usize },
    #[error("M = {m} outside 1..={p}")]
    InvalidM { m: usize, p: usize },
    #[error("γ = {0} outside (0, 1)")]
    InvalidGamma(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need n >= 2 and p >= 2, got n = {n}, p = {p}")]
    TooSmall { n: usize, p: usize },
}

impl WLassoError {
    pub fn name(&self) -> &'static str {
        match self {
            WLassoError::SigmaEstimation(e) => e.name(),
            WLassoError::Whitening(e) => e.name(),
            WLassoError::PathSolve(e) => e.name(),
            WLassoError::InvalidK { .. } => "InvalidK",
            WLassoError::InvalidM { .. } => "InvalidM",
            WLassoError::InvalidGamma(_) => "InvalidGamma",
            WLassoError::DimensionMismatch { .. } => "DimensionMismatch",
            WLassoError::TooSmall { .. } => "TooSmall",
        }
    }

    /// Pipeline step the error came from.
    pub fn step(&self) -> &'static str {
        match self {
            WLassoError::SigmaEstimation(_) => "sigma_estimation",
            WLassoError::Whitening(_) => "whitening",
            WLassoError::PathSolve(_) => "path_solve",
            _ => "thresholding",
        }
    }
}

/// Ratio threshold `γ` of the MSE stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    gamma: f64,
}

impl ThresholdRule {
    pub fn new(gamma: f64) -> Result<Self, WLassoError> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(ThresholdRule { gamma })
        } else {
            Err(WLassoError::InvalidGamma(gamma))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule { gamma: 0.95 }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Indices sorted by decreasing magnitude; equal magnitudes keep index order.
pub fn magnitude_order(v: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx
}

/// `X̃ = X Σ^{-1/2}`
pub fn whiten_design(x: &DMatrix<f64>, op: &WhiteningOperator) -> Result<DMatrix<f64>, WLassoError> {
    if x.ncols() != op.order() {
        return Err(WLassoError::DimensionMismatch { expected: op.order(), found: x.ncols() });
    }
    Ok(x * op.inv_sqrt.as_matrix())
}

/// Keeps the `k` largest-magnitude entries and gives every other entry the
/// `k`-th largest magnitude, keeping its sign.
pub fn threshold_beta_tilde(beta_tilde0: &DVector<f64>, k: usize) -> Result<DVector<f64>, WLassoError> {
    let p = beta_tilde0.len();
    if k == 0 || k > p {
        return Err(WLassoError::InvalidK { k, p });
    }
    let order = magnitude_order(beta_tilde0);
    let vk = beta_tilde0[order[k - 1]].abs();
    let mut out = beta_tilde0.clone();
    for &j in &order[k..] {
        out[j] = sign(beta_tilde0[j]) * vk;
    }
    Ok(out)
}

/// Keeps the `m` largest-magnitude entries and zeroes the rest.
pub fn threshold_beta(beta0: &DVector<f64>, m: usize) -> Result<DVector<f64>, WLassoError> {
    let p = beta0.len();
    if m == 0 || m > p {
        return Err(WLassoError::InvalidM { m, p });
    }
    let order = magnitude_order(beta0);
    let mut out = beta0.clone();
    for &j in &order[m..] {
        out[j] = 0.0;
    }
    Ok(out)
}

/// `Σ^{-1/2} β̃`
pub fn backtransform(beta_tilde: &DVector<f64>, op: &WhiteningOperator) -> Result<DVector<f64>, WLassoError> {
    if beta_tilde.len() != op.order() {
        return Err(WLassoError::DimensionMismatch { expected: op.order(), found: beta_tilde.len() });
    }
    Ok(op.inv_sqrt.as_matrix() * beta_tilde)
}

/// `‖y − X̃ β̃^{(K)}‖²` for `K = 1..=p` (entry `K-1`).
///
/// Going from `K` to `K+1` only moves one column out of the replaced tail, so
/// the fitted values are carried as `head + v_K · tail` and updated in O(n).
pub fn mse_tilde_curve(y: &DVector<f64>, xt: &DMatrix<f64>, beta_tilde0: &DVector<f64>) -> Vec<f64> {
    let order = magnitude_order(beta_tilde0);
    let signs = beta_tilde0.map(sign);
    let mut tail = xt * &signs;
    let mut head = DVector::zeros(y.len());
    let mut curve = Vec::with_capacity(order.len());
    for &j in &order {
        let col = xt.column(j);
        head.axpy(beta_tilde0[j], &col, 1.0);
        tail.axpy(-signs[j], &col, 1.0);
        let vk = beta_tilde0[j].abs();
        let rss = y
            .iter()
            .zip(head.iter())
            .zip(tail.iter())
            .map(|((yi, hi), ti)| {
                let r = yi - hi - vk * ti;
                r * r
            })
            .sum();
        curve.push(rss);
    }
    curve
}

/// `‖y − X β̂^{(M)}‖²` for `M = 1..=p` (entry `M-1`).
pub fn mse_curve(y: &DVector<f64>, x: &DMatrix<f64>, beta0: &DVector<f64>) -> Vec<f64> {
    let order = magnitude_order(beta0);
    let mut resid = y.clone();
    let mut curve = Vec::with_capacity(order.len());
    for &j in &order {
        resid.axpy(-beta0[j], &x.column(j), 1.0);
        curve.push(resid.norm_squared());
    }
    curve
}

/// Smallest `K >= 1` with `curve[K+1] >= γ · curve[K]` (1-based), or `p` when
/// no such `K` exists.
pub fn select_from_curve(curve: &[f64], rule: &ThresholdRule) -> usize {
    curve
        .windows(2)
        .position(|w| w[1] >= rule.gamma * w[0])
        .map(|i| i + 1)
        .unwrap_or(curve.len())
}

pub fn select_k(
    y: &DVector<f64>,
    xt: &DMatrix<f64>,
    beta_tilde0: &DVector<f64>,
    rule: &ThresholdRule,
) -> (usize, Vec<f64>) {
    let curve = mse_tilde_curve(y, xt, beta_tilde0);
    (select_from_curve(&curve, rule), curve)
}

pub fn select_m(y: &DVector<f64>, x: &DMatrix<f64>, beta0: &DVector<f64>, rule: &ThresholdRule) -> (usize, Vec<f64>) {
    let curve = mse_curve(y, x, beta0);
    (select_from_curve(&curve, rule), curve)
}

/// Index of the smallest criterion value; ties go to the earlier (larger) λ.
pub fn select_lambda(criterion: &[f64]) -> usize {
    assert!(!criterion.is_empty(), "empty λ grid");
    let mut best = 0;
    for (k, v) in criterion.iter().enumerate().skip(1) {
        if *v < criterion[best] {
            best = k;
        }
    }
    best
}

/// Where the correlation matrix comes from.
#[derive(Debug, Clone)]
pub enum SigmaSource {
    /// Block model estimated from the design.
    Estimate(Dissimilarity),
    /// A supplied correlation matrix.
    Known(SymmetricMatrix),
    /// A supplied, already factored, correlation matrix.
    Operator(WhiteningOperator),
}

impl Default for SigmaSource {
    fn default() -> Self {
        SigmaSource::Estimate(Dissimilarity::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WLassoConfig {
    pub rule: ThresholdRule,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    /// Absolute eigenvalue floor; relative default when `None`.
    pub eig_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SigmaSummary {
    Known,
    Estimated(BlockCorrelationModel),
}

/// Everything computed by [`wlasso_fit`], indexed by λ where relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct WLassoFit {
    pub lambdas: Vec<f64>,
    /// Generalized Lasso solutions `β̃̂₀(λ)`.
    pub beta_tilde0: Vec<DVector<f64>>,
    /// Generalized criterion at each `β̃̂₀(λ)`.
    pub objective: Vec<f64>,
    /// `β̃̂^{(K̂)}(λ)`
    pub beta_tilde: Vec<DVector<f64>>,
    /// `Σ^{-1/2} β̃̂(λ)` before truncation.
    pub beta0: Vec<DVector<f64>>,
    /// `β̂^{(M̂)}(λ)`
    pub beta_hat: Vec<DVector<f64>>,
    pub k_hat: Vec<usize>,
    pub m_hat: Vec<usize>,
    pub mse_tilde_curves: Vec<Vec<f64>>,
    pub mse_curves: Vec<Vec<f64>>,
    pub lambda_hat_index: usize,
    pub lambda_hat: f64,
    /// Support of `beta_hat` at `lambda_hat`, 0-based.
    pub selected: Vec<usize>,
    pub sigma: SigmaSummary,
    pub whitening_clipped: bool,
}

impl WLassoFit {
    /// `MSE_{M̂(λ)}(λ)` for each λ.
    pub fn lambda_criterion(&self) -> Vec<f64> {
        self.mse_curves.iter().zip(&self.m_hat).map(|(c, &m)| c[m - 1]).collect()
    }

    /// Support of `beta_hat` at every λ.
    pub fn selections(&self) -> Vec<Vec<usize>> {
        self.beta_hat.iter().map(support_of).collect()
    }
}

/// Wall-clock time per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sigma_estimation: Duration,
    pub whitening: Duration,
    pub path_solve: Duration,
    pub thresholding: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.sigma_estimation + self.whitening + self.path_solve + self.thresholding
    }
}

pub fn wlasso_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: &SigmaSource,
    cfg: &WLassoConfig,
) -> Result<WLassoFit, WLassoError> {
    wlasso_fit_timed(x, y, sigma, cfg).map(|(fit, _)| fit)
}

struct PerLambda {
    k_hat: usize,
    m_hat: usize,
    beta_tilde: DVector<f64>,
    beta0: DVector<f64>,
    beta_hat: DVector<f64>,
    mse_tilde: Vec<f64>,
    mse: Vec<f64>,
}

pub fn wlasso_fit_timed(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma: &SigmaSource,
    cfg: &WLassoConfig,
) -> Result<(WLassoFit, StageTimings), WLassoError> {
    let (n, p) = x.shape();
    if n < 2 || p < 2 {
        return Err(WLassoError::TooSmall { n, p });
    }
    if y.len() != n {
        return Err(WLassoError::DimensionMismatch { expected: n, found: y.len() });
    }
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let (sigma_matrix, summary) = match sigma {
        SigmaSource::Estimate(d) => {
            let model = estimate_block_model(x, *d).map_err(WLassoError::SigmaEstimation)?;
            (Some(expand_block_model(&model)), SigmaSummary::Estimated(model))
        }
        SigmaSource::Known(m) => {
            if m.order() != p {
                return Err(WLassoError::DimensionMismatch { expected: p, found: m.order() });
            }
            (Some(m.clone()), SigmaSummary::Known)
        }
        SigmaSource::Operator(op) => {
            if op.order() != p {
                return Err(WLassoError::DimensionMismatch { expected: p, found: op.order() });
            }
            (None, SigmaSummary::Known)
        }
    };
    timings.sigma_estimation = clock.elapsed();

    let clock = Instant::now();
    let op = match (sigma_matrix, sigma) {
        (Some(m), _) => whitening_operator(&m, cfg.eig_floor).map_err(WLassoError::Whitening)?,
        (None, SigmaSource::Operator(op)) => op.clone(),
        (None, _) => unreachable!(),
    };
    let xt = whiten_design(x, &op)?;
    timings.whitening = clock.elapsed();

    let clock = Instant::now();
    let grid = lambda_grid(x, y, cfg.grid.count, cfg.grid.ratio).map_err(WLassoError::PathSolve)?;
    let path = generalized_lasso_on_design(x, &xt, y, &op, &grid, &cfg.solver).map_err(WLassoError::PathSolve)?;
    timings.path_solve = clock.elapsed();

    let clock = Instant::now();
    let rule = cfg.rule;
    let per_lambda: Vec<PerLambda> = path
        .coefficients
        .par_iter()
        .map(|bt0| -> Result<PerLambda, WLassoError> {
            let (k_hat, mse_tilde) = select_k(y, &xt, bt0, &rule);
            let beta_tilde = threshold_beta_tilde(bt0, k_hat)?;
            let beta0 = backtransform(&beta_tilde, &op)?;
            let (m_hat, mse) = select_m(y, x, &beta0, &rule);
            let beta_hat = threshold_beta(&beta0, m_hat)?;
            Ok(PerLambda { k_hat, m_hat, beta_tilde, beta0, beta_hat, mse_tilde, mse })
        })
        .collect::<Result<_, _>>()?;
    let criterion: Vec<f64> = per_lambda.iter().map(|r| r.mse[r.m_hat - 1]).collect();
    let lambda_hat_index = select_lambda(&criterion);
    timings.thresholding = clock.elapsed();

    let mut fit = WLassoFit {
        lambdas: grid.values().to_vec(),
        beta_tilde0: path.coefficients,
        objective: path.objective,
        beta_tilde: Vec::with_capacity(grid.count()),
        beta0: Vec::with_capacity(grid.count()),
        beta_hat: Vec::with_capacity(grid.count()),
        k_hat: Vec::with_capacity(grid.count()),
        m_hat: Vec::with_capacity(grid.count()),
        mse_tilde_curves: Vec::with_capacity(grid.count()),
        mse_curves: Vec::with_capacity(grid.count()),
        lambda_hat_index,
        lambda_hat: grid.values()[lambda_hat_index],
        selected: Vec::new(),
        sigma: summary,
        whitening_clipped: op.clipped,
    };
    for r in per_lambda {
        fit.k_hat.push(r.k_hat);
        fit.m_hat.push(r.m_hat);
        fit.beta_tilde.push(r.beta_tilde);
        fit.beta0.push(r.beta0);
        fit.beta_hat.push(r.beta_hat);
        fit.mse_tilde_curves.push(r.mse_tilde);
        fit.mse_curves.push(r.mse);
    }
    fit.selected = support_of(&fit.beta_hat[lambda_hat_index]);
    Ok((fit, timings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn v(data: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(data)
    }

    fn random(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        (x, y)
    }

    #[test]
    fn gamma_must_be_open_unit() {
        assert!(ThresholdRule::new(0.0).is_err());
        assert!(ThresholdRule::new(1.0).is_err());
        assert_eq!(ThresholdRule::default().gamma(), 0.95);
    }

    #[test]
    fn top_k_replacement() {
        let b = v(&[3.0, -2.0, 0.5]);
        assert_eq!(threshold_beta_tilde(&b, 2).unwrap(), v(&[3.0, -2.0, 2.0]));
        assert_eq!(threshold_beta_tilde(&b, 3).unwrap(), b);
        assert_eq!(threshold_beta_tilde(&b, 1).unwrap(), v(&[3.0, -3.0, 3.0]));
        let neg = v(&[3.0, -2.0, -0.5]);
        assert_eq!(threshold_beta_tilde(&neg, 2).unwrap(), v(&[3.0, -2.0, -2.0]));
        let flat = v(&[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(threshold_beta_tilde(&flat, 2).unwrap(), flat);
        assert!(matches!(threshold_beta_tilde(&b, 0), Err(WLassoError::InvalidK { .. })));
        assert!(matches!(threshold_beta_tilde(&b, 4), Err(WLassoError::InvalidK { .. })));
    }

    #[test]
    fn top_m_truncation() {
        let b = v(&[3.0, -2.0, 0.5]);
        assert_eq!(threshold_beta(&b, 1).unwrap(), v(&[3.0, 0.0, 0.0]));
        assert_eq!(threshold_beta(&b, 3).unwrap(), b);
        let tie = v(&[1.0, 2.0, -2.0, 0.1]);
        assert_eq!(threshold_beta(&tie, 1).unwrap(), v(&[0.0, 2.0, 0.0, 0.0]));
        assert!(matches!(threshold_beta(&b, 0), Err(WLassoError::InvalidM { .. })));
    }

    #[test]
    fn incremental_curves_match_direct_evaluation() {
        let (x, y) = random(9, 14, 21);
        let (xt, _) = random(9, 14, 22);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let b = DVector::from_fn(14, |i, _| if i == 5 { 0.0 } else { rng.random_range(-3.0..3.0) });
        let fast = mse_tilde_curve(&y, &xt, &b);
        let slow_m = mse_curve(&y, &x, &b);
        for k in 1..=14 {
            let direct = (&y - &xt * threshold_beta_tilde(&b, k).unwrap()).norm_squared();
            assert_abs_diff_eq!(fast[k - 1], direct, epsilon = 1e-9 * direct.max(1.0));
            let direct = (&y - &x * threshold_beta(&b, k).unwrap()).norm_squared();
            assert_abs_diff_eq!(slow_m[k - 1], direct, epsilon = 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn curve_rule() {
        let rule = ThresholdRule::default();
        assert_eq!(select_from_curve(&[5.0, 5.0, 5.0], &rule), 1);
        assert_eq!(select_from_curve(&[10.0, 5.0, 2.0, 1.9, 1.0], &rule), 3);
        assert_eq!(select_from_curve(&[10.0, 5.0, 2.0], &rule), 3);
        assert_eq!(select_from_curve(&[0.0, 0.0], &rule), 1);
        // a larger γ can only push the choice later
        let curve = [10.0, 9.2, 8.0, 7.9, 4.0, 3.99];
        let mut last = 0;
        for g in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let k = select_from_curve(&curve, &ThresholdRule::new(g).unwrap());
            assert!(k >= last);
            last = k;
        }
    }

    #[test]
    fn one_dominant_coefficient_gives_small_k() {
        // X̃ with orthonormal columns, y aligned with column 0
        let xt = DMatrix::identity(6, 6);
        let y = v(&[5.0, 0.05, -0.05, 0.05, -0.05, 0.05]);
        let b = v(&[5.0, 0.01, -0.02, 0.001, 0.01, 0.0]);
        let (k, curve) = select_k(&y, &xt, &b, &ThresholdRule::default());
        let brute: Vec<f64> =
            (1..=6).map(|k| (&y - &xt * threshold_beta_tilde(&b, k).unwrap()).norm_squared()).collect();
        for (a, b) in curve.iter().zip(&brute) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // K = 1 pushes every tail entry to ±5; the curve levels off right after
        assert!(brute[0] > 50.0 && brute[1] < 0.1);
        assert_eq!(k, 2);
    }

    #[test]
    fn single_signal_orthogonal_design_gives_m_one() {
        let x = DMatrix::identity(5, 5);
        let y = v(&[0.05, 4.0, -0.05, 0.05, -0.05]);
        let b0 = v(&[0.0, 3.9, 0.01, -0.01, 0.01]);
        let (m, curve) = select_m(&y, &x, &b0, &ThresholdRule::default());
        let brute: Vec<f64> =
            (1..=5).map(|m| (&y - &x * threshold_beta(&b0, m).unwrap()).norm_squared()).collect();
        for (a, b) in curve.iter().zip(&brute) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(m, 1);
    }

    #[test]
    fn lambda_selection_rules() {
        assert_eq!(select_lambda(&[3.0]), 0);
        assert_eq!(select_lambda(&[5.0, 2.0, 1.0, 2.5, 6.0]), 2);
        assert_eq!(select_lambda(&[5.0, 1.0, 3.0, 1.0]), 1);
    }

    #[test]
    fn whitening_and_backtransform_identities() {
        let (x, _) = random(5, 4, 1);
        let id = WhiteningOperator::identity(4);
        assert_eq!(whiten_design(&x, &id).unwrap(), x);
        let (a, _) = random(4, 4, 2);
        let sigma = SymmetricMatrix::new(&a * a.transpose() + DMatrix::identity(4, 4)).unwrap();
        let op = whitening_operator(&sigma, None).unwrap();
        let w = whiten_design(op.sqrt.as_matrix(), &op).unwrap();
        assert!(crate::linalg::max_abs_diff(&w, &DMatrix::identity(4, 4)) < 1e-6);
        let b = v(&[1.0, -2.0, 0.0, 0.5]);
        let back = backtransform(&(op.sqrt.as_matrix() * &b), &op).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(back[j], b[j], epsilon = 1e-6);
        }
        assert_eq!(backtransform(&DVector::zeros(4), &op).unwrap(), DVector::zeros(4));
        assert!(whiten_design(&DMatrix::zeros(3, 5), &op).is_err());
    }

    #[test]
    fn identity_sigma_reduces_to_lasso_plus_thresholds() {
        let (x, y) = random(15, 8, 5);
        let cfg = WLassoConfig { grid: GridConfig { count: 12, ratio: 1e-2 }, ..Default::default() };
        let fit = wlasso_fit(&x, &y, &SigmaSource::Known(SymmetricMatrix::identity(8)), &cfg).unwrap();
        let grid = lambda_grid(&x, &y, 12, 1e-2).unwrap();
        let lasso = crate::lasso::lasso_path(&x, &y, &grid, &cfg.solver).unwrap();
        for k in 0..12 {
            assert_eq!(fit.beta_tilde0[k], lasso.coefficients[k]);
            let bt = threshold_beta_tilde(&lasso.coefficients[k], fit.k_hat[k]).unwrap();
            assert_eq!(fit.beta0[k], bt);
            let bh = threshold_beta(&bt, fit.m_hat[k]).unwrap();
            assert_eq!(fit.beta_hat[k], bh);
            assert!(support_of(&fit.beta_hat[k]).len() <= fit.m_hat[k]);
        }
        assert_eq!(fit.selected, support_of(&fit.beta_hat[fit.lambda_hat_index]));
        assert_eq!(fit.lambda_hat, fit.lambdas[fit.lambda_hat_index]);
    }

    #[test]
    fn separable_single_signal_is_selected() {
        // orthonormal columns, one strong coefficient
        let n = 8;
        let mut x = DMatrix::zeros(n, 4);
        for j in 0..4 {
            x[(2 * j, j)] = std::f64::consts::FRAC_1_SQRT_2;
            x[(2 * j + 1, j)] = std::f64::consts::FRAC_1_SQRT_2;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // noise orthogonal to every column
        let e = DVector::from_fn(n, |_, _| rng.random_range(-0.05..0.05));
        let e = &e - &x * x.tr_mul(&e);
        let y = &x.column(2) * 6.0 + e;
        let fit = wlasso_fit(&x, &y, &SigmaSource::Known(SymmetricMatrix::identity(4)), &WLassoConfig::default()).unwrap();
        assert_eq!(fit.selected, vec![2]);
        // path agrees with soft thresholding of X^T y
        let xty = x.tr_mul(&y);
        for (k, &lam) in fit.lambdas.iter().enumerate().step_by(9) {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    fit.beta_tilde0[k][j],
                    crate::lasso::soft_threshold(xty[j], lam / 2.0),
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let (x, y) = random(12, 20, 8);
        let cfg = WLassoConfig { grid: GridConfig { count: 20, ratio: 1e-2 }, ..Default::default() };
        let a = wlasso_fit(&x, &y, &SigmaSource::default(), &cfg).unwrap();
        let b = wlasso_fit(&x, &y, &SigmaSource::default(), &cfg).unwrap();
        assert_eq!(a, b);
        for k in 0..a.lambdas.len() {
            assert!(a.k_hat[k] >= 1 && a.k_hat[k] <= 20);
            assert!(a.m_hat[k] >= 1 && a.m_hat[k] <= 20);
            assert!(support_of(&a.beta_hat[k]).len() <= a.m_hat[k]);
            let top: Vec<usize> = magnitude_order(&a.beta0[k])[..a.m_hat[k]].to_vec();
            assert!(support_of(&a.beta_hat[k]).iter().all(|j| top.contains(j)));
        }
        assert!(matches!(a.sigma, SigmaSummary::Estimated(_)));
    }

    #[test]
    fn errors_carry_step() {
        let (x, y) = random(6, 3, 1);
        let err = wlasso_fit(&x, &y, &SigmaSource::Known(SymmetricMatrix::identity(4)), &WLassoConfig::default());
        assert!(matches!(err, Err(WLassoError::DimensionMismatch { .. })));
        let mut xc = x.clone();
        xc.column_mut(1).fill(2.0);
        let err = wlasso_fit(&xc, &y, &SigmaSource::default(), &WLassoConfig::default()).unwrap_err();
        assert_eq!(err.step(), "sigma_estimation");
        assert_eq!(err.name(), "ZeroVarianceColumn");
    }
}
