//! Coordinate-descent Lasso over a geometric λ grid, and the generalized Lasso
//! with an invertible whitening penalty solved through the substitution
//! `θ = Σ^{-1/2} β̃`.
//!
//! All criteria use the unnormalized scaling `‖y − Xβ‖² + λ‖β‖₁`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::WhiteningOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LassoError {
    #[error("empty design or response")]
    EmptyData,
    #[error("λ_max is zero: the response is orthogonal to every column")]
    DegenerateGrid,
    #[error("invalid λ grid: {0}")]
    InvalidGrid(String),
    #[error("invalid solver setting: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite values in the design or response")]
    NonFinite,
    #[error("coordinate descent did not converge at λ index {lambda_index}")]
    NotConverged {
        lambda_index: usize,
        /// Path computed up to and including the failing λ.
        path: Box<RegularizationPath>,
    },
}

impl LassoError {
    pub fn name(&self) -> &'static str {
        match self {
            LassoError::EmptyData => "EmptyData",
            LassoError::DegenerateGrid => "DegenerateGrid",
            LassoError::InvalidGrid(_) => "InvalidGrid",
            LassoError::InvalidConfig(_) => "InvalidConfig",
            LassoError::DimensionMismatch { .. } => "DimensionMismatch",
            LassoError::NonFinite => "NonFinite",
            LassoError::NotConverged { .. } => "NotConverged",
        }
    }
}

/// Strictly decreasing positive penalty levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn from_values(values: Vec<f64>) -> Result<Self, LassoError> {
        if values.is_empty() {
            return Err(LassoError::InvalidGrid("no values".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(LassoError::InvalidGrid("values must be finite and positive".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LassoError::InvalidGrid("values must be strictly decreasing".into()));
        }
        Ok(LambdaGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn truncated(&self, len: usize) -> Self {
        LambdaGrid { values: self.values[..len].to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub count: usize,
    pub ratio: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { count: 100, ratio: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the largest coefficient change in a full sweep.
    pub tol: f64,
    /// Cap on coordinate sweeps per λ.
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-7, max_iter: 10_000 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), LassoError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(LassoError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(LassoError::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Smallest λ with an all-zero solution: `2 max_j |X_jᵀ y|`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64, LassoError> {
    check_data(x, y)?;
    let corr = x.tr_mul(y);
    Ok(2.0 * corr.amax())
}

/// Geometric grid from `λ_max` down to `ratio · λ_max`.
pub fn lambda_grid(x: &DMatrix<f64>, y: &DVector<f64>, count: usize, ratio: f64) -> Result<LambdaGrid, LassoError> {
    if count < 2 {
        return Err(LassoError::InvalidGrid(format!("count must be at least 2, got {count}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(LassoError::InvalidGrid(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    let top = lambda_max(x, y)?;
    if !(top > 0.0) {
        return Err(LassoError::DegenerateGrid);
    }
    let last = (count - 1) as f64;
    let values = (0..count).map(|k| top * ratio.powf(k as f64 / last)).collect();
    LambdaGrid::from_values(values)
}

fn check_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), LassoError> {
    if x.nrows() == 0 || x.ncols() == 0 || y.is_empty() {
        return Err(LassoError::EmptyData);
    }
    if x.nrows() != y.len() {
        return Err(LassoError::DimensionMismatch { expected: x.nrows(), found: y.len() });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(LassoError::NonFinite);
    }
    Ok(())
}

/// Solutions along a λ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationPath {
    pub grid: LambdaGrid,
    /// One coefficient vector per grid value.
    pub coefficients: Vec<DVector<f64>>,
    /// Criterion value at each solution.
    pub objective: Vec<f64>,
    /// Coordinate sweeps spent at each λ.
    pub sweeps: Vec<usize>,
}

impl RegularizationPath {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn support(&self, k: usize) -> Vec<usize> {
        support_of(&self.coefficients[k])
    }
}

pub fn support_of(v: &DVector<f64>) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `‖y − Xβ‖² + λ‖β‖₁`
pub fn lasso_objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let r = y - x * beta;
    r.norm_squared() + lambda * beta.lp_norm(1)
}

/// `‖y − X̃β̃‖² + λ‖Σ^{-1/2}β̃‖₁`
pub fn generalized_objective(
    xt: &DMatrix<f64>,
    y: &DVector<f64>,
    op: &WhiteningOperator,
    beta_tilde: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let r = y - xt * beta_tilde;
    let d = op.inv_sqrt.as_matrix() * beta_tilde;
    r.norm_squared() + lambda * d.lp_norm(1)
}

const NEWTON_EVERY: usize = 10;
const NEWTON_MAX_ACTIVE: usize = 500;

/// Coordinate-descent state for one design.
struct Solver<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    col_sq: Vec<f64>,
    /// `max_j |2X_jᵀy|`, the scale of the gradient.
    grad_scale: f64,
    tol: f64,
    max_iter: usize,
}

enum Outcome {
    Converged(usize),
    Exhausted(usize),
}

impl<'a> Solver<'a> {
    fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, cfg: &SolverConfig) -> Self {
        let col_sq = x.column_iter().map(|c| c.norm_squared()).collect();
        let grad_scale = 2.0 * x.tr_mul(y).amax();
        Solver { x, y, col_sq, grad_scale, tol: cfg.tol, max_iter: cfg.max_iter }
    }

    /// One pass over `coords`, returns the largest coefficient change.
    fn sweep(&self, coords: impl Iterator<Item = usize>, beta: &mut DVector<f64>, r: &mut DVector<f64>, lambda: f64) -> f64 {
        let half = 0.5 * lambda;
        let mut max_change = 0.0f64;
        for j in coords {
            let sq = self.col_sq[j];
            if sq == 0.0 {
                continue;
            }
            let col = self.x.column(j);
            let old = beta[j];
            let rho = col.dot(r) + sq * old;
            let new = soft_threshold(rho, half) / sq;
            if new != old {
                r.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }

    /// Largest violation of the optimality conditions `2X_jᵀr ∈ λ∂|β_j|`.
    fn kkt_violation(&self, beta: &DVector<f64>, r: &DVector<f64>, lambda: f64) -> f64 {
        let g = self.x.tr_mul(r) * 2.0;
        let mut worst = 0.0f64;
        for j in 0..beta.len() {
            if self.col_sq[j] == 0.0 {
                continue;
            }
            let v = if beta[j] == 0.0 {
                (g[j].abs() - lambda).max(0.0)
            } else {
                (g[j] - lambda * beta[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    fn objective(&self, beta: &DVector<f64>, r: &DVector<f64>, lambda: f64) -> f64 {
        r.norm_squared() + lambda * beta.lp_norm(1)
    }

    /// Minimizes the criterion at `lambda` starting from `beta`.
    fn solve(&self, beta: &mut DVector<f64>, lambda: f64) -> Outcome {
        let p = beta.len();
        let kkt_tol = 10.0 * self.tol * self.grad_scale.max(1.0);
        let mut r = self.y - self.x * &*beta;
        let mut sweeps = 0usize;
        let mut last_obj = self.objective(beta, &r, lambda);
        loop {
            let change = self.sweep(0..p, beta, &mut r, lambda);
            sweeps += 1;
            debug_assert!({
                let obj = self.objective(beta, &r, lambda);
                let ok = obj <= last_obj + 1e-9 * last_obj.abs().max(1.0);
                last_obj = obj;
                ok
            });
            if change < self.tol {
                let support: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
                if !support.is_empty() {
                    self.sign_consistent_step(&support, beta, &mut r, lambda);
                }
                r = self.y - self.x * &*beta;
                if self.kkt_violation(beta, &r, lambda) <= kkt_tol {
                    return Outcome::Converged(sweeps);
                }
            }
            if sweeps >= self.max_iter {
                return Outcome::Exhausted(sweeps);
            }
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            if active.is_empty() {
                continue;
            }
            let mut inner = 0usize;
            loop {
                let change = self.sweep(active.iter().copied(), beta, &mut r, lambda);
                sweeps += 1;
                inner += 1;
                debug_assert!({
                    let obj = self.objective(beta, &r, lambda);
                    let ok = obj <= last_obj + 1e-9 * last_obj.abs().max(1.0);
                    last_obj = obj;
                    ok
                });
                if change < self.tol || inner.is_multiple_of(NEWTON_EVERY) {
                    let support: Vec<usize> = active.iter().copied().filter(|&j| beta[j] != 0.0).collect();
                    if self.sign_consistent_step(&support, beta, &mut r, lambda) || change < self.tol {
                        break;
                    }
                }
                if sweeps >= self.max_iter {
                    return Outcome::Exhausted(sweeps);
                }
            }
            debug_assert!({
                last_obj = self.objective(beta, &r, lambda);
                true
            });
        }
    }

    /// Active-set refinement: moves toward the minimizer over `active` with
    /// the current signs held fixed, dropping coordinates that reach zero on
    /// the way. When the active columns are linearly dependent the move is
    /// along the null-space direction that lowers `‖β‖₁`, which leaves the fit
    /// unchanged. Returns true when the sign-consistent minimizer was reached.
    fn sign_consistent_step(&self, active: &[usize], beta: &mut DVector<f64>, r: &mut DVector<f64>, lambda: f64) -> bool {
        if active.len() > NEWTON_MAX_ACTIVE {
            return false;
        }
        let start = self.objective(beta, r, lambda);
        let saved = beta.clone();
        let mut set: Vec<usize> = active.to_vec();
        let mut reached = false;
        while !set.is_empty() {
            let a = set.len();
            let xa = self.x.select_columns(set.iter());
            let signs = DVector::from_iterator(a, set.iter().map(|&j| beta[j].signum()));
            let current = DVector::from_iterator(a, set.iter().map(|&j| beta[j]));
            let full_rank = a <= self.x.nrows();
            let chol = if full_rank { xa.tr_mul(&xa).cholesky() } else { None };
            let (direction, limit) = match chol {
                Some(chol) => {
                    let rhs = xa.tr_mul(self.y) - &signs * (0.5 * lambda);
                    (chol.solve(&rhs) - &current, 1.0)
                }
                None => match null_space_descent(&xa, &signs) {
                    Some(d) => (d, f64::INFINITY),
                    None => break,
                },
            };
            let mut t = limit;
            for i in 0..a {
                if direction[i] * signs[i] < 0.0 {
                    t = t.min(-current[i] / direction[i]);
                }
            }
            if !t.is_finite() {
                break;
            }
            for (i, &j) in set.iter().enumerate() {
                beta[j] = current[i] + t * direction[i];
            }
            if t >= limit {
                reached = true;
                break;
            }
            // coordinates that hit zero leave the set
            let before = set.len();
            set.retain(|&j| {
                let keep = beta[j] * saved[j].signum() > 1e-14 * saved[j].abs();
                if !keep {
                    beta[j] = 0.0;
                }
                keep
            });
            if set.len() == before {
                break;
            }
        }
        let r_new = self.y - self.x * &*beta;
        let obj = r_new.norm_squared() + lambda * beta.lp_norm(1);
        if obj <= start {
            *r = r_new;
            reached
        } else {
            *beta = saved;
            false
        }
    }
}

/// `−P s` with `P` the projector onto the null space of `xa`, or `None` when
/// that component is negligible.
fn null_space_descent(xa: &DMatrix<f64>, signs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = xa.clone().svd(false, true);
    let v_t = svd.v_t?;
    let top = svd.singular_values.max();
    let mut row_part = DVector::zeros(signs.len());
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > 1e-10 * top {
            let v = v_t.row(k).transpose();
            row_part += &v * v.dot(signs);
        }
    }
    let d = row_part - signs;
    (d.norm() > 1e-8 * signs.norm()).then_some(d)
}

/// Single-λ solve, optionally warm-started.
pub fn lasso_solve(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    cfg: &SolverConfig,
    warm_start: Option<&DVector<f64>>,
) -> Result<DVector<f64>, LassoError> {
    check_data(x, y)?;
    cfg.validate()?;
    let mut beta = match warm_start {
        Some(b) if b.len() == x.ncols() => b.clone(),
        Some(b) => return Err(LassoError::DimensionMismatch { expected: x.ncols(), found: b.len() }),
        None => DVector::zeros(x.ncols()),
    };
    let solver = Solver::new(x, y, cfg);
    match solver.solve(&mut beta, lambda) {
        Outcome::Converged(_) => Ok(beta),
        Outcome::Exhausted(sweeps) => {
            let grid = LambdaGrid::from_values(vec![lambda])?;
            let objective = vec![lasso_objective(x, y, &beta, lambda)];
            Err(LassoError::NotConverged {
                lambda_index: 0,
                path: Box::new(RegularizationPath { grid, coefficients: vec![beta], objective, sweeps: vec![sweeps] }),
            })
        }
    }
}

/// Warm-started coordinate descent along `grid`, largest λ first.
pub fn lasso_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
) -> Result<RegularizationPath, LassoError> {
    check_data(x, y)?;
    cfg.validate()?;
    let solver = Solver::new(x, y, cfg);
    let mut beta = DVector::zeros(x.ncols());
    let mut coefficients = Vec::with_capacity(grid.count());
    let mut objective = Vec::with_capacity(grid.count());
    let mut sweeps = Vec::with_capacity(grid.count());
    for (k, &lambda) in grid.values().iter().enumerate() {
        let outcome = solver.solve(&mut beta, lambda);
        coefficients.push(beta.clone());
        objective.push(lasso_objective(x, y, &beta, lambda));
        match outcome {
            Outcome::Converged(s) => sweeps.push(s),
            Outcome::Exhausted(s) => {
                sweeps.push(s);
                let path = RegularizationPath { grid: grid.truncated(k + 1), coefficients, objective, sweeps };
                return Err(LassoError::NotConverged { lambda_index: k, path: Box::new(path) });
            }
        }
    }
    Ok(RegularizationPath { grid: grid.clone(), coefficients, objective, sweeps })
}

/// Path of `β̃̂₀(λ) = argmin ‖y − X̃β̃‖² + λ‖Σ^{-1/2}β̃‖₁` for `X̃ = XΣ^{-1/2}`.
///
/// The Lasso is solved in `θ = Σ^{-1/2}β̃` on the design `X̃Σ^{1/2}` and mapped
/// back with `β̃ = Σ^{1/2}θ`. Objectives are re-evaluated on the generalized
/// criterion.
pub fn generalized_lasso_whitened(
    xt: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &WhiteningOperator,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
) -> Result<RegularizationPath, LassoError> {
    if xt.ncols() != penalty.order() {
        return Err(LassoError::DimensionMismatch { expected: penalty.order(), found: xt.ncols() });
    }
    let x = xt * penalty.sqrt.as_matrix();
    generalized_lasso_on_design(&x, xt, y, penalty, grid, cfg)
}

/// Same as [`generalized_lasso_whitened`] when the unwhitened design `x` is
/// already at hand.
pub(crate) fn generalized_lasso_on_design(
    x: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &WhiteningOperator,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
) -> Result<RegularizationPath, LassoError> {
    if x.ncols() != penalty.order() {
        return Err(LassoError::DimensionMismatch { expected: penalty.order(), found: x.ncols() });
    }
    let map = |path: RegularizationPath| -> RegularizationPath {
        let sqrt = penalty.sqrt.as_matrix();
        let coefficients: Vec<DVector<f64>> = path.coefficients.iter().map(|t| sqrt * t).collect();
        let objective = coefficients
            .iter()
            .zip(path.grid.values())
            .map(|(b, &l)| generalized_objective(xt, y, penalty, b, l))
            .collect();
        RegularizationPath { grid: path.grid, coefficients, objective, sweeps: path.sweeps }
    };
    match lasso_path(x, y, grid, cfg) {
        Ok(path) => Ok(map(path)),
        Err(LassoError::NotConverged { lambda_index, path }) => {
            Err(LassoError::NotConverged { lambda_index, path: Box::new(map(*path)) })
        }
        Err(e) => Err(e),
    }
}
