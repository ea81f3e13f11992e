//! Synthetic data with a two-block correlation structure and a replication
//! runner comparing selectors by support recovery.
//!
//! Replication `r` of a scenario with seed `s` draws everything from a
//! ChaCha20 stream seeded with `s` and positioned on stream `r`, so results
//! do not depend on how replications are scheduled across threads.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{holp_estimate, holp_nested_selections};
use crate::correlation::{expand_block_model, BlockCorrelationModel, Dissimilarity};
use crate::diagnostics::{best_diff_over_selections, recovery_metrics, RecoveryMetrics};
use crate::lasso::{lambda_grid, lasso_path, support_of};
use crate::linalg::{whitening_operator, LinalgError, SymmetricMatrix, WhiteningOperator};
use crate::wlasso::{wlasso_fit, SigmaSource, WLassoConfig};

/// Identifies the generator in result metadata.
pub const RNG_DESCRIPTION: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64(seed), stream = replication index";

const PSD_TOLERANCE: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("block correlation matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NonPsd { min_eigenvalue: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Correlation structure of the predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alphas {
    Identity,
    /// Off-diagonal correlation within the active block, across blocks and
    /// within the inactive block.
    Block { within_active: f64, cross: f64, within_inactive: f64 },
}

impl Alphas {
    pub fn block(within_active: f64, cross: f64, within_inactive: f64) -> Self {
        Alphas::Block { within_active, cross, within_inactive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub p: usize,
    pub n_active: usize,
    /// Value of every non-null coefficient.
    pub b: f64,
    pub alphas: Alphas,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Scenario {
    /// Defaults: 10 active variables, unit noise.
    pub fn new(n: usize, p: usize, b: f64, alphas: Alphas, seed: u64) -> Self {
        Scenario { n, p, n_active: 10, b, alphas, noise_sd: 1.0, seed }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidScenario(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.n_active == 0 || self.n_active >= self.p {
            return bad(format!("need 0 < n_active < p, got n_active = {}, p = {}", self.n_active, self.p));
        }
        if !self.b.is_finite() {
            return bad("b must be finite".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be non-negative, got {}", self.noise_sd));
        }
        if let Alphas::Block { within_active, cross, within_inactive } = self.alphas {
            for a in [within_active, cross, within_inactive] {
                if !(a.abs() < 1.0) {
                    return bad(format!("correlations must lie in (-1, 1), got {a}"));
                }
            }
            let min_eigenvalue = block_min_eigenvalue(self.p, self.n_active, within_active, cross, within_inactive);
            if min_eigenvalue < PSD_TOLERANCE {
                return Err(SimulationError::NonPsd { min_eigenvalue });
            }
        }
        Ok(())
    }

    /// Block model with cluster 1 on `active`.
    pub fn block_model(&self, active: &[usize]) -> Option<BlockCorrelationModel> {
        match self.alphas {
            Alphas::Identity => None,
            Alphas::Block { within_active, cross, within_inactive } => {
                let mut labels = vec![2u8; self.p];
                for &j in active {
                    labels[j] = 1;
                }
                Some(
                    BlockCorrelationModel::new(labels, within_active, cross, within_inactive)
                        .expect("validated scenario"),
                )
            }
        }
    }
}

/// Smallest eigenvalue of the two-block matrix with blocks of size `k` and `p - k`.
///
/// Within-block contrasts give `1 − α` and block-constant vectors give the
/// eigenvalues of the 2×2 quotient matrix.
fn block_min_eigenvalue(p: usize, k: usize, a1: f64, a2: f64, a3: f64) -> f64 {
    let (kf, rf) = (k as f64, (p - k) as f64);
    let mut min = f64::INFINITY;
    if k >= 2 {
        min = min.min(1.0 - a1);
    }
    if p - k >= 2 {
        min = min.min(1.0 - a3);
    }
    let a = 1.0 + (kf - 1.0) * a1;
    let d = 1.0 + (rf - 1.0) * a3;
    let bc = kf * rf * a2 * a2;
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + bc).max(0.0);
    min.min(half_tr - disc.sqrt())
}

/// One simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta: DVector<f64>,
    /// Non-null coefficients, 0-based ascending. Empty when `b = 0`.
    pub truth: Vec<usize>,
    /// Columns carrying the active correlation block, 0-based ascending.
    pub active_block: Vec<usize>,
    /// Canonical column `c` (active block first) lives at column `perm[c]`.
    pub perm: Vec<usize>,
}

/// Draws replications of a scenario; the square root of the canonical
/// correlation matrix is factored once.
#[derive(Debug, Clone)]
pub struct ScenarioSampler {
    scenario: Scenario,
    canonical: Option<WhiteningOperator>,
}

impl ScenarioSampler {
    pub fn new(scenario: Scenario) -> Result<Self, SimulationError> {
        scenario.validate()?;
        let canonical = match scenario.alphas {
            Alphas::Identity => None,
            Alphas::Block { .. } => {
                let active: Vec<usize> = (0..scenario.n_active).collect();
                let sigma = expand_block_model(&scenario.block_model(&active).unwrap());
                Some(whitening_operator(&sigma, None)?)
            }
        };
        Ok(ScenarioSampler { scenario, canonical })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn sample(&self, replication: u64) -> Dataset {
        let s = &self.scenario;
        let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
        rng.set_stream(replication);

        let mut active = rand::seq::index::sample(&mut rng, s.p, s.n_active).into_vec();
        active.sort_unstable();
        let mut is_active = vec![false; s.p];
        for &j in &active {
            is_active[j] = true;
        }
        let perm: Vec<usize> = active.iter().copied().chain((0..s.p).filter(|&j| !is_active[j])).collect();

        let z = DMatrix::from_fn(s.n, s.p, |_, _| StandardNormal.sample(&mut rng));
        let canonical_x = match &self.canonical {
            Some(op) => z * op.sqrt.as_matrix(),
            None => z,
        };
        let mut x = DMatrix::zeros(s.n, s.p);
        for (c, &j) in perm.iter().enumerate() {
            x.set_column(j, &canonical_x.column(c));
        }

        let mut beta = DVector::zeros(s.p);
        for &j in &active {
            beta[j] = s.b;
        }
        let noise = Normal::new(0.0, s.noise_sd).expect("validated noise sd");
        let eps = DVector::from_fn(s.n, |_, _| noise.sample(&mut rng));
        let y = &x * &beta + eps;
        let truth = support_of(&beta);
        Dataset { x, y, beta, truth, active_block: active, perm }
    }

    /// Whitening operator of the population correlation of `ds`.
    pub fn known_operator(&self, ds: &Dataset) -> WhiteningOperator {
        match &self.canonical {
            Some(op) => op.permuted(&ds.perm),
            None => WhiteningOperator::identity(self.scenario.p),
        }
    }

    pub fn population_sigma(&self, ds: &Dataset) -> SymmetricMatrix {
        match self.scenario.block_model(&ds.active_block) {
            Some(m) => expand_block_model(&m),
            None => SymmetricMatrix::identity(self.scenario.p),
        }
    }
}

/// Draws replication 0 of `s`.
pub fn generate_dataset(s: &Scenario) -> Result<Dataset, SimulationError> {
    Ok(ScenarioSampler::new(*s)?.sample(0))
}

/// Estimated `(α̂₁, α̂₂, α̂₃)` read off a fitted block model. The active
/// cluster is the one holding most of `active`; ties pick the smaller cluster.
pub fn alpha_estimates(model: &BlockCorrelationModel, active: &[usize]) -> [f64; 3] {
    let in_one = active.iter().filter(|&&j| model.cluster_of[j] == 1).count();
    let in_two = active.len() - in_one;
    let one_is_active = match in_one.cmp(&in_two) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => model.cluster_sizes[0] <= model.cluster_sizes[1],
    };
    if one_is_active {
        [model.rho[0][0], model.rho[0][1], model.rho[1][1]]
    } else {
        [model.rho[1][1], model.rho[0][1], model.rho[0][0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Whitening Lasso with the block model estimated from the data.
    Wlasso,
    /// Whitening Lasso with the population correlation matrix.
    WlassoKnown,
    Lasso,
    Holp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Wlasso => "wlasso",
            Method::WlassoKnown => "wlasso-known",
            Method::Lasso => "lasso",
            Method::Holp => "holp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wlasso" => Some(Method::Wlasso),
            "wlasso-known" => Some(Method::WlassoKnown),
            "lasso" => Some(Method::Lasso),
            "holp" => Some(Method::Holp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Parameter chosen by the method's own data-driven rule.
    Selected,
    /// Parameter maximizing `TPR − FPR` against the truth.
    Best,
}

/// One (replication, method, variant) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub replication: u64,
    pub method: Method,
    pub variant: Variant,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub diff: Option<f64>,
    /// λ for path methods, `s` for HOLP.
    pub level: Option<f64>,
    pub n_selected: Option<usize>,
    pub error: Option<String>,
}

impl MethodRecord {
    fn ok(replication: u64, method: Method, variant: Variant, m: RecoveryMetrics, level: f64, n_selected: usize) -> Self {
        MethodRecord {
            replication,
            method,
            variant,
            tpr: Some(m.tpr),
            fpr: Some(m.fpr),
            diff: Some(m.diff),
            level: Some(level),
            n_selected: Some(n_selected),
            error: None,
        }
    }

    fn failed(replication: u64, method: Method, variant: Variant, error: &str) -> Self {
        MethodRecord {
            replication,
            method,
            variant,
            tpr: None,
            fpr: None,
            diff: None,
            level: None,
            n_selected: None,
            error: Some(error.to_string()),
        }
    }

    pub fn metrics(&self) -> Option<RecoveryMetrics> {
        Some(RecoveryMetrics { tpr: self.tpr?, fpr: self.fpr?, diff: self.diff? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub wlasso: WLassoConfig,
    /// Clustering dissimilarity for the estimated-Σ method.
    pub dissimilarity: Dissimilarity,
}

/// Mean and sample standard deviation over successful replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub variant: Variant,
    pub successes: usize,
    pub failures: usize,
    pub mean_tpr: f64,
    pub sd_tpr: f64,
    pub mean_fpr: f64,
    pub sd_fpr: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub replications: u64,
    pub rng: String,
    /// Ordered by replication, then method, then variant.
    pub records: Vec<MethodRecord>,
    pub aggregates: Vec<MethodAggregate>,
    /// Wall-clock seconds per replication.
    pub seconds: Vec<f64>,
}

impl ReplicationSummary {
    pub fn metrics(&self, method: Method, variant: Variant) -> Vec<RecoveryMetrics> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.variant == variant)
            .filter_map(|r| r.metrics())
            .collect()
    }

    pub fn aggregate(&self, method: Method, variant: Variant) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.variant == variant)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_wlasso(
    rep: u64,
    method: Method,
    ds: &Dataset,
    sigma: SigmaSource,
    cfg: &RunConfig,
    p: usize,
    out: &mut Vec<MethodRecord>,
) {
    let fit = match wlasso_fit(&ds.x, &ds.y, &sigma, &cfg.wlasso) {
        Ok(f) => f,
        Err(e) => {
            out.push(MethodRecord::failed(rep, method, Variant::Selected, e.name()));
            out.push(MethodRecord::failed(rep, method, Variant::Best, e.name()));
            return;
        }
    };
    match recovery_metrics(&fit.selected, &ds.truth, p) {
        Ok(m) => out.push(MethodRecord::ok(rep, method, Variant::Selected, m, fit.lambda_hat, fit.selected.len())),
        Err(e) => out.push(MethodRecord::failed(rep, method, Variant::Selected, e.name())),
    }
    let selections = fit.selections();
    match best_diff_over_selections(&selections, &ds.truth, p) {
        Ok((k, m)) => out.push(MethodRecord::ok(rep, method, Variant::Best, m, fit.lambdas[k], selections[k].len())),
        Err(e) => out.push(MethodRecord::failed(rep, method, Variant::Best, e.name())),
    }
}

fn run_replication(sampler: &ScenarioSampler, methods: &[Method], rep: u64, cfg: &RunConfig) -> Vec<MethodRecord> {
    let ds = sampler.sample(rep);
    let p = sampler.scenario.p;
    let mut out = Vec::new();
    for &method in methods {
        match method {
            Method::Wlasso => run_wlasso(rep, method, &ds, SigmaSource::Estimate(cfg.dissimilarity), cfg, p, &mut out),
            Method::WlassoKnown => {
                let op = sampler.known_operator(&ds);
                run_wlasso(rep, method, &ds, SigmaSource::Operator(op), cfg, p, &mut out)
            }
            Method::Lasso => {
                let g = cfg.wlasso.grid;
                let result = lambda_grid(&ds.x, &ds.y, g.count, g.ratio)
                    .and_then(|grid| lasso_path(&ds.x, &ds.y, &grid, &cfg.wlasso.solver));
                match result {
                    Ok(path) => {
                        let sels: Vec<Vec<usize>> = (0..path.len()).map(|k| path.support(k)).collect();
                        match best_diff_over_selections(&sels, &ds.truth, p) {
                            Ok((k, m)) => out.push(MethodRecord::ok(
                                rep,
                                method,
                                Variant::Best,
                                m,
                                path.grid.values()[k],
                                sels[k].len(),
                            )),
                            Err(e) => out.push(MethodRecord::failed(rep, method, Variant::Best, e.name())),
                        }
                    }
                    Err(e) => out.push(MethodRecord::failed(rep, method, Variant::Best, e.name())),
                }
            }
            Method::Holp => match holp_estimate(&ds.x, &ds.y) {
                Ok(beta) => {
                    let sels = holp_nested_selections(&beta);
                    match best_diff_over_selections(&sels, &ds.truth, p) {
                        Ok((k, m)) => {
                            out.push(MethodRecord::ok(rep, method, Variant::Best, m, (k + 1) as f64, k + 1))
                        }
                        Err(e) => out.push(MethodRecord::failed(rep, method, Variant::Best, e.name())),
                    }
                }
                Err(e) => out.push(MethodRecord::failed(rep, method, Variant::Best, e.name())),
            },
        }
    }
    out
}

/// Runs `replications` independent replications on the current rayon pool.
pub fn run_scenario(
    scenario: &Scenario,
    methods: &[Method],
    replications: u64,
    cfg: &RunConfig,
) -> Result<ReplicationSummary, SimulationError> {
    if replications == 0 {
        return Err(SimulationError::InvalidScenario("replications must be at least 1".into()));
    }
    let sampler = ScenarioSampler::new(*scenario)?;
    let mut methods: Vec<Method> = methods.to_vec();
    methods.sort();
    methods.dedup();
    let per_rep: Vec<(Vec<MethodRecord>, f64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let clock = Instant::now();
            let records = run_replication(&sampler, &methods, rep, cfg);
            (records, clock.elapsed().as_secs_f64())
        })
        .collect();
    let mut records = Vec::new();
    let mut seconds = Vec::with_capacity(per_rep.len());
    for (r, s) in per_rep {
        records.extend(r);
        seconds.push(s);
    }

    let mut aggregates = Vec::new();
    for &method in &methods {
        for variant in [Variant::Selected, Variant::Best] {
            let rows: Vec<&MethodRecord> =
                records.iter().filter(|r| r.method == method && r.variant == variant).collect();
            if rows.is_empty() {
                continue;
            }
            let ok: Vec<RecoveryMetrics> = rows.iter().filter_map(|r| r.metrics()).collect();
            let (mean_tpr, sd_tpr) = mean_sd(&ok.iter().map(|m| m.tpr).collect::<Vec<_>>());
            let (mean_fpr, sd_fpr) = mean_sd(&ok.iter().map(|m| m.fpr).collect::<Vec<_>>());
            let (mean_diff, sd_diff) = mean_sd(&ok.iter().map(|m| m.diff).collect::<Vec<_>>());
            aggregates.push(MethodAggregate {
                method,
                variant,
                successes: ok.len(),
                failures: rows.len() - ok.len(),
                mean_tpr,
                sd_tpr,
                mean_fpr,
                sd_fpr,
                mean_diff,
                sd_diff,
            });
        }
    }
    Ok(ReplicationSummary {
        scenario: *scenario,
        methods,
        replications,
        rng: RNG_DESCRIPTION.to_string(),
        records,
        aggregates,
        seconds,
    })
}
