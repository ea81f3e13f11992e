//! Block-structured correlation estimation: sample correlation, a two-cluster
//! complete-linkage cut and block averaging.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, SymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("at least two observations are required, found {0}")]
    TooFewSamples(usize),
    #[error("at least two columns are required, found {0}")]
    TooFewColumns(usize),
    #[error("zero-variance columns (0-based): {indices:?}")]
    ZeroVarianceColumn { indices: Vec<usize> },
    #[error("data contain non-finite values")]
    NonFinite,
    #[error("invalid clustering: {0}")]
    InvalidClustering(String),
    #[error("invalid block coefficients: {0}")]
    InvalidCoefficients(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl CorrelationError {
    pub fn name(&self) -> &'static str {
        match self {
            CorrelationError::TooFewSamples(_) => "TooFewSamples",
            CorrelationError::TooFewColumns(_) => "TooFewColumns",
            CorrelationError::ZeroVarianceColumn { .. } => "ZeroVarianceColumn",
            CorrelationError::NonFinite => "NonFinite",
            CorrelationError::InvalidClustering(_) => "InvalidClustering",
            CorrelationError::InvalidCoefficients(_) => "InvalidCoefficients",
            CorrelationError::Linalg(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleCorrelation {
    pub r: SymmetricMatrix,
    pub column_sds: Vec<f64>,
}

impl SampleCorrelation {
    pub fn order(&self) -> usize {
        self.r.order()
    }
}

/// Sample correlation with the `1/(n-1)` covariance normalization.
pub fn sample_correlation(x: &DMatrix<f64>) -> Result<SampleCorrelation, CorrelationError> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(CorrelationError::TooFewSamples(n));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    let mut centered = x.clone();
    let mut zero = Vec::new();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        let mean = col.mean();
        let scale = col.amax();
        col.add_scalar_mut(-mean);
        if col.amax() <= 1e-13 * scale || col.iter().all(|&v| v == 0.0) {
            zero.push(j);
        }
    }
    if !zero.is_empty() {
        return Err(CorrelationError::ZeroVarianceColumn { indices: zero });
    }
    let mut s = centered.transpose() * &centered;
    s /= (n - 1) as f64;
    let sds: Vec<f64> = (0..p).map(|i| s[(i, i)].sqrt()).collect();
    for j in 0..p {
        for i in 0..p {
            s[(i, j)] = if i == j { 1.0 } else { s[(i, j)] / (sds[i] * sds[j]) };
        }
    }
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(SampleCorrelation { r: SymmetricMatrix::new(s)?, column_sds: sds })
}

/// Dissimilarity fed to the agglomerative clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Dissimilarity {
    /// `1 - R[i][j]`
    OneMinusCorrelation,
    /// `1 - |R[i][j]|`
    OneMinusAbsCorrelation,
    /// Euclidean distance between rows `i` and `j` of `R`.
    #[default]
    RowEuclidean,
}

impl Dissimilarity {
    pub fn matrix(self, r: &SampleCorrelation) -> DMatrix<f64> {
        let rm = r.r.as_matrix();
        let p = rm.nrows();
        match self {
            Dissimilarity::OneMinusCorrelation => DMatrix::from_fn(p, p, |i, j| 1.0 - rm[(i, j)]),
            Dissimilarity::OneMinusAbsCorrelation => DMatrix::from_fn(p, p, |i, j| 1.0 - rm[(i, j)].abs()),
            Dissimilarity::RowEuclidean => {
                let g = rm * rm;
                DMatrix::from_fn(p, p, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0).sqrt()
                    }
                })
            }
        }
    }
}

pub fn complete_linkage_two_clusters(r: &SampleCorrelation) -> Vec<u8> {
    complete_linkage_two_clusters_with(r, Dissimilarity::default())
}

/// Agglomerative complete-linkage clustering cut at two clusters.
///
/// Labels are 1 or 2; cluster 1 always holds column 0. Among equally distant
/// pairs the one with the lexicographically smallest (lower, upper) cluster
/// representatives merges first, where a cluster's representative is its
/// smallest column index.
pub fn complete_linkage_two_clusters_with(r: &SampleCorrelation, dissimilarity: Dissimilarity) -> Vec<u8> {
    let p = r.order();
    assert!(p >= 2, "clustering needs at least two columns");
    let mut dist = dissimilarity.matrix(r);

    let mut active = vec![true; p];
    let mut members: Vec<Vec<usize>> = (0..p).map(|i| vec![i]).collect();
    let mut nn = vec![usize::MAX; p];
    let mut nn_dist = vec![f64::INFINITY; p];

    let nearest = |dist: &DMatrix<f64>, active: &[bool], i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..active.len() {
            if j != i && active[j] {
                let d = dist[(i, j)];
                if d < best.1 || best.0 == usize::MAX {
                    best = (j, d);
                }
            }
        }
        best
    };
    for i in 0..p {
        let (j, d) = nearest(&dist, &active, i);
        nn[i] = j;
        nn_dist[i] = d;
    }

    let mut remaining = p;
    while remaining > 2 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..p {
            if !active[i] {
                continue;
            }
            let (lo, hi) = if i < nn[i] { (i, nn[i]) } else { (nn[i], i) };
            let cand = (nn_dist[i], lo, hi);
            best = match best {
                None => Some(cand),
                Some(b) => {
                    let better = cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2));
                    Some(if better { cand } else { b })
                }
            };
        }
        let (_, a, b) = best.expect("at least two active clusters");
        for k in 0..p {
            if active[k] && k != a && k != b {
                let d = dist[(a, k)].max(dist[(b, k)]);
                dist[(a, k)] = d;
                dist[(k, a)] = d;
            }
        }
        active[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        remaining -= 1;
        for k in 0..p {
            if active[k] && (k == a || nn[k] == a || nn[k] == b) {
                let (j, d) = nearest(&dist, &active, k);
                nn[k] = j;
                nn_dist[k] = d;
            }
        }
    }

    let mut labels = vec![2u8; p];
    // slot 0 is never absorbed into a larger index, so it names cluster 1
    for &i in &members[0] {
        labels[i] = 1;
    }
    labels
}

/// Two-cluster block model of a correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCorrelationModel {
    /// Cluster label (1 or 2) of every column.
    pub cluster_of: Vec<u8>,
    /// `rho[a][b]` is the common correlation between clusters `a+1` and `b+1`.
    pub rho: [[f64; 2]; 2],
    pub cluster_sizes: [usize; 2],
}

impl BlockCorrelationModel {
    pub fn new(cluster_of: Vec<u8>, within_1: f64, cross: f64, within_2: f64) -> Result<Self, CorrelationError> {
        let cluster_sizes = validate_labels(&cluster_of)?;
        for v in [within_1, cross, within_2] {
            if !v.is_finite() || v.abs() > 1.0 {
                return Err(CorrelationError::InvalidCoefficients(format!("|{v}| > 1")));
            }
        }
        Ok(BlockCorrelationModel {
            cluster_of,
            rho: [[within_1, cross], [cross, within_2]],
            cluster_sizes,
        })
    }

    pub fn order(&self) -> usize {
        self.cluster_of.len()
    }

    /// Column indices belonging to `cluster` (1 or 2).
    pub fn members(&self, cluster: u8) -> Vec<usize> {
        self.cluster_of
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

fn validate_labels(labels: &[u8]) -> Result<[usize; 2], CorrelationError> {
    let mut sizes = [0usize; 2];
    for &l in labels {
        match l {
            1 => sizes[0] += 1,
            2 => sizes[1] += 1,
            other => return Err(CorrelationError::InvalidClustering(format!("label {other} not in {{1, 2}}"))),
        }
    }
    if sizes[0] == 0 || sizes[1] == 0 {
        return Err(CorrelationError::InvalidClustering("exactly two non-empty clusters are required".into()));
    }
    Ok(sizes)
}

/// Block averages of `R` over a 2-clustering. A singleton cluster gets a
/// within-block coefficient of 0 since it has no off-diagonal pairs.
pub fn block_average(r: &SampleCorrelation, cluster_of: &[u8]) -> Result<BlockCorrelationModel, CorrelationError> {
    let p = r.order();
    if cluster_of.len() != p {
        return Err(CorrelationError::InvalidClustering(format!(
            "{} labels for {} columns",
            cluster_of.len(),
            p
        )));
    }
    let sizes = validate_labels(cluster_of)?;
    let rm = r.r.as_matrix();
    let mut sums = [[0.0f64; 2]; 2];
    for j in 0..p {
        let cj = (cluster_of[j] - 1) as usize;
        for i in 0..p {
            if i != j {
                sums[(cluster_of[i] - 1) as usize][cj] += rm[(i, j)];
            }
        }
    }
    let within = |c: usize| {
        let s = sizes[c];
        if s < 2 {
            log::warn!("cluster {} is a singleton; its within-block correlation is set to 0", c + 1);
            0.0
        } else {
            sums[c][c] / (s * (s - 1)) as f64
        }
    };
    let cross = sums[0][1] / (sizes[0] * sizes[1]) as f64;
    let clamp = |v: f64| v.clamp(-1.0, 1.0);
    BlockCorrelationModel::new(cluster_of.to_vec(), clamp(within(0)), clamp(cross), clamp(within(1)))
}

/// Unit-diagonal `p×p` matrix with block-constant off-diagonal entries.
pub fn expand_block_model(model: &BlockCorrelationModel) -> SymmetricMatrix {
    let p = model.order();
    let m = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            model.rho[(model.cluster_of[i] - 1) as usize][(model.cluster_of[j] - 1) as usize]
        }
    });
    SymmetricMatrix::new(m).expect("block expansion is symmetric")
}

/// Sample correlation, two-cluster complete linkage, block averaging.
pub fn estimate_block_model(
    x: &DMatrix<f64>,
    dissimilarity: Dissimilarity,
) -> Result<BlockCorrelationModel, CorrelationError> {
    if x.ncols() < 2 {
        return Err(CorrelationError::TooFewColumns(x.ncols()));
    }
    let r = sample_correlation(x)?;
    let labels = complete_linkage_two_clusters_with(&r, dissimilarity);
    block_average(&r, &labels)
}
