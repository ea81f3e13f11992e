use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wlasso::correlation::{estimate_block_model, expand_block_model, Dissimilarity};
use wlasso::diagnostics::{ic_check, ICReport};
use wlasso::linalg::{whitening_operator, SymmetricMatrix};
use wlasso::simulation::{Scenario, ScenarioSampler};
use wlasso::wlasso::whiten_design;

use crate::document::{one_based, SCHEMA_VERSION, TOOL_VERSION};
use crate::io::{parse_indices, parse_reals, read_matrix};
use crate::{emit, to_json, CliError, IcArgs};

/// [`ICReport`] with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcSummary {
    pub violated_fraction: f64,
    pub complement: Vec<usize>,
    pub per_component: Vec<f64>,
    pub eta: f64,
}

impl From<ICReport> for IcSummary {
    fn from(r: ICReport) -> Self {
        IcSummary {
            violated_fraction: r.violated_fraction,
            complement: one_based(&r.complement),
            per_component: r.per_component,
            eta: r.eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReplication {
    pub replication: u64,
    pub raw: f64,
    pub whitened: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcDocument {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub eta: f64,
    /// Data mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<IcSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub whitened: Option<IcSummary>,
    /// Scenario mode: violated fractions of X and of X Σ^{-1/2} per replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replications: Vec<IcReplication>,
    /// Share of replications where whitening strictly lowers the fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improved_share: Option<f64>,
}

fn numerical(e: impl std::fmt::Display, name: &str) -> CliError {
    CliError::Numerical { name: name.into(), message: e.to_string() }
}

fn check(x: &DMatrix<f64>, support: &[usize], signs: &[f64], eta: f64) -> Result<ICReport, CliError> {
    ic_check(x, support, signs, eta).map_err(|e| {
        let name = e.name();
        numerical(e, name)
    })
}

fn whitening_for(x: &DMatrix<f64>, sigma: Option<SymmetricMatrix>, d: Dissimilarity) -> Result<DMatrix<f64>, CliError> {
    let sigma = match sigma {
        Some(s) => s,
        None => {
            let model = estimate_block_model(x, d).map_err(|e| {
                let name = e.name();
                numerical(e, name)
            })?;
            expand_block_model(&model)
        }
    };
    let op = whitening_operator(&sigma, None).map_err(|e| {
        let name = e.name();
        numerical(e, name)
    })?;
    whiten_design(x, &op).map_err(|e| {
        let name = e.name();
        numerical(e, name)
    })
}

fn document(eta: f64) -> IcDocument {
    IcDocument {
        schema_version: SCHEMA_VERSION,
        tool: "wlasso".into(),
        version: TOOL_VERSION.into(),
        command: "ic-check".into(),
        eta,
        raw: None,
        whitened: None,
        scenario: None,
        replications: Vec::new(),
        improved_share: None,
    }
}

fn data_mode(args: &IcArgs, path: &std::path::Path) -> Result<IcDocument, CliError> {
    let x = read_matrix(path)?;
    let p = x.ncols();
    let support = parse_indices(
        args.support.as_deref().ok_or_else(|| CliError::Input("--support is required with --x".into()))?,
        p,
    )?;
    let signs = match &args.signs {
        Some(s) => parse_reals(s)?,
        None => vec![1.0; support.len()],
    };
    if signs.len() != support.len() {
        return Err(CliError::Input(format!("{} signs for {} support indices", signs.len(), support.len())));
    }
    let sigma = match &args.sigma {
        Some(path) => {
            let m = read_matrix(path)?;
            if m.shape() != (p, p) {
                return Err(CliError::Input(format!("Σ is {}x{}, expected {p}x{p}", m.nrows(), m.ncols())));
            }
            Some(SymmetricMatrix::new(m).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let mut doc = document(args.eta);
    doc.raw = Some(check(&x, &support, &signs, args.eta)?.into());
    if args.whiten {
        let xt = whitening_for(&x, sigma, args.dissimilarity.into())?;
        doc.whitened = Some(check(&xt, &support, &signs, args.eta)?.into());
    }
    Ok(doc)
}

/// Compares the IC on X and on X Σ^{-1/2} with the population Σ.
pub fn scenario_mode(scenario: Scenario, replications: u64, eta: f64) -> Result<IcDocument, CliError> {
    let sampler = ScenarioSampler::new(scenario).map_err(|e| CliError::Input(e.to_string()))?;
    let mut doc = document(eta);
    for rep in 0..replications {
        let ds = sampler.sample(rep);
        let signs: Vec<f64> = ds.truth.iter().map(|&j| ds.beta[j].signum()).collect();
        let raw = check(&ds.x, &ds.truth, &signs, eta)?.violated_fraction;
        let xt = whiten_design(&ds.x, &sampler.known_operator(&ds)).map_err(|e| {
            let name = e.name();
            numerical(e, name)
        })?;
        let whitened = check(&xt, &ds.truth, &signs, eta)?.violated_fraction;
        doc.replications.push(IcReplication { replication: rep, raw, whitened });
    }
    let improved = doc.replications.iter().filter(|r| r.whitened < r.raw).count();
    doc.improved_share = Some(improved as f64 / replications.max(1) as f64);
    doc.scenario = Some(scenario);
    Ok(doc)
}

pub fn run(args: &IcArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.eta) {
        return Err(CliError::Input(format!("--eta must lie in [0, 1], got {}", args.eta)));
    }
    let doc = match &args.x {
        Some(path) => data_mode(args, path)?,
        None => {
            let seed = args.seed.ok_or_else(|| CliError::Input("--seed is required without --x".into()))?;
            if args.replications == 0 {
                return Err(CliError::Input("--replications must be at least 1".into()));
            }
            scenario_mode(args.scenario.scenario(seed)?, args.replications, args.eta)?
        }
    };
    emit(args.out.as_deref(), &to_json(&doc)?)
}
