use serde::{Deserialize, Serialize};
use wlasso::simulation::{generate_dataset, Scenario};
use wlasso::wlasso::{wlasso_fit_timed, SigmaSource, WLassoConfig};

use crate::{emit, parse_alphas, BenchArgs, CliError};

/// Wall-clock seconds per pipeline stage for one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub p: usize,
    pub n: usize,
    pub grid_count: usize,
    pub sigma_estimation: f64,
    pub whitening: f64,
    pub path_solve: f64,
    pub thresholding: f64,
    pub total: f64,
}

pub fn bench_one(scenario: &Scenario, source: &SigmaSource, cfg: &WLassoConfig) -> Result<BenchRow, CliError> {
    let ds = generate_dataset(scenario).map_err(|e| CliError::Input(e.to_string()))?;
    let (_, t) = wlasso_fit_timed(&ds.x, &ds.y, source, cfg)
        .map_err(|e| CliError::Numerical { name: e.name().into(), message: e.to_string() })?;
    Ok(BenchRow {
        p: scenario.p,
        n: scenario.n,
        grid_count: cfg.grid.count,
        sigma_estimation: t.sigma_estimation.as_secs_f64(),
        whitening: t.whitening.as_secs_f64(),
        path_solve: t.path_solve.as_secs_f64(),
        thresholding: t.thresholding.as_secs_f64(),
        total: t.total().as_secs_f64(),
    })
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let cfg = args.tuning.wlasso_config()?;
    let alphas = parse_alphas(&args.alphas)?;
    let source = SigmaSource::Estimate(args.tuning.dissimilarity.into());
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in args.p.split(',') {
        let p: usize = t.trim().parse().map_err(|_| CliError::Input(format!("bad --p entry {t:?}")))?;
        let scenario = Scenario::new(args.n, p, args.b, alphas, args.seed);
        scenario.validate().map_err(|e| CliError::Input(e.to_string()))?;
        let row = bench_one(&scenario, &source, &cfg)?;
        log::info!("p = {p}: {:.2} s", row.total);
        w.serialize(&row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))?;
    emit(args.out.as_deref(), text.trim_end())
}
