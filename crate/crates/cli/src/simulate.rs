use std::path::Path;

use serde::Serialize;
use wlasso::simulation::{run_scenario, MethodRecord, ReplicationSummary, RunConfig};

use crate::document::{SCHEMA_VERSION, TOOL_VERSION};
use crate::{parse_methods, to_json, CliError, SimulateArgs};

#[derive(Serialize)]
struct SummaryDocument<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    threads: Option<usize>,
    summary: &'a ReplicationSummary,
}

/// Per-replication rows; deterministic for a given seed, independent of the
/// thread count.
pub fn write_records(path: &Path, records: &[MethodRecord]) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    for r in records {
        w.serialize(r).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn simulate(args: &SimulateArgs) -> Result<(RunConfig, ReplicationSummary), CliError> {
    let scenario = args.scenario.scenario(args.seed)?;
    let methods = parse_methods(&args.methods)?;
    let cfg = RunConfig { wlasso: args.tuning.wlasso_config()?, dissimilarity: args.tuning.dissimilarity.into() };
    let summary = run_scenario(&scenario, &methods, args.replications, &cfg).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((cfg, summary))
}

pub fn run(args: &SimulateArgs, threads: Option<usize>) -> Result<(), CliError> {
    let (cfg, summary) = simulate(args)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Output(format!("{}: {e}", args.out.display())))?;
    let doc = SummaryDocument {
        schema_version: SCHEMA_VERSION,
        tool: "wlasso",
        version: TOOL_VERSION,
        command: "simulate",
        config: &cfg,
        threads,
        summary: &summary,
    };
    crate::emit(Some(&args.out.join("summary.json")), &to_json(&doc)?)?;
    write_records(&args.out.join("replications.csv"), &summary.records)?;
    for a in &summary.aggregates {
        log::info!(
            "{} {:?}: TPR {:.3} FPR {:.4} diff {:.3} ({} ok, {} failed)",
            a.method.name(),
            a.variant,
            a.mean_tpr,
            a.mean_fpr,
            a.mean_diff,
            a.successes,
            a.failures
        );
    }
    Ok(())
}
