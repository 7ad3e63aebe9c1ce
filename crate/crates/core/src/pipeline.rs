//! Multi-scenario orchestration: solve, trace, decompose, average, rank,
//! split, and re-decompose, with all report files written along the way.
//!
//! Scenarios are evaluated concurrently; every aggregate is a
//! deterministic reduction in scenario order, so repeated runs on the same
//! inputs produce byte-identical reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use crate::classify::{decompose, loop_injections, rank_zones, DecompositionTable, RankMode, ZoneRank};
use crate::dc::{solve_dc, verify_kcl, Scenario};
use crate::error::{Error, Result};
use crate::io;
use crate::network::{Network, ZoneMap, DEFAULT_EPSILON};
use crate::split::{select_target_zone, split_zone, SplitResult};
use crate::trace::{trace, TraceResult};

/// Knobs for a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Zero-flow tolerance in MW; must be positive.
    pub epsilon: f64,
    /// Zone ranking criterion.
    pub mode: RankMode,
    /// Slack node id; defaults to the network's first node.
    pub slack: Option<String>,
    pub output_dir: PathBuf,
    /// Also dump per-scenario tracing matrices under `debug/`.
    pub emit_debug_matrices: bool,
}

impl PipelineConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            mode: RankMode::Absolute,
            slack: None,
            output_dir: output_dir.into(),
            emit_debug_matrices: false,
        }
    }
}

/// How far to take a run; each stage writes everything earlier stages do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// Line flows only (`flows.csv`).
    Solve,
    /// Plus tracing artifacts (`throughflow.csv`, optional debug dumps).
    Trace,
    /// Plus per-scenario and averaged decompositions and loop injections.
    Decompose,
    /// Plus the zone ranking.
    Rank,
    /// Plus target selection, clustering, and the new zone map.
    Split,
    /// Plus post-split re-decomposition and the run summary.
    Full,
}

/// Everything computed for one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub label: String,
    /// Flows signed along the base network's line directions.
    pub solved_flows: Vec<f64>,
    /// The network with every line re-oriented along actual flow.
    pub oriented: Network,
    /// Oriented nonnegative flows, zero-clamped at epsilon.
    pub flows: Vec<f64>,
    pub trace: TraceResult,
    pub table: DecompositionTable,
    /// Net loop-flow-inducing injection per node.
    pub loop_injections: DVector<f64>,
}

/// Scenario-averaged decomposition. Averaging is linear, so the mean rows
/// still sum to the mean oriented flow per line.
#[derive(Debug, Clone)]
pub struct AveragedResult {
    pub table: DecompositionTable,
    /// Mean oriented flow magnitude per line.
    pub flows: Vec<f64>,
    /// Mean signed loop injection per node.
    pub loop_injections: DVector<f64>,
    /// The per-scenario tables the mean was formed from, for audit.
    pub per_scenario: Vec<(String, DecompositionTable)>,
}

/// Bundle returned by a pipeline run. Stages short of [`Stage::Full`]
/// leave later fields empty.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub network: Network,
    pub scenario_labels: Vec<String>,
    pub solved_flows: Vec<(String, Vec<f64>)>,
    pub results: Vec<ScenarioResult>,
    pub pre: Option<AveragedResult>,
    pub ranking: Vec<ZoneRank>,
    pub split: Option<SplitResult>,
    pub post: Option<AveragedResult>,
    /// True when there were no loop flows to fix.
    pub converged: bool,
}

impl PipelineReport {
    pub fn pre_loop_flow_total(&self) -> Option<f64> {
        self.pre.as_ref().map(|a| a.table.total_loop_flow())
    }

    pub fn post_loop_flow_total(&self) -> Option<f64> {
        self.post.as_ref().map(|a| a.table.total_loop_flow())
    }
}

/// Pre-solved flow vectors, one per scenario in scenario order.
pub type ProvidedFlows = Option<Vec<Vec<f64>>>;

/// Read and cross-validate the input files.
///
/// When a flows file is given it must cover every scenario: either rows
/// labeled per scenario, or unlabeled rows with exactly one scenario.
pub fn load_inputs(
    network_file: &Path,
    scenarios_file: &Path,
    flows_file: Option<&Path>,
) -> Result<(Network, Vec<Scenario>, ProvidedFlows)> {
    let network = io::read_network(network_file)?;
    let scenarios: Vec<Scenario> = io::read_scenarios(scenarios_file)?
        .into_iter()
        .map(|record| record.into_scenario(&network))
        .collect::<Result<_>>()?;

    let flows = match flows_file {
        None => None,
        Some(path) => {
            let mut by_label = io::read_flows(path, &network)?;
            if let Some(anonymous) = by_label.remove("") {
                if !by_label.is_empty() || scenarios.len() != 1 {
                    return Err(Error::Schema(
                        "flows file without a scenario column needs exactly one scenario".into(),
                    ));
                }
                Some(vec![anonymous])
            } else {
                for label in by_label.keys() {
                    if !scenarios.iter().any(|s| &s.label == label) {
                        return Err(Error::MissingScenario(label.clone()));
                    }
                }
                let per_scenario: Result<Vec<Vec<f64>>> = scenarios
                    .iter()
                    .map(|s| {
                        by_label.get(&s.label).cloned().ok_or_else(|| {
                            Error::Schema(format!("flows file has no rows for scenario `{}`", s.label))
                        })
                    })
                    .collect();
                Some(per_scenario?)
            }
        }
    };
    Ok((network, scenarios, flows))
}

/// Evaluate one scenario: solve (or verify provided flows), orient, trace,
/// decompose, and derive loop injections.
pub fn evaluate_scenario(
    network: &Network,
    zone_map: &ZoneMap,
    scenario: &Scenario,
    provided_flows: Option<&[f64]>,
    config: &PipelineConfig,
) -> Result<ScenarioResult> {
    let solved_flows = match provided_flows {
        Some(flows) => {
            verify_kcl(network, scenario, flows)?;
            flows.to_vec()
        }
        None => solve_dc(network, scenario, config.slack.as_deref())?.flows,
    };
    let (oriented, flows) = network.oriented_by_flow(&solved_flows, config.epsilon)?;
    let traced = trace(&oriented, &oriented.incidence(), &flows, scenario, config.epsilon)?;
    let table = decompose(&oriented, zone_map, &traced)?;
    let injections = loop_injections(&oriented.incidence(), &table.loop_flow_vector());
    Ok(ScenarioResult {
        label: scenario.label.clone(),
        solved_flows,
        oriented,
        flows,
        trace: traced,
        table,
        loop_injections: injections,
    })
}

/// Arithmetic mean of per-scenario decompositions, loop injections, and
/// oriented flows. Decomposition happens per scenario first; only the
/// finished tables are averaged, because the decomposition is nonlinear in
/// the flows.
pub fn average_decomposition(results: &[ScenarioResult]) -> Result<AveragedResult> {
    let first = results.first().ok_or(Error::NoScenarios)?;
    for other in &results[1..] {
        if !first.oriented.same_topology(&other.oriented) {
            return Err(Error::MismatchedNetworks);
        }
    }
    let count = results.len() as f64;
    let lines = first.oriented.line_count();

    let mut rows = Vec::with_capacity(lines);
    for k in 0..lines {
        let mut mean = crate::classify::LineDecomposition {
            line: first.table.rows[k].line.clone(),
            flow_mw: 0.0,
            internal_mw: 0.0,
            import_export_mw: 0.0,
            transit_mw: 0.0,
            loop_flow_mw: 0.0,
            loop_flow_by_zone: BTreeMap::new(),
        };
        for result in results {
            let row = &result.table.rows[k];
            mean.flow_mw += row.flow_mw;
            mean.internal_mw += row.internal_mw;
            mean.import_export_mw += row.import_export_mw;
            mean.transit_mw += row.transit_mw;
            mean.loop_flow_mw += row.loop_flow_mw;
            for (zone, mw) in &row.loop_flow_by_zone {
                *mean.loop_flow_by_zone.entry(zone.clone()).or_insert(0.0) += mw;
            }
        }
        mean.flow_mw /= count;
        mean.internal_mw /= count;
        mean.import_export_mw /= count;
        mean.transit_mw /= count;
        mean.loop_flow_mw /= count;
        for mw in mean.loop_flow_by_zone.values_mut() {
            *mw /= count;
        }
        rows.push(mean);
    }

    let flows = (0..lines)
        .map(|k| results.iter().map(|r| r.flows[k]).sum::<f64>() / count)
        .collect();
    let mut injections = DVector::zeros(first.loop_injections.len());
    for result in results {
        injections += &result.loop_injections;
    }
    injections /= count;

    Ok(AveragedResult {
        table: DecompositionTable { rows },
        flows,
        loop_injections: injections,
        per_scenario: results
            .iter()
            .map(|r| (r.label.clone(), r.table.clone()))
            .collect(),
    })
}

/// Run the whole optimize-zones workflow and write the report bundle.
pub fn run_pipeline(
    network_file: &Path,
    scenarios_file: &Path,
    flows_file: Option<&Path>,
    config: &PipelineConfig,
) -> Result<PipelineReport> {
    run_stages(network_file, scenarios_file, flows_file, config, Stage::Full)
}

/// Run the workflow up to `stage`; see [`Stage`] for what each one writes.
pub fn run_stages(
    network_file: &Path,
    scenarios_file: &Path,
    flows_file: Option<&Path>,
    config: &PipelineConfig,
    stage: Stage,
) -> Result<PipelineReport> {
    if config.epsilon <= 0.0 || config.epsilon.is_nan() {
        return Err(Error::Schema(format!(
            "epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    let (network, scenarios, provided) = load_inputs(network_file, scenarios_file, flows_file)?;
    if let Some(slack) = &config.slack {
        if network.node_idx(slack).is_none() {
            return Err(Error::UnknownNode(slack.clone()));
        }
    }
    let zone_map = network.zone_map();
    let out = &config.output_dir;
    fs::create_dir_all(out)?;

    let mut report = PipelineReport {
        network: network.clone(),
        scenario_labels: scenarios.iter().map(|s| s.label.clone()).collect(),
        solved_flows: Vec::new(),
        results: Vec::new(),
        pre: None,
        ranking: Vec::new(),
        split: None,
        post: None,
        converged: false,
    };

    if stage == Stage::Solve {
        let solved: Result<Vec<(String, Vec<f64>)>> = scenarios
            .par_iter()
            .enumerate()
            .map(|(i, scenario)| {
                let flows = match &provided {
                    Some(all) => {
                        verify_kcl(&network, scenario, &all[i])?;
                        all[i].clone()
                    }
                    None => solve_dc(&network, scenario, config.slack.as_deref())?.flows,
                };
                Ok((scenario.label.clone(), flows))
            })
            .collect();
        report.solved_flows = solved?;
        io::write_flows_csv(&out.join("flows.csv"), &network, &report.solved_flows)?;
        return Ok(report);
    }

    let results: Result<Vec<ScenarioResult>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, scenario)| {
            evaluate_scenario(
                &network,
                &zone_map,
                scenario,
                provided.as_ref().map(|all| all[i].as_slice()),
                config,
            )
        })
        .collect();
    let results = results?;

    report.solved_flows = results
        .iter()
        .map(|r| (r.label.clone(), r.solved_flows.clone()))
        .collect();
    io::write_flows_csv(&out.join("flows.csv"), &network, &report.solved_flows)?;

    let throughflows: Vec<(String, Vec<f64>)> = results
        .iter()
        .map(|r| (r.label.clone(), r.trace.throughflow.iter().copied().collect()))
        .collect();
    io::write_throughflow_csv(&out.join("throughflow.csv"), &network, &throughflows)?;
    if config.emit_debug_matrices {
        for result in &results {
            let dir = out.join("debug").join(io::sanitize_label(&result.label));
            io::write_debug_matrices(&dir, &result.oriented, &result.trace)?;
        }
    }
    report.results = results;
    if stage == Stage::Trace {
        return Ok(report);
    }

    let pre = average_decomposition(&report.results)?;
    io::write_decomposition_csv(&out.join("decomposition_pre.csv"), &pre.table)?;
    io::write_decomposition_json(&out.join("decomposition_pre.json"), &pre.table)?;
    io::write_loop_injections_csv(
        &out.join("p_lf.csv"),
        &network,
        pre.loop_injections.as_slice(),
    )?;
    let per_scenario_dir = out.join("per_scenario");
    fs::create_dir_all(&per_scenario_dir)?;
    for (label, table) in &pre.per_scenario {
        let name = format!("{}.pre.csv", io::sanitize_label(label));
        io::write_decomposition_csv(&per_scenario_dir.join(name), table)?;
    }
    report.pre = Some(pre);
    if stage == Stage::Decompose {
        return Ok(report);
    }

    let pre_ref = report.pre.as_ref().expect("pre decomposition present");
    let ranking = rank_zones(&pre_ref.table, &zone_map, &network, config.mode)?;
    io::write_ranking_json(&out.join("zone_ranking.json"), &ranking)?;
    for result in &report.results {
        let scenario_ranking = rank_zones(&result.table, &zone_map, &network, config.mode)?;
        let name = format!("{}.ranking.json", io::sanitize_label(&result.label));
        io::write_ranking_json(&per_scenario_dir.join(name), &scenario_ranking)?;
    }
    report.ranking = ranking;
    if stage == Stage::Rank {
        return Ok(report);
    }

    let target = match select_target_zone(&report.ranking) {
        Ok(zone) => zone.to_owned(),
        Err(Error::NoLoopFlows) => {
            report.converged = true;
            write_summary(out, config, &report)?;
            return Ok(report);
        }
        Err(other) => return Err(other),
    };
    let split = split_zone(
        &network,
        &zone_map,
        &target,
        pre_ref.loop_injections.as_slice(),
    )?;
    io::write_zone_map_json(&out.join("zone_map_new.json"), &network, &split.new_zone_map)?;
    io::write_merge_trace_json(&out.join("merge_trace.json"), &split)?;
    report.split = Some(split);
    if stage == Stage::Split {
        write_summary(out, config, &report)?;
        return Ok(report);
    }

    let new_map = report
        .split
        .as_ref()
        .expect("split present")
        .new_zone_map
        .clone();
    let post_results: Result<Vec<ScenarioResult>> = report
        .results
        .par_iter()
        .map(|result| {
            let table = decompose(&result.oriented, &new_map, &result.trace)?;
            let injections =
                loop_injections(&result.oriented.incidence(), &table.loop_flow_vector());
            Ok(ScenarioResult {
                label: result.label.clone(),
                solved_flows: result.solved_flows.clone(),
                oriented: result.oriented.clone(),
                flows: result.flows.clone(),
                trace: result.trace.clone(),
                table,
                loop_injections: injections,
            })
        })
        .collect();
    let post = average_decomposition(&post_results?)?;
    io::write_decomposition_csv(&out.join("decomposition_post.csv"), &post.table)?;
    io::write_decomposition_json(&out.join("decomposition_post.json"), &post.table)?;
    for (label, table) in &post.per_scenario {
        let name = format!("{}.post.csv", io::sanitize_label(label));
        io::write_decomposition_csv(&per_scenario_dir.join(name), table)?;
    }
    report.post = Some(post);
    write_summary(out, config, &report)?;
    Ok(report)
}

fn write_summary(out: &Path, config: &PipelineConfig, report: &PipelineReport) -> Result<()> {
    let value = json!({
        "scenarios": report.scenario_labels,
        "mode": config.mode,
        "epsilon_mw": config.epsilon,
        "slack": config.slack,
        "converged": report.converged,
        "target_zone": report.split.as_ref().map(|s| s.target_zone.clone()),
        "source_zone": report.split.as_ref().map(|s| s.source_zone.clone()),
        "sink_zone": report.split.as_ref().map(|s| s.sink_zone.clone()),
        "lf_total_pre_mw": report.pre_loop_flow_total(),
        "lf_total_post_mw": report.post_loop_flow_total(),
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(out.join("summary.json"), text)?;
    Ok(())
}
