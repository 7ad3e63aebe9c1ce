//! Command-line front end: solve, trace, decompose, rank, split, and the
//! full pipeline, all writing their reports into an output directory.
//!
//! Exit codes: 0 on success, 1 on any input or processing error, 2 when
//! the run finished but there were no loop flows to fix.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zoneflow::{run_stages, PipelineConfig, RankMode, Stage};

#[derive(Parser)]
#[command(
    name = "zoneflow",
    version,
    about = "Decompose DC power flows, classify loop flows, and split the worst bidding zone"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the DC load flow per scenario and write flows.csv
    Solve(RunArgs),
    /// Trace flows to generator/load pairs (adds throughflow.csv)
    Trace(RunArgs),
    /// Classify traced flows per line (adds decomposition tables and p_lf.csv)
    Decompose(RunArgs),
    /// Rank zones by loop-flow burden (adds zone_ranking.json)
    Rank(RunArgs),
    /// Split the worst zone (adds zone_map_new.json and merge_trace.json)
    Split(RunArgs),
    /// Full workflow including the post-split re-decomposition
    Pipeline(RunArgs),
}

impl Command {
    fn stage(&self) -> Stage {
        match self {
            Command::Solve(_) => Stage::Solve,
            Command::Trace(_) => Stage::Trace,
            Command::Decompose(_) => Stage::Decompose,
            Command::Rank(_) => Stage::Rank,
            Command::Split(_) => Stage::Split,
            Command::Pipeline(_) => Stage::Full,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a)
            | Command::Trace(a)
            | Command::Decompose(a)
            | Command::Rank(a)
            | Command::Split(a)
            | Command::Pipeline(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Network file (JSON: nodes with zones, lines with reactances)
    #[arg(long)]
    network: PathBuf,

    /// Scenario file (JSON or CSV: per node gen/load in MW)
    #[arg(long)]
    scenarios: PathBuf,

    /// Pre-solved flows file (CSV: scenario,line,mw); bypasses the solver
    #[arg(long)]
    flows: Option<PathBuf>,

    /// Zone ranking criterion
    #[arg(long, value_enum, default_value_t = Mode::Abs)]
    mode: Mode,

    /// Slack node id (defaults to the first node)
    #[arg(long)]
    slack: Option<String>,

    /// Zero-flow tolerance in MW
    #[arg(long, default_value_t = zoneflow::DEFAULT_EPSILON)]
    epsilon: f64,

    /// Output directory for all report files
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Dump per-scenario tracing matrices under the output debug/ dir
    #[arg(long)]
    debug_matrices: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Abs,
    Rel,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.command.stage();
    let args = cli.command.args();

    let config = PipelineConfig {
        epsilon: args.epsilon,
        mode: match args.mode {
            Mode::Abs => RankMode::Absolute,
            Mode::Rel => RankMode::Relative,
        },
        slack: args.slack.clone(),
        output_dir: args.out.clone(),
        emit_debug_matrices: args.debug_matrices,
    };

    match run_stages(
        &args.network,
        &args.scenarios,
        args.flows.as_deref(),
        &config,
        stage,
    ) {
        Ok(report) => {
            print_outcome(&report, stage);
            if report.converged && stage >= Stage::Split {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn print_outcome(report: &zoneflow::PipelineReport, stage: Stage) {
    println!(
        "processed {} scenario(s) over {} nodes / {} lines",
        report.scenario_labels.len(),
        report.network.node_count(),
        report.network.line_count()
    );
    if let Some(pre) = report.pre_loop_flow_total() {
        println!("loop flow before split: {pre:.2} MW");
    }
    if !report.ranking.is_empty() {
        let top = &report.ranking[0];
        println!("worst zone: {} ({:.2} MW)", top.zone, top.loop_flow_mw);
    }
    if report.converged && stage >= Stage::Split {
        println!("no loop flows to fix; zone map left unchanged");
    }
    if let Some(split) = &report.split {
        println!(
            "split zone {} into {} {:?} and {} {:?}",
            split.target_zone,
            split.source_zone,
            split.source_nodes,
            split.sink_zone,
            split.sink_nodes
        );
    }
    if let Some(post) = report.post_loop_flow_total() {
        println!("loop flow after split: {post:.2} MW");
    }
}
