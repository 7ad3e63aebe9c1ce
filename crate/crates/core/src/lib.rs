//! Transaction-level decomposition of DC power flows and loop-flow-driven
//! bidding-zone splitting.
//!
//! The crate takes a transmission network with a zone map plus one or more
//! generation/load scenarios and answers three questions:
//!
//! 1. **Who uses each line?** A DC load flow ([`dc`]) gives line flows;
//!    proportional-sharing tracing ([`trace`]) attributes every line's flow
//!    to (generator, load) pairs, each node acting as a perfect mixer of
//!    its inflows.
//! 2. **Which flows are unscheduled?** Each traced component is classified
//!    ([`classify`]) as internal, import/export, transit, or loop flow
//!    against the zone map, and loop flows are charged to the zone whose
//!    internal trade causes them.
//! 3. **Where should the zone border move?** The worst loop-flow
//!    contributor is split ([`split`]) into two connected sub-zones by
//!    clustering its nodes on their net loop-flow-inducing injections, so
//!    the offending trades become visible cross-border exchanges while the
//!    physical flows stay untouched.
//!
//! [`pipeline`] wires the stages together over scenario sets, averages the
//! per-scenario results, and writes deterministic CSV/JSON reports; [`io`]
//! defines the file formats.
//!
//! # Example
//!
//! ```
//! use zoneflow::{classify, dc, network, trace};
//!
//! let net = network::Network::new(
//!     vec![
//!         network::Node { id: "1".into(), zone: "A".into() },
//!         network::Node { id: "2".into(), zone: "B".into() },
//!     ],
//!     vec![network::Line {
//!         id: "L".into(),
//!         from: "1".into(),
//!         to: "2".into(),
//!         reactance: 0.1,
//!         capacity: None,
//!     }],
//! )?;
//! let scenario = dc::Scenario::new(&net, "peak", vec![50.0, 0.0], vec![0.0, 50.0])?;
//! let solution = dc::solve_dc(&net, &scenario, None)?;
//! let (oriented, flows) = net.oriented_by_flow(&solution.flows, network::DEFAULT_EPSILON)?;
//! let traced = trace::trace(&oriented, &oriented.incidence(), &flows, &scenario,
//!     network::DEFAULT_EPSILON)?;
//! let table = classify::decompose(&oriented, &oriented.zone_map(), &traced)?;
//! assert!((table.rows[0].import_export_mw - 50.0).abs() < 1e-9);
//! # Ok::<(), zoneflow::Error>(())
//! ```

pub mod classify;
pub mod dc;
pub mod error;
pub mod io;
pub mod network;
pub mod pipeline;
pub mod split;
pub mod trace;

#[cfg(test)]
pub(crate) mod testdata;

pub use classify::{Category, DecompositionTable, LineDecomposition, RankMode, ZoneRank};
pub use dc::{FlowSolution, Scenario};
pub use error::{Error, Result};
pub use network::{IncidenceMatrices, Line, Network, Node, ZoneMap, DEFAULT_EPSILON};
pub use pipeline::{
    run_pipeline, run_stages, AveragedResult, PipelineConfig, PipelineReport, ScenarioResult,
    Stage,
};
pub use split::{MergeStep, SplitResult};
pub use trace::TraceResult;
