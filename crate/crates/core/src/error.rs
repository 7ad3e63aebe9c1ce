//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("duplicate line id `{0}`")]
    DuplicateLine(String),

    #[error("line `{line}` references unknown node `{node}`")]
    DanglingEndpoint { line: String, node: String },

    #[error("line `{0}` connects a node to itself")]
    SelfLoop(String),

    #[error("line `{line}` has non-positive reactance {reactance}")]
    NonPositiveReactance { line: String, reactance: f64 },

    #[error("network is degenerate: {0}")]
    Degenerate(String),

    #[error("network graph is not connected")]
    Disconnected,

    #[error("node `{0}` has a blank zone label")]
    BlankZone(String),

    #[error("zone map does not cover node `{0}`")]
    ZoneMapIncomplete(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("unknown line id `{0}`")]
    UnknownLine(String),

    #[error("unknown zone id `{0}`")]
    UnknownZone(String),

    #[error("scenario `{label}`: expected {expected} nodal values, got {got}")]
    ScenarioLength {
        label: String,
        expected: usize,
        got: usize,
    },

    #[error("scenario `{label}`: negative {kind} {value} at node `{node}`")]
    NegativeInjection {
        label: String,
        kind: &'static str,
        node: String,
        value: f64,
    },

    #[error("scenario `{label}` is unbalanced: generation minus load is {imbalance} MW")]
    Unbalanced { label: String, imbalance: f64 },

    #[error("singular susceptance system; the network is likely disconnected")]
    SingularSystem,

    #[error("{context}: residual {value:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge {
        context: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("directed cycle among strictly positive flows; inputs are not a consistent DC solution")]
    CyclicFlows,

    #[error("negative flow {flow} on line `{line}`; orient flows before tracing")]
    NegativeFlow { line: String, flow: f64 },

    #[error("throughflow identities disagree at node `{node}` by {delta} MW")]
    ThroughflowMismatch { node: String, delta: f64 },

    #[error("flows for scenario `{label}` violate nodal balance at `{node}` by {delta} MW")]
    FlowsInconsistent {
        label: String,
        node: String,
        delta: f64,
    },

    #[error("relative ranking requested but no line carries a capacity")]
    NoCapacities,

    #[error("no loop flows to fix; the zone configuration is already converged")]
    NoLoopFlows,

    #[error("target zone `{0}` has fewer than two nodes")]
    TargetTooSmall(String),

    #[error("target zone `{0}` is not connected by intra-zone lines")]
    TargetDisconnected(String),

    #[error("scenario results belong to different networks")]
    MismatchedNetworks,

    #[error("no scenarios provided")]
    NoScenarios,

    #[error("flows file names scenario `{0}` but the scenario file does not define it")]
    MissingScenario(String),

    #[error("malformed input: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for the "nothing to split" outcome, which callers report
    /// instead of treating as a failure.
    pub fn is_converged(&self) -> bool {
        matches!(self, Error::NoLoopFlows)
    }
}
