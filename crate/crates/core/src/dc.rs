//! Lossless DC load flow for given nodal net injections.
//!
//! Line flow is proportional to the phase-angle difference over reactance;
//! the solve reduces the nodal susceptance matrix by one slack node and
//! factorizes it densely, which is exact at desk scale.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::Network;

/// Generation/load balance tolerance in MW, and the KCL residual bound a
/// solution must satisfy at every node.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

/// Per-node generation and load for one market outcome, both nonnegative
/// and balanced within [`BALANCE_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    /// Nodal generation in MW, indexed like the network's nodes.
    pub gen: DVector<f64>,
    /// Nodal load in MW, indexed like the network's nodes.
    pub load: DVector<f64>,
}

impl Scenario {
    pub fn new(
        network: &Network,
        label: impl Into<String>,
        gen: Vec<f64>,
        load: Vec<f64>,
    ) -> Result<Self> {
        let label = label.into();
        let n = network.node_count();
        if gen.len() != n || load.len() != n {
            return Err(Error::ScenarioLength {
                label,
                expected: n,
                got: gen.len().max(load.len()),
            });
        }
        for (i, &value) in gen.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::NegativeInjection {
                    label,
                    kind: "generation",
                    node: network.node(i).id.clone(),
                    value,
                });
            }
        }
        for (i, &value) in load.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::NegativeInjection {
                    label,
                    kind: "load",
                    node: network.node(i).id.clone(),
                    value,
                });
            }
        }
        let imbalance = gen.iter().sum::<f64>() - load.iter().sum::<f64>();
        if imbalance.abs() > BALANCE_TOLERANCE {
            return Err(Error::Unbalanced { label, imbalance });
        }
        Ok(Self {
            label,
            gen: DVector::from_vec(gen),
            load: DVector::from_vec(load),
        })
    }

    /// Net nodal injection, generation minus load.
    pub fn injections(&self) -> DVector<f64> {
        &self.gen - &self.load
    }
}

/// Result of a DC solve: line flows, phase angles, and the slack used.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// MW per line, signed along each line's stated direction.
    pub flows: Vec<f64>,
    /// Phase angle per node in radians, zero at the slack.
    pub angles: Vec<f64>,
    pub slack: String,
}

/// Solve the DC load flow. `slack` defaults to the first node.
///
/// The solution satisfies Kirchhoff's current law at every node within
/// [`BALANCE_TOLERANCE`] and is independent of the slack choice.
pub fn solve_dc(network: &Network, scenario: &Scenario, slack: Option<&str>) -> Result<FlowSolution> {
    let n = network.node_count();
    let m = network.line_count();
    let slack_id = slack.unwrap_or(&network.node(0).id);
    let slack_idx = network
        .node_idx(slack_id)
        .ok_or_else(|| Error::UnknownNode(slack_id.to_owned()))?;

    // Nodal susceptance matrix B = G^T diag(1/x) G, assembled directly.
    let mut susceptance = DMatrix::zeros(n, n);
    for k in 0..m {
        let (from, to) = network.endpoints(k);
        let b = 1.0 / network.line(k).reactance;
        susceptance[(from, from)] += b;
        susceptance[(to, to)] += b;
        susceptance[(from, to)] -= b;
        susceptance[(to, from)] -= b;
    }

    let injections = scenario.injections();
    let keep: Vec<usize> = (0..n).filter(|&i| i != slack_idx).collect();
    let reduced = DMatrix::from_fn(n - 1, n - 1, |r, c| susceptance[(keep[r], keep[c])]);
    let rhs = DVector::from_fn(n - 1, |r, _| injections[keep[r]]);

    let theta_reduced = reduced.lu().solve(&rhs).ok_or(Error::SingularSystem)?;

    let mut angles = vec![0.0; n];
    for (r, &i) in keep.iter().enumerate() {
        angles[i] = theta_reduced[r];
    }

    let flows: Vec<f64> = (0..m)
        .map(|k| {
            let (from, to) = network.endpoints(k);
            (angles[from] - angles[to]) / network.line(k).reactance
        })
        .collect();

    verify_kcl(network, scenario, &flows).map_err(|_| Error::SingularSystem)?;

    Ok(FlowSolution {
        flows,
        angles,
        slack: slack_id.to_owned(),
    })
}

/// Check `flows` against the scenario's nodal balance: the signed line
/// flows incident to each node must add up to generation minus load within
/// [`BALANCE_TOLERANCE`]. Used both as a post-solve guard and to vet
/// externally supplied flow vectors before tracing.
pub fn verify_kcl(network: &Network, scenario: &Scenario, flows: &[f64]) -> Result<()> {
    let mut residual = scenario.injections();
    for (k, &flow) in flows.iter().enumerate() {
        let (from, to) = network.endpoints(k);
        residual[from] -= flow;
        residual[to] += flow;
    }
    for i in 0..network.node_count() {
        if residual[i].abs() > BALANCE_TOLERANCE {
            return Err(Error::FlowsInconsistent {
                label: scenario.label.clone(),
                node: network.node(i).id.clone(),
                delta: residual[i],
            });
        }
    }
    Ok(())
}
