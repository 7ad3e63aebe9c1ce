//! Network data model, validation, and incidence-matrix algebra.
//!
//! A [`Network`] is an ordered list of nodes and directed lines; input order
//! fixes the row/column indexing of every matrix derived from it. The model
//! is lossless DC: a line is fully described by its reactance, plus an
//! optional thermal capacity used by relative zone ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-flow tolerance in MW. Flows with magnitude at or below this are
/// treated as exactly zero everywhere downstream, which keeps proportional
/// shares free of division by vanishing throughflows.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// A bus with a bidding-zone label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub zone: String,
}

/// A directed transmission line. The direction is a bookkeeping convention;
/// [`Network::oriented_by_flow`] re-orients lines along actual flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Series reactance, p.u., strictly positive.
    pub reactance: f64,
    /// Thermal capacity in MW, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
}

/// Validated network: connected, self-loop free, uniquely indexed.
///
/// Immutable after construction; shared read-only across concurrent
/// scenario evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    lines: Vec<Line>,
    node_index: HashMap<String, usize>,
    /// Line endpoints as (from, to) node indices, parallel to `lines`.
    ends: Vec<(usize, usize)>,
}

impl Network {
    /// Validate and index a node/line list.
    ///
    /// Rejects duplicate ids, dangling endpoints, self-loops, non-positive
    /// reactances, blank zone labels, degenerate systems (fewer than two
    /// nodes or no lines) and disconnected graphs. Parallel lines between
    /// the same node pair are permitted.
    pub fn new(nodes: Vec<Node>, lines: Vec<Line>) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.zone.trim().is_empty() {
                return Err(Error::BlankZone(node.id.clone()));
            }
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
        }

        let mut line_ids = BTreeSet::new();
        let mut ends = Vec::with_capacity(lines.len());
        for line in &lines {
            if !line_ids.insert(line.id.clone()) {
                return Err(Error::DuplicateLine(line.id.clone()));
            }
            if line.reactance <= 0.0 || !line.reactance.is_finite() {
                return Err(Error::NonPositiveReactance {
                    line: line.id.clone(),
                    reactance: line.reactance,
                });
            }
            let from = *node_index
                .get(&line.from)
                .ok_or_else(|| Error::DanglingEndpoint {
                    line: line.id.clone(),
                    node: line.from.clone(),
                })?;
            let to = *node_index
                .get(&line.to)
                .ok_or_else(|| Error::DanglingEndpoint {
                    line: line.id.clone(),
                    node: line.to.clone(),
                })?;
            if from == to {
                return Err(Error::SelfLoop(line.id.clone()));
            }
            if let Some(cap) = line.capacity {
                if cap <= 0.0 || !cap.is_finite() {
                    return Err(Error::Schema(format!(
                        "line `{}` has non-positive capacity {cap}",
                        line.id
                    )));
                }
            }
            ends.push((from, to));
        }

        if nodes.len() < 2 {
            return Err(Error::Degenerate(format!(
                "{} node(s); a DC flow problem needs at least two",
                nodes.len()
            )));
        }
        if lines.is_empty() {
            return Err(Error::Degenerate("no lines".into()));
        }

        let network = Self {
            nodes,
            lines,
            node_index,
            ends,
        };
        if !network.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(network)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn line(&self, idx: usize) -> &Line {
        &self.lines[idx]
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn line_idx(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// (from, to) node indices of line `k`.
    pub fn endpoints(&self, k: usize) -> (usize, usize) {
        self.ends[k]
    }

    /// The zone assignment carried by the node list.
    pub fn zone_map(&self) -> ZoneMap {
        ZoneMap::from_nodes(&self.nodes)
    }

    fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(from, to) in &self.ends {
            adjacency[from].push(to);
            adjacency[to].push(from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Signed and split incidence matrices, rows = lines, columns = nodes.
    pub fn incidence(&self) -> IncidenceMatrices {
        let (m, n) = (self.lines.len(), self.nodes.len());
        let mut signed = DMatrix::zeros(m, n);
        let mut from_part = DMatrix::zeros(m, n);
        let mut to_part = DMatrix::zeros(m, n);
        for (k, &(from, to)) in self.ends.iter().enumerate() {
            signed[(k, from)] = 1.0;
            signed[(k, to)] = -1.0;
            from_part[(k, from)] = 1.0;
            to_part[(k, to)] = 1.0;
        }
        IncidenceMatrices {
            signed,
            from_part,
            to_part,
        }
    }

    /// Re-orient every line along its actual flow.
    ///
    /// Lines with flow below `-epsilon` get their endpoints swapped and the
    /// flow negated; flows within `epsilon` of zero are clamped to exactly
    /// zero with the original orientation kept. The resulting positive-flow
    /// digraph must be acyclic, which holds for any flow vector derived
    /// from phase angles; a cycle means the input flows are not a
    /// consistent DC solution.
    pub fn oriented_by_flow(&self, flows: &[f64], epsilon: f64) -> Result<(Network, Vec<f64>)> {
        assert_eq!(flows.len(), self.lines.len(), "flow vector length");
        let mut lines = self.lines.clone();
        let mut ends = self.ends.clone();
        let mut oriented = flows.to_vec();
        for k in 0..lines.len() {
            if oriented[k].abs() <= epsilon {
                oriented[k] = 0.0;
            } else if oriented[k] < 0.0 {
                let line = &mut lines[k];
                std::mem::swap(&mut line.from, &mut line.to);
                ends[k] = (ends[k].1, ends[k].0);
                oriented[k] = -oriented[k];
            }
        }
        let network = Network {
            nodes: self.nodes.clone(),
            lines,
            node_index: self.node_index.clone(),
            ends,
        };
        if network.positive_flow_order(&oriented).is_none() {
            return Err(Error::CyclicFlows);
        }
        Ok((network, oriented))
    }

    /// True when `other` is the same grid up to line orientation: equal
    /// node lists, and per line equal id, endpoint pair, reactance and
    /// capacity. Flow-oriented copies of one network compare equal.
    pub fn same_topology(&self, other: &Network) -> bool {
        if self.nodes != other.nodes || self.lines.len() != other.lines.len() {
            return false;
        }
        self.lines.iter().zip(&other.lines).all(|(a, b)| {
            let endpoints_match = (a.from == b.from && a.to == b.to)
                || (a.from == b.to && a.to == b.from);
            a.id == b.id
                && endpoints_match
                && a.reactance == b.reactance
                && a.capacity == b.capacity
        })
    }

    /// Topological order of nodes in the strictly-positive-flow digraph,
    /// or `None` if that digraph has a cycle.
    pub fn positive_flow_order(&self, flows: &[f64]) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_degree = vec![0usize; n];
        for (k, &(from, to)) in self.ends.iter().enumerate() {
            if flows[k] > 0.0 {
                out_edges[from].push(to);
                in_degree[to] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&u| in_degree[u] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = queue.pop() {
            order.push(u);
            for &v in &out_edges[u] {
                in_degree[v] -= 1;
                if in_degree[v] == 0 {
                    queue.push(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Rows are lines, columns are nodes; row `k` of the signed matrix carries
/// +1 at the from-node and -1 at the to-node of line `k`, so the signed
/// matrix equals the from-part minus the to-part elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrices {
    pub signed: DMatrix<f64>,
    pub from_part: DMatrix<f64>,
    pub to_part: DMatrix<f64>,
}

/// Total assignment of nodes to bidding zones.
///
/// Values of this type are never mutated; the split operation produces a
/// fresh map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneMap {
    assignment: BTreeMap<String, String>,
}

impl ZoneMap {
    pub fn from_nodes(nodes: &[Node]) -> Self {
        Self {
            assignment: nodes
                .iter()
                .map(|n| (n.id.clone(), n.zone.clone()))
                .collect(),
        }
    }

    /// Build from explicit (node, zone) pairs; `validate_for` should be
    /// called before use against a particular network.
    pub fn from_assignment(assignment: BTreeMap<String, String>) -> Self {
        Self { assignment }
    }

    pub fn zone_of(&self, node_id: &str) -> Option<&str> {
        self.assignment.get(node_id).map(String::as_str)
    }

    /// Distinct zone ids, in lexicographic order.
    pub fn zones(&self) -> BTreeSet<&str> {
        self.assignment.values().map(String::as_str).collect()
    }

    pub fn assignment(&self) -> &BTreeMap<String, String> {
        &self.assignment
    }

    /// Node ids belonging to `zone`, in map order.
    pub fn nodes_in(&self, zone: &str) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, z)| z.as_str() == zone)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Check the map is a total function over the network's nodes with
    /// non-blank zone labels.
    pub fn validate_for(&self, network: &Network) -> Result<()> {
        for node in network.nodes() {
            match self.assignment.get(&node.id) {
                None => return Err(Error::ZoneMapIncomplete(node.id.clone())),
                Some(zone) if zone.trim().is_empty() => {
                    return Err(Error::BlankZone(node.id.clone()))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Zone id of each node by network index.
    pub fn zone_indices(&self, network: &Network) -> Result<(Vec<usize>, Vec<String>)> {
        self.validate_for(network)?;
        let zones: Vec<String> = self.zones().into_iter().map(str::to_owned).collect();
        let lookup: HashMap<&str, usize> = zones
            .iter()
            .enumerate()
            .map(|(i, z)| (z.as_str(), i))
            .collect();
        let per_node = network
            .nodes()
            .iter()
            .map(|n| lookup[self.assignment[&n.id].as_str()])
            .collect();
        Ok((per_node, zones))
    }

    /// New map with the given nodes reassigned.
    pub fn with_reassignment<'a, I>(&self, moves: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut assignment = self.assignment.clone();
        for (node, zone) in moves {
            assignment.insert(node.to_owned(), zone.to_owned());
        }
        Self { assignment }
    }
}
