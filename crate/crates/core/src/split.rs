//! Target-zone selection and loop-flow-driven zone splitting.
//!
//! The zone whose internal transactions cause the largest loop-flow burden
//! is split into two electrically contiguous sub-zones by agglomerative
//! clustering on each node's net loop-flow-inducing injection. Nodes that
//! on average source the pattern end up separated from nodes that sink it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::classify::ZoneRank;
use crate::error::{Error, Result};
use crate::network::{Network, ZoneMap};

/// Features closer than this are considered equal when flagging a
/// degenerate (uniform-feature) split.
const FEATURE_TOLERANCE: f64 = 1e-9;

/// One recorded merge of the agglomerative clustering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeStep {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub distance: f64,
}

/// Outcome of splitting one zone into a source-side and a sink-side part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub target_zone: String,
    /// Label of the sub-zone with the higher mean feature (net sources).
    pub source_zone: String,
    /// Label of the sub-zone with the lower mean feature (net sinks).
    pub sink_zone: String,
    pub source_nodes: Vec<String>,
    pub sink_nodes: Vec<String>,
    /// Per-node clustering feature: the loop-flow-inducing injection.
    pub cluster_features: BTreeMap<String, f64>,
    /// Dendrogram record, one entry per merge.
    pub merge_trace: Vec<MergeStep>,
    /// True when every feature in the target zone was equal, so the split
    /// was decided by merge order alone.
    pub degenerate: bool,
    #[serde(skip)]
    pub new_zone_map: ZoneMap,
}

/// Pick the top-ranked zone, refusing when its loop-flow total vanishes.
pub fn select_target_zone(ranking: &[ZoneRank]) -> Result<&str> {
    let top = ranking.first().ok_or(Error::NoLoopFlows)?;
    if top.loop_flow_mw <= FEATURE_TOLERANCE {
        return Err(Error::NoLoopFlows);
    }
    Ok(&top.zone)
}

/// Split `target` into two connected sub-zones by average-linkage
/// agglomerative clustering of its nodes' loop injections.
///
/// Merges are restricted to clusters adjacent via at least one line whose
/// endpoints both lie in the target zone, so both sub-zones stay
/// electrically contiguous. Equal-distance candidates are merged
/// lowest-node-id first. The sub-zone with the higher mean feature gets
/// the `_src` suffix, the other `_snk`; all other zones are untouched.
pub fn split_zone(
    network: &Network,
    zone_map: &ZoneMap,
    target: &str,
    loop_injections: &[f64],
) -> Result<SplitResult> {
    zone_map.validate_for(network)?;
    assert_eq!(loop_injections.len(), network.node_count(), "feature length");
    if !zone_map.zones().contains(target) {
        return Err(Error::UnknownZone(target.to_owned()));
    }

    let members: Vec<usize> = (0..network.node_count())
        .filter(|&i| zone_map.zone_of(&network.node(i).id) == Some(target))
        .collect();
    if members.len() < 2 {
        return Err(Error::TargetTooSmall(target.to_owned()));
    }

    // Lines internal to the target zone, as member-relative index pairs.
    let member_pos: BTreeMap<usize, usize> = members
        .iter()
        .enumerate()
        .map(|(pos, &idx)| (idx, pos))
        .collect();
    let mut intra_edges = Vec::new();
    for k in 0..network.line_count() {
        let (from, to) = network.endpoints(k);
        if let (Some(&a), Some(&b)) = (member_pos.get(&from), member_pos.get(&to)) {
            intra_edges.push((a, b));
        }
    }
    if !is_connected(members.len(), &intra_edges) {
        return Err(Error::TargetDisconnected(target.to_owned()));
    }

    let features: Vec<f64> = members.iter().map(|&i| loop_injections[i]).collect();
    let spread = features.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let degenerate = spread.1 - spread.0 <= FEATURE_TOLERANCE;

    let id_of = |pos: usize| network.node(members[pos]).id.clone();

    // Agglomerative loop over member-relative clusters.
    let mut clusters: Vec<Vec<usize>> = (0..members.len()).map(|pos| vec![pos]).collect();
    let mut merge_trace = Vec::new();
    while clusters.len() > 2 {
        let mut best: Option<(f64, String, String, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                if !adjacent(&clusters[a], &clusters[b], &intra_edges) {
                    continue;
                }
                let distance = (mean(&clusters[a], &features) - mean(&clusters[b], &features)).abs();
                let mut ids = [cluster_min_id(&clusters[a], &id_of), cluster_min_id(&clusters[b], &id_of)];
                ids.sort();
                let [lo, hi] = ids;
                let candidate = (distance, lo, hi, a, b);
                let better = match &best {
                    None => true,
                    Some((d, l, h, _, _)) => {
                        (candidate.0, &candidate.1, &candidate.2) < (*d, l, h)
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        // A connected target always leaves at least one adjacent pair.
        let (distance, _, _, a, b) = best.ok_or_else(|| Error::TargetDisconnected(target.to_owned()))?;
        merge_trace.push(MergeStep {
            left: sorted_ids(&clusters[a], &id_of),
            right: sorted_ids(&clusters[b], &id_of),
            distance,
        });
        let absorbed = clusters.swap_remove(b);
        clusters[a].extend(absorbed);
        clusters.sort_by_key(|c| *c.iter().min().unwrap());
    }

    let (first, second) = (&clusters[0], &clusters[1]);
    let first_is_source = match mean(first, &features).total_cmp(&mean(second, &features)) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => cluster_min_id(first, &id_of) <= cluster_min_id(second, &id_of),
    };
    let (source_cluster, sink_cluster) = if first_is_source {
        (first, second)
    } else {
        (second, first)
    };

    let source_zone = fresh_zone_label(zone_map, target, "src");
    let sink_zone = fresh_zone_label(zone_map, target, "snk");
    let source_nodes = sorted_ids(source_cluster, &id_of);
    let sink_nodes = sorted_ids(sink_cluster, &id_of);
    let new_zone_map = zone_map.with_reassignment(
        source_nodes
            .iter()
            .map(|id| (id.as_str(), source_zone.as_str()))
            .chain(sink_nodes.iter().map(|id| (id.as_str(), sink_zone.as_str()))),
    );

    debug_assert!(subzone_connected(source_cluster, &intra_edges));
    debug_assert!(subzone_connected(sink_cluster, &intra_edges));

    Ok(SplitResult {
        target_zone: target.to_owned(),
        source_zone,
        sink_zone,
        source_nodes,
        sink_nodes,
        cluster_features: members
            .iter()
            .map(|&i| (network.node(i).id.clone(), loop_injections[i]))
            .collect(),
        merge_trace,
        degenerate,
        new_zone_map,
    })
}

fn mean(cluster: &[usize], features: &[f64]) -> f64 {
    cluster.iter().map(|&pos| features[pos]).sum::<f64>() / cluster.len() as f64
}

fn adjacent(a: &[usize], b: &[usize], edges: &[(usize, usize)]) -> bool {
    edges.iter().any(|&(u, v)| {
        (a.contains(&u) && b.contains(&v)) || (a.contains(&v) && b.contains(&u))
    })
}

fn cluster_min_id(cluster: &[usize], id_of: &impl Fn(usize) -> String) -> String {
    cluster.iter().map(|&pos| id_of(pos)).min().unwrap()
}

fn sorted_ids(cluster: &[usize], id_of: &impl Fn(usize) -> String) -> Vec<String> {
    let mut ids: Vec<String> = cluster.iter().map(|&pos| id_of(pos)).collect();
    ids.sort();
    ids
}

fn fresh_zone_label(zone_map: &ZoneMap, target: &str, suffix: &str) -> String {
    let base = format!("{target}_{suffix}");
    if !zone_map.zones().contains(base.as_str()) {
        return base;
    }
    let mut n = 2;
    loop {
        let label = format!("{base}{n}");
        if !zone_map.zones().contains(label.as_str()) {
            return label;
        }
        n += 1;
    }
}

fn is_connected(count: usize, edges: &[(usize, usize)]) -> bool {
    if count == 0 {
        return false;
    }
    let mut adjacency = vec![Vec::new(); count];
    for &(a, b) in edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = vec![false; count];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut visited = 1;
    while let Some(u) = stack.pop() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                visited += 1;
                stack.push(v);
            }
        }
    }
    visited == count
}

fn subzone_connected(cluster: &[usize], edges: &[(usize, usize)]) -> bool {
    let inside: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|&(a, b)| cluster.contains(&a) && cluster.contains(&b))
        .collect();
    let index: BTreeMap<usize, usize> = cluster
        .iter()
        .enumerate()
        .map(|(rank, &pos)| (pos, rank))
        .collect();
    let relabeled: Vec<(usize, usize)> = inside
        .iter()
        .map(|&(a, b)| (index[&a], index[&b]))
        .collect();
    is_connected(cluster.len(), &relabeled)
}
