//! Shared test support: seeded random grids and scenarios, and an
//! independent path-enumeration oracle for the tracing engine.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::Rng;
use zoneflow::{Line, Network, Node, Scenario};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Random connected network with up to `max_nodes` nodes and `max_lines`
/// lines (a spanning tree plus random extras, parallel lines allowed),
/// random reactances, and nodes scattered over up to four zones.
pub fn random_network(rng: &mut impl Rng, max_nodes: usize, max_lines: usize) -> Network {
    let n = rng.gen_range(2..=max_nodes);
    let zone_count = rng.gen_range(1..=4.min(n));
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: format!("n{i}"),
            zone: format!("Z{}", rng.gen_range(0..zone_count)),
        })
        .collect();

    let mut lines = Vec::new();
    let mut add_line = |rng: &mut dyn rand::RngCore, from: usize, to: usize, idx: usize| {
        let (from, to) = if rng.gen_range(0..2) == 1 {
            (to, from)
        } else {
            (from, to)
        };
        lines.push(Line {
            id: format!("l{idx}"),
            from: format!("n{from}"),
            to: format!("n{to}"),
            reactance: rng.gen_range(0..191) as f64 * 0.01 + 0.1,
            capacity: if rng.gen_range(0..2) == 1 {
                Some(rng.gen_range(50..500) as f64)
            } else {
                None
            },
        });
    };
    for idx in 1..n {
        let parent = rng.gen_range(0..idx);
        add_line(rng, parent, idx, idx - 1);
    }
    let extra = rng.gen_range(0..=(max_lines.saturating_sub(n - 1)).min(12));
    for e in 0..extra {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n);
        while b == a {
            b = rng.gen_range(0..n);
        }
        add_line(rng, a, b, n - 1 + e);
    }
    Network::new(nodes, lines).expect("construction by spanning tree is valid")
}

/// Random balanced scenario: sparse random generation and load, loads
/// scaled so totals match.
pub fn random_scenario(rng: &mut impl Rng, network: &Network, label: &str) -> Scenario {
    let n = network.node_count();
    let mut gen = vec![0.0; n];
    let mut load = vec![0.0; n];
    for g in gen.iter_mut() {
        if rng.gen_range(0..10) < 4 {
            *g = rng.gen_range(1..2000) as f64 * 0.1;
        }
    }
    for l in load.iter_mut() {
        if rng.gen_range(0..10) < 4 {
            *l = rng.gen_range(1..2000) as f64 * 0.1;
        }
    }
    if gen.iter().sum::<f64>() == 0.0 {
        gen[rng.gen_range(0..n)] = 100.0;
    }
    if load.iter().sum::<f64>() == 0.0 {
        load[rng.gen_range(0..n)] = 50.0;
    }
    let scale = gen.iter().sum::<f64>() / load.iter().sum::<f64>();
    for l in load.iter_mut() {
        *l *= scale;
    }
    Scenario::new(network, label, gen, load).expect("scaled scenario balances")
}

/// Random acyclic flow pattern: every line points from a lower to a higher
/// node index, flows are nonnegative with occasional zeros, and the
/// scenario is derived from the flows so Kirchhoff's law holds exactly.
pub fn random_dag_flows(
    rng: &mut impl Rng,
    max_nodes: usize,
    max_lines: usize,
) -> (Network, Scenario, Vec<f64>) {
    let n = rng.gen_range(2..=max_nodes);
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: format!("n{i}"),
            zone: "Z".into(),
        })
        .collect();
    let mut lines = Vec::new();
    let mut flows = Vec::new();
    let mut push = |rng: &mut dyn rand::RngCore, from: usize, to: usize, idx: usize| {
        lines.push(Line {
            id: format!("l{idx}"),
            from: format!("n{from}"),
            to: format!("n{to}"),
            reactance: 1.0,
            capacity: None,
        });
        flows.push(if rng.gen_range(0..8) == 0 {
            0.0
        } else {
            rng.gen_range(1..1000) as f64 * 0.1
        });
    };
    for to in 1..n {
        let from = rng.gen_range(0..to);
        push(rng, from, to, to - 1);
    }
    let extra = rng.gen_range(0..=(max_lines.saturating_sub(n - 1)).min(8));
    for e in 0..extra {
        let from = rng.gen_range(0..n - 1);
        let to = rng.gen_range(from + 1..n);
        push(rng, from, to, n - 1 + e);
    }
    let network = Network::new(nodes, lines).expect("tree-backed DAG is connected");

    let mut net_injection = vec![0.0; n];
    for (k, &flow) in flows.iter().enumerate() {
        let (from, to) = network.endpoints(k);
        net_injection[from] += flow;
        net_injection[to] -= flow;
    }
    let gen: Vec<f64> = net_injection.iter().map(|v| v.max(0.0)).collect();
    let load: Vec<f64> = net_injection.iter().map(|v| (-v).max(0.0)).collect();
    let scenario = Scenario::new(&network, "dag", gen, load).expect("flows balance by construction");
    (network, scenario, flows)
}

/// Independent proportional-splitting oracle.
///
/// Enumerates every directed path from each generator through the
/// positive-flow digraph. Walking a path multiplies the carried amount by
/// the traversed line's share of the tail node's throughflow; at every
/// node along the way the local load absorbs its share, and that absorbed
/// amount is credited to every line on the path so far. Returns one
/// load-by-generator matrix per line.
pub fn oracle_exchange_matrices(
    network: &Network,
    scenario: &Scenario,
    flows: &[f64],
) -> Vec<DMatrix<f64>> {
    let n = network.node_count();
    let m = network.line_count();

    // throughflow rebuilt locally: inflows plus generation
    let mut through: Vec<f64> = scenario.gen.iter().copied().collect();
    for (k, &flow) in flows.iter().enumerate() {
        through[network.endpoints(k).1] += flow;
    }

    let mut out_edges = vec![Vec::new(); n];
    for (k, &flow) in flows.iter().enumerate() {
        if flow > 0.0 {
            let (from, to) = network.endpoints(k);
            out_edges[from].push((k, to));
        }
    }

    let mut exchanges = vec![DMatrix::zeros(n, n); m];

    struct Walk<'a> {
        out_edges: &'a [Vec<(usize, usize)>],
        through: &'a [f64],
        flows: &'a [f64],
        load: &'a nalgebra::DVector<f64>,
        exchanges: &'a mut [DMatrix<f64>],
        source: usize,
    }

    fn step(walk: &mut Walk, node: usize, carried: f64, path: &mut Vec<usize>) {
        if !path.is_empty() && walk.load[node] > 0.0 && walk.through[node] > 0.0 {
            let absorbed = carried * walk.load[node] / walk.through[node];
            for &line in path.iter() {
                walk.exchanges[line][(node, walk.source)] += absorbed;
            }
        }
        if walk.through[node] <= 0.0 {
            return;
        }
        for &(line, next) in &walk.out_edges[node] {
            let forwarded = carried * walk.flows[line] / walk.through[node];
            path.push(line);
            step(walk, next, forwarded, path);
            path.pop();
        }
    }

    for source in 0..n {
        if scenario.gen[source] <= 0.0 {
            continue;
        }
        let mut walk = Walk {
            out_edges: &out_edges,
            through: &through,
            flows,
            load: &scenario.load,
            exchanges: &mut exchanges,
            source,
        };
        let mut path = Vec::new();
        step(&mut walk, source, scenario.gen[source], &mut path);
    }
    exchanges
}
