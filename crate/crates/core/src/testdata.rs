//! Shared unit-test fixtures.

use crate::dc::Scenario;
use crate::network::{Line, Network, Node};

/// Four-node, five-line tracing benchmark with two zones.
///
/// Generators sit at nodes 1 and 2 (394.5 and 112.5 MW), loads at nodes 3
/// and 4 (304 and 203 MW). Reactances are chosen so the DC solution is
/// exactly (59.5, 221.5, 113.5, 172.0, 82.5) MW along the stated line
/// directions.
pub(crate) fn four_node_case() -> (Network, Scenario) {
    let network = four_node_network(&[None; 5]);
    let scenario = Scenario::new(
        &network,
        "base",
        vec![394.5, 112.5, 0.0, 0.0],
        vec![0.0, 0.0, 304.0, 203.0],
    )
    .unwrap();
    (network, scenario)
}

/// Same topology with per-line capacities, for relative-mode ranking tests.
pub(crate) fn four_node_network(capacities: &[Option<f64>; 5]) -> Network {
    let node = |id: &str, zone: &str| Node {
        id: id.into(),
        zone: zone.into(),
    };
    let line = |id: &str, from: &str, to: &str, x: f64, cap: Option<f64>| Line {
        id: id.into(),
        from: from.into(),
        to: to.into(),
        reactance: x,
        capacity: cap,
    };
    Network::new(
        vec![
            node("1", "A"),
            node("2", "B"),
            node("3", "A"),
            node("4", "B"),
        ],
        vec![
            line("1", "1", "2", 1.0, capacities[0]),
            line("2", "1", "3", 1.0, capacities[1]),
            line("3", "1", "4", 1.0, capacities[2]),
            line("4", "2", "4", 27.0 / 86.0, capacities[3]),
            line("5", "4", "3", 72.0 / 55.0, capacities[4]),
        ],
    )
    .unwrap()
}
