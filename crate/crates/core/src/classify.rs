//! Classification of traced exchange components against a zone map.
//!
//! Each (load, generator, line) component falls in exactly one of four
//! categories, decided purely by the zonal attribution of the transaction
//! parties and of the line's two endpoints:
//!
//! * internal — generator, load and both line endpoints share one zone;
//! * import/export — cross-zone transaction using only lines whose
//!   endpoints lie inside the two transacting zones;
//! * transit — cross-zone transaction loading a line with an endpoint in
//!   some third zone;
//! * loop flow — intra-zone transaction loading a line with an endpoint
//!   outside that zone.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{IncidenceMatrices, Network, ZoneMap};
use crate::trace::TraceResult;

/// Transmission category of one exchange component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Category {
    Internal,
    ImportExport,
    Transit,
    LoopFlow,
}

impl Category {
    /// Two-letter report code.
    pub fn code(self) -> &'static str {
        match self {
            Category::Internal => "IN",
            Category::ImportExport => "IE",
            Category::Transit => "TR",
            Category::LoopFlow => "LF",
        }
    }
}

/// Classify one component by the zones of its load node, generator node,
/// and the line's two endpoints. The four cases are mutually exclusive and
/// exhaustive.
pub fn classify<Z: PartialEq>(load_zone: Z, gen_zone: Z, line_ends: (Z, Z)) -> Category {
    let (end1, end2) = line_ends;
    if load_zone == gen_zone {
        if end1 == load_zone && end2 == load_zone {
            Category::Internal
        } else {
            Category::LoopFlow
        }
    } else {
        let inside = |end: &Z| *end == load_zone || *end == gen_zone;
        if inside(&end1) && inside(&end2) {
            Category::ImportExport
        } else {
            Category::Transit
        }
    }
}

/// Classify one exchange component given as node and line ids.
pub fn classify_component(
    network: &Network,
    zone_map: &ZoneMap,
    load_node: &str,
    gen_node: &str,
    line: &str,
) -> Result<Category> {
    zone_map.validate_for(network)?;
    let zone = |id: &str| {
        network
            .node_idx(id)
            .and_then(|_| zone_map.zone_of(id))
            .ok_or_else(|| Error::UnknownNode(id.to_owned()))
    };
    let k = network
        .line_idx(line)
        .ok_or_else(|| Error::UnknownLine(line.to_owned()))?;
    let (end1, end2) = network.endpoints(k);
    Ok(classify(
        zone(load_node)?,
        zone(gen_node)?,
        (
            zone_map.zone_of(&network.node(end1).id).expect("validated"),
            zone_map.zone_of(&network.node(end2).id).expect("validated"),
        ),
    ))
}

/// Category totals for one line, in MW, plus the per-culprit-zone share of
/// the loop-flow total. Totals sum to the line's flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineDecomposition {
    pub line: String,
    pub flow_mw: f64,
    pub internal_mw: f64,
    pub import_export_mw: f64,
    pub transit_mw: f64,
    pub loop_flow_mw: f64,
    /// Loop-flow MW keyed by the zone whose internal transaction causes it.
    pub loop_flow_by_zone: BTreeMap<String, f64>,
}

impl LineDecomposition {
    pub fn category_mw(&self, category: Category) -> f64 {
        match category {
            Category::Internal => self.internal_mw,
            Category::ImportExport => self.import_export_mw,
            Category::Transit => self.transit_mw,
            Category::LoopFlow => self.loop_flow_mw,
        }
    }

    pub fn category_sum(&self) -> f64 {
        self.internal_mw + self.import_export_mw + self.transit_mw + self.loop_flow_mw
    }
}

/// Per-line decomposition of traced flows into the four categories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionTable {
    pub rows: Vec<LineDecomposition>,
}

impl DecompositionTable {
    /// Loop-flow MW per line, ordered like the network's lines.
    pub fn loop_flow_vector(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loop_flow_mw).collect()
    }

    pub fn total_loop_flow(&self) -> f64 {
        self.rows.iter().map(|r| r.loop_flow_mw).sum()
    }

    /// Loop-flow MW summed per culprit zone over all lines.
    pub fn zone_loop_totals(&self) -> BTreeMap<String, f64> {
        let mut totals = BTreeMap::new();
        for row in &self.rows {
            for (zone, mw) in &row.loop_flow_by_zone {
                *totals.entry(zone.clone()).or_insert(0.0) += mw;
            }
        }
        totals
    }
}

/// Decompose one line's exchange matrix into category totals.
pub fn decompose_line(
    network: &Network,
    zone_map: &ZoneMap,
    trace: &TraceResult,
    k: usize,
) -> Result<LineDecomposition> {
    let (zone_idx, zone_names) = zone_map.zone_indices(network)?;
    Ok(decompose_line_indexed(network, &zone_idx, &zone_names, trace, k))
}

/// Decompose every line of a traced scenario.
pub fn decompose(
    network: &Network,
    zone_map: &ZoneMap,
    trace: &TraceResult,
) -> Result<DecompositionTable> {
    let (zone_idx, zone_names) = zone_map.zone_indices(network)?;
    let rows = (0..network.line_count())
        .map(|k| decompose_line_indexed(network, &zone_idx, &zone_names, trace, k))
        .collect();
    Ok(DecompositionTable { rows })
}

fn decompose_line_indexed(
    network: &Network,
    zone_idx: &[usize],
    zone_names: &[String],
    trace: &TraceResult,
    k: usize,
) -> LineDecomposition {
    let exchange = trace.exchange_matrix(k);
    let (end1, end2) = network.endpoints(k);
    let line_zones = (zone_idx[end1], zone_idx[end2]);
    let mut row = LineDecomposition {
        line: network.line(k).id.clone(),
        flow_mw: trace.flows[k],
        internal_mw: 0.0,
        import_export_mw: 0.0,
        transit_mw: 0.0,
        loop_flow_mw: 0.0,
        loop_flow_by_zone: BTreeMap::new(),
    };
    let n = network.node_count();
    for load in 0..n {
        for gen in 0..n {
            let mw = exchange[(load, gen)];
            if mw <= 0.0 {
                continue;
            }
            match classify(zone_idx[load], zone_idx[gen], line_zones) {
                Category::Internal => row.internal_mw += mw,
                Category::ImportExport => row.import_export_mw += mw,
                Category::Transit => row.transit_mw += mw,
                Category::LoopFlow => {
                    row.loop_flow_mw += mw;
                    *row
                        .loop_flow_by_zone
                        .entry(zone_names[zone_idx[load]].clone())
                        .or_insert(0.0) += mw;
                }
            }
        }
    }
    row
}

/// Net nodal injections reconstructing a per-line loop-flow pattern:
/// the transposed signed incidence applied to the oriented loop-flow
/// magnitudes. Positive entries are net loop-flow sources, negative
/// entries net sinks; the vector sums to zero.
pub fn loop_injections(incidence: &IncidenceMatrices, loop_flows: &[f64]) -> DVector<f64> {
    incidence.signed.transpose() * DVector::from_row_slice(loop_flows)
}

/// Zone ranking criterion: plain MW totals, or MW weighted by line
/// capacity (lines without a capacity are skipped).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    Absolute,
    Relative,
}

/// One zone's loop-flow burden.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneRank {
    pub zone: String,
    #[serde(rename = "lf_total_mw")]
    pub loop_flow_mw: f64,
    pub mode: RankMode,
}

/// Rank zones by the loop flow their internal transactions impose,
/// descending, ties broken by zone id. Every zone of the map appears.
pub fn rank_zones(
    table: &DecompositionTable,
    zone_map: &ZoneMap,
    network: &Network,
    mode: RankMode,
) -> Result<Vec<ZoneRank>> {
    if mode == RankMode::Relative && network.lines().iter().all(|l| l.capacity.is_none()) {
        return Err(Error::NoCapacities);
    }
    let mut totals: BTreeMap<String, f64> = zone_map
        .zones()
        .into_iter()
        .map(|z| (z.to_owned(), 0.0))
        .collect();
    for (k, row) in table.rows.iter().enumerate() {
        let weight = match mode {
            RankMode::Absolute => 1.0,
            RankMode::Relative => match network.line(k).capacity {
                Some(cap) => 1.0 / cap,
                None => continue,
            },
        };
        for (zone, mw) in &row.loop_flow_by_zone {
            *totals.entry(zone.clone()).or_insert(0.0) += mw * weight;
        }
    }
    let mut ranking: Vec<ZoneRank> = totals
        .into_iter()
        .map(|(zone, loop_flow_mw)| ZoneRank {
            zone,
            loop_flow_mw,
            mode,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.loop_flow_mw
            .total_cmp(&a.loop_flow_mw)
            .then_with(|| a.zone.cmp(&b.zone))
    });
    Ok(ranking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc::{solve_dc, Scenario};
    use crate::network::DEFAULT_EPSILON;
    use crate::testdata;
    use crate::trace::trace;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn traced_four_node() -> (crate::network::Network, DecompositionTable, TraceResult) {
        let (network, scenario) = testdata::four_node_case();
        let solution = solve_dc(&network, &scenario, None).unwrap();
        let (oriented, flows) = network
            .oriented_by_flow(&solution.flows, DEFAULT_EPSILON)
            .unwrap();
        let result = trace(
            &oriented,
            &oriented.incidence(),
            &flows,
            &scenario,
            DEFAULT_EPSILON,
        )
        .unwrap();
        let table = decompose(&oriented, &oriented.zone_map(), &result).unwrap();
        (oriented, table, result)
    }

    #[test]
    fn classify_all_same_zone_is_internal() {
        assert_eq!(classify("A", "A", ("A", "A")), Category::Internal);
    }

    #[test]
    fn classify_intra_zone_over_foreign_line_is_loop_flow() {
        assert_eq!(classify("A", "A", ("A", "B")), Category::LoopFlow);
        assert_eq!(classify("A", "A", ("B", "B")), Category::LoopFlow);
    }

    #[test]
    fn classify_cross_zone_inside_parties_is_import_export() {
        assert_eq!(classify("A", "B", ("A", "B")), Category::ImportExport);
        assert_eq!(classify("A", "B", ("B", "B")), Category::ImportExport);
        assert_eq!(classify("A", "B", ("A", "A")), Category::ImportExport);
    }

    #[test]
    fn classify_cross_zone_over_third_zone_is_transit() {
        assert_eq!(classify("A", "B", ("C", "C")), Category::Transit);
        assert_eq!(classify("A", "B", ("A", "C")), Category::Transit);
    }

    #[test]
    fn classify_component_resolves_ids() {
        let (network, _) = testdata::four_node_case();
        let zone_map = network.zone_map();
        // line 4 sits inside zone B
        assert_eq!(
            classify_component(&network, &zone_map, "3", "1", "4").unwrap(),
            Category::LoopFlow
        );
        assert_eq!(
            classify_component(&network, &zone_map, "4", "2", "4").unwrap(),
            Category::Internal
        );
        assert!(matches!(
            classify_component(&network, &zone_map, "9", "1", "4"),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            classify_component(&network, &zone_map, "3", "1", "99"),
            Err(Error::UnknownLine(_))
        ));
    }

    #[test]
    fn exactly_one_category_over_all_zone_combinations() {
        let zones = [0usize, 1, 2, 3];
        for &zi in &zones {
            for &zj in &zones {
                for &z1 in &zones {
                    for &z2 in &zones {
                        let internal = zi == zj && z1 == zi && z2 == zi;
                        let loop_flow = zi == zj && (z1 != zi || z2 != zi);
                        let inside = |z: usize| z == zi || z == zj;
                        let import_export = zi != zj && inside(z1) && inside(z2);
                        let transit = zi != zj && (!inside(z1) || !inside(z2));
                        let fired =
                            [internal, import_export, transit, loop_flow]
                                .iter()
                                .filter(|&&b| b)
                                .count();
                        assert_eq!(fired, 1, "predicates must partition ({zi},{zj},{z1},{z2})");
                        let expected = if internal {
                            Category::Internal
                        } else if import_export {
                            Category::ImportExport
                        } else if transit {
                            Category::Transit
                        } else {
                            Category::LoopFlow
                        };
                        assert_eq!(classify(zi, zj, (z1, z2)), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn four_node_line_two_is_purely_internal() {
        let (_, table, _) = traced_four_node();
        let row = &table.rows[1];
        assert!(close(row.internal_mw, 221.50, 0.01));
        assert!(close(row.import_export_mw, 0.0, 0.01));
        assert!(close(row.transit_mw, 0.0, 0.01));
        assert!(close(row.loop_flow_mw, 0.0, 0.01));
    }

    #[test]
    fn four_node_line_five_splits_into_exchange_and_loop() {
        let (_, table, _) = traced_four_node();
        let row = &table.rows[4];
        assert!(close(row.import_export_mw, 32.51, 0.01));
        assert!(close(row.loop_flow_mw, 49.99, 0.01));
        assert!(close(*row.loop_flow_by_zone.get("A").unwrap(), 49.99, 0.01));
        assert!(!row.loop_flow_by_zone.contains_key("B"));
    }

    #[test]
    fn single_zone_map_yields_internal_only() {
        let (oriented, _, result) = traced_four_node();
        let merged = oriented
            .zone_map()
            .with_reassignment(oriented.nodes().iter().map(|n| (n.id.as_str(), "ALL")));
        let table = decompose(&oriented, &merged, &result).unwrap();
        for row in &table.rows {
            assert!(close(row.internal_mw, row.flow_mw, 1e-9));
            assert_eq!(row.loop_flow_mw, 0.0);
        }
    }

    #[test]
    fn rows_conserve_line_flow() {
        let (_, table, _) = traced_four_node();
        for row in &table.rows {
            assert!(close(row.category_sum(), row.flow_mw, 1e-6), "{}", row.line);
        }
    }

    #[test]
    fn culprit_zone_shares_sum_to_the_loop_total() {
        let (_, table, _) = traced_four_node();
        for row in &table.rows {
            let by_zone: f64 = row.loop_flow_by_zone.values().sum();
            assert!(close(by_zone, row.loop_flow_mw, 1e-9), "{}", row.line);
        }
    }

    #[test]
    fn loop_injections_zero_for_zero_vector() {
        let (network, _) = testdata::four_node_case();
        let p = loop_injections(&network.incidence(), &[0.0; 5]);
        assert_eq!(p.iter().map(|v| v.abs()).sum::<f64>(), 0.0);
    }

    #[test]
    fn loop_injections_smallest_case() {
        let network = crate::network::Network::new(
            vec![
                crate::network::Node {
                    id: "1".into(),
                    zone: "A".into(),
                },
                crate::network::Node {
                    id: "2".into(),
                    zone: "A".into(),
                },
            ],
            vec![crate::network::Line {
                id: "L1".into(),
                from: "1".into(),
                to: "2".into(),
                reactance: 1.0,
                capacity: None,
            }],
        )
        .unwrap();
        let p = loop_injections(&network.incidence(), &[10.0]);
        assert_eq!(p.as_slice(), &[10.0, -10.0]);
    }

    #[test]
    fn four_node_loop_injections_sum_to_zero() {
        let (oriented, table, _) = traced_four_node();
        let lf = table.loop_flow_vector();
        let p = loop_injections(&oriented.incidence(), &lf);
        assert!(close(p.sum(), 0.0, 1e-9));
        // node 1 sources what it pushes out on lines 1 and 3; node 3 sinks
        // the whole loop-flow pattern arriving over lines 2 and 5.
        assert!(close(p[0], lf[0] + lf[2], 1e-9));
        assert!(close(p[2], -(lf[1] + lf[4]), 1e-9));
        assert!(close(p[1], 0.0, 1e-9));
        assert!(close(p[3], 0.0, 1e-9));
    }

    #[test]
    fn absolute_ranking_of_four_node_case() {
        let (oriented, table, _) = traced_four_node();
        let ranking = rank_zones(&table, &oriented.zone_map(), &oriented, RankMode::Absolute).unwrap();
        assert_eq!(ranking.len(), 2);
        assert_eq!(ranking[0].zone, "A");
        assert!(close(ranking[0].loop_flow_mw, 117.17, 0.01));
        assert_eq!(ranking[1].zone, "B");
        assert_eq!(ranking[1].loop_flow_mw, 0.0);
    }

    #[test]
    fn all_zero_ranking_orders_by_zone_id() {
        // grouping both generators against both loads leaves every
        // transaction cross-zonal, so no loop flow can arise
        let (oriented, _, result) = traced_four_node();
        let gens_vs_loads = oriented
            .zone_map()
            .with_reassignment([("1", "A"), ("2", "A"), ("3", "B"), ("4", "B")]);
        let table = decompose(&oriented, &gens_vs_loads, &result).unwrap();
        assert_eq!(table.total_loop_flow(), 0.0);
        let ranking = rank_zones(&table, &gens_vs_loads, &oriented, RankMode::Absolute).unwrap();
        assert_eq!(ranking[0].zone, "A");
        assert_eq!(ranking[1].zone, "B");
        assert_eq!(ranking[0].loop_flow_mw, 0.0);
    }

    #[test]
    fn relative_ranking_with_uniform_capacities_keeps_winner() {
        let network = testdata::four_node_network(&[Some(250.0); 5]);
        let scenario = Scenario::new(
            &network,
            "base",
            vec![394.5, 112.5, 0.0, 0.0],
            vec![0.0, 0.0, 304.0, 203.0],
        )
        .unwrap();
        let solution = solve_dc(&network, &scenario, None).unwrap();
        let (oriented, flows) = network
            .oriented_by_flow(&solution.flows, DEFAULT_EPSILON)
            .unwrap();
        let result = trace(
            &oriented,
            &oriented.incidence(),
            &flows,
            &scenario,
            DEFAULT_EPSILON,
        )
        .unwrap();
        let table = decompose(&oriented, &oriented.zone_map(), &result).unwrap();
        let absolute =
            rank_zones(&table, &oriented.zone_map(), &oriented, RankMode::Absolute).unwrap();
        let relative =
            rank_zones(&table, &oriented.zone_map(), &oriented, RankMode::Relative).unwrap();
        assert_eq!(absolute[0].zone, relative[0].zone);
        // uniform capacity scales every total by the same factor
        for (abs, rel) in absolute.iter().zip(&relative) {
            assert!(close(rel.loop_flow_mw, abs.loop_flow_mw / 250.0, 1e-9));
        }
    }

    #[test]
    fn relative_ranking_skips_lines_without_capacity() {
        // only line 5 carries a capacity, so only its loop flow counts
        let network = testdata::four_node_network(&[None, None, None, None, Some(100.0)]);
        let scenario = Scenario::new(
            &network,
            "base",
            vec![394.5, 112.5, 0.0, 0.0],
            vec![0.0, 0.0, 304.0, 203.0],
        )
        .unwrap();
        let solution = solve_dc(&network, &scenario, None).unwrap();
        let (oriented, flows) = network
            .oriented_by_flow(&solution.flows, DEFAULT_EPSILON)
            .unwrap();
        let result = trace(
            &oriented,
            &oriented.incidence(),
            &flows,
            &scenario,
            DEFAULT_EPSILON,
        )
        .unwrap();
        let table = decompose(&oriented, &oriented.zone_map(), &result).unwrap();
        let ranking =
            rank_zones(&table, &oriented.zone_map(), &oriented, RankMode::Relative).unwrap();
        assert_eq!(ranking[0].zone, "A");
        let line5_loop = table.rows[4].loop_flow_mw;
        assert!(close(ranking[0].loop_flow_mw, line5_loop / 100.0, 1e-9));
    }

    #[test]
    fn relative_ranking_without_capacities_errors() {
        let (oriented, table, _) = traced_four_node();
        let err =
            rank_zones(&table, &oriented.zone_map(), &oriented, RankMode::Relative).unwrap_err();
        assert!(matches!(err, Error::NoCapacities));
    }
}
