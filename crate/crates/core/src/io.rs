//! File formats: network and scenario readers, report writers.
//!
//! Inputs
//! * network (JSON): `{"nodes":[{"id","zone"}], "lines":[{"id","from","to","reactance","capacity"?}]}`;
//!   node and line order in the file fixes matrix indexing. Ids may be JSON
//!   strings or numbers; numbers are normalized to their decimal string.
//! * scenarios (JSON or CSV): per scenario, per node, generation and load
//!   in MW. CSV columns: `scenario,node,gen_mw,load_mw`.
//! * flows (CSV): `scenario,line,mw`, or `line,mw` for a single scenario.
//!   Supplying flows bypasses the DC solve.
//!
//! Outputs are plain CSV/JSON files; decomposition CSVs round to two
//! decimals while their JSON sidecars keep full precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer};
use serde_json::json;

use crate::classify::{DecompositionTable, ZoneRank};
use crate::error::{Error, Result};
use crate::network::{Line, Network, Node, ZoneMap};
use crate::split::SplitResult;
use crate::trace::TraceResult;

/// Accept a JSON string or number wherever an identifier is expected.
fn flexible_id<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Number(serde_json::Number),
    }
    Ok(match Raw::deserialize(de)? {
        Raw::Text(s) => s,
        Raw::Number(n) => n.to_string(),
    })
}

#[derive(Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeRecord>,
    lines: Vec<LineRecord>,
}

#[derive(Deserialize)]
struct NodeRecord {
    #[serde(deserialize_with = "flexible_id")]
    id: String,
    #[serde(deserialize_with = "flexible_id")]
    zone: String,
}

#[derive(Deserialize)]
struct LineRecord {
    #[serde(deserialize_with = "flexible_id")]
    id: String,
    #[serde(deserialize_with = "flexible_id")]
    from: String,
    #[serde(deserialize_with = "flexible_id")]
    to: String,
    reactance: f64,
    #[serde(default)]
    capacity: Option<f64>,
}

/// Read and validate a network file.
pub fn read_network(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)?;
    let file: NetworkFile = serde_json::from_str(&text)?;
    let nodes = file
        .nodes
        .into_iter()
        .map(|n| Node {
            id: n.id,
            zone: n.zone,
        })
        .collect();
    let lines = file
        .lines
        .into_iter()
        .map(|l| Line {
            id: l.id,
            from: l.from,
            to: l.to,
            reactance: l.reactance,
            capacity: l.capacity,
        })
        .collect();
    Network::new(nodes, lines)
}

/// Raw per-scenario injections keyed by node id, before length/balance
/// validation against a concrete network.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecord {
    pub label: String,
    pub gen: BTreeMap<String, f64>,
    pub load: BTreeMap<String, f64>,
}

impl ScenarioRecord {
    /// Resolve node ids against a network, defaulting absent nodes to zero.
    pub fn into_scenario(self, network: &Network) -> Result<crate::dc::Scenario> {
        let mut gen = vec![0.0; network.node_count()];
        let mut load = vec![0.0; network.node_count()];
        for (id, mw) in &self.gen {
            let idx = network
                .node_idx(id)
                .ok_or_else(|| Error::UnknownNode(id.clone()))?;
            gen[idx] = *mw;
        }
        for (id, mw) in &self.load {
            let idx = network
                .node_idx(id)
                .ok_or_else(|| Error::UnknownNode(id.clone()))?;
            load[idx] = *mw;
        }
        crate::dc::Scenario::new(network, self.label, gen, load)
    }
}

#[derive(Deserialize)]
struct ScenariosFile {
    scenarios: Vec<ScenarioEntry>,
}

#[derive(Deserialize)]
struct ScenarioEntry {
    #[serde(deserialize_with = "flexible_id")]
    label: String,
    nodes: Vec<InjectionRecord>,
}

#[derive(Deserialize)]
struct InjectionRecord {
    #[serde(deserialize_with = "flexible_id")]
    id: String,
    #[serde(default)]
    gen: f64,
    #[serde(default)]
    load: f64,
}

/// Read scenarios from JSON (`{"scenarios":[{"label","nodes":[{"id","gen","load"}]}]}`)
/// or CSV (`scenario,node,gen_mw,load_mw`); the format is sniffed from the
/// content, falling back to the file extension.
pub fn read_scenarios(path: &Path) -> Result<Vec<ScenarioRecord>> {
    let text = fs::read_to_string(path)?;
    let looks_json = text.trim_start().starts_with('{')
        || path.extension().and_then(|e| e.to_str()) == Some("json");
    let records = if looks_json {
        parse_scenarios_json(&text)?
    } else {
        parse_scenarios_csv(&text)?
    };
    if records.is_empty() {
        return Err(Error::NoScenarios);
    }
    let mut seen = std::collections::BTreeSet::new();
    for record in &records {
        if !seen.insert(record.label.clone()) {
            return Err(Error::Schema(format!(
                "duplicate scenario label `{}`",
                record.label
            )));
        }
    }
    Ok(records)
}

fn parse_scenarios_json(text: &str) -> Result<Vec<ScenarioRecord>> {
    let file: ScenariosFile = serde_json::from_str(text)?;
    file.scenarios
        .into_iter()
        .map(|entry| {
            let mut gen = BTreeMap::new();
            let mut load = BTreeMap::new();
            for record in entry.nodes {
                if gen.insert(record.id.clone(), record.gen).is_some() {
                    return Err(Error::Schema(format!(
                        "scenario `{}` lists node `{}` twice",
                        entry.label, record.id
                    )));
                }
                load.insert(record.id, record.load);
            }
            Ok(ScenarioRecord {
                label: entry.label,
                gen,
                load,
            })
        })
        .collect()
}

fn parse_scenarios_csv(text: &str) -> Result<Vec<ScenarioRecord>> {
    #[derive(Deserialize)]
    struct Row {
        scenario: String,
        node: String,
        gen_mw: f64,
        load_mw: f64,
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut by_label: BTreeMap<String, ScenarioRecord> = BTreeMap::new();
    let mut order = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        let record = by_label.entry(row.scenario.clone()).or_insert_with(|| {
            order.push(row.scenario.clone());
            ScenarioRecord {
                label: row.scenario.clone(),
                gen: BTreeMap::new(),
                load: BTreeMap::new(),
            }
        });
        if record.gen.insert(row.node.clone(), row.gen_mw).is_some() {
            return Err(Error::Schema(format!(
                "scenario `{}` lists node `{}` twice",
                row.scenario, row.node
            )));
        }
        record.load.insert(row.node, row.load_mw);
    }
    Ok(order.into_iter().map(|label| by_label.remove(&label).unwrap()).collect())
}

/// Read a flows file: `scenario,line,mw` rows, or `line,mw` rows that apply
/// to a single unnamed scenario (returned under the empty-string key).
/// Every referenced line must exist; each (scenario, line) pair may appear
/// once, and every line of the network must be covered.
pub fn read_flows(path: &Path, network: &Network) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let has_scenario = headers.iter().any(|h| h == "scenario");
    let line_col = headers
        .iter()
        .position(|h| h == "line")
        .ok_or_else(|| Error::Schema("flows file needs a `line` column".into()))?;
    let mw_col = headers
        .iter()
        .position(|h| h == "mw")
        .ok_or_else(|| Error::Schema("flows file needs a `mw` column".into()))?;
    let scenario_col = headers.iter().position(|h| h == "scenario");

    let mut flows: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let label = if has_scenario {
            row.get(scenario_col.unwrap())
                .unwrap_or_default()
                .to_owned()
        } else {
            String::new()
        };
        let line_id = row
            .get(line_col)
            .ok_or_else(|| Error::Schema("short flows row".into()))?;
        let mw: f64 = row
            .get(mw_col)
            .ok_or_else(|| Error::Schema("short flows row".into()))?
            .parse()
            .map_err(|_| Error::Schema(format!("bad MW value for line `{line_id}`")))?;
        let k = network
            .line_idx(line_id)
            .ok_or_else(|| Error::UnknownLine(line_id.to_owned()))?;
        let per_line = flows
            .entry(label.clone())
            .or_insert_with(|| vec![None; network.line_count()]);
        if per_line[k].replace(mw).is_some() {
            return Err(Error::Schema(format!(
                "flow for line `{line_id}` given twice in scenario `{label}`"
            )));
        }
    }
    flows
        .into_iter()
        .map(|(label, per_line)| {
            let complete: Result<Vec<f64>> = per_line
                .into_iter()
                .enumerate()
                .map(|(k, v)| {
                    v.ok_or_else(|| {
                        Error::Schema(format!(
                            "flows for scenario `{label}` miss line `{}`",
                            network.line(k).id
                        ))
                    })
                })
                .collect();
            Ok((label, complete?))
        })
        .collect()
}

/// Format a MW value for report CSVs: two decimals, never "-0.00".
pub fn format_mw(value: f64) -> String {
    let s = format!("{value:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Decomposition report CSV, one row per line in network order.
pub fn write_decomposition_csv(path: &Path, table: &DecompositionTable) -> Result<()> {
    let mut out = String::from("line_id,IN,IE,TR,LF\n");
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.line,
            format_mw(row.internal_mw),
            format_mw(row.import_export_mw),
            format_mw(row.transit_mw),
            format_mw(row.loop_flow_mw),
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Full-precision JSON sidecar of a decomposition table.
pub fn write_decomposition_json(path: &Path, table: &DecompositionTable) -> Result<()> {
    let value = json!({
        "rows": table.rows,
        "total_loop_flow_mw": table.total_loop_flow(),
        "loop_flow_by_zone_mw": table.zone_loop_totals(),
    });
    write_json(path, &value)
}

pub fn write_ranking_json(path: &Path, ranking: &[ZoneRank]) -> Result<()> {
    write_json(path, &serde_json::to_value(ranking)?)
}

/// Zone map in the same shape as the network file's node list.
pub fn write_zone_map_json(path: &Path, network: &Network, zone_map: &ZoneMap) -> Result<()> {
    let nodes: Vec<_> = network
        .nodes()
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "zone": zone_map.zone_of(&n.id).unwrap_or(&n.zone),
            })
        })
        .collect();
    write_json(path, &json!({ "nodes": nodes }))
}

pub fn write_merge_trace_json(path: &Path, split: &SplitResult) -> Result<()> {
    let value = json!({
        "target_zone": split.target_zone,
        "degenerate": split.degenerate,
        "merges": split.merge_trace,
        "clusters": {
            &split.source_zone: split.source_nodes,
            &split.sink_zone: split.sink_nodes,
        },
        "features": split.cluster_features,
    });
    write_json(path, &value)
}

/// Per-node loop injections, full precision.
pub fn write_loop_injections_csv(path: &Path, network: &Network, values: &[f64]) -> Result<()> {
    let mut out = String::from("node,p_lf_mw\n");
    for (i, node) in network.nodes().iter().enumerate() {
        writeln!(out, "{},{}", node.id, values[i]).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Line flows for one or more scenarios, full precision; round-trips
/// through [`read_flows`].
pub fn write_flows_csv(path: &Path, network: &Network, per_scenario: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = String::from("scenario,line,mw\n");
    for (label, flows) in per_scenario {
        for (k, flow) in flows.iter().enumerate() {
            writeln!(out, "{},{},{}", label, network.line(k).id, flow).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Nodal throughflow per scenario.
pub fn write_throughflow_csv(
    path: &Path,
    network: &Network,
    per_scenario: &[(String, Vec<f64>)],
) -> Result<()> {
    let mut out = String::from("scenario,node,throughflow_mw\n");
    for (label, values) in per_scenario {
        for (i, node) in network.nodes().iter().enumerate() {
            writeln!(out, "{},{},{}", label, node.id, values[i]).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Replace anything outside `[A-Za-z0-9._-]` so labels can name files.
pub fn sanitize_label(label: &str) -> String {
    let mut cleaned: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() {
        cleaned.push('_');
    }
    cleaned
}

/// Matrix dump with node/line id headers, for debugging.
pub fn write_matrix_csv(
    path: &Path,
    matrix: &DMatrix<f64>,
    row_ids: &[String],
    col_ids: &[String],
) -> Result<()> {
    assert_eq!(matrix.nrows(), row_ids.len());
    assert_eq!(matrix.ncols(), col_ids.len());
    let mut out = String::new();
    out.push_str("id");
    for id in col_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (r, id) in row_ids.iter().enumerate() {
        out.push_str(id);
        for c in 0..matrix.ncols() {
            write!(out, ",{}", matrix[(r, c)]).expect("string write");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Dump the tracing artifacts of one scenario under `dir`.
pub fn write_debug_matrices(dir: &Path, network: &Network, trace: &TraceResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    let node_ids: Vec<String> = network.nodes().iter().map(|n| n.id.clone()).collect();
    let line_ids: Vec<String> = network.lines().iter().map(|l| l.id.clone()).collect();
    write_matrix_csv(&dir.join("flow_matrix.csv"), &trace.flow_matrix, &node_ids, &node_ids)?;
    write_matrix_csv(&dir.join("gen_to_line.csv"), &trace.gen_to_line, &line_ids, &node_ids)?;
    write_matrix_csv(&dir.join("load_to_line.csv"), &trace.load_to_line, &line_ids, &node_ids)?;
    for k in 0..network.line_count() {
        let name = format!("exchange_{}.csv", sanitize_label(&network.line(k).id));
        write_matrix_csv(&dir.join(name), &trace.exchange_matrix(k), &node_ids, &node_ids)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_file_round_trip_with_numeric_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        fs::write(
            &path,
            r#"{
                "nodes": [
                    {"id": 1, "zone": "A"},
                    {"id": 2, "zone": "B"}
                ],
                "lines": [
                    {"id": "L1", "from": 1, "to": 2, "reactance": 0.5, "capacity": 100.0}
                ]
            }"#,
        )
        .unwrap();
        let network = read_network(&path).unwrap();
        assert_eq!(network.node(0).id, "1");
        assert_eq!(network.line(0).capacity, Some(100.0));
    }

    #[test]
    fn scenarios_json_and_csv_agree() {
        let dir = tempfile::tempdir().unwrap();
        let json_path = dir.path().join("s.json");
        fs::write(
            &json_path,
            r#"{"scenarios":[{"label":"w1","nodes":[
                {"id":"1","gen":10.0},
                {"id":"2","load":10.0}
            ]}]}"#,
        )
        .unwrap();
        let csv_path = dir.path().join("s.csv");
        fs::write(
            &csv_path,
            "scenario,node,gen_mw,load_mw\nw1,1,10.0,0\nw1,2,0,10.0\n",
        )
        .unwrap();
        let a = read_scenarios(&json_path).unwrap();
        let b = read_scenarios(&csv_path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].label, "w1");
        assert_eq!(a[0].gen["1"], 10.0);
    }

    #[test]
    fn duplicate_scenario_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        fs::write(
            &path,
            r#"{"scenarios":[
                {"label":"w","nodes":[{"id":"1","gen":1.0},{"id":"2","load":1.0}]},
                {"label":"w","nodes":[{"id":"1","gen":2.0},{"id":"2","load":2.0}]}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(read_scenarios(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn flows_file_must_cover_every_line() {
        let (network, _) = crate::testdata::four_node_case();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "scenario,line,mw\nbase,1,59.5\n").unwrap();
        assert!(matches!(read_flows(&path, &network), Err(Error::Schema(_))));
    }

    #[test]
    fn flows_round_trip() {
        let (network, _) = crate::testdata::four_node_case();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let flows = vec![
            ("base".to_owned(), vec![59.5, 221.5, 113.5, 172.0, 82.5]),
        ];
        write_flows_csv(&path, &network, &flows).unwrap();
        let read = read_flows(&path, &network).unwrap();
        assert_eq!(read["base"], flows[0].1);
    }

    #[test]
    fn two_column_flows_use_anonymous_scenario() {
        let (network, _) = crate::testdata::four_node_case();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(
            &path,
            "line,mw\n1,59.5\n2,221.5\n3,113.5\n4,172\n5,82.5\n",
        )
        .unwrap();
        let read = read_flows(&path, &network).unwrap();
        assert_eq!(read.len(), 1);
        assert!(read.contains_key(""));
    }

    #[test]
    fn mw_formatting_avoids_negative_zero() {
        assert_eq!(format_mw(-1e-12), "0.00");
        assert_eq!(format_mw(49.9912), "49.99");
        assert_eq!(format_mw(-0.006), "-0.01");
    }
}
