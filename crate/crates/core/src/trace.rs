//! Proportional-sharing flow tracing.
//!
//! Every node is treated as a perfect mixer: the source composition of each
//! outflow equals the composition of the node's total inflow. Propagating
//! that rule through the (acyclic) oriented flow graph attributes every
//! line's flow to generator/load pairs.
//!
//! All operations expect flows that have been oriented nonnegative with
//! [`Network::oriented_by_flow`](crate::network::Network::oriented_by_flow).

use nalgebra::{DMatrix, DVector};

use crate::dc::{Scenario, BALANCE_TOLERANCE};
use crate::error::{Error, Result};
use crate::network::{IncidenceMatrices, Network};

/// Residual bound for the distribution-matrix inversions. The matrices are
/// permutation-similar to unit-triangular ones, so their conditioning is
/// benign and a loose bound suffices to catch bad inputs.
pub const INVERSION_TOLERANCE: f64 = 1e-9;

/// Node-exchange and distribution matrices for one scenario, plus the MW
/// attribution of every line flow to generators and loads.
///
/// Construction is a pure function of (network, flows, scenario); results
/// for independent scenarios can be computed concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    /// Node-to-node flow matrix; entry (i, j) is the MW flowing from node i
    /// directly to node j over all parallel lines.
    pub flow_matrix: DMatrix<f64>,
    /// Total MW through each node: inflows plus local generation.
    pub throughflow: DVector<f64>,
    /// Share of node i's throughflow leaving directly toward node j.
    pub outflow_shares: DMatrix<f64>,
    /// Share of node j's throughflow that arrived directly from node i.
    pub inflow_shares: DMatrix<f64>,
    /// Inverse upstream distribution matrix; row u weights generator
    /// contributions to node u's throughflow.
    pub upstream_inv: DMatrix<f64>,
    /// Inverse downstream distribution matrix; row u weights load
    /// destinations of node u's throughflow.
    pub downstream_inv: DMatrix<f64>,
    /// Generation distribution factors (lines x nodes): MW on line k per MW
    /// generated at node j.
    pub gen_factors: DMatrix<f64>,
    /// Load distribution factors (lines x nodes): MW on line k per MW
    /// consumed at node i.
    pub load_factors: DMatrix<f64>,
    /// MW of each line's flow attributable to each generator node.
    pub gen_to_line: DMatrix<f64>,
    /// MW of each line's flow attributable to each load node.
    pub load_to_line: DMatrix<f64>,
    /// Oriented nonnegative line flows the trace was built from.
    pub flows: Vec<f64>,
    /// Zero-flow tolerance used for the per-line exchange matrices.
    pub epsilon: f64,
}

/// The four distribution matrices and the two inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionMatrices {
    pub outflow_shares: DMatrix<f64>,
    pub inflow_shares: DMatrix<f64>,
    pub upstream: DMatrix<f64>,
    pub downstream: DMatrix<f64>,
    pub upstream_inv: DMatrix<f64>,
    pub downstream_inv: DMatrix<f64>,
}

/// Node-to-node flow matrix from oriented nonnegative flows. Parallel
/// lines between the same pair sum into one entry.
pub fn flow_matrix(incidence: &IncidenceMatrices, flows: &[f64]) -> Result<DMatrix<f64>> {
    for (k, &f) in flows.iter().enumerate() {
        if f < 0.0 {
            return Err(Error::NegativeFlow {
                line: format!("#{k}"),
                flow: f,
            });
        }
    }
    let weights = DMatrix::from_diagonal(&DVector::from_row_slice(flows));
    Ok(incidence.from_part.transpose() * weights * &incidence.to_part)
}

/// Total nodal throughflow: column sums of the flow matrix plus local
/// generation. The equivalent outflow identity (row sums plus local load)
/// is asserted as a consistency check.
pub fn throughflow(
    network: &Network,
    flow_matrix: &DMatrix<f64>,
    scenario: &Scenario,
) -> Result<DVector<f64>> {
    let n = flow_matrix.nrows();
    let mut through = DVector::zeros(n);
    for i in 0..n {
        let inflow: f64 = flow_matrix.column(i).sum();
        let outflow: f64 = flow_matrix.row(i).sum();
        let via_in = inflow + scenario.gen[i];
        let via_out = outflow + scenario.load[i];
        if (via_in - via_out).abs() > BALANCE_TOLERANCE {
            return Err(Error::ThroughflowMismatch {
                node: network.node(i).id.clone(),
                delta: via_in - via_out,
            });
        }
        through[i] = via_in;
    }
    Ok(through)
}

/// Distribution matrices from the flow matrix and throughflow.
///
/// Rows/columns belonging to zero-throughflow nodes are all zero in the
/// share matrices, which leaves the unit diagonal of the distribution
/// matrices intact. Inverses are computed directly and validated against a
/// max-norm residual; failure signals a cyclic flow graph.
pub fn distribution_matrices(
    flow_matrix: &DMatrix<f64>,
    throughflow: &DVector<f64>,
) -> Result<DistributionMatrices> {
    let n = flow_matrix.nrows();
    let mut outflow_shares = DMatrix::zeros(n, n);
    let mut inflow_shares = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let f = flow_matrix[(i, j)];
            if f != 0.0 {
                if throughflow[i] > 0.0 {
                    outflow_shares[(i, j)] = f / throughflow[i];
                }
                if throughflow[j] > 0.0 {
                    inflow_shares[(i, j)] = f / throughflow[j];
                }
            }
        }
    }
    let upstream = DMatrix::identity(n, n) - outflow_shares.transpose();
    let downstream = DMatrix::identity(n, n) - &inflow_shares;
    let upstream_inv = invert_checked(&upstream)?;
    let downstream_inv = invert_checked(&downstream)?;
    Ok(DistributionMatrices {
        outflow_shares,
        inflow_shares,
        upstream,
        downstream,
        upstream_inv,
        downstream_inv,
    })
}

fn invert_checked(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inverse = matrix.clone().try_inverse().ok_or(Error::CyclicFlows)?;
    let residual = (matrix * &inverse - DMatrix::identity(matrix.nrows(), matrix.ncols()))
        .abs()
        .max();
    if residual > INVERSION_TOLERANCE {
        return Err(Error::ResidualTooLarge {
            context: "distribution matrix inversion",
            value: residual,
            tolerance: INVERSION_TOLERANCE,
        });
    }
    Ok(inverse)
}

/// Generation and load distribution factors, per line.
///
/// For line k from node u to node v carrying f, the generation factor row
/// is (f / p_u) times row u of the inverse upstream matrix, and the load
/// factor row is (f / p_v) times row v of the inverse downstream matrix;
/// rows anchored at zero-throughflow nodes are zero.
pub fn distribution_factors(
    network: &Network,
    flows: &[f64],
    throughflow: &DVector<f64>,
    matrices: &DistributionMatrices,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = (network.line_count(), network.node_count());
    let mut gen_factors = DMatrix::zeros(m, n);
    let mut load_factors = DMatrix::zeros(m, n);
    for k in 0..m {
        let (from, to) = network.endpoints(k);
        if throughflow[from] > 0.0 {
            let scale = flows[k] / throughflow[from];
            for j in 0..n {
                gen_factors[(k, j)] = scale * matrices.upstream_inv[(from, j)];
            }
        }
        if throughflow[to] > 0.0 {
            let scale = flows[k] / throughflow[to];
            for i in 0..n {
                load_factors[(k, i)] = scale * matrices.downstream_inv[(to, i)];
            }
        }
    }
    (gen_factors, load_factors)
}

/// MW attribution of every line flow to generators and loads: the factor
/// matrices scaled column-wise by nodal generation and load. Each row sums
/// to the line's flow.
pub fn attribution_matrices(
    gen_factors: &DMatrix<f64>,
    load_factors: &DMatrix<f64>,
    scenario: &Scenario,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut gen_to_line = gen_factors.clone();
    let mut load_to_line = load_factors.clone();
    for j in 0..gen_to_line.ncols() {
        let g = scenario.gen[j];
        let l = scenario.load[j];
        for k in 0..gen_to_line.nrows() {
            gen_to_line[(k, j)] *= g;
            load_to_line[(k, j)] *= l;
        }
    }
    (gen_to_line, load_to_line)
}

/// Mutual power exchange over line `k`: entry (i, j) is the MW that load
/// node i receives from generator node j through the line. Zero matrix for
/// flows at or below `epsilon`.
pub fn exchange_matrix(
    k: usize,
    gen_to_line: &DMatrix<f64>,
    load_to_line: &DMatrix<f64>,
    flows: &[f64],
    epsilon: f64,
) -> DMatrix<f64> {
    let n = gen_to_line.ncols();
    let mut exchange = DMatrix::zeros(n, n);
    if flows[k] <= epsilon {
        return exchange;
    }
    for i in 0..n {
        let to_load = load_to_line[(k, i)];
        if to_load == 0.0 {
            continue;
        }
        for j in 0..n {
            exchange[(i, j)] = to_load * gen_to_line[(k, j)] / flows[k];
        }
    }
    exchange
}

/// Run the full tracing chain for one scenario on an oriented network.
pub fn trace(
    network: &Network,
    incidence: &IncidenceMatrices,
    flows: &[f64],
    scenario: &Scenario,
    epsilon: f64,
) -> Result<TraceResult> {
    let flow_matrix = flow_matrix(incidence, flows)?;
    let throughflow = throughflow(network, &flow_matrix, scenario)?;
    let matrices = distribution_matrices(&flow_matrix, &throughflow)?;
    let (gen_factors, load_factors) =
        distribution_factors(network, flows, &throughflow, &matrices);
    let (gen_to_line, load_to_line) =
        attribution_matrices(&gen_factors, &load_factors, scenario);
    Ok(TraceResult {
        flow_matrix,
        throughflow,
        outflow_shares: matrices.outflow_shares,
        inflow_shares: matrices.inflow_shares,
        upstream_inv: matrices.upstream_inv,
        downstream_inv: matrices.downstream_inv,
        gen_factors,
        load_factors,
        gen_to_line,
        load_to_line,
        flows: flows.to_vec(),
        epsilon,
    })
}

impl TraceResult {
    /// Mutual power exchange over line `k`; see [`exchange_matrix`].
    pub fn exchange_matrix(&self, k: usize) -> DMatrix<f64> {
        exchange_matrix(
            k,
            &self.gen_to_line,
            &self.load_to_line,
            &self.flows,
            self.epsilon,
        )
    }
}
