//! Weighted digraphs and the matrices derived from them.
//!
//! An edge `(from, to)` carries a confidence `c` in (0,1] and a Poisson rate
//! `r > 0`; the matrices only ever consume the combined weight `w = c * r`,
//! stored at adjacency entry `(from, to)`. Under the conservative protocol
//! the rate matrix is the negated in-degree Laplacian (columns sum to zero,
//! mass flows `to -> from`); under the non-conservative protocol it is the
//! negated out-degree Laplacian (rows sum to zero, the polling walker moves
//! `from -> to`).
//!
//! Nodes are 0-based in memory. The JSON file schema and all CLI output are
//! 1-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod random;
pub use random::{generate_random_graph, RandomModel};

/// Update protocol tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// P1: pairwise transfer, network total preserved.
    #[serde(rename = "P1")]
    Conservative,
    /// P2: convex polling update, total not preserved.
    #[serde(rename = "P2")]
    NonConservative,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Conservative => write!(f, "P1"),
            Protocol::NonConservative => write!(f, "P2"),
        }
    }
}

/// Degree direction selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// A directed edge with its confidence and Poisson clock rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub confidence: f64,
    pub rate: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, confidence: f64, rate: f64) -> Self {
        Edge {
            from,
            to,
            confidence,
            rate,
        }
    }

    /// Combined weight `w = c * r` consumed by the matrix constructions.
    pub fn weight(&self) -> f64 {
        self.confidence * self.rate
    }
}

/// Validated weighted digraph: no self-loops, no duplicate directed edges,
/// confidences in (0,1], rates strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedDigraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::NodeOutOfRange {
                    from: e.from + 1,
                    to: e.to + 1,
                    n,
                });
            }
            if e.from == e.to {
                return Err(Error::SelfLoop { node: e.from + 1 });
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::DuplicateEdge {
                    from: e.from + 1,
                    to: e.to + 1,
                });
            }
            if !(e.confidence > 0.0 && e.confidence <= 1.0) || !(e.rate > 0.0) {
                return Err(Error::BadWeight {
                    from: e.from + 1,
                    to: e.to + 1,
                    confidence: e.confidence,
                    rate: e.rate,
                });
            }
        }
        Ok(WeightedDigraph { n, edges })
    }

    /// Convenience constructor from `(from, to, weight)` triples with the
    /// weight stored as the confidence and a unit rate.
    pub fn from_weights(n: usize, weights: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = weights
            .iter()
            .map(|&(f, t, w)| Edge::new(f, t, w, 1.0))
            .collect();
        WeightedDigraph::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The same graph with every edge direction reversed. Edge order is
    /// preserved so derived matrices accumulate sums in the same order.
    pub fn reversed(&self) -> Self {
        WeightedDigraph {
            n: self.n,
            edges: self
                .edges
                .iter()
                .map(|e| Edge::new(e.to, e.from, e.confidence, e.rate))
                .collect(),
        }
    }

    /// Weighted adjacency matrix: `A[(from, to)] = c * r` on edges, 0 elsewhere.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.from, e.to)] = e.weight();
        }
        a
    }

    /// Diagonal degree matrix. `In`: column sums of the adjacency;
    /// `Out`: row sums.
    pub fn degree_matrix(&self, direction: Direction) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        // Accumulate in edge-list order so that reversing the graph swaps
        // in/out degrees bit-exactly.
        for e in &self.edges {
            let k = match direction {
                Direction::In => e.to,
                Direction::Out => e.from,
            };
            d[(k, k)] += e.weight();
        }
        d
    }

    /// Weighted Laplacian `L = D - A` for the chosen degree direction.
    pub fn laplacian(&self, direction: Direction) -> DMatrix<f64> {
        self.degree_matrix(direction) - self.adjacency_matrix()
    }

    /// Transition rate matrix of the expected dynamics under `protocol`.
    pub fn transition_rate_matrix(&self, protocol: Protocol) -> TransitionRateMatrix {
        let direction = match protocol {
            Protocol::Conservative => Direction::In,
            Protocol::NonConservative => Direction::Out,
        };
        TransitionRateMatrix {
            q: -self.laplacian(direction),
            protocol,
        }
    }

    /// True iff every node can reach every other following edge directions.
    pub fn is_strongly_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut fwd = vec![Vec::new(); self.n];
        let mut bwd = vec![Vec::new(); self.n];
        for e in &self.edges {
            fwd[e.from].push(e.to);
            bwd[e.to].push(e.from);
        }
        reaches_all(&fwd, self.n) && reaches_all(&bwd, self.n)
    }

    /// True iff the underlying undirected graph is connected.
    pub fn is_weakly_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        reaches_all(&adj, self.n)
    }

    /// Out-neighbour set of `node`.
    pub fn out_neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.from == node)
            .map(|e| e.to)
            .collect()
    }
}

fn reaches_all(adj: &[Vec<usize>], n: usize) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// A rate matrix together with the protocol it was built for.
///
/// Off-diagonal entries are nonnegative; columns (P1) or rows (P2) sum to
/// zero up to rounding in the degree accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRateMatrix {
    q: DMatrix<f64>,
    protocol: Protocol,
}

impl TransitionRateMatrix {
    /// Wrap an externally built matrix. No validation is performed here; use
    /// [`crate::spectral::is_ctmc_generator`] to check.
    pub fn from_parts(q: DMatrix<f64>, protocol: Protocol) -> Self {
        TransitionRateMatrix { q, protocol }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.q
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Strong connectivity of the off-diagonal sparsity pattern.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.dim();
        if n == 0 {
            return false;
        }
        let mut fwd = vec![Vec::new(); n];
        let mut bwd = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && self.q[(i, j)] != 0.0 {
                    fwd[i].push(j);
                    bwd[j].push(i);
                }
            }
        }
        reaches_all(&fwd, n) && reaches_all(&bwd, n)
    }
}

/// JSON graph file: `{"n": 5, "protocol": "P1", "edges": [{"from": 1, "to": 2, "c": 1.0, "r": 1.0}]}`
/// with 1-based node ids. This is the canonical input for every CLI command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub protocol: Protocol,
    pub edges: Vec<GraphFileEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFileEdge {
    pub from: usize,
    pub to: usize,
    pub c: f64,
    pub r: f64,
}

impl GraphFile {
    pub fn from_graph(g: &WeightedDigraph, protocol: Protocol) -> Self {
        GraphFile {
            n: g.node_count(),
            protocol,
            edges: g
                .edges()
                .iter()
                .map(|e| GraphFileEdge {
                    from: e.from + 1,
                    to: e.to + 1,
                    c: e.confidence,
                    r: e.rate,
                })
                .collect(),
        }
    }

    /// Validate and convert to the 0-based in-memory graph.
    pub fn to_graph(&self) -> Result<WeightedDigraph> {
        let edges = self
            .edges
            .iter()
            .map(|e| {
                if e.from == 0 || e.to == 0 {
                    return Err(Error::NodeOutOfRange {
                        from: e.from,
                        to: e.to,
                        n: self.n,
                    });
                }
                Ok(Edge::new(e.from - 1, e.to - 1, e.c, e.r))
            })
            .collect::<Result<Vec<_>>>()?;
        WeightedDigraph::new(self.n, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn rejects_self_loop() {
        let err = WeightedDigraph::from_weights(3, &[(1, 1, 0.5)]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { node: 2 }));
    }

    #[test]
    fn rejects_duplicate_edge() {
        let err = WeightedDigraph::from_weights(3, &[(0, 1, 0.5), (0, 1, 0.7)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge { from: 1, to: 2 }));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(
            WeightedDigraph::from_weights(2, &[(0, 1, 0.0)]),
            Err(Error::BadWeight { .. })
        ));
        assert!(matches!(
            WeightedDigraph::from_weights(2, &[(0, 1, 1.5)]),
            Err(Error::BadWeight { .. })
        ));
        assert!(matches!(
            WeightedDigraph::new(2, vec![Edge::new(0, 1, 0.5, -1.0)]),
            Err(Error::BadWeight { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            WeightedDigraph::from_weights(2, &[(0, 2, 0.5)]),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_graph_has_zero_adjacency() {
        let g = WeightedDigraph::new(3, vec![]).unwrap();
        assert_eq!(g.adjacency_matrix(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn path5_has_eight_edges() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edges().len(), 8);
    }

    #[test]
    fn two_node_symmetric_unit_matrices() {
        let g = WeightedDigraph::from_weights(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let a = g.adjacency_matrix();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(g.degree_matrix(Direction::In), DMatrix::identity(2, 2));
        assert_eq!(g.degree_matrix(Direction::Out), DMatrix::identity(2, 2));
        let l = g.laplacian(Direction::In);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let q = g.transition_rate_matrix(Protocol::Conservative);
        assert_eq!(
            q.matrix(),
            &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0])
        );
    }

    #[test]
    fn symmetric_laplacians_coincide() {
        let g = presets::path_with_back_weight(5, 1.0).unwrap();
        assert_eq!(g.laplacian(Direction::In), g.laplacian(Direction::Out));
    }

    #[test]
    fn c4a_degree_and_laplacian() {
        // In-degree at node 2 of the drawn cycle is w(1->2) + w(3->2) = 2.
        let g = presets::asymmetric_four_cycle().unwrap();
        let d_in = g.degree_matrix(Direction::In);
        assert_eq!(d_in[(1, 1)], 2.0);
        // Conservative generator lives on the reversed orientation.
        let q = g
            .reversed()
            .transition_rate_matrix(Protocol::Conservative);
        for j in 0..4 {
            let col_sum: f64 = q.matrix().column(j).iter().sum();
            assert!(col_sum.abs() < 1e-12);
        }
    }

    #[test]
    fn star_out_degree_at_center() {
        let g = presets::star_graph(5).unwrap();
        assert_eq!(g.degree_matrix(Direction::Out)[(0, 0)], 4.0);
    }

    #[test]
    fn p5_row_sums_vanish_under_p2() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        let q = g.transition_rate_matrix(Protocol::NonConservative);
        for i in 0..5 {
            let row_sum: f64 = q.matrix().row(i).iter().sum();
            assert!(row_sum.abs() < 1e-12);
        }
    }

    #[test]
    fn reversal_duality_is_exact() {
        let g = presets::asymmetric_four_cycle().unwrap();
        let q1 = g.transition_rate_matrix(Protocol::Conservative);
        let q2 = g
            .reversed()
            .transition_rate_matrix(Protocol::NonConservative);
        assert_eq!(q1.matrix(), &q2.matrix().transpose());
    }

    #[test]
    fn graph_file_round_trip() {
        let g = presets::asymmetric_four_cycle().unwrap();
        let file = GraphFile::from_graph(&g, Protocol::NonConservative);
        let json = serde_json::to_string(&file).unwrap();
        let parsed: GraphFile = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_graph().unwrap(), g);
        assert_eq!(parsed.protocol, Protocol::NonConservative);
    }

    #[test]
    fn strong_connectivity() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        assert!(g.is_strongly_connected());
        let one_way = WeightedDigraph::from_weights(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(!one_way.is_strongly_connected());
        assert!(one_way.is_weakly_connected());
    }
}
