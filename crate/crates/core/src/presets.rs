//! Named example networks used across tests, docs, and the CLI scenarios.

use crate::error::Result;
use crate::graph::WeightedDigraph;

/// Path graph on `n` nodes: forward links `i -> i+1` with unit weight,
/// backward links `i+1 -> i` with weight `alpha`. `alpha = 1` makes it
/// symmetric.
pub fn path_with_back_weight(n: usize, alpha: f64) -> Result<WeightedDigraph> {
    let mut weights = Vec::with_capacity(2 * (n - 1));
    for i in 0..n - 1 {
        weights.push((i, i + 1, 1.0));
    }
    for i in 0..n - 1 {
        weights.push((i + 1, i, alpha));
    }
    WeightedDigraph::from_weights(n, &weights)
}

/// Four-node asymmetric cycle: both rotation directions present, one with
/// unit weights and the other with weight 1/2, staggered so that nodes 2 and
/// 4 dominate the steady state. Orientation is the polling (P2) reading;
/// take [`WeightedDigraph::reversed`] for the conservative (P1) flow reading.
pub fn asymmetric_four_cycle() -> Result<WeightedDigraph> {
    WeightedDigraph::from_weights(
        4,
        &[
            (0, 1, 1.0),
            (1, 2, 0.5),
            (2, 3, 1.0),
            (3, 0, 0.5),
            (0, 3, 1.0),
            (3, 2, 0.5),
            (2, 1, 1.0),
            (1, 0, 0.5),
        ],
    )
}

/// Star on `n` nodes: node 0 is the hub, symmetric unit links to every leaf.
pub fn star_graph(n: usize) -> Result<WeightedDigraph> {
    let mut weights = Vec::with_capacity(2 * (n - 1));
    for leaf in 1..n {
        weights.push((0, leaf, 1.0));
        weights.push((leaf, 0, 1.0));
    }
    WeightedDigraph::from_weights(n, &weights)
}
