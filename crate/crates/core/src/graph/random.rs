//! Seeded random graph generators.
//!
//! All models draw from a `ChaCha8Rng` seeded with the caller's seed, so a
//! fixed `(model, params, seed)` triple always yields the same graph. The
//! classic undirected models (Erdős–Rényi, Barabási–Albert, Watts–Strogatz)
//! are emitted as symmetric digraphs with unit weights; `RandomComplete`
//! builds a complete digraph with each link confidence drawn uniformly from
//! (0,1] and unit rates.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Edge, WeightedDigraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomModel {
    /// Each undirected pair is linked independently with probability `p`.
    ErdosRenyi { n: usize, p: f64 },
    /// Preferential attachment, `m` links per arriving node.
    BarabasiAlbert { n: usize, m: usize },
    /// Ring over `k` nearest neighbours with rewiring probability `beta`.
    WattsStrogatz { n: usize, k: usize, beta: f64 },
    /// Complete digraph, confidences uniform on (0,1], unit rates.
    RandomComplete { n: usize },
}

pub fn generate_random_graph(model: RandomModel, seed: u64) -> Result<WeightedDigraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        RandomModel::ErdosRenyi { n, p } => {
            if n == 0 || !(0.0..=1.0).contains(&p) {
                return Err(Error::BadParams(format!("erdos-renyi n={n} p={p}")));
            }
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        edges.push(Edge::new(i, j, 1.0, 1.0));
                        edges.push(Edge::new(j, i, 1.0, 1.0));
                    }
                }
            }
            WeightedDigraph::new(n, edges)
        }
        RandomModel::BarabasiAlbert { n, m } => {
            if m == 0 || n <= m {
                return Err(Error::BadParams(format!("barabasi-albert n={n} m={m}")));
            }
            // Seed clique on m+1 nodes, then attach each new node to m
            // distinct targets chosen proportionally to degree.
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            let mut degree = vec![0usize; n];
            for i in 0..=m {
                for j in (i + 1)..=m {
                    pairs.push((i, j));
                    degree[i] += 1;
                    degree[j] += 1;
                }
            }
            for v in (m + 1)..n {
                let mut targets: Vec<usize> = Vec::with_capacity(m);
                while targets.len() < m {
                    let total: usize = degree[..v].iter().sum();
                    let mut pick = rng.random_range(0..total);
                    let mut chosen = 0;
                    for (u, &d) in degree[..v].iter().enumerate() {
                        if pick < d {
                            chosen = u;
                            break;
                        }
                        pick -= d;
                    }
                    if !targets.contains(&chosen) {
                        targets.push(chosen);
                    }
                }
                for &u in &targets {
                    pairs.push((v, u));
                    degree[v] += 1;
                    degree[u] += 1;
                }
            }
            let mut edges = Vec::with_capacity(2 * pairs.len());
            for (i, j) in pairs {
                edges.push(Edge::new(i, j, 1.0, 1.0));
                edges.push(Edge::new(j, i, 1.0, 1.0));
            }
            WeightedDigraph::new(n, edges)
        }
        RandomModel::WattsStrogatz { n, k, beta } => {
            if n == 0 || k == 0 || k % 2 != 0 || k >= n || !(0.0..=1.0).contains(&beta) {
                return Err(Error::BadParams(format!("watts-strogatz n={n} k={k} beta={beta}")));
            }
            let mut present = std::collections::HashSet::new();
            for i in 0..n {
                for d in 1..=(k / 2) {
                    let j = (i + d) % n;
                    present.insert(ordered(i, j));
                }
            }
            // Rewire the clockwise endpoint of each ring edge with
            // probability beta, avoiding loops and duplicates.
            for i in 0..n {
                for d in 1..=(k / 2) {
                    let j = (i + d) % n;
                    if rng.random::<f64>() < beta {
                        let mut tries = 0;
                        loop {
                            let new_j = rng.random_range(0..n);
                            if new_j != i && !present.contains(&ordered(i, new_j)) {
                                present.remove(&ordered(i, j));
                                present.insert(ordered(i, new_j));
                                break;
                            }
                            tries += 1;
                            if tries > 16 * n {
                                break; // saturated neighbourhood; keep the ring edge
                            }
                        }
                    }
                }
            }
            let mut pairs: Vec<_> = present.into_iter().collect();
            pairs.sort_unstable();
            let mut edges = Vec::with_capacity(2 * pairs.len());
            for (i, j) in pairs {
                edges.push(Edge::new(i, j, 1.0, 1.0));
                edges.push(Edge::new(j, i, 1.0, 1.0));
            }
            WeightedDigraph::new(n, edges)
        }
        RandomModel::RandomComplete { n } => {
            if n < 2 {
                return Err(Error::BadParams(format!("random-complete n={n}")));
            }
            let mut edges = Vec::with_capacity(n * (n - 1));
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        // 1 - u maps [0,1) onto (0,1].
                        let c = 1.0 - rng.random::<f64>();
                        edges.push(Edge::new(i, j, c, 1.0));
                    }
                }
            }
            WeightedDigraph::new(n, edges)
        }
    }
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}
