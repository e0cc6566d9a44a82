//! Diffusion of a continuous quantity over weighted directed networks.
//!
//! Agents exchange a scalar property along directed edges, each edge firing
//! on its own Poisson clock. Two update rules are supported: a conservative
//! transfer that preserves the network total, and a non-conservative polling
//! update that drives consensus. Averaged over sample paths, both reduce to
//! linear dynamics generated by a graph Laplacian, which this crate analyzes
//! and manipulates:
//!
//! - [`graph`] — weighted digraphs, adjacency/degree/Laplacian matrices, and
//!   the transition rate matrix of either protocol.
//! - [`spectral`] — biorthogonal eigendecomposition, matrix exponentials,
//!   steady-state vectors, generator validation.
//! - [`dynamics`] — expected trajectories, stationary and consensus values,
//!   switching topologies, convergence bounds.
//! - [`monte_carlo`] — event-driven stochastic simulation and ensemble
//!   statistics for validating the analytic dynamics.
//! - [`exogenous`] — driven dynamics: input convolution, stubborn agents,
//!   dynamic learning, PID-expanded state space, BIBO classification.
//! - [`modal`] — quasi-mode decomposition, per-mode controllers, subsumed
//!   quasi-inputs, Fiedler-vector network classification.
//! - [`redesign`] — rate-matrix reconstruction with edited eigenvalues over
//!   a held eigenvector basis.
//! - [`mdp`] — tabular Q-learning over a set of candidate rate matrices.
//!
//! ```
//! use diffnet::{graph::Protocol, presets};
//! use diffnet::dynamics::{consensus_value, expected_trajectory};
//! use nalgebra::DVector;
//!
//! // Path graph with weak backward links: node 5 dominates the consensus.
//! let g = presets::path_with_back_weight(5, 0.2)?;
//! let q = g.transition_rate_matrix(Protocol::NonConservative);
//! let s0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
//!
//! let c = consensus_value(&q, &s0)?;
//! assert!((c - 0.8003).abs() < 5e-4);
//!
//! let traj = expected_trajectory(&q, &s0, &[0.0, 50.0])?;
//! assert!((traj.last_value()[0] - c).abs() < 1e-6);
//! # Ok::<(), diffnet::Error>(())
//! ```

pub mod dynamics;
pub mod error;
pub mod exogenous;
pub mod graph;
pub mod mdp;
pub mod modal;
pub mod monte_carlo;
pub mod presets;
pub mod redesign;
pub mod spectral;

mod eig;
mod expm;

pub use error::{Error, Result};
pub use graph::{Protocol, TransitionRateMatrix, WeightedDigraph};
pub use spectral::SpectralDecomposition;
