//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    // Graph construction.
    #[error("self-loop on node {node} (1-based)")]
    SelfLoop { node: usize },
    #[error("duplicate directed edge {from} -> {to} (1-based)")]
    DuplicateEdge { from: usize, to: usize },
    #[error("bad weight on edge {from} -> {to} (1-based): confidence {confidence} must be in (0,1], rate {rate} must be > 0")]
    BadWeight {
        from: usize,
        to: usize,
        confidence: f64,
        rate: f64,
    },
    #[error("edge {from} -> {to} (1-based) references a node outside 1..={n}")]
    NodeOutOfRange { from: usize, to: usize, n: usize },
    #[error("bad random-graph parameters: {0}")]
    BadParams(String),

    // Spectral analysis.
    #[error("matrix is not reliably diagonalizable (eigenvector condition {condition:.3e} exceeds {threshold:.3e})")]
    Defective { condition: f64, threshold: f64 },
    #[error("matrix has no zero eigenvalue (smallest |q| = {smallest:.3e}); not a generator")]
    NoZeroEigenvalue { smallest: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // Dynamics.
    #[error("operation requires a conservative (P1) rate matrix")]
    NotConservative,
    #[error("operation requires a non-conservative (P2) rate matrix")]
    NotNonConservative,
    #[error("rate matrix pattern is not strongly connected")]
    NotStronglyConnected,
    #[error("matrix rank {rank} below n-1 = {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("spectrum has an eigenvalue with positive real part {0:.3e}; bound undefined")]
    UnstableSpectrum(f64),
    #[error("switching schedule is invalid: {0}")]
    BadSchedule(String),

    // Monte Carlo.
    #[error("horizon must be positive and contain the sample grid: {0}")]
    BadHorizon(String),

    // Exogenous inputs.
    #[error("stubborn set is empty")]
    EmptyStubborn,
    #[error("every node is stubborn; nothing to reduce")]
    AllStubborn,
    #[error("stubborn index {0} out of range or repeated")]
    BadStubbornIndex(usize),
    #[error("reduced rate matrix is singular")]
    SingularReduced,
    #[error("gain must be positive (got {0})")]
    BadGain(f64),
    #[error("PID leading coefficient 1 + beta2' vanishes")]
    DegenerateLeadingCoefficient,
    #[error("unsupported input for this operation: {0}")]
    UnsupportedInput(String),

    // Modal control.
    #[error("closed loop on mode {mode} is unstable (pole real part {real:.3e})")]
    UnstableClosedLoop { mode: usize, real: f64 },
    #[error("mode index {mode} out of range for {n} modes")]
    BadMode { mode: usize, n: usize },
    #[error("node-space result has imaginary residue {0:.3e}; conjugate symmetry violated")]
    ImaginaryResidue(f64),
    #[error("graph is disconnected")]
    Disconnected,

    // Respectrum.
    #[error("the steady eigenvalue q_s = 0 (mode {0}) may not be edited")]
    SteadyModeEdited(usize),
    #[error("edited eigenvalue for mode {mode} has positive real part {real:.3e}")]
    UnstableEdit { mode: usize, real: f64 },
    #[error("complex eigenvalue edits must come in conjugate pairs (mode {0})")]
    ConjugatePairViolated(usize),
    #[error("modes {modes:?} form a degenerate cluster; edit all of them to the same value or none")]
    PartialClusterEdit { modes: Vec<usize> },

    // MDP / Q-learning.
    #[error("bad learning configuration: {0}")]
    BadConfig(String),
    #[error("state {state} is absorbing (total outgoing rate {rate:.3e}); learning cannot continue")]
    AbsorbingState { state: usize, rate: f64 },
    #[error("generator is reducible (null space dimension > 1)")]
    Reducible,
}

pub type Result<T> = std::result::Result<T, Error>;
