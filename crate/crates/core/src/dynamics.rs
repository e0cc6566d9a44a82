//! Deterministic expected-property evolution.
//!
//! The system is linear time-invariant, so every sample is an exact
//! `exp(Q dt)` propagation (or a spectral evaluation when the matrix is
//! diagonalizable); there is no ODE integrator and no step-size coupling in
//! the tests.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Protocol, TransitionRateMatrix};
use crate::spectral::{
    matrix_exponential, null_vectors, numerical_rank, steady_state_vectors, C64,
    SpectralDecomposition,
};

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySource {
    Analytic,
    EnsembleMean,
    Inhomogeneous,
}

/// Time-sampled node-property vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
    pub protocol: Option<Protocol>,
    pub source: TrajectorySource,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
        protocol: Option<Protocol>,
        source: TrajectorySource,
    ) -> Result<Self> {
        validate_times(&times)?;
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if let Some(first) = values.first() {
            let n = first.len();
            if values.iter().any(|v| v.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: 0,
                });
            }
        }
        Ok(Trajectory {
            times,
            values,
            protocol,
            source,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.values.first().map_or(0, DVector::len)
    }

    pub fn value_at(&self, idx: usize) -> &DVector<f64> {
        &self.values[idx]
    }

    pub fn last_value(&self) -> &DVector<f64> {
        self.values.last().expect("trajectory is not empty")
    }

    /// CSV with header `t,node1,...,nodeN`, full double precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for i in 1..=self.node_count() {
            write!(w, ",node{i}")?;
        }
        writeln!(w)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            write!(w, "{t}")?;
            for x in v.iter() {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is valid UTF-8")
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::BadSchedule("sample times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadSchedule("sample times must be strictly ascending".into()));
    }
    Ok(())
}

fn check_dims(q: &DMatrix<f64>, s0: &DVector<f64>) -> Result<()> {
    if q.nrows() != s0.len() {
        return Err(Error::DimensionMismatch {
            expected: q.nrows(),
            got: s0.len(),
        });
    }
    Ok(())
}

/// `S(t) = exp(Q t) S(0)` sampled on `times`. Uses the spectral route when
/// the matrix is diagonalizable and falls back to the scaled exponential
/// otherwise.
pub fn expected_trajectory(
    q: &TransitionRateMatrix,
    s0: &DVector<f64>,
    times: &[f64],
) -> Result<Trajectory> {
    match SpectralDecomposition::compute(q.matrix()) {
        Ok(d) => spectral_trajectory(&d, q.protocol(), s0, times),
        Err(Error::Defective { .. }) => {
            let values = exp_stepping(q.matrix(), s0, times)?;
            Trajectory::new(
                times.to_vec(),
                values,
                Some(q.protocol()),
                TrajectorySource::Analytic,
            )
        }
        Err(e) => Err(e),
    }
}

/// Spectral route only; propagates `Defective` instead of falling back.
pub fn expected_trajectory_spectral(
    q: &TransitionRateMatrix,
    s0: &DVector<f64>,
    times: &[f64],
) -> Result<Trajectory> {
    let d = SpectralDecomposition::compute(q.matrix())?;
    spectral_trajectory(&d, q.protocol(), s0, times)
}

fn spectral_trajectory(
    d: &SpectralDecomposition,
    protocol: Protocol,
    s0: &DVector<f64>,
    times: &[f64],
) -> Result<Trajectory> {
    validate_times(times)?;
    if d.dim() != s0.len() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            got: s0.len(),
        });
    }
    let values = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                Ok(s0.clone())
            } else {
                d.evolve(s0, t)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(
        times.to_vec(),
        values,
        Some(protocol),
        TrajectorySource::Analytic,
    )
}

/// Incremental `exp(Q dt)` stepping; exponentials are cached per distinct
/// step so uniform grids cost a single expm.
pub(crate) fn exp_stepping(
    q: &DMatrix<f64>,
    s0: &DVector<f64>,
    times: &[f64],
) -> Result<Vec<DVector<f64>>> {
    validate_times(times)?;
    check_dims(q, s0)?;
    let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
    let mut values = Vec::with_capacity(times.len());
    let mut state = s0.clone();
    let mut t_prev = 0.0;
    for &t in times {
        let dt = t - t_prev;
        if dt > 0.0 {
            let p = cache
                .entry(dt.to_bits())
                .or_insert_with(|| matrix_exponential(q, dt));
            state = &*p * state;
        }
        values.push(state.clone());
        t_prev = t;
    }
    Ok(values)
}

/// Stationary vector `c_s v_Rs` of a strongly connected conservative
/// network, `c_s = sum(S0) / Psi`. Entries sum to `sum(S0)`.
pub fn stationary_value_conservative(
    q: &TransitionRateMatrix,
    s0: &DVector<f64>,
) -> Result<DVector<f64>> {
    if q.protocol() != Protocol::Conservative {
        return Err(Error::NotConservative);
    }
    check_dims(q.matrix(), s0)?;
    if !q.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let pair = steady_state_vectors(q)?;
    let c_s = s0.sum() / pair.psi;
    Ok(pair.v_rs.scale(c_s))
}

/// Consensus value of a strongly connected non-conservative network:
/// `c_v = v_Ls . S0 / Omega`.
pub fn consensus_value(q: &TransitionRateMatrix, s0: &DVector<f64>) -> Result<f64> {
    if q.protocol() != Protocol::NonConservative {
        return Err(Error::NotNonConservative);
    }
    check_dims(q.matrix(), s0)?;
    if !q.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let pair = steady_state_vectors(q)?;
    Ok(pair.v_ls.dot(s0) / pair.omega)
}

/// Piecewise-constant generator schedule: `segments[k]` applies from its
/// start time until the next segment (or `horizon`).
#[derive(Debug, Clone)]
pub struct SwitchingSchedule {
    segments: Vec<(DMatrix<f64>, f64)>,
    horizon: f64,
}

impl SwitchingSchedule {
    pub fn new(segments: Vec<(DMatrix<f64>, f64)>, horizon: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::BadSchedule("schedule needs at least one segment".into()));
        }
        if segments[0].1 != 0.0 {
            return Err(Error::BadSchedule("first segment must start at t = 0".into()));
        }
        if segments.windows(2).any(|w| w[0].1 >= w[1].1) {
            return Err(Error::BadSchedule("segment starts must be strictly ascending".into()));
        }
        if !(horizon > segments.last().unwrap().1) {
            return Err(Error::BadSchedule("horizon must exceed the last segment start".into()));
        }
        let n = segments[0].0.nrows();
        for (m, _) in &segments {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        Ok(SwitchingSchedule { segments, horizon })
    }

    /// Convenience: alternate between matrices every `period` up to `horizon`.
    pub fn alternating(matrices: &[DMatrix<f64>], period: f64, horizon: f64) -> Result<Self> {
        if matrices.is_empty() || period <= 0.0 {
            return Err(Error::BadSchedule("alternating schedule needs matrices and a positive period".into()));
        }
        let mut segments = Vec::new();
        let mut t = 0.0;
        let mut k = 0;
        while t < horizon {
            segments.push((matrices[k % matrices.len()].clone(), t));
            t += period;
            k += 1;
        }
        SwitchingSchedule::new(segments, horizon)
    }

    pub fn dim(&self) -> usize {
        self.segments[0].0.nrows()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Integrate the switching system, sampling on `times`. The state is
/// continuous across switches; each segment is an exact propagation.
pub fn simulate_switching(
    schedule: &SwitchingSchedule,
    s0: &DVector<f64>,
    times: &[f64],
) -> Result<Trajectory> {
    validate_times(times)?;
    if s0.len() != schedule.dim() {
        return Err(Error::DimensionMismatch {
            expected: schedule.dim(),
            got: s0.len(),
        });
    }
    if times.last().is_some_and(|&t| t > schedule.horizon) {
        return Err(Error::BadSchedule("sample time beyond schedule horizon".into()));
    }

    let mut values = Vec::with_capacity(times.len());
    let mut seg_idx = 0;
    let mut seg_state = s0.clone(); // state at the active segment's start
    let mut sample_iter = times.iter().peekable();
    loop {
        let seg_start = schedule.segments[seg_idx].1;
        let seg_end = schedule
            .segments
            .get(seg_idx + 1)
            .map_or(schedule.horizon, |s| s.1);
        let q = &schedule.segments[seg_idx].0;

        while let Some(&&t) = sample_iter.peek() {
            // Samples exactly at a switch time belong to the closing segment;
            // continuity makes either choice equivalent.
            if t > seg_end {
                break;
            }
            let v = if t == seg_start {
                seg_state.clone()
            } else {
                matrix_exponential(q, t - seg_start) * &seg_state
            };
            values.push(v);
            sample_iter.next();
        }
        if sample_iter.peek().is_none() {
            break;
        }
        seg_state = matrix_exponential(q, seg_end - seg_start) * seg_state;
        seg_idx += 1;
    }
    Trajectory::new(times.to_vec(), values, None, TrajectorySource::Analytic)
}

/// Do two rank-(n-1) matrices share the protocol-appropriate steady
/// eigenvector (right nullspace for P1, left for P2) up to scale?
pub fn shares_steady_eigenvector(
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
    protocol: Protocol,
    tol: f64,
) -> Result<bool> {
    let n = q1.nrows();
    if q2.nrows() != n || q2.ncols() != n || q1.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q2.nrows(),
        });
    }
    for q in [q1, q2] {
        let rank = numerical_rank(q);
        if rank < n - 1 {
            return Err(Error::RankDeficient {
                rank,
                required: n - 1,
            });
        }
    }
    let (r1, l1) = null_vectors(q1)?;
    let (r2, l2) = null_vectors(q2)?;
    let (a, b) = match protocol {
        Protocol::Conservative => (r1, r2),
        Protocol::NonConservative => (l1, l2),
    };
    Ok(1.0 - a.dot(&b).abs() < tol)
}

/// Decay-rate bound for the distance to equilibrium.
#[derive(Debug, Clone)]
pub struct ConvergenceBound {
    /// Real part of the nonzero eigenvalue closest to the imaginary axis.
    pub q_max: f64,
    pub delta0_norm: f64,
}

impl ConvergenceBound {
    /// `||delta(0)||_2 exp(q_max t)`.
    pub fn bound_at(&self, t: f64) -> f64 {
        self.delta0_norm * (self.q_max * t).exp()
    }
}

/// Compute `q_max` and the exponential envelope for a generator whose
/// nonzero spectrum lies strictly in the left half-plane.
pub fn convergence_bound(q: &DMatrix<f64>, delta0: &DVector<f64>) -> Result<ConvergenceBound> {
    check_dims(q, delta0)?;
    let eigenvalues = eigenvalues_snapped(q);
    if !eigenvalues.iter().any(|e| e.re == 0.0 && e.im == 0.0) {
        return Err(Error::NoZeroEigenvalue {
            smallest: eigenvalues
                .iter()
                .map(|e| e.norm())
                .fold(f64::INFINITY, f64::min),
        });
    }
    let mut q_max = f64::NEG_INFINITY;
    for e in &eigenvalues {
        if e.re == 0.0 && e.im == 0.0 {
            continue;
        }
        if e.re >= 0.0 {
            return Err(Error::UnstableSpectrum(e.re));
        }
        q_max = q_max.max(e.re);
    }
    if !q_max.is_finite() {
        // Zero matrix: nothing decays, nothing grows.
        q_max = 0.0;
    }
    Ok(ConvergenceBound {
        q_max,
        delta0_norm: delta0.norm(),
    })
}

/// Eigenvalues only (works for defective matrices), with the structural
/// zero snapped exactly as in [`SpectralDecomposition`].
pub fn eigenvalues_snapped(q: &DMatrix<f64>) -> Vec<C64> {
    let n = q.nrows();
    let pairs = crate::eig::nonsymmetric_eigen(q);
    let diag_max = (0..n).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
    let snap = crate::spectral::ZERO_EIGENVALUE_SNAP * diag_max;
    let mut evs: Vec<C64> = (0..n)
        .map(|k| {
            let e = C64::new(pairs.re[k], pairs.im[k]);
            if e.norm() <= snap {
                C64::new(0.0, 0.0)
            } else {
                e
            }
        })
        .collect();
    evs.sort_by(|a, b| a.re.total_cmp(&b.re).then_with(|| a.im.total_cmp(&b.im)));
    evs
}
