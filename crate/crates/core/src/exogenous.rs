//! Inhomogeneous dynamics: exogenous inputs, stubborn agents, dynamic
//! learning, and the PID-expanded state space.
//!
//! Piecewise-constant inputs are integrated in closed form through the
//! augmented exponential `exp([[M, u], [0, 0]] dt)`, which also covers the
//! structural zero eigenvalue without special casing. Impulses are state
//! jumps. Arbitrary callable inputs go through per-mode adaptive quadrature
//! on the spectral basis (matrix-exponential quadrature when the basis is
//! unreliable).

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{Trajectory, TrajectorySource};
use crate::error::{Error, Result};
use crate::graph::{Protocol, TransitionRateMatrix, WeightedDigraph};
use crate::spectral::{numerical_rank, realify, C64, SpectralDecomposition};

/// Exogenous input vector `U(t)`.
#[derive(Clone)]
pub enum InputSignal {
    /// Constant vector for all `t >= 0`.
    Constant(DVector<f64>),
    /// Instantaneous state jump at `t = 0+`.
    Impulse(DVector<f64>),
    /// Piecewise-constant: value `v_k` on `[t_k, t_{k+1})`, zero before the
    /// first knot. Knots must be ascending.
    Piecewise(Vec<(f64, DVector<f64>)>),
    /// Arbitrary time-varying input; integrated by adaptive quadrature.
    Callable {
        dim: usize,
        f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl std::fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputSignal::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InputSignal::Impulse(v) => f.debug_tuple("Impulse").field(v).finish(),
            InputSignal::Piecewise(k) => f.debug_tuple("Piecewise").field(&k.len()).finish(),
            InputSignal::Callable { dim, .. } => {
                f.debug_struct("Callable").field("dim", dim).finish()
            }
        }
    }
}

impl InputSignal {
    pub fn callable(
        dim: usize,
        f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        InputSignal::Callable {
            dim,
            f: Arc::new(f),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            InputSignal::Constant(v) | InputSignal::Impulse(v) => v.len(),
            InputSignal::Piecewise(knots) => knots.first().map_or(0, |(_, v)| v.len()),
            InputSignal::Callable { dim, .. } => *dim,
        }
    }

    /// Pointwise value; an impulse is zero for every `t > 0`.
    pub fn value_at(&self, t: f64) -> DVector<f64> {
        match self {
            InputSignal::Constant(v) => v.clone(),
            InputSignal::Impulse(v) => DVector::zeros(v.len()),
            InputSignal::Piecewise(knots) => {
                let mut current = DVector::zeros(self.dimension());
                for (knot, v) in knots {
                    if *knot <= t {
                        current = v.clone();
                    } else {
                        break;
                    }
                }
                current
            }
            InputSignal::Callable { f, .. } => f(t),
        }
    }

    /// The same signal scaled by a constant factor.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            InputSignal::Constant(v) => InputSignal::Constant(v.scale(factor)),
            InputSignal::Impulse(v) => InputSignal::Impulse(v.scale(factor)),
            InputSignal::Piecewise(knots) => InputSignal::Piecewise(
                knots.iter().map(|(t, v)| (*t, v.scale(factor))).collect(),
            ),
            InputSignal::Callable { dim, f } => {
                let inner = Arc::clone(f);
                InputSignal::Callable {
                    dim: *dim,
                    f: Arc::new(move |t| inner(t).scale(factor)),
                }
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.dimension(),
            });
        }
        if let InputSignal::Piecewise(knots) = self {
            if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::UnsupportedInput(
                    "piecewise knots must be strictly ascending".into(),
                ));
            }
            if knots.iter().any(|(_, v)| v.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, got: 0 });
            }
        }
        Ok(())
    }
}

/// Exact propagation of `s' = M s + u(t)` for piecewise-constant `u` with
/// optional state jumps, sampled on `times`. Jumps and segment switches at a
/// sample time take effect before the sample (right-continuous state).
pub(crate) fn propagate_piecewise(
    m: &DMatrix<f64>,
    s0: &DVector<f64>,
    segments: &[(f64, DVector<f64>)],
    jumps: &[(f64, DVector<f64>)],
    times: &[f64],
) -> Result<Vec<DVector<f64>>> {
    let n = m.nrows();
    #[derive(Clone, Copy, PartialEq)]
    enum Ev {
        Segment(usize),
        Jump(usize),
        Sample(usize),
    }
    // Merge the three event streams; at equal times segments apply first,
    // then jumps, then samples.
    let mut events: Vec<(f64, u8, Ev)> = Vec::new();
    for (k, (t, _)) in segments.iter().enumerate() {
        events.push((*t, 0, Ev::Segment(k)));
    }
    for (k, (t, _)) in jumps.iter().enumerate() {
        events.push((*t, 1, Ev::Jump(k)));
    }
    for (k, t) in times.iter().enumerate() {
        events.push((*t, 2, Ev::Sample(k)));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut state = s0.clone();
    let mut t_now = 0.0;
    let mut seg_active: Option<usize> = None;
    let mut out = vec![DVector::zeros(0); times.len()];
    // exp of the augmented [[M, u],[0,0]] per (segment, dt).
    let mut cache: HashMap<(usize, u64), DMatrix<f64>> = HashMap::new();
    let hom_key = usize::MAX;

    for (t, _, ev) in events {
        let dt = t - t_now;
        if dt > 0.0 {
            let key = seg_active.unwrap_or(hom_key);
            let e = cache.entry((key, dt.to_bits())).or_insert_with(|| {
                let mut aug = DMatrix::zeros(n + 1, n + 1);
                aug.view_mut((0, 0), (n, n)).copy_from(m);
                if let Some(k) = seg_active {
                    for i in 0..n {
                        aug[(i, n)] = segments[k].1[i];
                    }
                }
                crate::expm::expm(&aug.scale(dt))
            });
            let mut next = DVector::zeros(n);
            for i in 0..n {
                let mut acc = e[(i, n)];
                for j in 0..n {
                    acc += e[(i, j)] * state[j];
                }
                next[i] = acc;
            }
            state = next;
            t_now = t;
        }
        match ev {
            Ev::Segment(k) => seg_active = Some(k),
            Ev::Jump(k) => state += &jumps[k].1,
            Ev::Sample(k) => out[k] = state.clone(),
        }
    }
    Ok(out)
}

/// Solve the driven system `S' = Q S + U(t)` from `s0`, sampled on `times`.
pub fn inhomogeneous_trajectory(
    q: &DMatrix<f64>,
    s0: &DVector<f64>,
    input: &InputSignal,
    times: &[f64],
) -> Result<Trajectory> {
    let n = q.nrows();
    if s0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s0.len(),
        });
    }
    input.validate(n)?;

    let values = match input {
        InputSignal::Impulse(v) => {
            let jolted = s0 + v;
            propagate_piecewise(q, &jolted, &[], &[], times)?
        }
        InputSignal::Constant(v) => {
            propagate_piecewise(q, s0, &[(0.0, v.clone())], &[], times)?
        }
        InputSignal::Piecewise(knots) => propagate_piecewise(q, s0, knots, &[], times)?,
        InputSignal::Callable { f, .. } => quadrature_trajectory(q, s0, f.as_ref(), times)?,
    };
    Trajectory::new(
        times.to_vec(),
        values,
        None,
        TrajectorySource::Inhomogeneous,
    )
}

/// Relative tolerance for the adaptive convolution quadrature.
const QUADRATURE_REL_TOL: f64 = 1e-9;

fn quadrature_trajectory(
    q: &DMatrix<f64>,
    s0: &DVector<f64>,
    u: &(dyn Fn(f64) -> DVector<f64> + Send + Sync),
    times: &[f64],
) -> Result<Vec<DVector<f64>>> {
    match SpectralDecomposition::compute(q) {
        Ok(d) => {
            // Per-mode scalar convolution in the eigenbasis.
            let n = q.nrows();
            let mut c = d.mode_coefficients(s0);
            let mut out = Vec::with_capacity(times.len());
            let mut t_prev = 0.0;
            for &t in times {
                let dt = t - t_prev;
                if dt > 0.0 {
                    let lam = d.eigenvalues();
                    let integral = adaptive_simpson_vec(
                        &|tau| {
                            let uc = u(t_prev + tau);
                            let mut g = d.mode_coefficients(&uc);
                            for k in 0..n {
                                g[k] *= (lam[k] * C64::new(dt - tau, 0.0)).exp();
                            }
                            g
                        },
                        0.0,
                        dt,
                        QUADRATURE_REL_TOL,
                    );
                    for k in 0..n {
                        c[k] = c[k] * (lam[k] * C64::new(dt, 0.0)).exp() + integral[k];
                    }
                    t_prev = t;
                }
                out.push(realify(&(d.right_vectors() * &c))?);
            }
            Ok(out)
        }
        Err(Error::Defective { .. }) => {
            // Matrix-exponential quadrature; each integrand evaluation costs
            // one expm, so this is the slow path for unreliable bases only.
            let mut state = s0.clone();
            let mut out = Vec::with_capacity(times.len());
            let mut t_prev = 0.0;
            for &t in times {
                let dt = t - t_prev;
                if dt > 0.0 {
                    let hom = crate::spectral::matrix_exponential(q, dt) * &state;
                    let integral = adaptive_simpson_vec(
                        &|tau| {
                            let v = crate::spectral::matrix_exponential(q, dt - tau) * u(t_prev + tau);
                            DVector::from_fn(v.len(), |i, _| C64::new(v[i], 0.0))
                        },
                        0.0,
                        dt,
                        QUADRATURE_REL_TOL,
                    );
                    state = hom + DVector::from_fn(state.len(), |i, _| integral[i].re);
                    t_prev = t;
                }
                out.push(state.clone());
            }
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// Vector-valued adaptive Simpson quadrature with elementwise error control.
fn adaptive_simpson_vec(
    f: &dyn Fn(f64) -> DVector<C64>,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> DVector<C64> {
    fn simpson(fa: &DVector<C64>, fm: &DVector<C64>, fb: &DVector<C64>, h: f64) -> DVector<C64> {
        (fa + fm.scale(4.0) + fb).scale(h / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> DVector<C64>,
        a: f64,
        b: f64,
        fa: &DVector<C64>,
        fm: &DVector<C64>,
        fb: &DVector<C64>,
        whole: &DVector<C64>,
        tol: f64,
        depth: u32,
    ) -> DVector<C64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, &flm, fm, m - a);
        let right = simpson(fm, &frm, fb, b - m);
        let refined = &left + &right;
        let err = (&refined - whole).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = refined.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        if depth == 0 || err <= 15.0 * tol * scale {
            let correction = (&refined - whole).scale(1.0 / 15.0);
            refined + correction
        } else {
            recurse(f, a, m, fa, &flm, fm, &left, tol * 0.5, depth - 1)
                + recurse(f, m, b, fm, &frm, fb, &right, tol * 0.5, depth - 1)
        }
    }

    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(&fa, &fm, &fb, b - a);
    recurse(f, a, b, &fa, &fm, &fb, &whole, rel_tol, 24)
}

/// Linear-drift vector caused by a constant input with a component on the
/// steady mode (zero when the input decays entirely): the trajectory grows
/// like `drift * t` instead of converging.
pub fn steady_mode_drift(q: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let d = SpectralDecomposition::compute(q)?;
    let n = q.nrows();
    match d.steady_index() {
        None => Ok(DVector::zeros(n)),
        Some(s) => {
            let coeff = d.mode_coefficients(b)[s];
            let col = d.right_vector(s);
            realify(&col.map(|z| z * coeff))
        }
    }
}

/// Reduced state space induced by holding a set of agents constant.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    q_reduced: DMatrix<f64>,
    input_matrix: DMatrix<f64>,
    stubborn_values: DVector<f64>,
    stubborn_indices: Vec<usize>,
    free_indices: Vec<usize>,
}

impl ReducedSystem {
    pub fn q_reduced(&self) -> &DMatrix<f64> {
        &self.q_reduced
    }

    /// Coupling columns of the full rate matrix, stubborn rows omitted.
    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input_matrix
    }

    pub fn stubborn_values(&self) -> &DVector<f64> {
        &self.stubborn_values
    }

    pub fn stubborn_indices(&self) -> &[usize] {
        &self.stubborn_indices
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free_indices
    }

    /// Constant input `b = B u`.
    pub fn constant_input(&self) -> DVector<f64> {
        &self.input_matrix * &self.stubborn_values
    }

    /// Trajectory of the free nodes under the stubborn coupling.
    pub fn trajectory(&self, s0_free: &DVector<f64>, times: &[f64]) -> Result<Trajectory> {
        inhomogeneous_trajectory(
            &self.q_reduced,
            s0_free,
            &InputSignal::Constant(self.constant_input()),
            times,
        )
    }

    /// Scatter a reduced vector back onto all `n` nodes, stubborn values in
    /// their held positions.
    pub fn embed(&self, free_values: &DVector<f64>) -> DVector<f64> {
        let n = self.free_indices.len() + self.stubborn_indices.len();
        let mut full = DVector::zeros(n);
        for (k, &i) in self.free_indices.iter().enumerate() {
            full[i] = free_values[k];
        }
        for (k, &i) in self.stubborn_indices.iter().enumerate() {
            full[i] = self.stubborn_values[k];
        }
        full
    }
}

/// Zero the stubborn rows conceptually and extract the reduced system
/// `S'(t) = Q' S'(t) + B u` for a non-conservative network.
pub fn reduce_stubborn(
    q: &TransitionRateMatrix,
    stubborn: &[usize],
    values: &[f64],
) -> Result<ReducedSystem> {
    if q.protocol() != Protocol::NonConservative {
        return Err(Error::NotNonConservative);
    }
    let n = q.dim();
    if stubborn.is_empty() {
        return Err(Error::EmptyStubborn);
    }
    if stubborn.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: stubborn.len(),
            got: values.len(),
        });
    }
    let mut is_stubborn = vec![false; n];
    for &i in stubborn {
        if i >= n || is_stubborn[i] {
            return Err(Error::BadStubbornIndex(i));
        }
        is_stubborn[i] = true;
    }
    if stubborn.len() == n {
        return Err(Error::AllStubborn);
    }

    let free_indices: Vec<usize> = (0..n).filter(|&i| !is_stubborn[i]).collect();
    let stubborn_indices: Vec<usize> = stubborn.to_vec();
    let m = q.matrix();
    let q_reduced = DMatrix::from_fn(free_indices.len(), free_indices.len(), |r, c| {
        m[(free_indices[r], free_indices[c])]
    });
    let input_matrix = DMatrix::from_fn(free_indices.len(), stubborn_indices.len(), |r, c| {
        m[(free_indices[r], stubborn_indices[c])]
    });

    Ok(ReducedSystem {
        q_reduced,
        input_matrix,
        stubborn_values: DVector::from_column_slice(values),
        stubborn_indices,
        free_indices,
    })
}

/// Outcome of the stubborn-coupling check: the adjacency condition is
/// sufficient but not necessary for invertibility, so both facts are
/// reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubbornInvertibility {
    /// Every free node has an out-edge to at least one stubborn node.
    pub anchored: bool,
    pub strictly_diagonally_dominant: bool,
    pub invertible: bool,
}

pub fn check_stubborn_invertibility(
    rs: &ReducedSystem,
    g: &WeightedDigraph,
) -> StubbornInvertibility {
    let stubborn: std::collections::HashSet<usize> =
        rs.stubborn_indices.iter().copied().collect();
    let anchored = rs.free_indices.iter().all(|&i| {
        g.out_neighbors(i)
            .iter()
            .any(|j| stubborn.contains(j))
    });

    let qr = &rs.q_reduced;
    let nf = rs.free_indices.len();
    let strictly_diagonally_dominant = (0..nf).all(|i| {
        let off: f64 = (0..nf).filter(|&j| j != i).map(|j| qr[(i, j)].abs()).sum();
        qr[(i, i)].abs() > off
    });
    let invertible = numerical_rank(qr) == nf;
    StubbornInvertibility {
        anchored,
        strictly_diagonally_dominant,
        invertible,
    }
}

/// Fixed point `S'* = -Q'^{-1} B u` of the reduced system.
pub fn stubborn_steady_state(rs: &ReducedSystem) -> Result<DVector<f64>> {
    let nf = rs.free_indices.len();
    if numerical_rank(&rs.q_reduced) < nf {
        return Err(Error::SingularReduced);
    }
    let b = rs.constant_input();
    rs.q_reduced
        .clone()
        .lu()
        .solve(&(-b))
        .ok_or(Error::SingularReduced)
}

/// Measurement gains: raw gains `beta` and measurement rate `rho`, with
/// `beta' = beta * rho`. Index 0 is proportional, 1 derivative, 2 integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningGains {
    pub beta: [f64; 3],
    pub rho: f64,
}

impl LearningGains {
    pub fn proportional(beta: f64, rho: f64) -> Result<Self> {
        Self::pid(beta, 0.0, 0.0, rho)
    }

    pub fn pid(beta_p: f64, beta_d: f64, beta_i: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::BadGain(rho));
        }
        let gains = LearningGains {
            beta: [beta_p, beta_d, beta_i],
            rho,
        };
        if gains.beta_prime(1) == -1.0 {
            return Err(Error::DegenerateLeadingCoefficient);
        }
        Ok(gains)
    }

    /// `beta'_k = beta_k * rho`.
    pub fn beta_prime(&self, k: usize) -> f64 {
        self.beta[k] * self.rho
    }
}

/// Trajectory of the shifted system `S' = (Q - beta' I) S + beta' X(t)`.
pub fn dynamic_learning_trajectory(
    q: &TransitionRateMatrix,
    gains: &LearningGains,
    x: &InputSignal,
    s0: &DVector<f64>,
    times: &[f64],
) -> Result<Trajectory> {
    let beta_prime = gains.beta_prime(0);
    if !(beta_prime > 0.0) {
        return Err(Error::BadGain(beta_prime));
    }
    let n = q.dim();
    let shifted = q.matrix() - DMatrix::<f64>::identity(n, n).scale(beta_prime);
    inhomogeneous_trajectory(&shifted, s0, &x.scaled(beta_prime), times)
}

/// BIBO stability classes for a system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    BiboStable,
    MarginallyStable,
    Unstable,
}

/// Classify by eigenvalue real parts: strictly negative is BIBO stable;
/// eigenvalues on the axis are marginal only when semisimple.
pub fn bibo_stability(m: &DMatrix<f64>, tol: Option<f64>) -> StabilityClass {
    let n = m.nrows();
    if n == 0 {
        return StabilityClass::BiboStable;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let tol = tol.unwrap_or(1e-9 * scale);
    let pairs = crate::eig::nonsymmetric_eigen(m);
    let evs: Vec<C64> = (0..n).map(|k| C64::new(pairs.re[k], pairs.im[k])).collect();

    let max_re = evs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < -tol {
        return StabilityClass::BiboStable;
    }
    if max_re > tol {
        return StabilityClass::Unstable;
    }

    // Axis eigenvalues: require equal algebraic and geometric multiplicity.
    let mut checked: Vec<C64> = Vec::new();
    let cluster_radius = (1e-8 * scale).max(tol);
    for e in evs.iter().filter(|e| e.re.abs() <= tol) {
        if checked.iter().any(|c| (c - e).norm() <= cluster_radius) {
            continue;
        }
        checked.push(*e);
        let algebraic = evs.iter().filter(|x| (*x - e).norm() <= cluster_radius).count();
        let shifted = DMatrix::from_fn(n, n, |i, j| {
            C64::new(m[(i, j)], 0.0) - if i == j { *e } else { C64::new(0.0, 0.0) }
        });
        let svd = shifted.svd(false, false);
        let max_sv = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-9 * max_sv.max(f64::MIN_POSITIVE))
            .count();
        let geometric = n - rank;
        if geometric < algebraic {
            return StabilityClass::Unstable;
        }
    }
    StabilityClass::MarginallyStable
}

/// Response of the PID-expanded system.
#[derive(Debug, Clone)]
pub struct PidResponse {
    /// Node property trajectory `S(t)`.
    pub s: Trajectory,
    /// Integrator state trajectory `T(t)` with `T' = S`.
    pub t: Trajectory,
    /// Classification of the closed-loop companion matrix.
    pub stability: StabilityClass,
}

/// Integrate the coupled PID system
/// `T' = S`, `(1 + b2') S' = (Q - b1' I) S - b3' T + b1' X + b2' X' + b3' Y`
/// with `Y' = X`, as one augmented LTI system in `[T; S; Y]`.
///
/// Constant and piecewise inputs are exact (an input step with `b2' != 0`
/// enters as a state jump in `S`); callable inputs are supported when
/// `b2' = 0`. Impulse inputs are not defined for this system.
pub fn pid_expanded_response(
    q: &TransitionRateMatrix,
    gains: &LearningGains,
    x: &InputSignal,
    s0: &DVector<f64>,
    t0: &DVector<f64>,
    times: &[f64],
) -> Result<PidResponse> {
    let n = q.dim();
    if s0.len() != n || t0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s0.len().min(t0.len()),
        });
    }
    x.validate(n)?;
    let b1 = gains.beta_prime(0);
    let b2 = gains.beta_prime(1);
    let b3 = gains.beta_prime(2);
    let lead = 1.0 + b2;
    if lead == 0.0 {
        return Err(Error::DegenerateLeadingCoefficient);
    }
    let a = 1.0 / lead;

    // Augmented generator over [T; S; Y].
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0; // T' = S
        m[(n + i, i)] = -a * b3; // -a b3' T
        m[(n + i, 2 * n + i)] = a * b3; // +a b3' Y
    }
    for i in 0..n {
        for j in 0..n {
            let shift = if i == j { b1 } else { 0.0 };
            m[(n + i, n + j)] = a * (q.matrix()[(i, j)] - shift);
        }
    }

    let mut z0 = DVector::zeros(3 * n);
    for i in 0..n {
        z0[i] = t0[i];
        z0[n + i] = s0[i];
    }

    let embed = move |x_val: &DVector<f64>| {
        let mut u = DVector::zeros(3 * n);
        for i in 0..n {
            u[n + i] = a * b1 * x_val[i];
            u[2 * n + i] = x_val[i];
        }
        u
    };

    let values = match x {
        InputSignal::Constant(v) => {
            propagate_piecewise(&m, &z0, &[(0.0, embed(v))], &[], times)?
        }
        InputSignal::Piecewise(knots) => {
            let segments: Vec<(f64, DVector<f64>)> =
                knots.iter().map(|(t, v)| (*t, embed(v))).collect();
            // A step in X is an impulse in X'; with derivative gain it kicks
            // S by a * b2' * (step size).
            let mut jumps = Vec::new();
            if b2 != 0.0 {
                let mut prev = DVector::zeros(n);
                for (t, v) in knots {
                    let delta = v - &prev;
                    let mut jump = DVector::zeros(3 * n);
                    for i in 0..n {
                        jump[n + i] = a * b2 * delta[i];
                    }
                    jumps.push((*t, jump));
                    prev = v.clone();
                }
            }
            propagate_piecewise(&m, &z0, &segments, &jumps, times)?
        }
        InputSignal::Callable { f, .. } => {
            if b2 != 0.0 {
                return Err(Error::UnsupportedInput(
                    "derivative gain requires a constant or piecewise input".into(),
                ));
            }
            let f = Arc::clone(f);
            let aug = InputSignal::callable(3 * n, move |t| embed(&f(t)));
            let traj = inhomogeneous_trajectory(&m, &z0, &aug, times)?;
            traj.values().to_vec()
        }
        InputSignal::Impulse(_) => {
            return Err(Error::UnsupportedInput(
                "impulse reference is not defined for the PID expansion".into(),
            ))
        }
    };

    let take = |offset: usize, values: &[DVector<f64>]| -> Result<Trajectory> {
        Trajectory::new(
            times.to_vec(),
            values
                .iter()
                .map(|v| DVector::from_fn(n, |i, _| v[offset + i]))
                .collect(),
            Some(q.protocol()),
            TrajectorySource::Inhomogeneous,
        )
    };

    // Companion form of the homogeneous quadratic pencil governs stability.
    let mut companion = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        companion[(i, n + i)] = 1.0;
        companion[(n + i, i)] = -a * b3;
        for j in 0..n {
            let shift = if i == j { b1 } else { 0.0 };
            companion[(n + i, n + j)] = a * (q.matrix()[(i, j)] - shift);
        }
    }
    Ok(PidResponse {
        s: take(n, &values)?,
        t: take(0, &values)?,
        stability: bibo_stability(&companion, None),
    })
}
