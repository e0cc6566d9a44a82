//! Eigen-analysis of rate matrices.
//!
//! Asymmetric generators can carry complex eigenpairs, so the decomposition
//! is stored in complex arithmetic throughout; conjugate symmetry guarantees
//! that everything user-facing comes back real, and the realifying helpers
//! enforce that with a residue check. Modes are sorted by ascending real
//! part (then imaginary part), which puts the steady mode last and matches
//! the 1-based mode labels used by the CLI.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::graph::{Protocol, TransitionRateMatrix};

pub type C64 = Complex<f64>;

/// Eigenvector-matrix condition number beyond which a matrix is treated as
/// defective: quasi-mode control needs a reliable basis, and the generalized
/// eigenspace route is out of scope.
pub const DEFECTIVE_CONDITION_THRESHOLD: f64 = 1e8;

/// Relative tolerance used to snap the structural zero eigenvalue, scaled by
/// the largest diagonal rate.
pub const ZERO_EIGENVALUE_SNAP: f64 = 1e-9;

/// Full biorthogonal eigendecomposition `Q = A diag(q) A^{-1}`.
///
/// Columns of `A` are unit right eigenvectors; rows of `A^{-1}` are the
/// biorthogonal left eigenvectors (unit only when `Q` is symmetric).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<C64>,
    right: DMatrix<C64>,
    left_rows: DMatrix<C64>,
    steady_index: Option<usize>,
    condition: f64,
}

impl SpectralDecomposition {
    /// Decompose with the default defectiveness threshold.
    pub fn compute(q: &DMatrix<f64>) -> Result<Self> {
        Self::compute_with_threshold(q, DEFECTIVE_CONDITION_THRESHOLD)
    }

    pub fn compute_with_threshold(q: &DMatrix<f64>, condition_threshold: f64) -> Result<Self> {
        let n = q.nrows();
        assert_eq!(n, q.ncols(), "matrix must be square");

        let mut modes: Vec<(C64, DVector<C64>)> = Vec::with_capacity(n);
        let symmetric = q == &q.transpose();
        if symmetric {
            let se = q.clone().symmetric_eigen();
            for k in 0..n {
                let col = se.eigenvectors.column(k);
                let v = DVector::from_fn(n, |i, _| C64::new(col[i], 0.0));
                modes.push((C64::new(se.eigenvalues[k], 0.0), v));
            }
        } else {
            let pairs = crate::eig::nonsymmetric_eigen(q);
            let mut k = 0;
            while k < n {
                if pairs.im[k] == 0.0 {
                    let v = DVector::from_fn(n, |i, _| C64::new(pairs.vectors[(i, k)], 0.0));
                    modes.push((C64::new(pairs.re[k], 0.0), v));
                    k += 1;
                } else {
                    let v = DVector::from_fn(n, |i, _| {
                        C64::new(pairs.vectors[(i, k)], pairs.vectors[(i, k + 1)])
                    });
                    modes.push((C64::new(pairs.re[k], pairs.im[k]), v.clone()));
                    modes.push((C64::new(pairs.re[k + 1], pairs.im[k + 1]), v.map(|z| z.conj())));
                    k += 2;
                }
            }
        }

        // Unit norm with a canonical phase: the first entry of largest
        // modulus is made real and positive. Conjugate pairs stay conjugate
        // because their moduli agree entrywise.
        for (_, v) in &mut modes {
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                *v /= C64::new(norm, 0.0);
            }
            canonical_phase(v);
        }

        modes.sort_by(|a, b| {
            a.0.re
                .total_cmp(&b.0.re)
                .then_with(|| a.0.im.total_cmp(&b.0.im))
        });

        // Snap the structural zero eigenvalue so long-horizon trajectories
        // cannot drift on a 1e-15 residue.
        let diag_max = (0..n).map(|i| q[(i, i)].abs()).fold(0.0, f64::max);
        let snap = ZERO_EIGENVALUE_SNAP * diag_max;
        let mut steady_index = None;
        for (k, (q_k, _)) in modes.iter_mut().enumerate() {
            if q_k.norm() <= snap {
                *q_k = C64::new(0.0, 0.0);
                if steady_index.is_none() {
                    steady_index = Some(k);
                }
            }
        }

        let eigenvalues: Vec<C64> = modes.iter().map(|(q_k, _)| *q_k).collect();
        let right = DMatrix::from_fn(n, n, |i, k| modes[k].1[i]);

        let (left_rows, condition) = if symmetric {
            // Orthonormal basis: the inverse is the transpose.
            (right.transpose(), 1.0)
        } else {
            let lu = right.clone().lu();
            let inv = lu.try_inverse().ok_or(Error::Defective {
                condition: f64::INFINITY,
                threshold: condition_threshold,
            })?;
            let cond = one_norm_c(&right) * one_norm_c(&inv);
            (inv, cond)
        };

        if !condition.is_finite() || condition > condition_threshold {
            return Err(Error::Defective {
                condition,
                threshold: condition_threshold,
            });
        }

        Ok(SpectralDecomposition {
            eigenvalues,
            right,
            left_rows,
            steady_index,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    /// Unit right eigenvectors as columns.
    pub fn right_vectors(&self) -> &DMatrix<C64> {
        &self.right
    }

    /// Rows are the biorthogonal left eigenvectors.
    pub fn left_rows(&self) -> &DMatrix<C64> {
        &self.left_rows
    }

    pub fn steady_index(&self) -> Option<usize> {
        self.steady_index
    }

    /// Eigenvector-matrix condition number in the 1-norm.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Right eigenvector of mode `k` (complex).
    pub fn right_vector(&self, k: usize) -> DVector<C64> {
        self.right.column(k).into_owned()
    }

    /// Mode coefficients `c = A^{-1} x` of a real vector.
    pub fn mode_coefficients(&self, x: &DVector<f64>) -> DVector<C64> {
        let xc = DVector::from_fn(x.len(), |i, _| C64::new(x[i], 0.0));
        &self.left_rows * xc
    }

    /// Evolve `s0` to time `t` along the modes: `A e^{qt} A^{-1} s0`.
    pub fn evolve(&self, s0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let mut c = self.mode_coefficients(s0);
        for (k, q_k) in self.eigenvalues.iter().enumerate() {
            c[k] *= (q_k * C64::new(t, 0.0)).exp();
        }
        realify(&(&self.right * c))
    }

    /// Rebuild `A diag(values) A^{-1}` for arbitrary per-mode values.
    pub fn reconstruct(&self, values: &[C64]) -> Result<DMatrix<f64>> {
        assert_eq!(values.len(), self.dim());
        let mut scaled = self.right.clone();
        for (k, v) in values.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= *v;
        }
        realify_matrix(&(scaled * &self.left_rows))
    }

    /// Indices grouped into degenerate clusters: consecutive (sorted)
    /// eigenvalues within `tol` of each other chain into one cluster.
    pub fn eigenvalue_clusters(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for k in 0..self.eigenvalues.len() {
            let chained = clusters.last().is_some_and(|c| {
                let prev = self.eigenvalues[*c.last().unwrap()];
                (self.eigenvalues[k] - prev).norm() <= tol
            });
            if chained {
                clusters.last_mut().unwrap().push(k);
            } else {
                clusters.push(vec![k]);
            }
        }
        clusters
    }

    /// Replace each degenerate cluster's eigenvectors with an orthonormalized
    /// basis of the same span (modified Gram-Schmidt in index order, then the
    /// canonical phase), so whole-cluster operations do not depend on the
    /// solver's arbitrary basis choice.
    pub fn orthonormalize_clusters(&self, tol: f64) -> Result<SpectralDecomposition> {
        let mut right = self.right.clone();
        for cluster in self.eigenvalue_clusters(tol) {
            if cluster.len() < 2 {
                continue;
            }
            for (pos, &k) in cluster.iter().enumerate() {
                let mut v = right.column(k).into_owned();
                for &j in &cluster[..pos] {
                    let u = right.column(j);
                    let proj: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    v -= DVector::from_fn(v.len(), |i, _| u[i] * proj);
                }
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::Defective {
                        condition: f64::INFINITY,
                        threshold: DEFECTIVE_CONDITION_THRESHOLD,
                    });
                }
                v /= C64::new(norm, 0.0);
                canonical_phase(&mut v);
                right.set_column(k, &v);
            }
        }
        Self::from_basis(self.eigenvalues.clone(), right, self.steady_index)
    }

    /// Apply a unitary mixing to the columns of one degenerate cluster; the
    /// span (and any whole-cluster projector) is unchanged. Exposed so the
    /// basis-independence of whole-cluster edits can be exercised directly.
    pub fn with_rotated_cluster(
        &self,
        modes: &[usize],
        rotation: &DMatrix<C64>,
    ) -> Result<SpectralDecomposition> {
        let m = modes.len();
        assert_eq!(rotation.nrows(), m);
        assert_eq!(rotation.ncols(), m);
        let n = self.dim();
        let mut right = self.right.clone();
        for (col_out, &k_out) in modes.iter().enumerate() {
            let mut v = DVector::from_element(n, C64::new(0.0, 0.0));
            for (col_in, &k_in) in modes.iter().enumerate() {
                let w = rotation[(col_in, col_out)];
                for i in 0..n {
                    v[i] += self.right[(i, k_in)] * w;
                }
            }
            right.set_column(k_out, &v);
        }
        Self::from_basis(self.eigenvalues.clone(), right, self.steady_index)
    }

    fn from_basis(
        eigenvalues: Vec<C64>,
        right: DMatrix<C64>,
        steady_index: Option<usize>,
    ) -> Result<SpectralDecomposition> {
        let lu = right.clone().lu();
        let inv = lu.try_inverse().ok_or(Error::Defective {
            condition: f64::INFINITY,
            threshold: DEFECTIVE_CONDITION_THRESHOLD,
        })?;
        let condition = one_norm_c(&right) * one_norm_c(&inv);
        if !condition.is_finite() || condition > DEFECTIVE_CONDITION_THRESHOLD {
            return Err(Error::Defective {
                condition,
                threshold: DEFECTIVE_CONDITION_THRESHOLD,
            });
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            right,
            left_rows: inv,
            steady_index,
            condition,
        })
    }
}

fn canonical_phase(v: &mut DVector<C64>) {
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].norm() > v[pivot].norm() {
            pivot = i;
        }
    }
    let m = v[pivot].norm();
    if m > 0.0 {
        let phase = v[pivot] / C64::new(m, 0.0);
        *v *= phase.conj();
    }
}

/// Drop imaginary parts after checking the residue left by conjugate
/// cancellation.
pub fn realify(x: &DVector<C64>) -> Result<DVector<f64>> {
    let scale = 1.0 + x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let resid = x.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if resid > 1e-8 * scale {
        return Err(Error::ImaginaryResidue(resid));
    }
    Ok(DVector::from_fn(x.len(), |i, _| x[i].re))
}

pub fn realify_matrix(x: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    let scale = 1.0 + x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let resid = x.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if resid > 1e-8 * scale {
        return Err(Error::ImaginaryResidue(resid));
    }
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)].re))
}

fn one_norm_c(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(Q t)` by scaling and squaring. For a valid generator the result is
/// entrywise nonnegative with columns (P1) or rows (P2) summing to one.
pub fn matrix_exponential(q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    expm(&q.scale(t))
}

/// Unit steady-state eigenvector pair of a generator.
#[derive(Debug, Clone)]
pub struct SteadyStatePair {
    /// Unit right eigenvector for q = 0.
    pub v_rs: DVector<f64>,
    /// Unit left eigenvector for q = 0.
    pub v_ls: DVector<f64>,
    /// Sum of the entries of `v_rs`.
    pub psi: f64,
    /// Sum of the entries of `v_ls`.
    pub omega: f64,
}

/// Relative singular-value tolerance for rank decisions.
const NULLSPACE_REL_TOL: f64 = 1e-9;

/// Extract the steady-state right/left eigenvectors of a generator from its
/// singular value decomposition.
pub fn steady_state_vectors(q: &TransitionRateMatrix) -> Result<SteadyStatePair> {
    let (v_rs, v_ls) = null_vectors(q.matrix())?;
    Ok(SteadyStatePair {
        psi: v_rs.sum(),
        omega: v_ls.sum(),
        v_rs,
        v_ls,
    })
}

/// Unit right and left null vectors, oriented so their entry sums are
/// nonnegative. Extracted from the eigendecomposition (the zero eigenvalue
/// of a generator is structural and its eigenvector well separated); errors
/// when the smallest eigenvalue modulus is not negligible.
pub(crate) fn null_vectors(q: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    Ok((right_null(q)?, right_null(&q.transpose())?))
}

fn right_null(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = q.nrows();
    let pairs = crate::eig::nonsymmetric_eigen(q);
    let scale = (0..n)
        .map(|k| pairs.re[k].hypot(pairs.im[k]))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    // Prefer real eigenvalues; the structural zero of a real matrix is real.
    let mut best: Option<usize> = None;
    for k in 0..n {
        if pairs.im[k] == 0.0 && best.is_none_or(|b| pairs.re[k].abs() < pairs.re[b].abs()) {
            best = Some(k);
        }
    }
    let smallest_any = (0..n)
        .map(|k| pairs.re[k].hypot(pairs.im[k]))
        .fold(f64::INFINITY, f64::min);
    let k = match best {
        Some(k) if pairs.re[k].abs() <= NULLSPACE_REL_TOL * scale => k,
        _ => {
            return Err(Error::NoZeroEigenvalue {
                smallest: smallest_any,
            })
        }
    };
    let mut v = pairs.vectors.column(k).into_owned();
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    orient(&mut v);
    Ok(v)
}

/// Number of singular values above the relative rank tolerance.
pub(crate) fn numerical_rank(q: &DMatrix<f64>) -> usize {
    let svd = q.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    svd.singular_values
        .iter()
        .filter(|&&s| s > NULLSPACE_REL_TOL * max_sv.max(f64::MIN_POSITIVE))
        .count()
}

fn orient(v: &mut DVector<f64>) {
    let s = v.sum();
    let flip = if s != 0.0 {
        s < 0.0
    } else {
        // Zero-sum vector: orient by the first entry of largest magnitude.
        let mut pivot = 0;
        for i in 1..v.len() {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        v[pivot] < 0.0
    };
    if flip {
        *v = -v.clone();
    }
}

/// One entry of a generator-validity report.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorViolation {
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    /// Column sum (P1) or row sum (P2) out of tolerance.
    SumNotZero { index: usize, sum: f64 },
}

#[derive(Debug, Clone)]
pub struct GeneratorReport {
    pub is_generator: bool,
    pub violations: Vec<GeneratorViolation>,
}

/// Check the Metzler sign pattern and the protocol-appropriate zero sums.
pub fn is_ctmc_generator(q: &DMatrix<f64>, protocol: Protocol, tol: f64) -> GeneratorReport {
    let n = q.nrows();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] < -tol {
                violations.push(GeneratorViolation::NegativeOffDiagonal {
                    row: i,
                    col: j,
                    value: q[(i, j)],
                });
            }
        }
    }
    for k in 0..n {
        let sum: f64 = match protocol {
            Protocol::Conservative => q.column(k).iter().sum(),
            Protocol::NonConservative => q.row(k).iter().sum(),
        };
        if sum.abs() > tol {
            violations.push(GeneratorViolation::SumNotZero { index: k, sum });
        }
    }
    GeneratorReport {
        is_generator: violations.is_empty(),
        violations,
    }
}

/// Row-version Gershgorin disks `(center, radius)` of a square matrix.
pub fn gershgorin_disks(q: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let n = q.nrows();
    (0..n)
        .map(|i| {
            let radius: f64 = (0..n).filter(|&j| j != i).map(|j| q[(i, j)].abs()).sum();
            (q[(i, i)], radius)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn c4a_p1() -> TransitionRateMatrix {
        presets::asymmetric_four_cycle()
            .unwrap()
            .reversed()
            .transition_rate_matrix(Protocol::Conservative)
    }

    #[test]
    fn two_node_symmetric_decomposition() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let d = SpectralDecomposition::compute(&q).unwrap();
        assert_eq!(d.eigenvalues()[0], C64::new(-2.0, 0.0));
        assert_eq!(d.eigenvalues()[1], C64::new(0.0, 0.0));
        assert_eq!(d.steady_index(), Some(1));
        let v = d.right_vector(1);
        let expected = 1.0 / 2.0_f64.sqrt();
        assert!((v[0].re - expected).abs() < 1e-12);
        assert!((v[1].re - expected).abs() < 1e-12);
    }

    #[test]
    fn c4a_spectrum_and_steady_vector() {
        let q = c4a_p1();
        let d = SpectralDecomposition::compute(q.matrix()).unwrap();
        let expected = [-3.0, -2.0, -1.0, 0.0];
        for (ev, want) in d.eigenvalues().iter().zip(expected) {
            assert!((ev.re - want).abs() < 1e-10, "{ev} vs {want}");
            assert!(ev.im.abs() < 1e-10);
        }
        // Steady right eigenvector proportional to [1/2, 1, 1/2, 1].
        let v = d.right_vector(3);
        let ratio = v[1].re / v[0].re;
        assert!((ratio - 2.0).abs() < 1e-10);
        assert!((v[0].re - v[2].re).abs() < 1e-10);
        assert!((v[1].re - v[3].re).abs() < 1e-10);
    }

    #[test]
    fn jordan_block_is_defective() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let err = SpectralDecomposition::compute(&q).unwrap_err();
        assert!(matches!(err, Error::Defective { .. }));
    }

    #[test]
    fn biorthogonality_and_reconstruction() {
        let q = c4a_p1();
        let d = SpectralDecomposition::compute(q.matrix()).unwrap();
        let eye = d.right_vectors() * d.left_rows();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[(i, j)] - C64::new(want, 0.0)).norm() < 1e-10);
            }
        }
        let rebuilt = d.reconstruct(d.eigenvalues()).unwrap();
        assert!((rebuilt - q.matrix()).amax() < 1e-10);
    }

    #[test]
    fn exponential_identity_at_zero() {
        let q = c4a_p1();
        let p = matrix_exponential(q.matrix(), 0.0);
        assert_eq!(p, DMatrix::identity(4, 4));
    }

    #[test]
    fn symmetric_equilibration_limit() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let p = matrix_exponential(&q, 40.0);
        for x in p.iter() {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_matches_taylor_on_c4a() {
        let q = c4a_p1();
        let p = matrix_exponential(q.matrix(), 1.0);
        let mut sum = DMatrix::identity(4, 4);
        let mut term = DMatrix::<f64>::identity(4, 4);
        for k in 1..=60 {
            term = (&term * q.matrix()) / k as f64;
            sum += &term;
        }
        assert!((p - sum).amax() < 1e-10);
        // Columns of exp(Qt) sum to one for a conservative generator.
        let p = matrix_exponential(q.matrix(), 2.5);
        for j in 0..4 {
            let s: f64 = p.column(j).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.column(j).iter().all(|&x| x >= -1e-15));
        }
    }

    #[test]
    fn steady_vectors_on_p5() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        let q = g.transition_rate_matrix(Protocol::NonConservative);
        let pair = steady_state_vectors(&q).unwrap();
        // Row sums zero: right steady vector has equal components.
        for i in 0..5 {
            assert!((pair.v_rs[i] - 1.0 / 5.0_f64.sqrt()).abs() < 1e-10);
        }
        let expected = [0.0016, 0.0078, 0.0392, 0.1960, 0.9798];
        for (got, want) in pair.v_ls.iter().zip(expected) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
        assert!((pair.omega - 1.2244).abs() < 5e-4);
    }

    #[test]
    fn no_zero_eigenvalue_on_shifted_matrix() {
        let q = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        let err = null_vectors(&q).unwrap_err();
        assert!(matches!(err, Error::NoZeroEigenvalue { .. }));
    }

    #[test]
    fn generator_check_catches_row_sum() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -2.0]);
        let report = is_ctmc_generator(&q, Protocol::NonConservative, 1e-12);
        assert!(!report.is_generator);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, GeneratorViolation::SumNotZero { .. })));
        let report = is_ctmc_generator(&q, Protocol::Conservative, 1e-12);
        assert!(report.is_generator);
    }

    #[test]
    fn modified_star_matrix_is_generator() {
        let q = DMatrix::from_row_slice(
            5,
            5,
            &[
                -3.6, 0.9, 0.9, 0.9, 0.9, //
                0.9, -0.975, 0.025, 0.025, 0.025, //
                0.9, 0.025, -0.975, 0.025, 0.025, //
                0.9, 0.025, 0.025, -0.975, 0.025, //
                0.9, 0.025, 0.025, 0.025, -0.975,
            ],
        );
        assert!(is_ctmc_generator(&q, Protocol::Conservative, 1e-9).is_generator);
    }

    #[test]
    fn gershgorin_contains_spectrum() {
        let q = c4a_p1();
        let d = SpectralDecomposition::compute(q.matrix()).unwrap();
        let disks = gershgorin_disks(q.matrix());
        for ev in d.eigenvalues() {
            assert!(disks
                .iter()
                .any(|&(c, r)| (C64::new(c, 0.0) - ev).norm() <= r + 1e-9));
        }
    }
}
