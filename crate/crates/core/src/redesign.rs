//! Spectral network redesign: hold the eigenvector basis fixed, edit
//! eigenvalues, and reconstruct a candidate rate matrix.
//!
//! The reconstruction changes the characteristic timescales without
//! reshaping the mode composition. Whether the result is still a valid
//! generator is reported, not enforced: exploring candidate structures
//! legitimately produces invalid ones.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Protocol;
use crate::spectral::{is_ctmc_generator, C64, GeneratorReport, SpectralDecomposition};

/// Default absolute gap under which neighbouring eigenvalues count as one
/// degenerate cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// A validated eigenvalue-edit plan over a fixed basis.
#[derive(Debug, Clone)]
pub struct RespectrumPlan {
    base: SpectralDecomposition,
    protocol: Protocol,
    edits: BTreeMap<usize, C64>,
}

impl RespectrumPlan {
    /// Validate the edits against the base decomposition:
    /// the steady mode stays untouched, edited eigenvalues keep nonpositive
    /// real parts, complex edits come in conjugate pairs, and degenerate
    /// clusters are edited whole (to a single value) or not at all.
    pub fn new(
        base: SpectralDecomposition,
        protocol: Protocol,
        edits: BTreeMap<usize, C64>,
    ) -> Result<Self> {
        Self::with_cluster_tol(base, protocol, edits, DEFAULT_CLUSTER_TOL)
    }

    pub fn with_cluster_tol(
        base: SpectralDecomposition,
        protocol: Protocol,
        edits: BTreeMap<usize, C64>,
        cluster_tol: f64,
    ) -> Result<Self> {
        let n = base.dim();
        for (&mode, value) in &edits {
            if mode >= n {
                return Err(Error::BadMode { mode, n });
            }
            if Some(mode) == base.steady_index() {
                return Err(Error::SteadyModeEdited(mode));
            }
            if value.re > 0.0 {
                return Err(Error::UnstableEdit {
                    mode,
                    real: value.re,
                });
            }
        }

        // Conjugate pairing: editing one half of a complex pair must edit
        // the other to the conjugate value.
        let evs = base.eigenvalues();
        for (&mode, value) in &edits {
            if evs[mode].im != 0.0 {
                let partner = find_conjugate_partner(evs, mode);
                let ok = partner.is_some_and(|p| {
                    edits
                        .get(&p)
                        .is_some_and(|pv| (pv.conj() - value).norm() <= 1e-12 * (1.0 + value.norm()))
                });
                if !ok {
                    return Err(Error::ConjugatePairViolated(mode));
                }
            } else if value.im != 0.0 {
                return Err(Error::ConjugatePairViolated(mode));
            }
        }

        // Whole-cluster rule: a degenerate cluster is either untouched or
        // uniformly re-valued; sub-cluster edits are basis-dependent.
        for cluster in base.eigenvalue_clusters(cluster_tol) {
            if cluster.len() < 2 {
                continue;
            }
            let touched: Vec<usize> = cluster
                .iter()
                .copied()
                .filter(|k| edits.contains_key(k))
                .collect();
            if touched.is_empty() {
                continue;
            }
            let uniform = touched.len() == cluster.len()
                && cluster
                    .windows(2)
                    .all(|w| (edits[&w[0]] - edits[&w[1]]).norm() <= 1e-12);
            if !uniform {
                return Err(Error::PartialClusterEdit { modes: cluster });
            }
        }

        Ok(RespectrumPlan {
            base,
            protocol,
            edits,
        })
    }

    pub fn base(&self) -> &SpectralDecomposition {
        &self.base
    }

    pub fn edited_values(&self) -> Vec<C64> {
        let mut values = self.base.eigenvalues().to_vec();
        for (&mode, &v) in &self.edits {
            values[mode] = v;
        }
        values
    }
}

/// Reconstruction outcome: the candidate matrix plus its generator report.
#[derive(Debug, Clone)]
pub struct RespectrumOutcome {
    pub q_new: DMatrix<f64>,
    pub report: GeneratorReport,
}

/// `Q_new = A diag(q_edited) A^{-1}` with a validity report for the base
/// protocol.
pub fn respectrum(plan: &RespectrumPlan) -> Result<RespectrumOutcome> {
    let values = plan.edited_values();
    let q_new = plan.base.reconstruct(&values)?;
    let scale = q_new.amax().max(f64::MIN_POSITIVE);
    let report = is_ctmc_generator(&q_new, plan.protocol, 1e-9 * scale);
    Ok(RespectrumOutcome { q_new, report })
}

/// Decompose and orthonormalize degenerate clusters so cluster edits are
/// reproducible regardless of the solver's basis choice.
pub fn degenerate_basis_choice(q: &DMatrix<f64>, tol: f64) -> Result<SpectralDecomposition> {
    SpectralDecomposition::compute(q)?.orthonormalize_clusters(tol)
}

fn find_conjugate_partner(evs: &[C64], mode: usize) -> Option<usize> {
    let target = evs[mode].conj();
    evs.iter()
        .enumerate()
        .filter(|&(k, _)| k != mode)
        .find(|&(_, e)| (e - target).norm() <= 1e-12 * (1.0 + target.norm()))
        .map(|(k, _)| k)
}
