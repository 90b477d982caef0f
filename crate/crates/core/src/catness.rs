//! Trace-norm macroscopic-coherence measures for `Sz`.
//!
//! Catness is `½‖[Sz,[Sz,ρ]]‖₁`. For a block-diagonal state the trace norm
//! splits into a weighted sum over sectors.

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat};
use crate::measurement::IMPOSSIBLE_PROBABILITY;
use crate::spin_blocks::EnsembleState;
use crate::{Error, Result};

/// Relative size below which eigenvalues of `D` count as zero when building
/// the optimal projector.
pub const ZERO_EIGENVALUE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatnessReport {
    pub value: f64,
    /// `d(N,j) · ½‖D_j‖₁` per sector.
    pub contributions: Vec<f64>,
    pub n: usize,
}

/// Orthogonal projector given blockwise in the working basis.
#[derive(Debug, Clone)]
pub struct ProjectorSpec {
    pub blocks: Vec<CMat>,
    pub sector_ranks: Vec<usize>,
    weights: Vec<f64>,
    multiplicities: Vec<BigUint>,
}

impl ProjectorSpec {
    fn from_blocks(state: &EnsembleState, blocks: Vec<CMat>, sector_ranks: Vec<usize>) -> Self {
        let sectors = state.basis().sectors();
        Self {
            blocks,
            sector_ranks,
            weights: sectors.iter().map(|s| s.weight).collect(),
            multiplicities: sectors.iter().map(|s| s.multiplicity.clone()).collect(),
        }
    }

    /// Wraps caller-supplied projector blocks; sector ranks are read off the traces.
    pub fn from_projector_blocks(state: &EnsembleState, blocks: Vec<CMat>) -> Self {
        let ranks = blocks.iter().map(|b| linalg::trace(b).re.round().max(0.0) as usize).collect();
        Self::from_blocks(state, blocks, ranks)
    }

    /// Rank on the full 2^N space.
    pub fn rank(&self) -> BigUint {
        self.sector_ranks
            .iter()
            .zip(&self.multiplicities)
            .map(|(&r, d)| d * BigUint::from(r))
            .sum()
    }

    /// `Σ_j d_j Tr(η_j X_j)` for blockwise `X`.
    pub fn trace_with(&self, x: &[CMat]) -> Complex64 {
        self.blocks
            .iter()
            .zip(x)
            .zip(&self.weights)
            .map(|((eta, xb), &w)| linalg::trace(&(eta * xb)) * w)
            .sum()
    }

    /// Largest of `‖η² - η‖` and `‖η - η†‖` over all blocks (entrywise max).
    pub fn projector_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|e| linalg::max_abs(&(e * e - e)).max(linalg::hermitian_defect(e)))
            .fold(0.0, f64::max)
    }
}

/// `Szρ` per sector.
fn sz_times_rho(state: &EnsembleState) -> Vec<CMat> {
    state
        .blocks()
        .iter()
        .zip(state.basis().sectors())
        .map(|(b, s)| s.sz_band.mul_left(b))
        .collect()
}

/// `D = Sz²ρ − 2SzρSz + ρSz²` per sector.
pub fn double_commutator(state: &EnsembleState) -> Vec<CMat> {
    state
        .blocks()
        .iter()
        .zip(state.basis().sectors())
        .map(|(rho, s)| {
            let x = s.sz_band.mul_left(rho);
            let z = s.sz_band.mul_left(&x);
            let y = s.sz_band.mul_right(&x);
            // ρSz² = (Sz²ρ)† for Hermitian ρ.
            let mut d = &z + z.adjoint() - y * Complex64::new(2.0, 0.0);
            // Symmetrize away rounding.
            let dt = d.adjoint();
            d = (d + dt) * Complex64::new(0.5, 0.0);
            d
        })
        .collect()
}

/// `[Sz, ρ]` per sector (anti-Hermitian).
pub fn commutator(state: &EnsembleState) -> Vec<CMat> {
    sz_times_rho(state)
        .into_iter()
        .map(|x| {
            let xa = x.adjoint();
            x - xa
        })
        .collect()
}

pub fn catness(state: &EnsembleState) -> CatnessReport {
    let d = double_commutator(state);
    let contributions: Vec<f64> = d
        .iter()
        .zip(state.basis().sectors())
        .map(|(block, s)| {
            if s.weight == 0.0 {
                0.0
            } else {
                s.weight * 0.5 * linalg::trace_norm_hermitian(block)
            }
        })
        .collect();
    CatnessReport {
        value: contributions.iter().sum(),
        contributions,
        n: state.n(),
    }
}

/// `(N² − M²) tanh²(βω_P) + 2N`: the trace of the double commutator against
/// the `Sx = M` projector after projecting a Gibbs state.
pub fn tr_projection_form(n: usize, m: i64, beta: f64, omega_p: f64) -> Result<f64> {
    check_admissible(n, m)?;
    let nf = n as f64;
    let mf = m as f64;
    Ok((nf * nf - mf * mf) * (beta * omega_p).tanh().powi(2) + 2.0 * nf)
}

pub(crate) fn check_admissible(n: usize, m: i64) -> Result<()> {
    let ni = n as i64;
    if m.abs() > ni || (m + ni) % 2 != 0 {
        return Err(Error::Domain(format!(
            "Sx eigenvalue {m} is not admissible for N = {n}"
        )));
    }
    Ok(())
}

/// Projective measurement of `Sx` post-selected on the value `m`.
pub fn projection_postselect(state: &EnsembleState, m: i64) -> Result<(EnsembleState, f64)> {
    check_admissible(state.n(), m)?;
    let mut probability = 0.0;
    let blocks: Vec<CMat> = state
        .blocks()
        .iter()
        .zip(state.basis().sectors())
        .map(|(b, s)| {
            let mut out = CMat::zeros(s.dim(), s.dim());
            if let Some(i) = s.index_of(m) {
                out[(i, i)] = b[(i, i)];
                probability += s.weight * b[(i, i)].re;
            }
            out
        })
        .collect();
    if !(probability > IMPOSSIBLE_PROBABILITY) {
        return Err(Error::ImpossibleOutcome {
            what: format!("projection onto Sx = {m}"),
            probability,
        });
    }
    let mut post = EnsembleState::from_blocks(state.basis().clone(), blocks)?;
    post.normalize();
    Ok((post, probability.min(1.0)))
}

/// Projector onto the non-negative eigenspace of `D`, which attains
/// `Tr(ηD) = ½‖D‖₁`. Eigenvalues within `1e-12·max(|D|, N²|ρ|)` of zero are kept.
pub fn optimal_projector(state: &EnsembleState) -> ProjectorSpec {
    let d = double_commutator(state);
    let n2 = (state.n() * state.n()) as f64;
    let mut ranks = Vec::with_capacity(d.len());
    let blocks = d
        .iter()
        .zip(state.blocks())
        .map(|(block, rho)| {
            // Entries of D are bounded by 4N²·max|ρ|; that sets the zero level.
            let scale = linalg::max_abs(block).max(n2 * linalg::max_abs(rho));
            let (vals, vecs) = linalg::hermitian_eigen(block);
            let keep: Vec<usize> = (0..vals.len())
                .filter(|&i| vals[i] >= -ZERO_EIGENVALUE_RELATIVE * scale)
                .collect();
            ranks.push(keep.len());
            linalg::column_projector(&vecs, &keep)
        })
        .collect();
    ProjectorSpec::from_blocks(state, blocks, ranks)
}

/// Projector onto the positive eigenspace of `i[Sz,ρ]`; it maximizes
/// `|Tr(η[Sz,ρ])|`, the small-field slope of a Ramsey signal.
pub fn commutator_projector(state: &EnsembleState) -> ProjectorSpec {
    let c = commutator(state);
    let mut ranks = Vec::with_capacity(c.len());
    let blocks = c
        .iter()
        .map(|block| {
            let h = block * Complex64::new(0.0, 1.0);
            let scale = linalg::max_abs(&h);
            let (vals, vecs) = linalg::hermitian_eigen(&h);
            let keep: Vec<usize> = (0..vals.len())
                .filter(|&i| vals[i] > ZERO_EIGENVALUE_RELATIVE * scale)
                .collect();
            ranks.push(keep.len());
            linalg::column_projector(&vecs, &keep)
        })
        .collect();
    ProjectorSpec::from_blocks(state, blocks, ranks)
}

/// `|Tr(η[Sz,ρ])|`; the trace is purely imaginary, its modulus is returned.
pub fn q_prime(state: &EnsembleState, projector: &ProjectorSpec) -> f64 {
    projector.trace_with(&commutator(state)).norm()
}

/// `Tr(η D)` for the state's double commutator.
pub fn projector_double_commutator(state: &EnsembleState, projector: &ProjectorSpec) -> f64 {
    projector.trace_with(&double_commutator(state)).re
}

/// `Tr(ηρ)`.
pub fn projector_probability(state: &EnsembleState, projector: &ProjectorSpec) -> f64 {
    projector.trace_with(state.blocks()).re
}
