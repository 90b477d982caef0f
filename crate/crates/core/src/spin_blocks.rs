//! Total-spin sector decomposition of N spin-½ particles.
//!
//! The 2^N-dimensional space splits into sectors of total spin `j` with
//! multiplicity `d(N, j)`. Collective operators act as `(2j+1)`-dimensional
//! blocks, identical on every copy, so a permutation-invariant state is one
//! block per sector. Blocks are stored in the eigenbasis of `Sx`, ordered by
//! ascending eigenvalue.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::linalg::{self, CMat, RMat, ZeroDiagTridiagonal};
use crate::{Error, Result};

/// Largest particle count accepted by [`build_block_basis`].
pub const MAX_PARTICLES: usize = 200;

/// One total-spin sector.
#[derive(Debug, Clone)]
pub struct Sector {
    /// `2j`, so half-integer spins stay exact.
    pub twice_j: usize,
    /// `d(N, j)`, exact.
    pub multiplicity: BigUint,
    /// `d(N, j)` as a float, used as the block weight.
    pub weight: f64,
    /// Eigenvalues of `Sx` in this sector: `-2j, -2j+2, …, 2j`.
    pub sx_eigenvalues: Vec<i64>,
    /// `Sz` in the `Sx` eigenbasis (real symmetric).
    pub sz_matrix_x: RMat,
    /// The same operator stored as its band; `Sz` only couples neighbouring
    /// `Sx` eigenvalues.
    pub sz_band: ZeroDiagTridiagonal,
    /// Columns are the `Sx` eigenvectors expressed in the `Sz` eigenbasis
    /// (rows ordered by ascending `Sz`).
    pub rotation_zx: RMat,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.twice_j + 1
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    /// Eigenvalues of `Sz` for the rows of `rotation_zx`.
    pub fn sz_eigenvalues(&self) -> Vec<i64> {
        self.sx_eigenvalues.clone()
    }

    /// Position of the `Sx` eigenvalue `s` in the working basis.
    pub fn index_of(&self, s: i64) -> Option<usize> {
        let tj = self.twice_j as i64;
        if s.abs() > tj || (s + tj) % 2 != 0 {
            return None;
        }
        Some(((s + tj) / 2) as usize)
    }

    fn build(n: usize, twice_j: usize) -> Sector {
        let dim = twice_j + 1;
        let j = twice_j as f64 / 2.0;

        // Sx = J+ + J- in the Sz basis, index i <-> m = -j + i.
        let mut sx_z = RMat::zeros(dim, dim);
        for i in 0..dim.saturating_sub(1) {
            let m = -j + i as f64;
            let v = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            sx_z[(i + 1, i)] = v;
            sx_z[(i, i + 1)] = v;
        }
        let eig = SymmetricEigen::new(sx_z);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut rotation = RMat::zeros(dim, dim);
        for (col, &src) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(src);
            // Phase: the largest-magnitude component (first one on ties) is positive.
            let peak = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            let lead = v
                .iter()
                .position(|x| x.abs() >= peak * (1.0 - 1e-10))
                .unwrap_or(0);
            let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
            let norm = v.norm();
            for r in 0..dim {
                rotation[(r, col)] = sign * v[r] / norm;
            }
        }

        let sz_diag: Vec<f64> = (0..dim).map(|i| 2.0 * (-j + i as f64)).collect();
        let mut sz_x = RMat::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let v: f64 = (0..dim)
                    .map(|i| rotation[(i, a)] * sz_diag[i] * rotation[(i, b)])
                    .sum();
                sz_x[(a, b)] = v;
                sz_x[(b, a)] = v;
            }
        }
        let off = (0..dim.saturating_sub(1)).map(|a| sz_x[(a, a + 1)]).collect();

        let multiplicity = multiplicity(n, twice_j);
        let weight = multiplicity.to_f64().unwrap_or(f64::INFINITY);
        let sx_eigenvalues = (0..dim as i64).map(|i| 2 * i - twice_j as i64).collect();

        Sector {
            twice_j,
            multiplicity,
            weight,
            sx_eigenvalues,
            sz_matrix_x: sz_x,
            sz_band: ZeroDiagTridiagonal { off },
            rotation_zx: rotation,
        }
    }
}

/// Sector decomposition for a fixed particle count. Immutable once built.
#[derive(Debug, Clone)]
pub struct BlockBasis {
    n: usize,
    sectors: Vec<Sector>,
}

impl BlockBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Sectors ordered by decreasing `j`; index 0 is the symmetric sector.
    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn top(&self) -> &Sector {
        &self.sectors[0]
    }

    /// `Σ d(N,j)(2j+1)`, which must equal `2^N`.
    pub fn dimension_sum(&self) -> BigUint {
        self.sectors
            .iter()
            .map(|s| &s.multiplicity * BigUint::from(s.dim()))
            .sum()
    }
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// `d(N, j) = C(N, N/2-j) - C(N, N/2-j-1)`.
pub fn multiplicity(n: usize, twice_j: usize) -> BigUint {
    assert!(twice_j <= n && (n - twice_j).is_multiple_of(2), "2j must have the parity of N");
    let k = (n - twice_j) / 2;
    let hi = binomial(n, k);
    if k == 0 {
        hi
    } else {
        hi - binomial(n, k - 1)
    }
}

pub fn build_block_basis(n: usize) -> Result<Arc<BlockBasis>> {
    if n == 0 || n > MAX_PARTICLES {
        return Err(Error::Config(format!(
            "particle count {n} outside 1..={MAX_PARTICLES}"
        )));
    }
    let sectors = (0..=n / 2)
        .map(|k| Sector::build(n, n - 2 * k))
        .collect();
    Ok(Arc::new(BlockBasis { n, sectors }))
}

/// Block-diagonal density matrix. Normalization: `Σ_j d(N,j)·tr(block_j) = 1`.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    basis: Arc<BlockBasis>,
    blocks: Vec<CMat>,
}

impl EnsembleState {
    /// Wraps raw blocks. Shapes are checked; normalization is not.
    pub fn from_blocks(basis: Arc<BlockBasis>, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != basis.sectors.len() {
            return Err(Error::Contract(format!(
                "expected {} blocks, got {}",
                basis.sectors.len(),
                blocks.len()
            )));
        }
        for (b, s) in blocks.iter().zip(&basis.sectors) {
            if b.nrows() != s.dim() || b.ncols() != s.dim() {
                return Err(Error::Contract(format!(
                    "block for 2j={} has shape {}x{}",
                    s.twice_j,
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { basis, blocks })
    }

    /// Inverse of [`EnsembleState::blocks_in_z_basis`]: blocks given in the
    /// `Sz` eigenbasis (ascending `Sz`) are rotated into the working basis.
    pub fn from_z_blocks(basis: Arc<BlockBasis>, z_blocks: Vec<CMat>) -> Result<Self> {
        let st = Self::from_blocks(basis, z_blocks)?;
        let blocks = st
            .blocks
            .iter()
            .zip(&st.basis.sectors)
            .map(|(b, s)| {
                let u = linalg::to_complex(&s.rotation_zx);
                u.adjoint() * b * &u
            })
            .collect();
        Ok(Self { basis: st.basis, blocks })
    }

    pub fn basis(&self) -> &Arc<BlockBasis> {
        &self.basis
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [CMat] {
        &mut self.blocks
    }

    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn weighted_trace(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.basis.sectors)
            .map(|(b, s)| s.weight * linalg::trace(b).re)
            .sum()
    }

    /// Rescales so the weighted trace is one.
    pub fn normalize(&mut self) {
        let t = self.weighted_trace();
        for b in &mut self.blocks {
            *b /= Complex64::new(t, 0.0);
        }
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::hermitian_defect)
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all blocks, scaled by the sector weight so it
    /// is comparable with the weighted trace.
    pub fn min_weighted_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.basis.sectors)
            .flat_map(|(b, s)| {
                linalg::hermitian_eigenvalues(b)
                    .into_iter()
                    .map(move |l| l * s.weight)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `Σ_j d_j tr(O_j ρ_j)` for an operator given per sector.
    fn expectation_with(&self, op: impl Fn(&Sector, &CMat) -> CMat) -> f64 {
        self.blocks
            .iter()
            .zip(&self.basis.sectors)
            .map(|(b, s)| s.weight * linalg::trace(&op(s, b)).re)
            .sum()
    }

    pub fn expectation_sz(&self) -> f64 {
        self.expectation_with(|s, b| s.sz_band.mul_left(b))
    }

    pub fn expectation_sz2(&self) -> f64 {
        self.expectation_with(|s, b| s.sz_band.mul_left(&s.sz_band.mul_left(b)))
    }

    pub fn expectation_sx(&self) -> f64 {
        self.expectation_with(|s, b| {
            CMat::from_fn(b.nrows(), b.ncols(), |r, c| {
                b[(r, c)] * s.sx_eigenvalues[r] as f64
            })
        })
    }

    pub fn expectation_sx2(&self) -> f64 {
        self.expectation_with(|s, b| {
            CMat::from_fn(b.nrows(), b.ncols(), |r, c| {
                b[(r, c)] * (s.sx_eigenvalues[r] as f64).powi(2)
            })
        })
    }

    /// `⟨Sx = θ| ρ |Sx = θ⟩` for the symmetric-sector Dicke state.
    pub fn dicke_population(&self, theta: i64) -> f64 {
        let top = self.basis.top();
        match top.index_of(theta) {
            Some(i) => top.weight * self.blocks[0][(i, i)].re,
            None => 0.0,
        }
    }

    /// Same state with every block converted back to the `Sz` eigenbasis.
    pub fn blocks_in_z_basis(&self) -> Vec<CMat> {
        self.blocks
            .iter()
            .zip(&self.basis.sectors)
            .map(|(b, s)| {
                let u = linalg::to_complex(&s.rotation_zx);
                &u * b * u.adjoint()
            })
            .collect()
    }
}

fn ln_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Gibbs state `exp(-β ω_P Sz) / Z` with `Z = (2 cosh βω_P)^N`.
pub fn thermal_state(basis: &Arc<BlockBasis>, beta: f64, omega_p: f64) -> Result<EnsembleState> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature {beta} must be finite and >= 0")));
    }
    let x = beta * omega_p;
    let log_z = basis.n as f64 * ln_two_cosh(x);
    let blocks = basis
        .sectors
        .iter()
        .map(|s| {
            let dim = s.dim();
            let w: Vec<f64> = s
                .sz_eigenvalues()
                .iter()
                .map(|&sz| (-x * sz as f64 - log_z).exp())
                .collect();
            let u = &s.rotation_zx;
            let mut block = CMat::zeros(dim, dim);
            for a in 0..dim {
                for b in a..dim {
                    let v: f64 = (0..dim).map(|i| u[(i, a)] * w[i] * u[(i, b)]).sum();
                    block[(a, b)] = Complex64::new(v, 0.0);
                    block[(b, a)] = Complex64::new(v, 0.0);
                }
            }
            block
        })
        .collect();
    EnsembleState::from_blocks(basis.clone(), blocks)
}

fn pure_top_state(basis: &Arc<BlockBasis>, amplitudes: &[f64]) -> EnsembleState {
    let mut blocks: Vec<CMat> = basis
        .sectors
        .iter()
        .map(|s| CMat::zeros(s.dim(), s.dim()))
        .collect();
    let dim = basis.top().dim();
    for a in 0..dim {
        for b in 0..dim {
            blocks[0][(a, b)] = Complex64::new(amplitudes[a] * amplitudes[b], 0.0);
        }
    }
    EnsembleState { basis: basis.clone(), blocks }
}

/// Symmetric Dicke state `|Sx = θ⟩`.
pub fn dicke_state(basis: &Arc<BlockBasis>, theta: i64) -> Result<EnsembleState> {
    let top = basis.top();
    let idx = top.index_of(theta).ok_or_else(|| {
        Error::Domain(format!(
            "Sx eigenvalue {theta} is not admissible for N = {}",
            basis.n
        ))
    })?;
    let mut amp = vec![0.0; top.dim()];
    amp[idx] = 1.0;
    Ok(pure_top_state(basis, &amp))
}

/// The zero-temperature product state with every spin up along z.
pub fn all_up_state(basis: &Arc<BlockBasis>) -> EnsembleState {
    let top = basis.top();
    let last = top.dim() - 1;
    let amp: Vec<f64> = (0..top.dim()).map(|a| top.rotation_zx[(last, a)]).collect();
    pure_top_state(basis, &amp)
}

/// Variance of `Sz` in the Dicke state `|Sx = ξ⟩`: `(N² - ξ²)/2 + N`.
pub fn dicke_variance(n: usize, xi: i64) -> f64 {
    let n = n as f64;
    let xi = xi as f64;
    (n * n - xi * xi) / 2.0 + n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_multiplicities() {
        let b = build_block_basis(2).unwrap();
        let d: Vec<(usize, u64)> = b
            .sectors()
            .iter()
            .map(|s| (s.twice_j, s.multiplicity.to_u64().unwrap()))
            .collect();
        assert_eq!(d, vec![(2, 1), (0, 1)]);

        let b = build_block_basis(4).unwrap();
        let d: Vec<u64> = b
            .sectors()
            .iter()
            .map(|s| s.multiplicity.to_u64().unwrap())
            .collect();
        assert_eq!(d, vec![1, 3, 2]);
        assert_eq!(b.dimension_sum(), BigUint::from(16u32));
    }

    #[test]
    fn single_spin() {
        let b = build_block_basis(1).unwrap();
        assert_eq!(b.sectors().len(), 1);
        assert_eq!(b.top().twice_j, 1);
        assert_eq!(b.top().sx_eigenvalues, vec![-1, 1]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(build_block_basis(0), Err(Error::Config(_))));
        assert!(matches!(build_block_basis(201), Err(Error::Config(_))));
    }

    #[test]
    fn dimension_sum_is_exact_up_to_200() {
        for n in 1..=MAX_PARTICLES {
            let total: BigUint = (0..=n / 2)
                .map(|k| multiplicity(n, n - 2 * k) * BigUint::from(n - 2 * k + 1))
                .sum();
            assert_eq!(total, BigUint::from(1u32) << n, "N = {n}");
        }
    }

    #[test]
    fn rotation_is_orthogonal_and_diagonalizes_sz() {
        let b = build_block_basis(40).unwrap();
        for s in b.sectors() {
            let u = &s.rotation_zx;
            let id = u.transpose() * u;
            let err = (id - RMat::identity(s.dim(), s.dim())).abs().max();
            assert!(err < 1e-12, "2j={} unitarity {err}", s.twice_j);
            let back = u * &s.sz_matrix_x * u.transpose();
            for r in 0..s.dim() {
                for c in 0..s.dim() {
                    let expect = if r == c { s.sx_eigenvalues[r] as f64 } else { 0.0 };
                    assert!((back[(r, c)] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sz_is_banded_in_x_basis() {
        let b = build_block_basis(31).unwrap();
        for s in b.sectors() {
            for r in 0..s.dim() {
                for c in 0..s.dim() {
                    if r.abs_diff(c) != 1 {
                        assert!(s.sz_matrix_x[(r, c)].abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn thermal_infinite_temperature_is_maximally_mixed() {
        let b = build_block_basis(5).unwrap();
        let st = thermal_state(&b, 0.0, 0.5).unwrap();
        assert!((st.weighted_trace() - 1.0).abs() < 1e-12);
        for blk in st.blocks() {
            for r in 0..blk.nrows() {
                for c in 0..blk.ncols() {
                    let expect = if r == c { 1.0 / 32.0 } else { 0.0 };
                    assert!((blk[(r, c)] - Complex64::new(expect, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn thermal_low_temperature_picks_all_down() {
        let b = build_block_basis(6).unwrap();
        let st = thermal_state(&b, 1e3, 0.5).unwrap();
        let z = st.blocks_in_z_basis();
        // Sz = -N is the first row of the symmetric sector in the z basis.
        assert!(z[0][(0, 0)].re >= 1.0 - 1e-6);
        assert!((st.expectation_sz() + 6.0).abs() < 1e-6);
    }

    #[test]
    fn thermal_rejects_negative_beta() {
        let b = build_block_basis(3).unwrap();
        assert!(matches!(thermal_state(&b, -0.1, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn dicke_examples() {
        let b = build_block_basis(4).unwrap();
        let d = dicke_state(&b, 0).unwrap();
        assert!(d.expectation_sx().abs() < 1e-14);
        assert!(d.expectation_sx2().abs() < 1e-14);

        let b = build_block_basis(3).unwrap();
        let d = dicke_state(&b, 1).unwrap();
        assert!(d.expectation_sz().abs() < 1e-12);
        assert!((d.expectation_sz2() - 7.0).abs() < 1e-12);

        assert!(matches!(dicke_state(&b, 2), Err(Error::Domain(_))));
        assert!(matches!(dicke_state(&b, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn dicke_variance_values() {
        assert_eq!(dicke_variance(4, 0), 12.0);
        assert_eq!(dicke_variance(4, 4), 4.0);
        assert_eq!(dicke_variance(4, -4), 4.0);
        assert_eq!(dicke_variance(2, 0), 4.0);
    }

    #[test]
    fn all_up_has_maximal_sz() {
        let b = build_block_basis(7).unwrap();
        let st = all_up_state(&b);
        assert!((st.expectation_sz() - 7.0).abs() < 1e-12);
        assert!((st.expectation_sz2() - 49.0).abs() < 1e-10);
        // Binomial Sx populations.
        assert!((st.dicke_population(1) - 35.0 / 128.0).abs() < 1e-12);
    }
}
