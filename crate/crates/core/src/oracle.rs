//! Dense `2^N` reference implementation.
//!
//! Works directly on the full tensor-product space with no sector
//! decomposition, so it shares no code path with the block engine beyond the
//! linear algebra helpers. Computational basis index `x`: bit `i` set means
//! spin `i` is down, so `Sz|x⟩ = (N - 2·popcount(x))|x⟩`.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::catness::catness;
use crate::linalg::{self, CMat, RMat, ONE, ZERO};
use crate::measurement::{apply_outcome_in_place, build_kraus, outcome_probabilities, Outcome};
use crate::spin_blocks::{build_block_basis, thermal_state, EnsembleState};
use crate::trajectory::{trajectory_stream, TrajectoryState};
use crate::{Error, Result};

/// Largest particle count accepted here.
pub const MAX_DENSE_PARTICLES: usize = 10;

#[derive(Debug, Clone)]
pub struct DenseState {
    pub n: usize,
    pub rho: CMat,
}

fn check_n(n: usize) -> Result<usize> {
    if n == 0 || n > MAX_DENSE_PARTICLES {
        return Err(Error::Domain(format!(
            "dense oracle supports 1..={MAX_DENSE_PARTICLES} particles, got {n}"
        )));
    }
    Ok(1 << n)
}

/// `Sz` eigenvalue of basis state `x`.
pub fn sz_value(n: usize, x: usize) -> i64 {
    n as i64 - 2 * x.count_ones() as i64
}

/// `Σ σx_i`.
pub fn dense_sx(n: usize) -> Result<CMat> {
    let dim = check_n(n)?;
    let mut m = CMat::zeros(dim, dim);
    for x in 0..dim {
        for i in 0..n {
            m[(x ^ (1 << i), x)] += ONE;
        }
    }
    Ok(m)
}

pub fn dense_sz(n: usize) -> Result<CMat> {
    let dim = check_n(n)?;
    Ok(CMat::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(sz_value(n, r) as f64, 0.0)
        } else {
            ZERO
        }
    }))
}

/// `(S+, S-)` with `S± = Σ σ±_i` and `σ+ = |↑⟩⟨↓|`.
pub fn dense_ladder(n: usize) -> Result<(CMat, CMat)> {
    let dim = check_n(n)?;
    let mut plus = CMat::zeros(dim, dim);
    for x in 0..dim {
        for i in 0..n {
            if x & (1 << i) != 0 {
                plus[(x ^ (1 << i), x)] = ONE;
            }
        }
    }
    let minus = plus.adjoint();
    Ok((plus, minus))
}

pub fn dense_thermal(n: usize, beta: f64, omega_p: f64) -> Result<DenseState> {
    let dim = check_n(n)?;
    let w: Vec<f64> = (0..dim)
        .map(|x| (-beta * omega_p * sz_value(n, x) as f64).exp())
        .collect();
    let z: f64 = w.iter().sum();
    let mut rho = CMat::zeros(dim, dim);
    for (x, v) in w.iter().enumerate() {
        rho[(x, x)] = Complex64::new(v / z, 0.0);
    }
    Ok(DenseState { n, rho })
}

pub fn dense_all_up(n: usize) -> Result<DenseState> {
    let dim = check_n(n)?;
    let mut rho = CMat::zeros(dim, dim);
    rho[(0, 0)] = ONE;
    Ok(DenseState { n, rho })
}

/// `(W+, W-) = ((U - iU†)/2, (U + iU†)/2)` with `U = ⊗ exp(-i gt σx / 2)`.
pub fn dense_kraus(n: usize, gt: f64) -> Result<(CMat, CMat)> {
    let dim = check_n(n)?;
    let (s, c) = (gt / 2.0).sin_cos();
    let u = CMat::from_fn(dim, dim, |r, col| {
        let flips = (r ^ col).count_ones() as i32;
        let mut v = Complex64::new(c.powi(n as i32 - flips), 0.0) * Complex64::new(0.0, -s).powi(flips);
        if v.norm() < 1e-300 {
            v = ZERO;
        }
        v
    });
    let i = Complex64::new(0.0, 1.0);
    let ud = u.adjoint();
    let plus = (&u - &ud * i) * Complex64::new(0.5, 0.0);
    let minus = (&u + &ud * i) * Complex64::new(0.5, 0.0);
    Ok((plus, minus))
}

/// Applies `W ρ W† / p` and returns `p`.
pub fn dense_apply(state: &DenseState, w: &CMat) -> Result<(DenseState, f64)> {
    let out = w * &state.rho * w.adjoint();
    let p = linalg::trace(&out).re;
    if !(p > 0.0) {
        return Err(Error::ImpossibleOutcome { what: "dense Kraus step".into(), probability: p });
    }
    Ok((DenseState { n: state.n, rho: out / Complex64::new(p, 0.0) }, p))
}

/// `[Sz,[Sz,ρ]]`, entrywise `(s_a - s_b)² ρ_ab`.
pub fn dense_double_commutator(state: &DenseState) -> CMat {
    let n = state.n;
    CMat::from_fn(state.rho.nrows(), state.rho.ncols(), |a, b| {
        let ds = (sz_value(n, a) - sz_value(n, b)) as f64;
        state.rho[(a, b)] * (ds * ds)
    })
}

/// `½ ‖[Sz,[Sz,ρ]]‖₁`.
pub fn dense_catness(state: &DenseState) -> f64 {
    0.5 * linalg::trace_norm_hermitian(&dense_double_commutator(state))
}

/// Projector onto the `Sx = m` eigenspace, built with the Hadamard transform.
pub fn dense_sx_projector(n: usize, m: i64) -> Result<CMat> {
    let dim = check_n(n)?;
    if m.abs() > n as i64 || (m + n as i64) % 2 != 0 {
        return Err(Error::Domain(format!("Sx = {m} is not an eigenvalue for N = {n}")));
    }
    let zs: Vec<usize> = (0..dim).filter(|&z| sz_value(n, z) == m).collect();
    let norm = 1.0 / dim as f64;
    let sign = |a: usize, b: usize| if (a & b).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut p = RMat::zeros(dim, dim);
    for x in 0..dim {
        for y in x..dim {
            let v: f64 = zs.iter().map(|&z| sign(x, z) * sign(z, y)).sum::<f64>() * norm;
            p[(x, y)] = v;
            p[(y, x)] = v;
        }
    }
    Ok(linalg::to_complex(&p))
}

/// `P ρ P / Tr(P ρ)` and the probability `Tr(P ρ)`.
pub fn dense_projection(state: &DenseState, m: i64) -> Result<(DenseState, f64)> {
    let p = dense_sx_projector(state.n, m)?;
    dense_apply(state, &p)
}

/// Orthonormal basis of copy `c` of each spin-`j` irrep, as columns ordered
/// by ascending `m`. Outer index follows the sector order of the block basis
/// (decreasing `j`).
pub fn irrep_bases(n: usize) -> Result<Vec<Vec<CMat>>> {
    let dim = check_n(n)?;
    let (plus, minus) = dense_ladder(n)?;
    let mut out = Vec::new();
    let mut twice_j = n as i64;
    while twice_j >= 0 {
        let k = ((n as i64 - twice_j) / 2) as u32;
        let weight_k: Vec<usize> = (0..dim).filter(|x| x.count_ones() == k).collect();
        let weight_k1: Vec<usize> = (0..dim).filter(|x| k > 0 && x.count_ones() == k - 1).collect();
        // S+ restricted to the weight-k subspace; its kernel holds the
        // highest-weight vectors.
        let a = RMat::from_fn(weight_k1.len(), weight_k.len(), |r, c| plus[(weight_k1[r], weight_k[c])].re);
        let ata = a.transpose() * &a;
        let eig = SymmetricEigen::new(ata);
        let kernel: Vec<usize> = (0..weight_k.len()).filter(|&i| eig.eigenvalues[i].abs() < 1e-9).collect();
        let j = twice_j as f64 / 2.0;
        let size = twice_j as usize + 1;
        let mut copies = Vec::new();
        for &col in &kernel {
            let mut basis = CMat::zeros(dim, size);
            let mut v = CMat::zeros(dim, 1);
            for (r, &x) in weight_k.iter().enumerate() {
                v[(x, 0)] = Complex64::new(eig.eigenvectors[(r, col)], 0.0);
            }
            basis.set_column(size - 1, &v.column(0));
            let mut mm = j;
            for idx in (0..size - 1).rev() {
                let f = ((j + mm) * (j - mm + 1.0)).sqrt();
                v = (&minus * &v) / Complex64::new(f, 0.0);
                basis.set_column(idx, &v.column(0));
                mm -= 1.0;
            }
            copies.push(basis);
        }
        out.push(copies);
        twice_j -= 2;
    }
    Ok(out)
}

/// Dense matrix represented by a block ensemble state.
pub fn embed(state: &EnsembleState) -> Result<DenseState> {
    embed_with(&irrep_bases(state.n())?, state)
}

/// [`embed`] with bases from [`irrep_bases`] computed once by the caller.
pub fn embed_with(bases: &[Vec<CMat>], state: &EnsembleState) -> Result<DenseState> {
    let n = state.n();
    let dim = check_n(n)?;
    if bases.len() != state.blocks().len() {
        return Err(Error::Contract("irrep bases do not match the state's sectors".into()));
    }
    let z_blocks = state.blocks_in_z_basis();
    let mut rho = CMat::zeros(dim, dim);
    for (copies, block) in bases.iter().zip(&z_blocks) {
        for v in copies {
            rho += v * block * v.adjoint();
        }
    }
    Ok(DenseState { n, rho })
}

/// Largest entry-wise difference between a block state and a dense state.
pub fn embedding_distance(state: &EnsembleState, dense: &DenseState) -> Result<f64> {
    Ok(linalg::max_abs(&(embed(state)?.rho - &dense.rho)))
}

pub fn dense_expectation(state: &DenseState, op: &CMat) -> f64 {
    linalg::trace(&(op * &state.rho)).re
}

/// Largest deviations seen by [`compare_with_dense`].
#[derive(Debug, Default, Clone, Copy, Serialize)]
pub struct OracleDeviation {
    pub state: f64,
    pub probability: f64,
    pub catness: f64,
    pub steps: usize,
}

impl OracleDeviation {
    fn absorb(&mut self, state: f64, probability: f64, catness: f64) {
        self.state = self.state.max(state);
        self.probability = self.probability.max(probability);
        self.catness = self.catness.max(catness);
        self.steps += 1;
    }
}

/// `(U X − i U† X) / 2` or `(U X + i U† X) / 2` with `U = ⊗ exp(-i gt σx / 2)`,
/// applied one qubit at a time.
pub fn dense_kraus_left(n: usize, gt: f64, outcome: Outcome, x: &CMat) -> CMat {
    let (s, c) = (gt / 2.0).sin_cos();
    let rotate = |sign: f64| {
        // exp(-i sign θ σx) on every qubit.
        let off = Complex64::new(0.0, -sign * s);
        let cc = Complex64::new(c, 0.0);
        let mut m = x.clone();
        for q in 0..n {
            let bit = 1usize << q;
            for r in 0..m.nrows() {
                if r & bit != 0 {
                    continue;
                }
                for col in 0..m.ncols() {
                    let a = m[(r, col)];
                    let b = m[(r | bit, col)];
                    m[(r, col)] = cc * a + off * b;
                    m[(r | bit, col)] = off * a + cc * b;
                }
            }
        }
        m
    };
    let ux = rotate(1.0);
    let udx = rotate(-1.0);
    let phase = match outcome {
        Outcome::Plus => Complex64::new(0.0, -0.5),
        Outcome::Minus => Complex64::new(0.0, 0.5),
    };
    ux * Complex64::new(0.5, 0.0) + udx * phase
}

/// Unnormalized `W ρ W†` without forming `W`.
pub fn dense_kraus_unnormalized(state: &DenseState, gt: f64, outcome: Outcome) -> CMat {
    let left = dense_kraus_left(state.n, gt, outcome, &state.rho);
    dense_kraus_left(state.n, gt, outcome, &left.adjoint()).adjoint()
}

/// The irrep basis from [`irrep_bases`] as one real orthogonal matrix, with
/// the column offset of every `(sector, copy)`.
#[derive(Debug, Clone)]
pub struct IrrepFrame {
    pub n: usize,
    pub basis: RMat,
    pub offsets: Vec<Vec<usize>>,
}

impl IrrepFrame {
    pub fn new(n: usize) -> Result<Self> {
        let dim = check_n(n)?;
        let bases = irrep_bases(n)?;
        let mut basis = RMat::zeros(dim, dim);
        let mut offsets = Vec::with_capacity(bases.len());
        let mut col = 0;
        for copies in &bases {
            let mut off = Vec::with_capacity(copies.len());
            for v in copies {
                off.push(col);
                for c in 0..v.ncols() {
                    for r in 0..dim {
                        basis[(r, col + c)] = v[(r, c)].re;
                    }
                }
                col += v.ncols();
            }
            offsets.push(off);
        }
        if col != dim {
            return Err(Error::Contract(format!("irrep bases span {col} of {dim} dimensions")));
        }
        Ok(Self { n, basis, offsets })
    }

    /// `Bᵀ ρ B`.
    pub fn rotate(&self, rho: &CMat) -> CMat {
        let re = rho.map(|z| z.re);
        let im = rho.map(|z| z.im);
        let bt = self.basis.transpose();
        let r = &bt * re * &self.basis;
        let i = &bt * im * &self.basis;
        CMat::from_fn(r.nrows(), r.ncols(), |a, b| Complex64::new(r[(a, b)], i[(a, b)]))
    }

    /// Frobenius distance between a block state and a dense matrix already
    /// rotated with [`IrrepFrame::rotate`].
    pub fn distance(&self, state: &EnsembleState, rotated: &CMat) -> f64 {
        let mut expected = CMat::zeros(rotated.nrows(), rotated.ncols());
        for (block, offs) in state.blocks_in_z_basis().iter().zip(&self.offsets) {
            for &o in offs {
                expected.view_mut((o, o), block.shape()).copy_from(block);
            }
        }
        (expected - rotated).norm()
    }
}

/// Runs random outcome scripts through the block engine (full and factored
/// updates) and the dense oracle side by side. States and probabilities are
/// compared after every step, catness at the start and end of each script.
pub fn compare_with_dense(ns: &[usize], scripts: usize, steps: usize, seed: u64) -> Result<OracleDeviation> {
    let mut dev = OracleDeviation::default();
    for &n in ns {
        let basis = build_block_basis(n)?;
        let frame = IrrepFrame::new(n)?;
        for t in 0..scripts {
            let mut rng = trajectory_stream(seed, (n * 1000 + t) as u64);
            let beta = rng.random_range(0.0..3.0);
            let omega = 0.5;
            let gt = rng.random_range(0.05..1.0);
            let kraus = build_kraus(&basis, gt);

            let initial = thermal_state(&basis, beta, omega)?;
            let mut dense = dense_thermal(n, beta, omega)?;
            let mut full = initial.clone();
            let mut lazy = TrajectoryState::new(Arc::new(initial));

            let d0 = frame.distance(&full, &frame.rotate(&dense.rho));
            let c0 = (catness(&full).value - dense_catness(&dense)).abs();
            dev.absorb(d0, 0.0, c0);

            for step in 1..=steps {
                let outcome = if rng.random::<bool>() { Outcome::Plus } else { Outcome::Minus };

                let (pp, pm) = outcome_probabilities(&full, &kraus)?;
                let (lp, lm) = lazy.probabilities(&kraus);
                let plus = dense_kraus_unnormalized(&dense, gt, Outcome::Plus);
                let minus = dense_kraus_unnormalized(&dense, gt, Outcome::Minus);
                let dense_pp = linalg::trace(&plus).re;
                let dense_pm = linalg::trace(&minus).re;
                let dp = [(pp - dense_pp), (pm - dense_pm), (lp - dense_pp), (lm - dense_pm)]
                    .iter()
                    .fold(0.0_f64, |a, v| a.max(v.abs()));

                apply_outcome_in_place(&mut full, &kraus, outcome)?;
                lazy.apply(&kraus, outcome)?;
                let (next, p) = match outcome {
                    Outcome::Plus => (plus, dense_pp),
                    Outcome::Minus => (minus, dense_pm),
                };
                if !(p > 0.0) {
                    return Err(Error::ImpossibleOutcome { what: "dense Kraus step".into(), probability: p });
                }
                dense = DenseState { n, rho: next / Complex64::new(p, 0.0) };

                let materialized = lazy.materialize();
                let rotated = frame.rotate(&dense.rho);
                let ds = frame.distance(&full, &rotated).max(frame.distance(&materialized, &rotated));
                let dc = if step == steps {
                    let dc_ref = dense_catness(&dense);
                    (catness(&full).value - dc_ref)
                        .abs()
                        .max((catness(&materialized).value - dc_ref).abs())
                } else {
                    0.0
                };
                dev.absorb(ds, dp, dc);
            }
        }
    }
    Ok(dev)
}
