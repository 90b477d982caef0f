//! Back-action of one ancilla Ramsey cycle on the ensemble.
//!
//! With the coupling `(g/2) Sx ⊗ σ3` applied for time `t` and the ancilla read
//! out along σ2, the ensemble is updated by one of two commuting operators
//! that are diagonal in the `Sx` eigenbasis:
//!
//! ```text
//! W+ = (1-i)/√2 · sin(π/4 + gt·Sx/2)
//! W- = (1+i)/√2 · sin(π/4 - gt·Sx/2)
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spin_blocks::{BlockBasis, EnsembleState};
use crate::{Error, Result};

/// Probabilities below this are treated as impossible outcomes.
pub const IMPOSSIBLE_PROBABILITY: f64 = 1e-15;
/// Allowed drift of the weighted trace of an input state.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// Ancilla σ2 readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Outcome::Plus),
            -1 => Some(Outcome::Minus),
            _ => None,
        }
    }
}

/// Diagonal Kraus entries for every sector, indexed like the `Sx` eigenvalues.
#[derive(Debug, Clone)]
pub struct KrausPair {
    gt: f64,
    n: usize,
    plus: Vec<Vec<Complex64>>,
    minus: Vec<Vec<Complex64>>,
    plus_prob: Vec<Vec<f64>>,
    minus_prob: Vec<Vec<f64>>,
}

pub fn phase_plus() -> Complex64 {
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)
}

pub fn phase_minus() -> Complex64 {
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)
}

/// `sin(π/4 ± gt·s/2)` without the phase, expanded as `(cos x ± sin x)/√2`
/// so both amplitudes share one rounded `x`.
pub fn kraus_amplitude(gt: f64, s: i64, outcome: Outcome) -> f64 {
    let (sin, cos) = (gt * s as f64 / 2.0).sin_cos();
    match outcome {
        Outcome::Plus => (cos + sin) * FRAC_1_SQRT_2,
        Outcome::Minus => (cos - sin) * FRAC_1_SQRT_2,
    }
}

impl KrausPair {
    pub fn gt(&self) -> f64 {
        self.gt
    }

    /// Entries of `W+` (or `W-`) for sector `sector`.
    pub fn entries(&self, sector: usize, outcome: Outcome) -> &[Complex64] {
        match outcome {
            Outcome::Plus => &self.plus[sector],
            Outcome::Minus => &self.minus[sector],
        }
    }

    /// `|w±|²` for sector `sector`.
    pub fn probabilities(&self, sector: usize, outcome: Outcome) -> &[f64] {
        match outcome {
            Outcome::Plus => &self.plus_prob[sector],
            Outcome::Minus => &self.minus_prob[sector],
        }
    }

    pub fn sector_count(&self) -> usize {
        self.plus.len()
    }

    /// Outside `gt·N ≤ π/2` the convergence target needs the periodic
    /// candidate analysis; the operators themselves are still valid.
    pub fn warning(&self) -> Option<String> {
        let span = self.gt.abs() * self.n as f64;
        (span > FRAC_PI_2).then(|| {
            format!(
                "gt·N = {span:.4} exceeds π/2; several Sx eigenvalues can compete as convergence targets"
            )
        })
    }
}

pub fn build_kraus(basis: &BlockBasis, gt: f64) -> KrausPair {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut plus_prob = Vec::new();
    let mut minus_prob = Vec::new();
    for s in basis.sectors() {
        let sp: Vec<f64> = s
            .sx_eigenvalues
            .iter()
            .map(|&x| kraus_amplitude(gt, x, Outcome::Plus))
            .collect();
        let sm: Vec<f64> = s
            .sx_eigenvalues
            .iter()
            .map(|&x| kraus_amplitude(gt, x, Outcome::Minus))
            .collect();
        plus.push(sp.iter().map(|&v| phase_plus() * v).collect());
        minus.push(sm.iter().map(|&v| phase_minus() * v).collect());
        plus_prob.push(sp.iter().map(|v| v * v).collect());
        minus_prob.push(sm.iter().map(|v| v * v).collect());
    }
    KrausPair {
        gt,
        n: basis.n(),
        plus,
        minus,
        plus_prob,
        minus_prob,
    }
}

fn check_pairing(state: &EnsembleState, kraus: &KrausPair) -> Result<()> {
    if kraus.sector_count() != state.blocks().len() || kraus.n != state.n() {
        return Err(Error::Contract(
            "Kraus pair was built for a different basis".into(),
        ));
    }
    Ok(())
}

fn raw_probability(state: &EnsembleState, kraus: &KrausPair, outcome: Outcome) -> f64 {
    state
        .blocks()
        .iter()
        .zip(state.basis().sectors())
        .enumerate()
        .map(|(i, (b, s))| {
            let w = kraus.probabilities(i, outcome);
            s.weight * (0..b.nrows()).map(|a| w[a] * b[(a, a)].re).sum::<f64>()
        })
        .sum()
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `(Prob[+1], Prob[-1])` for the next cycle.
pub fn outcome_probabilities(state: &EnsembleState, kraus: &KrausPair) -> Result<(f64, f64)> {
    check_pairing(state, kraus)?;
    let tr = state.weighted_trace();
    if (tr - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Contract(format!("state trace {tr} is not 1")));
    }
    Ok((
        clamp_probability(raw_probability(state, kraus, Outcome::Plus)),
        clamp_probability(raw_probability(state, kraus, Outcome::Minus)),
    ))
}

/// Conditions the state on `outcome` in place and returns the probability of
/// that outcome.
pub fn apply_outcome_in_place(
    state: &mut EnsembleState,
    kraus: &KrausPair,
    outcome: Outcome,
) -> Result<f64> {
    check_pairing(state, kraus)?;
    let p = raw_probability(state, kraus, outcome);
    if !(p > IMPOSSIBLE_PROBABILITY) {
        return Err(Error::ImpossibleOutcome {
            what: format!("ancilla outcome {:+}", outcome.sign()),
            probability: p,
        });
    }
    for (i, block) in state.blocks_mut().iter_mut().enumerate() {
        let w = kraus.entries(i, outcome);
        let n = block.nrows();
        for c in 0..n {
            let wc = w[c].conj();
            for r in 0..n {
                block[(r, c)] *= w[r] * wc;
            }
        }
    }
    state.normalize();
    Ok(clamp_probability(p))
}

/// `W± ρ W±† / Prob[±1]`.
pub fn apply_outcome(
    state: &EnsembleState,
    kraus: &KrausPair,
    outcome: Outcome,
) -> Result<EnsembleState> {
    let mut next = state.clone();
    apply_outcome_in_place(&mut next, kraus, outcome)?;
    Ok(next)
}
