//! Seeded Monte Carlo trajectories of repeated ancilla measurements.
//!
//! Because `W+` and `W-` are diagonal in the working basis, a trajectory does
//! not need the full density matrix at every step. [`TrajectoryState`] keeps
//! the diagonal populations (enough to sample outcomes) plus the accumulated
//! log-moduli and signs of the Kraus products, and rebuilds the conditioned
//! state only at catness checkpoints.
//!
//! Trajectory `i` draws from ChaCha8 seeded with the master seed and stream
//! id `i`, so results do not depend on how trajectories are scheduled.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catness::catness;
use crate::linalg::CMat;
use crate::measurement::{
    build_kraus, kraus_amplitude, KrausPair, Outcome, IMPOSSIBLE_PROBABILITY,
};
use crate::spin_blocks::{all_up_state, build_block_basis, thermal_state, BlockBasis, EnsembleState};
use crate::{Error, Result};

/// Checkpoints used when none are given.
pub const DEFAULT_CHECKPOINTS: [u64; 5] = [10, 50, 100, 600, 1000];
/// Run count used when none is given.
pub const DEFAULT_RUNS: u64 = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialConvention {
    /// `exp(-β ω_P Sz)/Z`, weighted towards all spins down.
    Gibbs,
    /// The pure product state with every spin up.
    AllUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub n: usize,
    pub beta: f64,
    pub omega_p: f64,
    pub gt: f64,
    pub m: u64,
    pub checkpoints: Vec<u64>,
    pub master_seed: u64,
    pub initial: InitialConvention,
}

impl Default for TrajectoryConfig {
    /// N = 15, 1/β = 0.1, ω_P = 0.5, gt = 0.222, m = 1000.
    fn default() -> Self {
        Self {
            n: 15,
            beta: 10.0,
            omega_p: 0.5,
            gt: 0.222,
            m: 1000,
            checkpoints: default_checkpoints(1000),
            master_seed: 0,
            initial: InitialConvention::Gibbs,
        }
    }
}

/// `{10, 50, 100, 600, 1000} ∩ [0, m]`, or `{m}` when that is empty.
pub fn default_checkpoints(m: u64) -> Vec<u64> {
    let cps: Vec<u64> = DEFAULT_CHECKPOINTS.iter().copied().filter(|&c| c <= m).collect();
    if cps.is_empty() {
        vec![m]
    } else {
        cps
    }
}

impl TrajectoryConfig {
    /// Sorts and dedups the checkpoints and checks every field.
    pub fn validated(mut self) -> Result<Self> {
        self.checkpoints.sort_unstable();
        self.checkpoints.dedup();
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c > self.m) {
            return Err(Error::Config(format!("checkpoint {c} is beyond m = {}", self.m)));
        }
        if !self.gt.is_finite() || !self.omega_p.is_finite() {
            return Err(Error::Config("gt and omega_p must be finite".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta = {} must be finite and >= 0", self.beta)));
        }
        Ok(self)
    }

    pub fn initial_state(&self, basis: &Arc<BlockBasis>) -> Result<EnsembleState> {
        match self.initial {
            InitialConvention::Gibbs => thermal_state(basis, self.beta, self.omega_p),
            InitialConvention::AllUp => Ok(all_up_state(basis)),
        }
    }
}

/// Independent random stream for trajectory `index`.
pub fn trajectory_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// `+1` with probability `p_plus`, from exactly one uniform draw.
pub fn sample_outcome<R: RngCore + ?Sized>(p_plus: f64, stream: &mut R) -> Outcome {
    let u: f64 = stream.random();
    if u < p_plus {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

/// Conditioned state of one trajectory in factored form.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    initial: Arc<EnsembleState>,
    populations: Vec<Vec<f64>>,
    log_modulus: Vec<Vec<f64>>,
    negative: Vec<Vec<bool>>,
    steps: u64,
    plus_count: u64,
}

impl TrajectoryState {
    pub fn new(initial: Arc<EnsembleState>) -> Self {
        let populations = initial
            .blocks()
            .iter()
            .map(|b| (0..b.nrows()).map(|a| b[(a, a)].re.max(0.0)).collect())
            .collect();
        let log_modulus = initial.blocks().iter().map(|b| vec![0.0; b.nrows()]).collect();
        let negative = initial.blocks().iter().map(|b| vec![false; b.nrows()]).collect();
        Self {
            initial,
            populations,
            log_modulus,
            negative,
            steps: 0,
            plus_count: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of `+1` outcomes applied so far.
    pub fn plus_count(&self) -> u64 {
        self.plus_count
    }

    fn raw_probability(&self, kraus: &KrausPair, outcome: Outcome) -> f64 {
        self.populations
            .iter()
            .zip(self.initial.basis().sectors())
            .enumerate()
            .map(|(i, (pops, s))| {
                let w = kraus.probabilities(i, outcome);
                s.weight * pops.iter().zip(w).map(|(p, w)| p * w).sum::<f64>()
            })
            .sum()
    }

    /// `(Prob[+1], Prob[-1])`, clamped to `[0, 1]`.
    pub fn probabilities(&self, kraus: &KrausPair) -> (f64, f64) {
        (
            self.raw_probability(kraus, Outcome::Plus).clamp(0.0, 1.0),
            self.raw_probability(kraus, Outcome::Minus).clamp(0.0, 1.0),
        )
    }

    /// Conditions on `outcome`; returns its probability.
    pub fn apply(&mut self, kraus: &KrausPair, outcome: Outcome) -> Result<f64> {
        let p = self.raw_probability(kraus, outcome);
        if !(p > IMPOSSIBLE_PROBABILITY) {
            return Err(Error::ImpossibleOutcome {
                what: format!("ancilla outcome {:+} at step {}", outcome.sign(), self.steps + 1),
                probability: p,
            });
        }
        let gt = kraus.gt();
        for (i, s) in self.initial.basis().sectors().iter().enumerate() {
            let w = kraus.probabilities(i, outcome);
            for (a, &sx) in s.sx_eigenvalues.iter().enumerate() {
                self.populations[i][a] *= w[a] / p;
                let amp = kraus_amplitude(gt, sx, outcome);
                self.log_modulus[i][a] += amp.abs().ln();
                if amp < 0.0 {
                    self.negative[i][a] = !self.negative[i][a];
                }
            }
        }
        self.steps += 1;
        if outcome == Outcome::Plus {
            self.plus_count += 1;
        }
        Ok(p.min(1.0))
    }

    /// The conditioned density matrix `K ρ₀ K† / Tr(·)`.
    pub fn materialize(&self) -> EnsembleState {
        let blocks0 = self.initial.blocks();
        let shift = self
            .log_modulus
            .iter()
            .zip(blocks0)
            .flat_map(|(ls, b)| {
                ls.iter()
                    .enumerate()
                    .filter(move |(a, l)| b[(*a, *a)].re > 0.0 && l.is_finite())
                    .map(|(_, &l)| l)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let blocks: Vec<CMat> = blocks0
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let scale: Vec<f64> = self.log_modulus[i]
                    .iter()
                    .zip(&self.negative[i])
                    .map(|(&l, &neg)| {
                        let v = (l - shift).exp();
                        if neg {
                            -v
                        } else {
                            v
                        }
                    })
                    .collect();
                CMat::from_fn(b.nrows(), b.ncols(), |r, c| {
                    b[(r, c)] * Complex64::new(scale[r] * scale[c], 0.0)
                })
            })
            .collect();
        let mut st = EnsembleState::from_blocks(self.initial.basis().clone(), blocks)
            .expect("shapes come from a valid state");
        st.normalize();
        st
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub trajectory_index: u64,
    /// `±1` per measurement.
    pub outcomes: Vec<i8>,
    pub k: u64,
    pub catness_at: BTreeMap<u64, f64>,
    #[serde(skip)]
    pub final_state: Option<EnsembleState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub checkpoint: u64,
    pub mean: f64,
    pub stderr: f64,
    pub runs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAverage {
    pub stats: Vec<CheckpointStat>,
}

impl EnsembleAverage {
    pub fn at(&self, checkpoint: u64) -> Option<&CheckpointStat> {
        self.stats.iter().find(|s| s.checkpoint == checkpoint)
    }

    /// Mean and standard error of per-trajectory catness at each checkpoint.
    pub fn from_records(checkpoints: &[u64], records: &[TrajectoryRecord]) -> Self {
        let stats = checkpoints
            .iter()
            .map(|&c| {
                let values: Vec<f64> = records
                    .iter()
                    .filter_map(|r| r.catness_at.get(&c).copied())
                    .collect();
                summarize(c, &values)
            })
            .collect();
        Self { stats }
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn summarize(checkpoint: u64, values: &[f64]) -> CheckpointStat {
    let runs = values.len() as u64;
    if runs == 0 {
        return CheckpointStat { checkpoint, mean: f64::NAN, stderr: f64::NAN, runs };
    }
    let mean = pairwise_sum(values) / runs as f64;
    let stderr = if runs < 2 {
        0.0
    } else {
        let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        (pairwise_sum(&dev) / (runs - 1) as f64).sqrt() / (runs as f64).sqrt()
    };
    CheckpointStat { checkpoint, mean, stderr, runs }
}

/// Everything shared by the trajectories of one configuration.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: TrajectoryConfig,
    basis: Arc<BlockBasis>,
    kraus: KrausPair,
    initial: Arc<EnsembleState>,
    initial_catness: f64,
}

impl Simulation {
    pub fn new(config: TrajectoryConfig) -> Result<Self> {
        let config = config.validated()?;
        let basis = build_block_basis(config.n)?;
        let kraus = build_kraus(&basis, config.gt);
        let initial = config.initial_state(&basis)?;
        let initial_catness = catness(&initial).value;
        Ok(Self {
            config,
            basis,
            kraus,
            initial: Arc::new(initial),
            initial_catness,
        })
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.config
    }

    pub fn basis(&self) -> &Arc<BlockBasis> {
        &self.basis
    }

    pub fn kraus(&self) -> &KrausPair {
        &self.kraus
    }

    pub fn initial(&self) -> &Arc<EnsembleState> {
        &self.initial
    }

    /// Runs trajectory `index` on its own stream.
    pub fn run_trajectory(&self, index: u64, retain_state: bool) -> Result<TrajectoryRecord> {
        let mut stream = trajectory_stream(self.config.master_seed, index);
        self.run_with_stream(index, &mut stream, retain_state)
    }

    pub fn run_with_stream<R: RngCore + ?Sized>(
        &self,
        index: u64,
        stream: &mut R,
        retain_state: bool,
    ) -> Result<TrajectoryRecord> {
        let mut state = TrajectoryState::new(self.initial.clone());
        let mut outcomes = Vec::with_capacity(self.config.m as usize);
        let mut catness_at = BTreeMap::new();
        let mut pending = self.config.checkpoints.iter().copied().peekable();
        if pending.peek() == Some(&0) {
            catness_at.insert(0, self.initial_catness);
            pending.next();
        }
        for step in 1..=self.config.m {
            let (p_plus, _) = state.probabilities(&self.kraus);
            let outcome = sample_outcome(p_plus, stream);
            state.apply(&self.kraus, outcome)?;
            outcomes.push(outcome.sign());
            if pending.peek() == Some(&step) {
                let value = catness(&state.materialize()).value;
                if !value.is_finite() {
                    return Err(Error::Contract(format!(
                        "catness of trajectory {index} at step {step} is {value}"
                    )));
                }
                catness_at.insert(step, value);
                pending.next();
            }
        }
        Ok(TrajectoryRecord {
            trajectory_index: index,
            k: state.plus_count(),
            outcomes,
            catness_at,
            final_state: retain_state.then(|| state.materialize()),
        })
    }

    /// Rebuilds the conditioned state from a recorded outcome prefix.
    pub fn replay(&self, outcomes: &[i8]) -> Result<TrajectoryState> {
        let mut state = TrajectoryState::new(self.initial.clone());
        for &o in outcomes {
            let outcome = Outcome::from_sign(o)
                .ok_or_else(|| Error::Domain(format!("outcome {o} is not ±1")))?;
            state.apply(&self.kraus, outcome)?;
        }
        Ok(state)
    }

    /// `runs` trajectories with indices `0..runs`, in parallel.
    pub fn run_ensemble(
        &self,
        runs: u64,
        retain_states: bool,
    ) -> Result<(EnsembleAverage, Vec<TrajectoryRecord>)> {
        if runs == 0 {
            return Err(Error::Config("run count must be at least 1".into()));
        }
        let records = (0..runs)
            .into_par_iter()
            .map(|i| self.run_trajectory(i, retain_states))
            .collect::<Result<Vec<_>>>()?;
        let avg = EnsembleAverage::from_records(&self.config.checkpoints, &records);
        Ok((avg, records))
    }
}

/// One trajectory with a caller-supplied stream.
pub fn run_trajectory<R: RngCore + ?Sized>(
    config: &TrajectoryConfig,
    index: u64,
    stream: &mut R,
) -> Result<TrajectoryRecord> {
    Simulation::new(config.clone())?.run_with_stream(index, stream, true)
}

pub fn run_ensemble(
    config: &TrajectoryConfig,
    runs: u64,
) -> Result<(EnsembleAverage, Vec<TrajectoryRecord>)> {
    Simulation::new(config.clone())?.run_ensemble(runs, false)
}
