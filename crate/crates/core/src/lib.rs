//! Trajectory simulation of a spin-½ ensemble under repeated ancilla
//! Ramsey measurements, with trace-norm "catness" analytics.
//!
//! The N-spin Hilbert space is split into total-spin sectors (see
//! [`spin_blocks`]); every collective operator acts identically on each copy
//! of a sector, so a permutation-invariant density matrix is stored as one
//! small block per sector together with its multiplicity. All states live in
//! the eigenbasis of the collective x magnetization, which makes the
//! measurement back-action diagonal.
//!
//! Collective operators follow the Pauli-sum convention: `Sz = Σ σz(l)` has
//! eigenvalues `N, N-2, …, -N`.
//!
//! Module map:
//!
//! - [`spin_blocks`]: sector decomposition, thermal / Dicke / all-up states.
//! - [`measurement`]: the Kraus pair of one ancilla cycle and the update rule.
//! - [`trajectory`]: seeded Monte Carlo trajectories and ensemble averages.
//! - [`catness`]: double commutator, trace norm, projectors, q′.
//! - [`analytics`]: closed forms, convergence prediction, scaling fits.
//! - [`oracle`]: dense 2^N reference implementation used for validation.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod catness;
mod error;
pub mod linalg;
pub mod measurement;
pub mod oracle;
pub mod spin_blocks;
pub mod trajectory;

pub use error::{Error, Result};

pub use analytics::{
    derivative_small_omega, fit_scaling, fixed_point_magnitude, pk_distribution,
    predict_convergence, ramsey_uncertainty, reference_closed_form, reference_ideal,
    ConvergencePrediction, PkDistribution, ScalingFit, SensitivityEstimate,
};
pub use catness::{
    catness, commutator_projector, double_commutator, optimal_projector, projection_postselect,
    q_prime, tr_projection_form, CatnessReport, ProjectorSpec,
};
pub use measurement::{apply_outcome, build_kraus, outcome_probabilities, KrausPair, Outcome};
pub use spin_blocks::{
    all_up_state, build_block_basis, dicke_state, dicke_variance, thermal_state, BlockBasis,
    EnsembleState, Sector,
};
pub use trajectory::{
    run_ensemble, run_trajectory, sample_outcome, trajectory_stream, EnsembleAverage,
    InitialConvention, TrajectoryConfig, TrajectoryRecord, TrajectoryState,
};
