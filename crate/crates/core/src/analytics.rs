//! Closed-form results and statistical post-processing.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::catness::{catness, check_admissible, q_prime, ProjectorSpec};
use crate::spin_blocks::{build_block_basis, dicke_state, EnsembleState, MAX_PARTICLES};
use crate::{Error, Result};

/// Default particle-count cap for [`reference_ideal`].
pub const DEFAULT_IDEAL_LIMIT: usize = 31;

/// Tolerance, in units of the admissible spacing, for calling a rounding
/// an exact tie.
const TIE_TOLERANCE: f64 = 1e-9;

fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    // Grouped so that ln C(n, k) and ln C(n, n-k) are bit-identical.
    ln_gamma(n as f64 + 1.0) - (ln_gamma(k as f64 + 1.0) + ln_gamma((n - k) as f64 + 1.0))
}

/// `ln Σ exp(t)`, summed in ascending order so the result depends only on the
/// multiset of terms.
fn log_sum_exp(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    let max = match terms.last() {
        Some(&m) if m > f64::NEG_INFINITY => m,
        _ => return f64::NEG_INFINITY,
    };
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `k·ln a` with the convention `0·ln 0 = 0`.
fn power_term(count: u64, ln_base: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_base
    }
}

/// Distribution of the number of `+1` outcomes after `m` cycles, starting
/// from the all-up product state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkDistribution {
    pub n: usize,
    pub m: u64,
    pub gt: f64,
    pub probabilities: Vec<f64>,
}

impl PkDistribution {
    /// Indices attaining the maximum, within `rel_tol` relative.
    pub fn argmax(&self, rel_tol: f64) -> Vec<usize> {
        let max = self.probabilities.iter().copied().fold(0.0, f64::max);
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= max * (1.0 - rel_tol))
            .map(|(k, _)| k)
            .collect()
    }

    /// Total-variation distance to an empirical histogram of `k` counts.
    pub fn total_variation(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        let total = total.max(1) as f64;
        0.5 * self
            .probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| (p - counts.get(k).copied().unwrap_or(0) as f64 / total).abs())
            .sum::<f64>()
    }
}

/// Unnormalized `ln p(k)` terms, exposed for tests that check the
/// normalization independently.
pub fn ln_pk_unnormalized(n: usize, m: u64, gt: f64) -> Vec<f64> {
    let nn = n as u64;
    let per_r: Vec<(f64, f64, f64)> = (0..=nn)
        .map(|r| {
            let s = (gt * (2.0 * r as f64 - n as f64)).sin();
            (
                ln_binomial(nn, r) - n as f64 * LN_2,
                ((1.0 + s) / 2.0).ln(),
                ((1.0 - s) / 2.0).ln(),
            )
        })
        .collect();
    let mut terms = vec![0.0; per_r.len()];
    (0..=m)
        .map(|k| {
            for (t, &(c, ln_plus, ln_minus)) in terms.iter_mut().zip(&per_r) {
                *t = c + (power_term(k, ln_plus) + power_term(m - k, ln_minus));
            }
            ln_binomial(m, k) + log_sum_exp(&mut terms)
        })
        .collect()
}

pub fn pk_distribution(n: usize, m: u64, gt: f64) -> Result<PkDistribution> {
    if n == 0 {
        return Err(Error::Domain("particle count must be positive".into()));
    }
    if !gt.is_finite() {
        return Err(Error::Domain(format!("gt = {gt} is not finite")));
    }
    let mut ln_p = ln_pk_unnormalized(n, m, gt);
    let ln_total = log_sum_exp(&mut ln_p.clone());
    for v in &mut ln_p {
        *v = (*v - ln_total).exp();
    }
    Ok(PkDistribution {
        n,
        m,
        gt,
        probabilities: ln_p,
    })
}

/// Predicted limit `|Sx = L⟩` of a trajectory with `k` plus outcomes out of `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePrediction {
    pub n: usize,
    pub m: u64,
    pub k: u64,
    pub gt: f64,
    /// `gt·N ≤ π/2`.
    pub narrow_regime: bool,
    /// Stationary points of the Kraus profile inside `[-N, N]`.
    pub theta_candidates: Vec<f64>,
    /// One admissible eigenvalue, or several on an exact tie.
    pub selected: Vec<i64>,
    pub degenerate: bool,
}

impl ConvergencePrediction {
    /// The unique prediction, if not degenerate.
    pub fn l(&self) -> Option<i64> {
        (!self.degenerate).then(|| self.selected[0])
    }
}

/// Nearest admissible eigenvalues (parity of `n`, clamped to `[-n, n]`) and
/// the distance to them. Two values come back on a tie.
fn nearest_admissible(n: usize, x: f64) -> (Vec<i64>, f64) {
    let ni = n as i64;
    let u = ((x + n as f64) / 2.0).clamp(0.0, n as f64);
    let lo = u.floor();
    let frac = u - lo;
    let lo_i = lo as i64;
    let to_value = |idx: i64| 2 * idx.clamp(0, ni) - ni;
    if (frac - 0.5).abs() < TIE_TOLERANCE && lo_i < ni {
        (vec![to_value(lo_i), to_value(lo_i + 1)], 1.0)
    } else {
        let idx = if frac < 0.5 { lo_i } else { lo_i + 1 };
        let l = to_value(idx);
        (vec![l], (x - l as f64).abs())
    }
}

pub fn predict_convergence(n: usize, m: u64, k: u64, gt: f64) -> Result<ConvergencePrediction> {
    if m == 0 || k > m {
        return Err(Error::Domain(format!("need 0 <= k <= m and m >= 1, got k={k}, m={m}")));
    }
    if n == 0 {
        return Err(Error::Domain("particle count must be positive".into()));
    }
    if !(gt > 0.0) || !gt.is_finite() {
        return Err(Error::Domain(format!("gt = {gt} must be positive")));
    }
    let ratio = (2.0 * k as f64 - m as f64) / m as f64;
    let a = ratio.asin();
    let span = gt * n as f64;
    let narrow = span <= PI / 2.0;

    let mut thetas: Vec<f64> = Vec::new();
    if narrow {
        thetas.push(a / gt);
    } else {
        let two_pi = 2.0 * PI;
        for base in [a, PI - a] {
            let lo = ((-span - base) / two_pi).floor() as i64;
            let hi = ((span - base) / two_pi).ceil() as i64;
            for shift in lo..=hi {
                let arg = base + two_pi * shift as f64;
                if arg.abs() <= span * (1.0 + 1e-12) {
                    let theta = arg / gt;
                    if !thetas.iter().any(|t| (t - theta).abs() < 1e-9) {
                        thetas.push(theta);
                    }
                }
            }
        }
        thetas.sort_by(f64::total_cmp);
    }

    let rounded: Vec<(Vec<i64>, f64)> = thetas.iter().map(|&t| nearest_admissible(n, t)).collect();
    let best = rounded.iter().map(|(_, h)| *h).fold(f64::INFINITY, f64::min);
    let mut selected: Vec<i64> = rounded
        .iter()
        .filter(|(_, h)| *h <= best + 2.0 * TIE_TOLERANCE)
        .flat_map(|(ls, _)| ls.iter().copied())
        .collect();
    selected.sort_unstable();
    selected.dedup();
    let degenerate = selected.len() > 1;
    Ok(ConvergencePrediction {
        n,
        m,
        k,
        gt,
        narrow_regime: narrow,
        theta_candidates: thetas,
        selected,
        degenerate,
    })
}

/// `√((m-k)^(m-k) k^k / m^m)`, the modulus of the Kraus profile at any of its
/// stationary points. Uses `0^0 = 1`.
pub fn fixed_point_magnitude(m: u64, k: u64) -> f64 {
    assert!(k <= m, "k must not exceed m");
    let xlnx = |v: u64| if v == 0 { 0.0 } else { v as f64 * (v as f64).ln() };
    (0.5 * (xlnx(m - k) + xlnx(k) - xlnx(m))).exp()
}

/// `|sin^k(π/4 + x/2) · sin^(m-k)(π/4 − x/2)|`.
pub fn kraus_profile(m: u64, k: u64, x: f64) -> f64 {
    let a = (PI / 4.0 + x / 2.0).sin().abs();
    let b = (PI / 4.0 - x / 2.0).sin().abs();
    let pow = |base: f64, e: u64| if e == 0 { 1.0 } else { base.powf(e as f64) };
    pow(a, k) * pow(b, m - k)
}

fn zero_temperature_weights(n: usize) -> Vec<(i64, f64)> {
    let nn = n as u64;
    (0..=nn)
        .map(|r| {
            let m = 2 * r as i64 - n as i64;
            (m, (ln_binomial(nn, r) - n as f64 * LN_2).exp())
        })
        .collect()
}

/// `Σ_M 2^-N C(N,(N+M)/2) ‖[Sz,[Sz, ρ_M]]‖₁` with `ρ_M` the normalized
/// projection of the all-up state on `Sx = M`, computed with the catness
/// routine. Note the missing ½ relative to catness.
pub fn reference_ideal(n: usize) -> Result<f64> {
    reference_ideal_with_limit(n, DEFAULT_IDEAL_LIMIT)
}

pub fn reference_ideal_with_limit(n: usize, limit: usize) -> Result<f64> {
    if n > limit.min(MAX_PARTICLES) {
        return Err(Error::Config(format!(
            "reference_ideal for N = {n} exceeds the limit {limit}"
        )));
    }
    let basis = build_block_basis(n)?;
    let mut total = 0.0;
    for (m, weight) in zero_temperature_weights(n) {
        // P(M)|up⟩ normalized is |Sx = M⟩; building it directly avoids the
        // 2^-N outcome guard of the projection routine at large N.
        let post = dicke_state(&basis, m)?;
        total += weight * 2.0 * catness(&post).value;
    }
    Ok(total)
}

/// `Σ_M 2^-N C(N,(N+M)/2) (N² − M² + 2N)`, which equals `N² + N`.
pub fn reference_closed_form(n: usize) -> f64 {
    let nf = n as f64;
    zero_temperature_weights(n)
        .into_iter()
        .map(|(m, w)| w * (nf * nf - (m * m) as f64 + 2.0 * nf))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Ordinary least squares of `ln value` on `ln N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_scaling(points: &[ScalingPoint]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::Domain("a scaling fit needs at least two points".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.n > 0.0) || !(p.value > 0.0)) {
        return Err(Error::Domain(format!(
            "non-positive point (N = {}, value = {})",
            p.n, p.value
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all points share the same N".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ScalingFit {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    pub p: f64,
    pub dp_domega: f64,
    pub t_int: f64,
    pub total_time: f64,
    pub delta_omega: f64,
}

/// `δω = √(P(1−P)) / |dP/dω| · 1/√(T/t_int)`.
pub fn ramsey_uncertainty(
    p: f64,
    dp_domega: f64,
    t_int: f64,
    total_time: f64,
) -> Result<SensitivityEstimate> {
    if p == 0.0 || p == 1.0 {
        return Err(Error::DegenerateProbability(p));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    if dp_domega == 0.0 || !dp_domega.is_finite() {
        return Err(Error::Domain("dP/dω must be finite and non-zero".into()));
    }
    if !(t_int > 0.0) || !(total_time >= t_int) {
        return Err(Error::Domain(format!(
            "need 0 < t_int <= T, got t_int = {t_int}, T = {total_time}"
        )));
    }
    let delta_omega = (p * (1.0 - p)).sqrt() / dp_domega.abs() / (total_time / t_int).sqrt();
    Ok(SensitivityEstimate {
        p,
        dp_domega,
        t_int,
        total_time,
        delta_omega,
    })
}

/// `|dP/dω|` as `ω → 0`: `t_int · |Tr(η[Sz,ρ])|`.
pub fn derivative_small_omega(state: &EnsembleState, projector: &ProjectorSpec, t_int: f64) -> f64 {
    t_int * q_prime(state, projector)
}

/// Admissibility check re-exported for callers that take `M` from user input.
pub fn check_sx_value(n: usize, m: i64) -> Result<()> {
    check_admissible(n, m)
}
