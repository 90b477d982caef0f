//! Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any line fails.
//!
//! Set `CATNESS_ACCEPTANCE_N127=1` to add N = 127 to the scaling run and
//! `CATNESS_ACCEPTANCE_ONLY=1,4,10` to run a subset of criteria.

mod common;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use catness_core::analytics::{
    fit_scaling, fixed_point_magnitude, kraus_profile, pk_distribution, predict_convergence,
    reference_closed_form, reference_ideal_with_limit, ScalingPoint,
};
use catness_core::linalg::{self, CMat, ONE};
use catness_core::measurement::build_kraus;
use catness_core::oracle;
use catness_core::spin_blocks::{build_block_basis, dicke_state, dicke_variance};
use catness_core::trajectory::{Simulation, TrajectoryRecord};
use catness_core::{double_commutator, thermal_state, InitialConvention, Outcome, TrajectoryConfig};
use num_complex::Complex64;

struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), pass, detail));
    }
}

const SEED: u64 = 20240917;

fn criterion_1(r: &mut Report) {
    let t = Instant::now();
    let dev = common::compare_with_dense(&[2, 3, 4, 5, 6, 7, 8], 50, 20, SEED);
    let elapsed = t.elapsed().as_secs_f64();
    r.check(
        "1",
        dev.state <= 1e-10 && dev.probability <= 1e-12 && dev.catness <= 1e-10 && elapsed < 120.0,
        format!(
            "oracle equivalence over {} steps: Frobenius state distance {:.2e} (<=1e-10), probability {:.2e} (<=1e-12), catness {:.2e} (<=1e-10), {elapsed:.1}s (<120s)",
            dev.steps, dev.state, dev.probability, dev.catness
        ),
    );
}

/// `cos(gt·Sx)` in the `Sz` basis of spin `j`, from matrix exponentials of the
/// ladder-built `Sx`.
fn cos_sx_z(twice_j: usize, gt: f64) -> CMat {
    let dim = twice_j + 1;
    let j = twice_j as f64 / 2.0;
    let mut sx = CMat::zeros(dim, dim);
    for i in 0..dim - 1 {
        let m = -j + i as f64;
        let v = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        sx[(i + 1, i)] = v;
        sx[(i, i + 1)] = v;
    }
    let a = sx * Complex64::new(0.0, gt);
    let plus = a.exp();
    // i·gt·Sx has a real symmetric Sx, so exp(-i·gt·Sx) is the conjugate.
    let minus = plus.map(|z| z.conj());
    (plus + minus) * Complex64::new(0.5, 0.0)
}

fn criterion_2(r: &mut Report) {
    let t = Instant::now();
    let (mut completeness, mut product) = (0.0_f64, 0.0_f64);
    // Sector data depends only on (2j, gt). Each distinct sector is checked in
    // full once; later occurrences must match it bit for bit.
    let mut verified: HashMap<(usize, u64), (Vec<u64>, Vec<u64>)> = HashMap::new();
    let mut reused = 0usize;
    for n in 1..=127usize {
        let basis = build_block_basis(n).unwrap();
        for gt in [0.2, 0.222, 1.0] {
            let kraus = build_kraus(&basis, gt);
            for (i, s) in basis.sectors().iter().enumerate() {
                let key = (s.twice_j, gt.to_bits());
                let bits = (
                    s.rotation_zx.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    kraus.entries(i, Outcome::Plus)
                        .iter()
                        .chain(kraus.entries(i, Outcome::Minus))
                        .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
                        .collect::<Vec<_>>(),
                );
                if verified.get(&key) == Some(&bits) {
                    reused += 1;
                    continue;
                }
                let u = linalg::to_complex(&s.rotation_zx);
                let to_z = |w: &[Complex64]| {
                    let d = CMat::from_fn(w.len(), w.len(), |a, b| if a == b { w[a] } else { Complex64::new(0.0, 0.0) });
                    &u * d * u.adjoint()
                };
                let wp = to_z(kraus.entries(i, Outcome::Plus));
                let wm = to_z(kraus.entries(i, Outcome::Minus));
                let id = CMat::identity(s.dim(), s.dim());
                completeness =
                    completeness.max(linalg::max_abs(&(wp.adjoint() * &wp + wm.adjoint() * &wm - id)));
                let prod = &wp * &wm;
                let target = cos_sx_z(s.twice_j, gt) * Complex64::new(0.5, 0.0);
                let (pa, pb) = (0..s.dim())
                    .map(|a| (prod[(a, a)], target[(a, a)]))
                    .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
                    .unwrap();
                let phase = if pb.norm() > 1e-3 { pa / pb } else { ONE };
                let phase = phase / phase.norm();
                product = product.max(linalg::max_abs(&(prod - target * phase)));
                verified.insert(key, bits);
            }
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    r.check(
        "2",
        completeness <= 1e-12 && product <= 1e-12,
        format!(
            "operator identities for N <= 127, gt in {{0.2, 0.222, 1.0}}: completeness {completeness:.2e}, W+W- vs cos(gt Sx)/2 {product:.2e} (<=1e-12), {} sectors checked, {reused} bit-identical repeats, {elapsed:.1}s",
            verified.len()
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let t = Instant::now();
    let p4 = pk_distribution(4, 400, 0.2).unwrap();
    let a4 = p4.argmax(1e-12);
    r.check("3a", a4 == vec![200], format!("N=4, gt=0.2, m=400: argmax {a4:?} (want unique 200)"));

    let p3 = pk_distribution(3, 400, 0.2).unwrap();
    let a3 = p3.argmax(1e-12);
    let twin = a3.len() == 2
        && a3[0] + a3[1] == 400
        && p3.probabilities[a3[0]] == p3.probabilities[a3[1]]
        && (a3[0] + 1..a3[1]).all(|k| p3.probabilities[k] < p3.probabilities[a3[0]]);
    r.check(
        "3b",
        twin,
        format!("N=3, gt=0.2, m=400: argmax {a3:?} (want two equal maxima flanking 200)"),
    );

    let mut ok = true;
    let mut detail = String::from("gt=1.0, m=100:");
    for n in [3usize, 4] {
        let p = pk_distribution(n, 100, 1.0).unwrap();
        let (p0, pm, ph) = (p.probabilities[0], p.probabilities[100], p.probabilities[50]);
        ok &= p0 == pm && p0 > ph;
        detail += &format!(" N={n} p(0)={p0:.4e} p(100)={pm:.4e} p(50)={ph:.4e};");
    }
    r.check("3c", ok, format!("{detail} (want p(0)=p(m) > p(m/2))"));

    let cfg = TrajectoryConfig {
        n: 3,
        beta: 0.0,
        omega_p: 0.0,
        gt: 0.2,
        m: 50,
        checkpoints: vec![],
        master_seed: SEED,
        initial: InitialConvention::AllUp,
    };
    let sim = Simulation::new(cfg).unwrap();
    let (_, records) = sim.run_ensemble(200_000, false).unwrap();
    let mut counts = vec![0u64; 51];
    for rec in &records {
        counts[rec.k as usize] += 1;
    }
    let tv = pk_distribution(3, 50, 0.2).unwrap().total_variation(&counts);
    let elapsed = t.elapsed().as_secs_f64();
    r.check(
        "3d",
        tv < 0.01 && elapsed < 600.0,
        format!("N=3, gt=0.2, m=50, R=200000 all-up: total variation {tv:.4} (<0.01), {elapsed:.1}s"),
    );
}

fn convergence_config() -> TrajectoryConfig {
    TrajectoryConfig {
        n: 4,
        beta: 0.0,
        omega_p: 0.0,
        gt: 0.2,
        m: 3000,
        checkpoints: vec![3000],
        master_seed: SEED,
        initial: InitialConvention::AllUp,
    }
}

fn fingerprint(records: &[TrajectoryRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for rec in records {
        out.extend(rec.trajectory_index.to_le_bytes());
        out.extend(rec.outcomes.iter().map(|&o| o as u8));
        for (c, v) in &rec.catness_at {
            out.extend(c.to_le_bytes());
            out.extend(v.to_bits().to_le_bytes());
        }
        if let Some(st) = &rec.final_state {
            for b in st.blocks() {
                for z in b.iter() {
                    out.extend(z.re.to_bits().to_le_bytes());
                    out.extend(z.im.to_bits().to_le_bytes());
                }
            }
        }
    }
    out
}

fn criterion_4(r: &mut Report) -> Vec<u8> {
    let t = Instant::now();
    let sim = Simulation::new(convergence_config()).unwrap();
    let (_, records) = sim.run_ensemble(100, true).unwrap();
    let (mut considered, mut good, mut degenerate) = (0, 0, 0);
    let mut worst = 1.0_f64;
    for rec in &records {
        let pred = predict_convergence(4, 3000, rec.k, 0.2).unwrap();
        match pred.l() {
            Some(l) => {
                let f = rec.final_state.as_ref().unwrap().dicke_population(l);
                considered += 1;
                worst = worst.min(f);
                if f >= 0.99 {
                    good += 1;
                }
            }
            None => degenerate += 1,
        }
    }
    let frac = good as f64 / considered.max(1) as f64;
    let elapsed = t.elapsed().as_secs_f64();
    r.check(
        "4",
        considered > 0 && frac >= 0.95 && elapsed < 300.0,
        format!(
            "N=4, gt=0.2, m=3000, 100 all-up runs: fidelity >= 0.99 in {good}/{considered} non-degenerate runs ({:.1}%, want >= 95%), {degenerate} degenerate, worst {worst:.6}, {elapsed:.1}s",
            100.0 * frac
        ),
    );
    fingerprint(&records)
}

fn criterion_5(r: &mut Report) {
    let t = Instant::now();
    let omega = 0.5;
    let (mut dense_dev, mut block_dev) = (0.0_f64, 0.0_f64);
    for n in 1..=8usize {
        let basis = build_block_basis(n).unwrap();
        for beta in [0.1, 1.0, 10.0] {
            let dense = oracle::dense_thermal(n, beta, omega).unwrap();
            let block = thermal_state(&basis, beta, omega).unwrap();
            for m in (-(n as i64)..=n as i64).step_by(2) {
                let nf = n as f64;
                let expected = (nf * nf - (m * m) as f64) * (beta * omega).tanh().powi(2) + 2.0 * nf;
                let (post, _) = oracle::dense_projection(&dense, m).unwrap();
                let p = oracle::dense_sx_projector(n, m).unwrap();
                let got = linalg::trace(&(p * oracle::dense_double_commutator(&post))).re;
                dense_dev = dense_dev.max((got - expected).abs());

                let (bpost, _) = catness_core::projection_postselect(&block, m).unwrap();
                let d = double_commutator(&bpost);
                let got_block: f64 = basis
                    .sectors()
                    .iter()
                    .zip(&d)
                    .filter_map(|(s, d)| s.index_of(m).map(|i| s.weight * d[(i, i)].re))
                    .sum();
                block_dev = block_dev.max((got_block - expected).abs());
            }
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    r.check(
        "5",
        dense_dev <= 1e-10 && block_dev <= 1e-10 && elapsed < 60.0,
        format!(
            "projection formula, N <= 8, beta in {{0.1, 1, 10}}: dense {dense_dev:.2e}, blockwise {block_dev:.2e} (<=1e-10), {elapsed:.1}s"
        ),
    );
}

fn criterion_6(r: &mut Report) {
    let mut dev = 0.0_f64;
    for n in 1..=127usize {
        let basis = build_block_basis(n).unwrap();
        let j = n as f64 / 2.0;
        for xi in (-(n as i64)..=n as i64).step_by(2) {
            let formula = dicke_variance(n, xi);
            let st = dicke_state(&basis, xi).unwrap();
            let engine = st.expectation_sz2() - st.expectation_sz().powi(2);
            // ⟨Sx=ξ|Sz²|Sx=ξ⟩ = ⟨Sz=ξ|Sx²|Sz=ξ⟩; apply the ladder-built Sx twice.
            let mm = xi as f64 / 2.0;
            let up = if mm < j { (j * (j + 1.0) - mm * (mm + 1.0)).sqrt() } else { 0.0 };
            let down = if mm > -j { (j * (j + 1.0) - mm * (mm - 1.0)).sqrt() } else { 0.0 };
            let matrix = up * up + down * down;
            dev = dev.max((engine - formula).abs()).max((matrix - formula).abs());
        }
    }
    r.check("6", dev <= 1e-8, format!("Dicke variance for N <= 127: max deviation {dev:.2e} (<=1e-8)"));
}

fn criterion_7(r: &mut Report) {
    let mut dev = 0.0_f64;
    let mut points = 0;
    for m in 1..=200u64 {
        for k in 0..=m {
            let x = common::golden_max(|x| kraus_profile(m, k, x), -PI / 2.0, PI / 2.0);
            dev = dev.max((kraus_profile(m, k, x) - fixed_point_magnitude(m, k)).abs());
            points += 1;
        }
    }
    r.check(
        "7",
        dev <= 1e-9,
        format!("fixed-point magnitude over {points} (m <= 200, k) pairs: max deviation {dev:.2e} (<=1e-9)"),
    );
}

fn criterion_8(r: &mut Report) {
    let t = Instant::now();
    let mut ns = vec![3usize, 5, 7, 15, 31, 63];
    if std::env::var("CATNESS_ACCEPTANCE_N127").is_ok_and(|v| v == "1") {
        ns.push(127);
    }
    let checkpoints = vec![10u64, 50, 100, 600, 1000];
    let mut per_n = Vec::new();
    for &n in &ns {
        let cfg = TrajectoryConfig {
            n,
            checkpoints: checkpoints.clone(),
            master_seed: SEED,
            ..TrajectoryConfig::default()
        };
        let (avg, _) = Simulation::new(cfg).unwrap().run_ensemble(300, false).unwrap();
        let ideal_half = 0.5 * reference_ideal_with_limit(n, 200).unwrap();
        per_n.push((n, avg, ideal_half));
    }
    let slopes: Vec<f64> = checkpoints
        .iter()
        .map(|&c| {
            let pts: Vec<ScalingPoint> = per_n
                .iter()
                .map(|(n, avg, _)| {
                    let s = avg.at(c).unwrap();
                    ScalingPoint { n: *n as f64, value: s.mean, stderr: s.stderr }
                })
                .collect();
            fit_scaling(&pts).unwrap().slope
        })
        .collect();
    let elapsed = t.elapsed().as_secs_f64();
    let last = *slopes.last().unwrap();
    r.check(
        "8a",
        (last - 1.94).abs() <= 0.10,
        format!("N in {ns:?}, R=300: slope at m=1000 {last:.4} (want 1.94 +- 0.10), {elapsed:.1}s"),
    );
    let increasing = slopes.windows(2).all(|w| w[1] > w[0]);
    r.check(
        "8b",
        increasing,
        format!(
            "slopes at m = {checkpoints:?}: [{}] (want strictly increasing)",
            slopes.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>().join(", ")
        ),
    );
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (_, avg, ideal_half) in &per_n {
        for s in &avg.stats {
            let excess = (s.mean - ideal_half) / s.stderr.max(f64::MIN_POSITIVE);
            worst = worst.max(excess);
            ok &= s.mean <= ideal_half + 2.0 * s.stderr;
        }
    }
    r.check(
        "8c",
        ok,
        format!(
            "mean catness vs ½-normalized ideal-projection reference: largest excess {worst:.2} stderr (want <= 2), references [{}]",
            per_n.iter().map(|(n, _, i)| format!("N={n}: {i:.4}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let full_ns = [3usize, 5, 7, 15, 31, 63, 127];
    let closed: Vec<ScalingPoint> = full_ns
        .iter()
        .map(|&n| ScalingPoint { n: n as f64, value: reference_closed_form(n), stderr: 0.0 })
        .collect();
    let ideal: Vec<ScalingPoint> = full_ns
        .iter()
        .map(|&n| ScalingPoint { n: n as f64, value: reference_ideal_with_limit(n, 200).unwrap(), stderr: 0.0 })
        .collect();
    let closed_slope = fit_scaling(&closed).unwrap().slope;
    let ideal_slope = fit_scaling(&ideal).unwrap().slope;
    r.check(
        "8d",
        (closed_slope - 1.95).abs() <= 0.01,
        format!(
            "reference fits over N = {full_ns:?}: closed form slope {closed_slope:.4} (want 1.95 +- 0.01); ideal-projection slope {ideal_slope:.4}"
        ),
    );
}

fn criterion_9(r: &mut Report) {
    let t = Instant::now();
    let cfg = TrajectoryConfig {
        n: 15,
        checkpoints: vec![600, 1000],
        master_seed: SEED,
        ..TrajectoryConfig::default()
    };
    let (avg, _) = Simulation::new(cfg).unwrap().run_ensemble(3000, false).unwrap();
    let (a, b) = (avg.at(600).unwrap().mean, avg.at(1000).unwrap().mean);
    let rel = (b - a).abs() / a;
    let elapsed = t.elapsed().as_secs_f64();
    r.check(
        "9",
        rel < 0.05 && elapsed < 1800.0,
        format!("N=15, R=3000: mean catness {a:.4} at m=600, {b:.4} at m=1000, relative change {rel:.4} (<0.05), {elapsed:.1}s"),
    );
}

fn criterion_10(r: &mut Report, reference: &[u8]) {
    let sim = Simulation::new(convergence_config()).unwrap();
    let mut same = true;
    let mut counts = Vec::new();
    for threads in [1usize, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let (_, records) = pool.install(|| sim.run_ensemble(100, true)).unwrap();
        same &= fingerprint(&records) == reference;
        counts.push(threads);
    }
    r.check(
        "10",
        same,
        format!(
            "rerun of criterion 4 with {counts:?} worker threads: {} bytes, byte-identical = {same}",
            reference.len()
        ),
    );
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("CATNESS_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));
    let mut r = Report { lines: Vec::new() };
    if wanted(1) {
        criterion_1(&mut r);
    }
    if wanted(2) {
        criterion_2(&mut r);
    }
    if wanted(3) {
        criterion_3(&mut r);
    }
    if wanted(4) || wanted(10) {
        let fp = criterion_4(&mut r);
        if wanted(10) {
            criterion_10(&mut r, &fp);
        }
    }
    if wanted(5) {
        criterion_5(&mut r);
    }
    if wanted(6) {
        criterion_6(&mut r);
    }
    if wanted(7) {
        criterion_7(&mut r);
    }
    if wanted(8) {
        criterion_8(&mut r);
    }
    if wanted(9) {
        criterion_9(&mut r);
    }
    let failed: Vec<&str> = r.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        r.lines.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
