mod common;

use catness_core::linalg;
use catness_core::oracle;
use catness_core::linalg::CMat;
use catness_core::{
    all_up_state, build_block_basis, catness, pk_distribution, projection_postselect, thermal_state,
};

#[test]
fn short_scripts_agree_with_dense_evolution() {
    let dev = common::compare_with_dense(&[1, 2, 3, 4, 5], 6, 12, 99);
    assert!(dev.state <= 1e-10, "{dev:?}");
    assert!(dev.probability <= 1e-12, "{dev:?}");
    assert!(dev.catness <= 1e-10, "{dev:?}");
}

#[test]
fn thermal_states_embed_exactly() {
    for n in 1..=6 {
        for beta in [0.0, 0.1, 1.0, 10.0] {
            let b = build_block_basis(n).unwrap();
            let st = thermal_state(&b, beta, 0.5).unwrap();
            let dense = common::dense_thermal(n, beta, 0.5);
            assert!(oracle::embedding_distance(&st, &dense).unwrap() < 1e-12);
            assert!((catness(&st).value - oracle::dense_catness(&dense)).abs() < 1e-10);
        }
    }
}

#[test]
fn projections_agree_with_dense() {
    for n in 1..=6 {
        let b = build_block_basis(n).unwrap();
        for beta in [0.1, 1.0, 10.0] {
            let st = thermal_state(&b, beta, 0.5).unwrap();
            let dense = common::dense_thermal(n, beta, 0.5);
            for m in (-(n as i64)..=n as i64).step_by(2) {
                let (post, p) = projection_postselect(&st, m).unwrap();
                let (dpost, dp) = oracle::dense_projection(&dense, m).unwrap();
                assert!((p - dp).abs() < 1e-12, "N={n} M={m}");
                assert!(oracle::embedding_distance(&post, &dpost).unwrap() < 1e-10);
                assert!((catness(&post).value - oracle::dense_catness(&dpost)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn all_up_matches_dense() {
    for n in 1..=6 {
        let b = build_block_basis(n).unwrap();
        let st = all_up_state(&b);
        let dense = oracle::dense_all_up(n).unwrap();
        assert!(oracle::embedding_distance(&st, &dense).unwrap() < 1e-12);
    }
}

#[test]
fn block_expectations_match_dense_operators() {
    let n = 5;
    let b = build_block_basis(n).unwrap();
    let st = thermal_state(&b, 0.7, 0.5).unwrap();
    let dense = common::dense_thermal(n, 0.7, 0.5);
    let sz = oracle::dense_sz(n).unwrap();
    let sx = oracle::dense_sx(n).unwrap();
    assert!((st.expectation_sz() - oracle::dense_expectation(&dense, &sz)).abs() < 1e-12);
    assert!((st.expectation_sz2() - oracle::dense_expectation(&dense, &(&sz * &sz))).abs() < 1e-11);
    assert!((st.expectation_sx2() - oracle::dense_expectation(&dense, &(&sx * &sx))).abs() < 1e-11);
    assert!(linalg::max_abs(&(&sz * &sx - &sx * &sz)) > 1.0);
}

/// Adds `Tr(ρ)` of every unnormalized branch into `pk[k]`, walking all 2^m sequences.
fn enumerate_branches(rho: &CMat, w: &(CMat, CMat), left: u64, k: usize, pk: &mut [f64]) {
    if left == 0 {
        pk[k] += linalg::trace(rho).re;
        return;
    }
    enumerate_branches(&(&w.0 * rho * w.0.adjoint()), w, left - 1, k + 1, pk);
    enumerate_branches(&(&w.1 * rho * w.1.adjoint()), w, left - 1, k, pk);
}

#[test]
fn outcome_count_distribution_matches_dense_enumeration() {
    for (n, m, gt) in [(3, 10, 1.0), (4, 8, 0.2), (2, 9, 0.7), (5, 6, 1.0)] {
        let w = oracle::dense_kraus(n, gt).unwrap();
        let mut exact = vec![0.0; m as usize + 1];
        enumerate_branches(&oracle::dense_all_up(n).unwrap().rho, &w, m, 0, &mut exact);
        let p = pk_distribution(n, m, gt).unwrap();
        for (k, (a, b)) in p.probabilities.iter().zip(&exact).enumerate() {
            assert!((a - b).abs() <= 1e-12, "N={n} m={m} gt={gt} k={k}: {a} vs {b}");
        }
    }
}
