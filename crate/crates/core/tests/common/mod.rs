#![allow(dead_code)]

use catness_core::oracle::{self, DenseState, OracleDeviation};

pub fn compare_with_dense(ns: &[usize], scripts: usize, steps: usize, seed: u64) -> OracleDeviation {
    oracle::compare_with_dense(ns, scripts, steps, seed).unwrap()
}

/// Same state built through the dense oracle.
pub fn dense_thermal(n: usize, beta: f64, omega: f64) -> DenseState {
    oracle::dense_thermal(n, beta, omega).unwrap()
}

/// Maximizes a concave function on `[lo, hi]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}
