//! Small dense linear-algebra helpers shared by the block engine and the
//! dense oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// True when every entry has an exactly zero imaginary part.
pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Entries below this fraction of the largest one are dropped before an
/// eigensolve; subnormal inputs otherwise make the QR sweeps return NaN.
pub const FLUSH_RELATIVE: f64 = 1e-30;

/// `m / max|m|` with negligible entries flushed to zero, and the scale.
fn conditioned(m: &CMat) -> (CMat, f64) {
    let scale = max_abs(m);
    if scale == 0.0 || !scale.is_finite() {
        return (m.clone(), 1.0);
    }
    // Divide rather than multiply: 1/scale overflows when scale is subnormal.
    let out = m.map(|z| {
        let w = z / scale;
        Complex64::new(
            if w.re.abs() < FLUSH_RELATIVE { 0.0 } else { w.re },
            if w.im.abs() < FLUSH_RELATIVE { 0.0 } else { w.im },
        )
    });
    (out, scale)
}

/// Eigenvalues of a Hermitian matrix. Real symmetric input takes the real
/// solver, which is several times faster.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (m, scale) = conditioned(m);
    let vals: Vec<f64> = if is_real(&m) {
        m.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    };
    vals.into_iter().map(|v| v * scale).collect()
}

/// Eigenvalues and column eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    if m.nrows() == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let (m, scale) = conditioned(m);
    let (vals, vecs) = if is_real(&m) {
        let eig = SymmetricEigen::new(m.map(|z| z.re));
        (eig.eigenvalues, to_complex(&eig.eigenvectors))
    } else {
        let eig = SymmetricEigen::new(m);
        (eig.eigenvalues, eig.eigenvectors)
    };
    (vals.iter().map(|v| v * scale).collect(), vecs)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    if m.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

/// Largest entry of `|M - M†|`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Projector onto the span of the selected columns of a unitary.
pub fn column_projector(vectors: &CMat, columns: &[usize]) -> CMat {
    let n = vectors.nrows();
    let mut p = CMat::zeros(n, n);
    for &c in columns {
        let v = vectors.column(c);
        p += v * v.adjoint();
    }
    p
}

/// Symmetric tridiagonal matrix with zero diagonal, stored by its
/// super-diagonal. Collective z operators take this form in the x eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDiagTridiagonal {
    pub off: Vec<f64>,
}

impl ZeroDiagTridiagonal {
    pub fn dim(&self) -> usize {
        self.off.len() + 1
    }

    /// `T · X`
    pub fn mul_left(&self, x: &CMat) -> CMat {
        let n = self.dim();
        debug_assert_eq!(x.nrows(), n);
        let mut out = CMat::zeros(n, x.ncols());
        for c in 0..x.ncols() {
            for r in 0..n {
                let mut acc = ZERO;
                if r > 0 {
                    acc += x[(r - 1, c)] * self.off[r - 1];
                }
                if r + 1 < n {
                    acc += x[(r + 1, c)] * self.off[r];
                }
                out[(r, c)] = acc;
            }
        }
        out
    }

    /// `X · T`
    pub fn mul_right(&self, x: &CMat) -> CMat {
        let n = self.dim();
        debug_assert_eq!(x.ncols(), n);
        let mut out = CMat::zeros(x.nrows(), n);
        for c in 0..n {
            for r in 0..x.nrows() {
                let mut acc = ZERO;
                if c > 0 {
                    acc += x[(r, c - 1)] * self.off[c - 1];
                }
                if c + 1 < n {
                    acc += x[(r, c + 1)] * self.off[c];
                }
                out[(r, c)] = acc;
            }
        }
        out
    }
}
