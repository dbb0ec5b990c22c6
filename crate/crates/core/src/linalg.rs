//! Dense complex matrix helpers shared by every module.
//!
//! Matrices are small (dimension at most a few dozen), so everything is dense
//! and backed by `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Largest absolute entry. All tolerance checks in the crate use this norm.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max |m - m†|`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |m†m - I|`.
pub fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    max_abs_diff(&(m.adjoint() * m), &identity(n))
}

pub fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn ensure_square(m: &ComplexMatrix, dim: usize) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.ncols() });
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order together with the matching eigenvector columns.
pub fn eigh(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(h.nrows(), h.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(h: &ComplexMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `exp(-i tau h)` for Hermitian `h`, through its eigen-decomposition. The
/// result is unitary up to rounding regardless of `tau`.
pub fn unitary_exp(h: &ComplexMatrix, tau: f64) -> ComplexMatrix {
    let n = h.nrows();
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut v = eig.eigenvectors;
    orthonormalize_columns(&mut v);
    let mut scaled = v.clone();
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -e * tau);
        for i in 0..n {
            scaled[(i, k)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Two passes of modified Gram-Schmidt. Eigenvector bases from the QR
/// iteration drift from orthonormality by a few ulps; over millions of
/// propagation steps that drift accumulates linearly unless removed.
pub fn orthonormalize_columns(v: &mut ComplexMatrix) {
    let n = v.ncols();
    for _ in 0..2 {
        for k in 0..n {
            for j in 0..k {
                let proj = v.column(j).dotc(&v.column(k));
                let cj = v.column(j).clone_owned();
                let mut ck = v.column_mut(k);
                ck -= cj * proj;
            }
            let norm = v.column(k).norm();
            v.column_mut(k).unscale_mut(norm);
        }
    }
}
