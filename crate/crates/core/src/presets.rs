//! Matrices and structures of the planar oscillator and the double
//! resonance, and the standard normal forms used throughout the tests.

use nalgebra::DMatrix;

use crate::revlin::ReversingStructure;

/// `[[0, 1], [-1, 0]]`.
pub fn j2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// `diag(1, -1)`.
pub fn r2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// `(x1, x2, z1, z2) -> (-x1, -x2, -z1, z2)` restricted to z.
pub fn planar_structure() -> ReversingStructure {
    ReversingStructure::diagonal(&[-1.0, 1.0]).expect("valid involution")
}

/// `[[0, 1], [a, b]]` with `a = d1 hbar(0)`, `b = d2 hbar(0)`.
pub fn planar_omega(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, a, b])
}

/// `R = diag(1, -1, -1, 1)`.
pub fn double_resonance_structure() -> ReversingStructure {
    ReversingStructure::diagonal(&[1.0, -1.0, -1.0, 1.0]).expect("valid involution")
}

/// Floquet matrix of the 2:1 resonant family before lifting.
pub fn double_resonance_omega(mu1: f64, mu2: f64) -> DMatrix<f64> {
    let w = 1.0 + mu1;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        0.0, -w,  1.0, 0.0,
        w,   0.0, 0.0, 1.0,
        -mu2, 0.0, 0.0, -w,
        0.0, -mu2, w,  0.0,
    ]);
    m
}

/// Lifted Floquet matrix `Omega(mu) - blockdiag(Jhat, Jhat)`.
pub fn double_resonance_lifted(mu1: f64, mu2: f64) -> DMatrix<f64> {
    let mut m = double_resonance_omega(mu1, mu2);
    for b in 0..2 {
        m[(2 * b, 2 * b + 1)] += 1.0;
        m[(2 * b + 1, 2 * b)] -= 1.0;
    }
    m
}

/// `blockdiag(R2, ..., R2)`.
pub fn block_r2(p: usize) -> ReversingStructure {
    let signs: alloc::vec::Vec<f64> = (0..2 * p).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    ReversingStructure::diagonal(&signs).expect("valid involution")
}

/// p-fold 1:1 resonance: `J2` on the block diagonal, `J2` on the block
/// superdiagonal.
pub fn p_fold_resonance(p: usize) -> DMatrix<f64> {
    let j = j2();
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    for b in 0..p {
        m.view_mut((2 * b, 2 * b), (2, 2)).copy_from(&j);
        if b + 1 < p {
            m.view_mut((2 * b, 2 * b + 2), (2, 2)).copy_from(&j);
        }
    }
    m
}

/// Upper Jordan block of size `2p` with eigenvalue 0.
pub fn nilpotent_block(p: usize) -> DMatrix<f64> {
    let n = 2 * p;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        m[(i, i + 1)] = 1.0;
    }
    m
}

/// Involution for [`nilpotent_block`]: `ker N = span(e1)` lies in Fix(R)
/// when `fix_sign > 0` and in Fix(-R) otherwise.
pub fn nilpotent_structure(p: usize, fix_sign: f64) -> ReversingStructure {
    let s = if fix_sign >= 0.0 { 1.0 } else { -1.0 };
    let signs: alloc::vec::Vec<f64> = (0..2 * p).map(|i| if i % 2 == 0 { s } else { -s }).collect();
    ReversingStructure::diagonal(&signs).expect("valid involution")
}
