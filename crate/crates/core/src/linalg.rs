//! Dense helpers shared by the structured routines: SVD-based rank and null
//! spaces, least squares, Kronecker products and complex conversions.

use alloc::vec::Vec;
use nalgebra::linalg::{Schur, SVD};
use nalgebra::{ComplexField, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Numerical thresholds. All rank decisions are relative to the largest
/// singular value of the matrix being tested.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Relative singular-value threshold for rank and null-space decisions.
    pub rank_tol: f64,
    /// Relative distance under which eigenvalues are always clustered.
    pub cluster_tol: f64,
    /// Relative defect accepted by membership tests in gl+ / gl-.
    pub membership_tol: f64,
    /// A singular value ratio within `[rank_tol / w, rank_tol * w]` is ambiguous.
    pub ambiguity_window: f64,
    /// Largest relative eigenvalue distance considered for cluster merging.
    pub merge_cap: f64,
    /// Largest admissible condition number of a generalized eigenbasis.
    pub cond_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: 1e-9,
            cluster_tol: 1e-7,
            membership_tol: 1e-10,
            ambiguity_window: 1e2,
            merge_cap: 1e-2,
            cond_max: 1e8,
        }
    }
}

/// Outcome of an SVD rank decision.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    /// Some singular value ratio lies inside the ambiguity window.
    pub ambiguous: bool,
    /// Smallest ratio kept in the rank / largest ratio dropped.
    pub gap: (f64, f64),
}

/// SVD with a capped iteration count, relaxing the convergence threshold if
/// the sweep stalls.
pub(crate) fn svd<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, u: bool, v: bool) -> SVD<T, Dyn, Dyn> {
    let max_iter = 200 * m.nrows().max(m.ncols()) + 1000;
    for eps in [f64::EPSILON, 8.0 * f64::EPSILON, 1e-13] {
        if let Some(s) = SVD::try_new(m.clone(), u, v, eps, max_iter) {
            return s;
        }
    }
    SVD::new(m.clone(), u, v)
}

fn sorted_singular_values<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = svd(m, false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn rank_info<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: &Tolerances) -> RankInfo {
    let s = sorted_singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return RankInfo {
            rank: 0,
            singular_values: s,
            ambiguous: false,
            gap: (f64::INFINITY, 0.0),
        };
    }
    let thr = tol.rank_tol * smax;
    let rank = s.iter().filter(|&&v| v > thr).count();
    let lo = tol.rank_tol / tol.ambiguity_window;
    let hi = tol.rank_tol * tol.ambiguity_window;
    let ambiguous = s.iter().any(|&v| {
        let r = v / smax;
        r > lo && r < hi
    });
    let kept = if rank > 0 { s[rank - 1] / smax } else { f64::INFINITY };
    let dropped = if rank < s.len() { s[rank] / smax } else { 0.0 };
    RankInfo {
        rank,
        singular_values: s,
        ambiguous,
        gap: (kept, dropped),
    }
}

pub fn rank<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: &Tolerances) -> usize {
    rank_info(m, tol).rank
}

/// Like [`rank`], but refuses to decide inside the ambiguity window.
pub fn rank_checked<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    tol: &Tolerances,
) -> Result<usize> {
    let info = rank_info(m, tol);
    if info.ambiguous {
        let smax = info.singular_values[0];
        let lo = tol.rank_tol / tol.ambiguity_window;
        let hi = tol.rank_tol * tol.ambiguity_window;
        let ratio = info
            .singular_values
            .iter()
            .map(|v| v / smax)
            .find(|r| *r > lo && *r < hi)
            .unwrap_or(0.0);
        return Err(Error::RankAmbiguous {
            ratio,
            tol: tol.rank_tol,
        });
    }
    Ok(info.rank)
}

/// Pads with zero rows so that the thin SVD yields a full right basis.
fn padded<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        let mut p = DMatrix::<T>::zeros(m.ncols(), m.ncols());
        p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        p
    }
}

/// Orthonormal basis of the null space, together with its rank decision.
pub fn null_space_info<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    tol: &Tolerances,
) -> (DMatrix<T>, RankInfo) {
    let ncols = m.ncols();
    let info = rank_info(m, tol);
    if ncols == 0 {
        return (DMatrix::zeros(0, 0), info);
    }
    if info.rank == 0 {
        return (DMatrix::identity(ncols, ncols), info);
    }
    let svd = svd(&padded(m), false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    // nalgebra does not sort its singular values; select by magnitude.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
    let null_idx = &order[info.rank..];
    let mut basis = DMatrix::<T>::zeros(ncols, null_idx.len());
    for (j, &i) in null_idx.iter().enumerate() {
        for r in 0..ncols {
            basis[(r, j)] = vt[(i, r)].clone().conjugate();
        }
    }
    (basis, info)
}

pub fn null_space<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: &Tolerances) -> DMatrix<T> {
    null_space_info(m, tol).0
}

/// Orthonormal basis of the column space.
pub fn column_space(m: &DMatrix<f64>, tol: &Tolerances) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let r = rank(m, tol);
    if r == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = svd(m, true, false);
    let u = svd.u.expect("u requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
    let mut out = DMatrix::zeros(m.nrows(), r);
    for (j, &i) in order[..r].iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD,
/// truncating singular values below `rank_tol * s_max`.
pub fn lstsq<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    tol: &Tolerances,
) -> DMatrix<T> {
    if a.ncols() == 0 {
        return DMatrix::zeros(0, b.ncols());
    }
    if a.nrows() == 0 {
        return DMatrix::zeros(a.ncols(), b.ncols());
    }
    let smax = sorted_singular_values(a).first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return DMatrix::zeros(a.ncols(), b.ncols());
    }
    let svd = svd(a, true, true);
    svd.solve(b, tol.rank_tol * smax)
        .expect("u and v_t were requested")
}

pub fn lstsq_vec(a: &DMatrix<f64>, b: &DVector<f64>, tol: &Tolerances) -> DVector<f64> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = lstsq(a, &bm, tol);
    DVector::from_column_slice(x.as_slice())
}

pub fn kron<T: ComplexField>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Spectral norm.
pub fn norm2<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    sorted_singular_values(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite for singular or empty matrices.
pub fn cond<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    let s = sorted_singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn max_abs<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.clone().modulus()).fold(0.0, f64::max)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|v| v.re)
}

pub fn imag_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|v| v.im)
}

/// Column-stacking vectorisation.
pub fn vec_of<T: ComplexField>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec<T: ComplexField>(v: &DVector<T>, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Largest principal-angle sine between two column spans (0 when equal).
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &Tolerances) -> f64 {
    let qa = column_space(a, tol);
    let qb = column_space(b, tol);
    if qa.ncols() != qb.ncols() {
        return 1.0;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let proj = &qa - &qb * (qb.transpose() * &qa);
    norm2(&proj)
}

/// Complex eigenvalues of a real square matrix.
///
/// The unshifted-deflation Schur iteration can stall on exactly structured
/// inputs, so the QR sweep is capped and retried on orthogonally similar
/// copies.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let max_iter = 200 * n + 1000;
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    for attempt in 1..=8u32 {
        let v = DVector::from_fn(n, |i, _| libm::cos(0.7 * attempt as f64 * (i as f64 + 1.0)) + 0.1);
        let h = DMatrix::identity(n, n) - &v * v.transpose() * (2.0 / v.norm_squared());
        if let Some(s) = Schur::try_new(&h * m * &h, f64::EPSILON, max_iter) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Matches two multisets of complex numbers greedily and returns the largest
/// pairwise distance (infinite if the sizes differ).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = alloc::vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}
