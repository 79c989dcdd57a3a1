use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{Parity, ReversingStructure, StructuredMatrix};
use crate::error::{dim_err, Result};

pub fn gl_dim(p: usize) -> usize {
    2 * p * p
}

/// Coordinates of a canonical-frame matrix in the elementary basis of gl+/-:
/// gl+ lists the `(1,1)` then `(2,2)` block, gl- the `(1,2)` then `(2,1)`
/// block, each column-major.
pub(crate) fn coords_canonical(m: &DMatrix<f64>, p: usize, parity: Parity) -> DVector<f64> {
    let (a, b) = blocks(parity, p);
    let mut v = DVector::zeros(gl_dim(p));
    let mut idx = 0;
    for (r0, c0) in [a, b] {
        for c in 0..p {
            for r in 0..p {
                v[idx] = m[(r0 + r, c0 + c)];
                idx += 1;
            }
        }
    }
    v
}

pub(crate) fn from_coords_canonical(v: &DVector<f64>, p: usize, parity: Parity) -> DMatrix<f64> {
    let (a, b) = blocks(parity, p);
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    let mut idx = 0;
    for (r0, c0) in [a, b] {
        for c in 0..p {
            for r in 0..p {
                m[(r0 + r, c0 + c)] = v[idx];
                idx += 1;
            }
        }
    }
    m
}

fn blocks(parity: Parity, p: usize) -> ((usize, usize), (usize, usize)) {
    match parity {
        Parity::Plus => ((0, 0), (p, p)),
        Parity::Minus => ((0, p), (p, 0)),
    }
}

impl ReversingStructure {
    /// Coordinates of `m` (original frame) in gl+/- after projecting onto it.
    pub fn gl_coords(&self, m: &DMatrix<f64>, parity: Parity) -> DVector<f64> {
        coords_canonical(&self.to_canonical(m), self.p(), parity)
    }

    pub fn from_gl_coords(&self, v: &DVector<f64>, parity: Parity) -> DMatrix<f64> {
        self.from_canonical(&from_coords_canonical(v, self.p(), parity))
    }
}

/// Elementary basis of gl+/-, mapped back to the original frame.
pub fn gl_basis(structure: &ReversingStructure, parity: Parity) -> Vec<DMatrix<f64>> {
    let d = gl_dim(structure.p());
    (0..d)
        .map(|i| {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            structure.from_gl_coords(&e, parity)
        })
        .collect()
}

/// Matrix of `A -> Omega A - A Omega` from gl_{from} to gl_{from * parity(Omega)}
/// in the elementary coordinates.
pub fn adjoint_matrix(
    omega: &StructuredMatrix,
    from: Parity,
    structure: &ReversingStructure,
) -> Result<DMatrix<f64>> {
    if omega.dim() != structure.dim() {
        return Err(dim_err("Omega does not match dim_z"));
    }
    Ok(adjoint_canonical(&structure.to_canonical(&omega.entries), omega.parity, from, structure.p()))
}

pub(crate) fn adjoint_canonical(om: &DMatrix<f64>, om_parity: Parity, from: Parity, p: usize) -> DMatrix<f64> {
    let d = gl_dim(p);
    let to = from.times(om_parity);
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        let a = from_coords_canonical(&e, p, from);
        let img = om * &a - &a * om;
        out.set_column(i, &coords_canonical(&img, p, to));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, Tolerances};
    use crate::presets;
    use crate::revlin::check_membership;

    #[test]
    fn basis_sizes_and_membership() {
        let tol = Tolerances::default();
        for p in 1..=3 {
            let s = presets::block_r2(p);
            for parity in [Parity::Plus, Parity::Minus] {
                let b = gl_basis(&s, parity);
                assert_eq!(b.len(), 2 * p * p);
                for m in &b {
                    assert!(check_membership(m, &s, parity, &tol).unwrap().member);
                }
                let stacked = DMatrix::from_fn(4 * p * p, b.len(), |r, c| b[c].as_slice()[r]);
                assert_eq!(linalg::rank(&stacked, &tol), 2 * p * p);
            }
        }
    }

    #[test]
    fn zero_matrix_gives_zero_map() {
        let s = presets::block_r2(2);
        let z = StructuredMatrix::new_unchecked(DMatrix::zeros(4, 4), Parity::Minus);
        for parity in [Parity::Plus, Parity::Minus] {
            assert_eq!(linalg::max_abs(&adjoint_matrix(&z, parity, &s).unwrap()), 0.0);
        }
    }

    #[test]
    fn adjoint_matches_direct_commutator() {
        let s = presets::double_resonance_structure();
        let om = StructuredMatrix::minus(presets::double_resonance_omega(0.3, -0.2), &s).unwrap();
        let ad = adjoint_matrix(&om, Parity::Plus, &s).unwrap();
        for (i, b) in gl_basis(&s, Parity::Plus).iter().enumerate() {
            let direct = &om.entries * b - b * &om.entries;
            let coords = s.gl_coords(&direct, Parity::Minus);
            assert!((coords - ad.column(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn generic_resonance_rank() {
        let tol = Tolerances::default();
        for p in 1..=3 {
            let s = presets::block_r2(p);
            let om = StructuredMatrix::minus(presets::p_fold_resonance(p), &s).unwrap();
            let ad = adjoint_matrix(&om, Parity::Plus, &s).unwrap();
            assert_eq!(linalg::rank(&ad, &tol), 2 * p * p - p);
        }
    }
}
