use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::adjoint::{adjoint_canonical, from_coords_canonical, gl_dim};
use super::{jordan_chevalley, Parity, ReversingStructure, StructuredMatrix};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, Tolerances};
use crate::presets;

/// `Omega(mu) = base + sum_i mu_i * directions[i]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearUnfolding {
    pub base: StructuredMatrix,
    pub directions: Vec<StructuredMatrix>,
}

impl LinearUnfolding {
    pub fn codimension(&self) -> usize {
        self.directions.len()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eval(&self, mu: &[f64]) -> Result<DMatrix<f64>> {
        if mu.len() != self.directions.len() {
            return Err(dim_err("parameter count differs from the codimension"));
        }
        let mut m = self.base.entries.clone();
        for (d, &c) in self.directions.iter().zip(mu) {
            m += &d.entries * c;
        }
        Ok(m)
    }

    pub fn eval_structured(&self, mu: &[f64]) -> Result<StructuredMatrix> {
        Ok(StructuredMatrix::new_unchecked(self.eval(mu)?, self.base.parity))
    }

    /// The directions stacked as columns of gl- coordinates.
    pub fn direction_coords(&self, structure: &ReversingStructure) -> DMatrix<f64> {
        let d = gl_dim(structure.p());
        let mut out = DMatrix::zeros(d, self.directions.len());
        for (j, a) in self.directions.iter().enumerate() {
            out.set_column(j, &structure.gl_coords(&a.entries, Parity::Minus));
        }
        out
    }
}

/// Linear centralizer unfolding: directions form an orthonormal basis (in gl-
/// coordinates) of `ker ad S0 ∩ ker ad N0^T ∩ gl-`.
pub fn lcu(omega0: &StructuredMatrix, structure: &ReversingStructure, tol: &Tolerances) -> Result<LinearUnfolding> {
    lcu_equivariant(omega0, structure, &[], tol)
}

/// As [`lcu`], inside the matrices that also commute with every element of
/// `commuting` (for instance the complex structure of a co-rotating frame).
/// Each element must itself lie in gl+ or gl-.
pub fn lcu_equivariant(
    omega0: &StructuredMatrix,
    structure: &ReversingStructure,
    commuting: &[DMatrix<f64>],
    tol: &Tolerances,
) -> Result<LinearUnfolding> {
    let p = structure.p();
    let jc = jordan_chevalley(omega0, structure, tol)?;
    let s_can = structure.to_canonical(&jc.semisimple.entries);
    let nt_can = structure.to_canonical(&jc.nilpotent.entries).transpose();
    let mut blocks = alloc::vec![
        adjoint_canonical(&s_can, Parity::Minus, Parity::Minus, p),
        adjoint_canonical(&nt_can, Parity::Minus, Parity::Minus, p),
    ];
    let sym = symmetry_adjoints(structure, commuting, Parity::Minus)?;
    blocks.extend(sym.iter().cloned());
    let stacked = vstack(&blocks, gl_dim(p));
    linalg::rank_checked(&stacked, tol)?;
    let basis = linalg::null_space(&stacked, tol);
    let directions = (0..basis.ncols())
        .map(|j| {
            let v = DVector::from_column_slice(basis.column(j).as_slice());
            StructuredMatrix::new_unchecked(structure.from_canonical(&from_coords_canonical(&v, p, Parity::Minus)), Parity::Minus)
        })
        .collect();
    let unf = LinearUnfolding {
        base: omega0.clone(),
        directions,
    };
    let report = transversality_within(&unf, structure, commuting, tol)?;
    if !report.holds {
        return Err(Error::SplittingFailed {
            rank: report.combined_rank,
            expected: report.target_dim,
        });
    }
    Ok(unf)
}

fn symmetry_adjoints(
    structure: &ReversingStructure,
    commuting: &[DMatrix<f64>],
    from: Parity,
) -> Result<Vec<DMatrix<f64>>> {
    let p = structure.p();
    let tol = Tolerances::default();
    commuting
        .iter()
        .map(|c| {
            if c.nrows() != structure.dim() || c.ncols() != structure.dim() {
                return Err(dim_err("commuting symmetry does not match dim_z"));
            }
            let parity = if super::check_membership(c, structure, Parity::Minus, &tol)?.member {
                Parity::Minus
            } else if super::check_membership(c, structure, Parity::Plus, &tol)?.member {
                Parity::Plus
            } else {
                return Err(crate::error::invalid("commuting symmetry is in neither gl+ nor gl-"));
            };
            Ok(adjoint_canonical(&structure.to_canonical(c), parity, from, p))
        })
        .collect()
}

fn vstack(blocks: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Which explicit unfolding [`lcu_closed_form`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ClosedFormKind {
    /// `p` blocks `J2` chained by `J2` on the block superdiagonal.
    PFoldResonance,
    /// A single nilpotent Jordan block of size `2p`.
    NilpotentZero,
}

/// Explicit unfoldings with their reversing involution. For the nilpotent
/// case `fix_sign` chooses whether `ker N0` lies in Fix(R) (`Plus`) or in
/// Fix(-R) (`Minus`); it is ignored for the resonance.
pub fn lcu_closed_form(kind: ClosedFormKind, p: usize, fix_sign: Parity) -> Result<(LinearUnfolding, ReversingStructure)> {
    if p == 0 {
        return Err(crate::error::invalid("p must be at least 1"));
    }
    let n = 2 * p;
    match kind {
        ClosedFormKind::PFoldResonance => {
            let structure = presets::block_r2(p);
            let j = presets::j2();
            let directions = (0..p)
                .map(|off| {
                    let mut a = DMatrix::zeros(n, n);
                    for b in off..p {
                        a.view_mut((2 * b, 2 * (b - off)), (2, 2)).copy_from(&j);
                    }
                    StructuredMatrix::new_unchecked(a, Parity::Minus)
                })
                .collect();
            let base = StructuredMatrix::new_unchecked(presets::p_fold_resonance(p), Parity::Minus);
            Ok((LinearUnfolding { base, directions }, structure))
        }
        ClosedFormKind::NilpotentZero => {
            let structure = presets::nilpotent_structure(p, fix_sign.sign());
            let directions = (1..=p)
                .map(|j| {
                    let off = 2 * j - 1;
                    let mut a = DMatrix::zeros(n, n);
                    for i in off..n {
                        a[(i, i - off)] = 1.0;
                    }
                    StructuredMatrix::new_unchecked(a, Parity::Minus)
                })
                .collect();
            let base = StructuredMatrix::new_unchecked(presets::nilpotent_block(p), Parity::Minus);
            Ok((LinearUnfolding { base, directions }, structure))
        }
    }
}

/// Rank data of `im ad+(Omega0) + span(directions)` inside gl-.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransversalityReport {
    pub image_rank: usize,
    pub codimension: usize,
    pub combined_rank: usize,
    /// Dimension of the ambient space (2p^2 without extra symmetries).
    pub target_dim: usize,
    /// Condition number of the joined orthonormal bases.
    pub cond: f64,
    pub holds: bool,
}

pub fn transversality(unf: &LinearUnfolding, structure: &ReversingStructure, tol: &Tolerances) -> Result<TransversalityReport> {
    transversality_within(unf, structure, &[], tol)
}

/// As [`transversality`], inside the centralizer of `commuting`.
pub fn transversality_within(
    unf: &LinearUnfolding,
    structure: &ReversingStructure,
    commuting: &[DMatrix<f64>],
    tol: &Tolerances,
) -> Result<TransversalityReport> {
    let p = structure.p();
    let d = gl_dim(p);
    if unf.dim() != structure.dim() {
        return Err(dim_err("unfolding does not match dim_z"));
    }
    let (plus_basis, minus_basis) = equivariant_bases(structure, commuting, tol)?;
    let om = structure.to_canonical(&unf.base.entries);
    let ad = adjoint_canonical(&om, Parity::Minus, Parity::Plus, p) * &plus_basis;
    let image = linalg::column_space(&ad, tol);
    let dirs = linalg::column_space(&unf.direction_coords(structure), tol);
    let mut joined = DMatrix::zeros(d, image.ncols() + dirs.ncols());
    joined.view_mut((0, 0), (d, image.ncols())).copy_from(&image);
    joined.view_mut((0, image.ncols()), (d, dirs.ncols())).copy_from(&dirs);
    let combined_rank = linalg::rank(&joined, tol);
    let target_dim = minus_basis.ncols();
    let cond = if joined.ncols() == 0 { 1.0 } else { linalg::cond(&joined) };
    Ok(TransversalityReport {
        image_rank: image.ncols(),
        codimension: unf.codimension(),
        combined_rank,
        target_dim,
        cond,
        holds: combined_rank == target_dim
            && image.ncols() + unf.codimension() == target_dim
            && cond <= tol.cond_max,
    })
}

/// Orthonormal bases (elementary coordinates) of the parts of gl+ and gl-
/// commuting with every element of `commuting`.
pub fn equivariant_bases(
    structure: &ReversingStructure,
    commuting: &[DMatrix<f64>],
    tol: &Tolerances,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = gl_dim(structure.p());
    if commuting.is_empty() {
        return Ok((DMatrix::identity(d, d), DMatrix::identity(d, d)));
    }
    let plus = vstack(&symmetry_adjoints(structure, commuting, Parity::Plus)?, d);
    let minus = vstack(&symmetry_adjoints(structure, commuting, Parity::Minus)?, d);
    Ok((linalg::null_space(&plus, tol), linalg::null_space(&minus, tol)))
}

/// Projection of gl- onto `ker ad(Omega0^T)` along `im ad+(Omega0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingProjection {
    /// Matrix of the projection in gl- coordinates.
    pub matrix: DMatrix<f64>,
    /// Orthonormal basis (gl- coordinates) of the image.
    pub kernel_basis: DMatrix<f64>,
    pub rank: usize,
    structure: ReversingStructure,
}

impl SplittingProjection {
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let c = self.structure.gl_coords(a, Parity::Minus);
        self.structure.from_gl_coords(&(&self.matrix * c), Parity::Minus)
    }

    pub fn apply_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.matrix * c
    }
}

pub fn splitting_projection(
    omega0: &StructuredMatrix,
    structure: &ReversingStructure,
    tol: &Tolerances,
) -> Result<SplittingProjection> {
    let p = structure.p();
    let d = gl_dim(p);
    if omega0.dim() != structure.dim() {
        return Err(dim_err("Omega0 does not match dim_z"));
    }
    let om = structure.to_canonical(&omega0.entries);
    let image = linalg::column_space(&adjoint_canonical(&om, Parity::Minus, Parity::Plus, p), tol);
    let kernel = linalg::null_space(&adjoint_canonical(&om.transpose(), Parity::Minus, Parity::Minus, p), tol);
    let mut joined = DMatrix::zeros(d, image.ncols() + kernel.ncols());
    joined.view_mut((0, 0), (d, image.ncols())).copy_from(&image);
    joined.view_mut((0, image.ncols()), (d, kernel.ncols())).copy_from(&kernel);
    let rank = linalg::rank(&joined, tol);
    if joined.ncols() != d || rank != d || linalg::cond(&joined) > tol.cond_max {
        return Err(Error::SplittingFailed { rank, expected: d });
    }
    let inv = joined.clone().try_inverse().ok_or(Error::SplittingFailed { rank, expected: d })?;
    let mut keep = DMatrix::zeros(d, d);
    for i in image.ncols()..d {
        keep[(i, i)] = 1.0;
    }
    Ok(SplittingProjection {
        matrix: &joined * keep * inv,
        rank: kernel.ncols(),
        kernel_basis: kernel,
        structure: structure.clone(),
    })
}

/// Decomposes `a ∈ gl-` as `ad+(Omega0) B + sum c_i A_i`; returns `(c, B, residual)`.
pub fn complement_coordinates(
    unf: &LinearUnfolding,
    structure: &ReversingStructure,
    a: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let p = structure.p();
    let d = gl_dim(p);
    let c = unf.codimension();
    let om = structure.to_canonical(&unf.base.entries);
    let ad = adjoint_canonical(&om, Parity::Minus, Parity::Plus, p);
    let mut sys = DMatrix::zeros(d, d + c);
    sys.view_mut((0, 0), (d, d)).copy_from(&ad);
    sys.view_mut((0, d), (d, c)).copy_from(&unf.direction_coords(structure));
    let rhs = structure.gl_coords(a, Parity::Minus);
    let x = linalg::lstsq_vec(&sys, &rhs, tol);
    let residual = (&sys * &x - &rhs).norm();
    let b = structure.from_gl_coords(&DVector::from_column_slice(&x.as_slice()[..d]), Parity::Plus);
    Ok((DVector::from_column_slice(&x.as_slice()[d..]), b, residual))
}
