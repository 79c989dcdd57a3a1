//! Structured linear algebra over gl+(2p;R) and gl-(2p;R).
//!
//! A [`ReversingStructure`] holds a linear involution `R` on `R^{2p}` with
//! `dim Fix(R) = p`, together with a change of basis `T` such that
//! `T^-1 R T = diag(I_p, -I_p)`. In that canonical frame every element of
//! gl+ is block diagonal and every element of gl- is block anti-diagonal, so
//! both spaces carry an elementary-matrix basis of dimension `2p^2`. All rank
//! and null-space computations happen in these coordinates.

mod adjoint;
mod jordan;
mod spectrum;
mod unfolding;

pub use adjoint::{adjoint_matrix, gl_basis, gl_dim};
pub use jordan::{jordan_chevalley, EigenCluster, JordanChevalley};
pub use spectrum::{normal_frequencies, spectrum};
pub use unfolding::{
    complement_coordinates, equivariant_bases, lcu, lcu_closed_form, lcu_equivariant, splitting_projection, transversality,
    transversality_within,
    ClosedFormKind, LinearUnfolding, SplittingProjection, TransversalityReport,
};

use alloc::format;
use nalgebra::DMatrix;

use crate::error::{dim_err, invalid, Result};
use crate::linalg::{self, Tolerances};

/// Sign tag: `Minus` for infinitesimally reversible (`MR = -RM`), `Plus` for
/// equivariant (`MR = RM`) matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Parity {
    Plus,
    Minus,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Plus => 1.0,
            Parity::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Plus => Parity::Minus,
            Parity::Minus => Parity::Plus,
        }
    }

    /// Parity of a commutator `[A, B]` with `A`, `B` of the given parities.
    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Plus
        } else {
            Parity::Minus
        }
    }
}

/// A finite-order linear symmetry `S_l` of `R^{2p}` (the normal part of the
/// deck map `F_l`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Twist {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    pub matrix: DMatrix<f64>,
    pub order: usize,
}

/// A reversing involution `R` on `R^{2p}`, with an optional twist `S_l`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "ReversingStructureRepr", into = "ReversingStructureRepr"))]
pub struct ReversingStructure {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    r: DMatrix<f64>,
    twist: Option<Twist>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    frame: DMatrix<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    frame_inv: DMatrix<f64>,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct ReversingStructureRepr {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    r: DMatrix<f64>,
    #[serde(default)]
    twist: Option<Twist>,
}

#[cfg(feature = "serde")]
impl TryFrom<ReversingStructureRepr> for ReversingStructure {
    type Error = crate::error::Error;
    fn try_from(v: ReversingStructureRepr) -> Result<Self> {
        let s = ReversingStructure::new(v.r)?;
        match v.twist {
            Some(t) => s.with_twist(t.matrix, t.order),
            None => Ok(s),
        }
    }
}

#[cfg(feature = "serde")]
impl From<ReversingStructure> for ReversingStructureRepr {
    fn from(v: ReversingStructure) -> Self {
        ReversingStructureRepr {
            r: v.r,
            twist: v.twist,
        }
    }
}

const INVOLUTION_TOL: f64 = 1e-12;

impl ReversingStructure {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        let n = r.nrows();
        if n != r.ncols() {
            return Err(dim_err("R must be square"));
        }
        if n % 2 != 0 {
            return Err(dim_err(format!("dim_z = {n} is odd")));
        }
        let id = DMatrix::<f64>::identity(n, n);
        let m = linalg::max_abs(&r);
        let scale = 1.0 + m * m;
        let defect = linalg::max_abs(&(&r * &r - &id));
        if defect > INVOLUTION_TOL * scale {
            return Err(invalid(format!("R^2 != Id (defect {defect:e})")));
        }
        let tol = Tolerances::default();
        let plus = linalg::column_space(&((&id + &r) * 0.5), &tol);
        let minus = linalg::column_space(&((&id - &r) * 0.5), &tol);
        let p = n / 2;
        if plus.ncols() != p || minus.ncols() != p {
            return Err(invalid(format!(
                "dim Fix(R) = {} but dim_z / 2 = {p}",
                plus.ncols()
            )));
        }
        let mut frame = DMatrix::zeros(n, n);
        frame.view_mut((0, 0), (n, p)).copy_from(&plus);
        frame.view_mut((0, p), (n, p)).copy_from(&minus);
        let frame_inv = frame
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("degenerate canonical frame"))?;
        Ok(ReversingStructure {
            r,
            twist: None,
            frame,
            frame_inv,
        })
    }

    /// `R = diag(signs)`, each sign `+1` or `-1`.
    pub fn diagonal(signs: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(signs)))
    }

    /// Attaches a twist `S` of order `l`; requires `S^l = Id` and
    /// `R S R^-1 in {S, S^-1}`.
    pub fn with_twist(mut self, s: DMatrix<f64>, order: usize) -> Result<Self> {
        let n = self.dim();
        if s.nrows() != n || s.ncols() != n {
            return Err(dim_err("twist must match dim_z"));
        }
        if order == 0 {
            return Err(invalid("twist order must be >= 1"));
        }
        let id = DMatrix::<f64>::identity(n, n);
        let mut pow = id.clone();
        for _ in 0..order {
            pow = &pow * &s;
        }
        if linalg::max_abs(&(&pow - &id)) > 1e-10 {
            return Err(invalid("S^l != Id"));
        }
        let s_inv = s.clone().try_inverse().ok_or_else(|| invalid("S singular"))?;
        let conj = &self.r * &s * &self.r;
        let commutes = linalg::max_abs(&(&conj - &s)) <= 1e-10;
        let dihedral = linalg::max_abs(&(&conj - &s_inv)) <= 1e-10;
        if !(commutes || dihedral) {
            return Err(invalid("R S R^-1 is neither S nor S^-1"));
        }
        self.twist = Some(Twist { matrix: s, order });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn p(&self) -> usize {
        self.r.nrows() / 2
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn twist(&self) -> Option<&Twist> {
        self.twist.as_ref()
    }

    /// Columns span Fix(R) then Fix(-R).
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn fix_plus(&self) -> DMatrix<f64> {
        self.frame.columns(0, self.p()).into_owned()
    }

    pub fn fix_minus(&self) -> DMatrix<f64> {
        self.frame.columns(self.p(), self.p()).into_owned()
    }

    pub fn to_canonical(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.frame_inv * m * &self.frame
    }

    pub fn from_canonical(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.frame * m * &self.frame_inv
    }

    /// Transpose taken in the canonical frame.
    pub fn transpose(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.from_canonical(&self.to_canonical(m).transpose())
    }

    /// Orthogonal projection (in canonical coordinates) onto gl+ or gl-.
    pub fn project(&self, m: &DMatrix<f64>, parity: Parity) -> DMatrix<f64> {
        let rmr = &self.r * m * &self.r;
        (m + rmr * parity.sign()) * 0.5
    }
}

/// Result of a membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Frobenius norm of `MR - sign * RM`.
    pub defect: f64,
}

/// Tests `MR = +-RM` up to `membership_tol * |M|` (Frobenius norms).
pub fn check_membership(
    m: &DMatrix<f64>,
    structure: &ReversingStructure,
    parity: Parity,
    tol: &Tolerances,
) -> Result<Membership> {
    let n = structure.dim();
    if m.nrows() != n || m.ncols() != n {
        return Err(dim_err(format!(
            "matrix is {}x{}, structure has dim_z = {n}",
            m.nrows(),
            m.ncols()
        )));
    }
    let r = structure.r();
    let defect = (m * r - (r * m) * parity.sign()).norm();
    let scale = m.norm();
    Ok(Membership {
        member: defect <= tol.membership_tol * scale,
        defect,
    })
}

/// A square matrix tagged as an element of gl+ or gl-.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StructuredMatrix {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    pub entries: DMatrix<f64>,
    pub parity: Parity,
}

impl StructuredMatrix {
    /// Checks membership before tagging.
    pub fn new(
        entries: DMatrix<f64>,
        parity: Parity,
        structure: &ReversingStructure,
        tol: &Tolerances,
    ) -> Result<Self> {
        let m = check_membership(&entries, structure, parity, tol)?;
        if !m.member {
            return Err(invalid(format!(
                "matrix is not in gl{} (defect {:e})",
                if parity == Parity::Minus { "-" } else { "+" },
                m.defect
            )));
        }
        Ok(StructuredMatrix { entries, parity })
    }

    pub fn new_unchecked(entries: DMatrix<f64>, parity: Parity) -> Self {
        StructuredMatrix { entries, parity }
    }

    pub fn minus(entries: DMatrix<f64>, structure: &ReversingStructure) -> Result<Self> {
        Self::new(entries, Parity::Minus, structure, &Tolerances::default())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}
