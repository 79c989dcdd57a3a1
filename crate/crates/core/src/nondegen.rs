//! BHT non-degeneracy of a parametrised family `(omega(lambda), Omega(lambda))`
//! at a point, and the extra hypotheses of the three corollaries.
//!
//! Every decision compares a singular value ratio against `rank_tol`; ratios
//! inside the ambiguity window give [`Verdict::Indeterminate`].

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, invalid, Result};
use crate::linalg::{self, Tolerances};
use crate::revlin::{self, adjoint_matrix, Parity, ReversingStructure, StructuredMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Holds,
    Fails,
    Indeterminate,
}

impl Verdict {
    fn from_ratio(ratio: f64, tol: &Tolerances) -> Verdict {
        if ratio > tol.rank_tol * tol.ambiguity_window {
            Verdict::Holds
        } else if ratio < tol.rank_tol / tol.ambiguity_window {
            Verdict::Fails
        } else {
            Verdict::Indeterminate
        }
    }

    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
            (Verdict::Holds, Verdict::Holds) => Verdict::Holds,
            _ => Verdict::Indeterminate,
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

/// `{condition, verdict, margin, witness?}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    /// Smallest relevant singular value (absolute for bht_i, relative otherwise).
    pub margin: f64,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub witness: Option<Vec<f64>>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub deficit: Option<usize>,
}

/// First-order data of a family at `lambda0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyAtPoint {
    pub omega0: DVector<f64>,
    pub omega_mat: StructuredMatrix,
    /// `n x s` Jacobian of the frequencies.
    pub d_omega: DMatrix<f64>,
    /// `dOmega / dlambda_i`, one per parameter.
    pub d_omega_mat: Vec<StructuredMatrix>,
    pub symmetry: ReversingStructure,
    /// Extra linear symmetries the whole family commutes with.
    pub commuting: Vec<DMatrix<f64>>,
}

impl FamilyAtPoint {
    pub fn new(
        omega0: DVector<f64>,
        omega_mat: StructuredMatrix,
        d_omega: DMatrix<f64>,
        d_omega_mat: Vec<StructuredMatrix>,
        symmetry: ReversingStructure,
    ) -> Result<Self> {
        let n = omega0.len();
        let s = d_omega.ncols();
        if d_omega.nrows() != n {
            return Err(dim_err("d_omega must have one row per frequency"));
        }
        if d_omega_mat.len() != s {
            return Err(dim_err("need one dOmega per parameter"));
        }
        if s < n {
            return Err(invalid("fewer parameters than frequencies"));
        }
        let tol = Tolerances::default();
        for m in core::iter::once(&omega_mat).chain(&d_omega_mat) {
            if m.dim() != symmetry.dim() {
                return Err(dim_err("matrix does not match dim_z"));
            }
            if m.parity != Parity::Minus || !revlin::check_membership(&m.entries, &symmetry, Parity::Minus, &tol)?.member {
                return Err(invalid("family matrices must be infinitesimally reversible"));
            }
        }
        Ok(FamilyAtPoint {
            omega0,
            omega_mat,
            d_omega,
            d_omega_mat,
            symmetry,
            commuting: Vec::new(),
        })
    }

    pub fn with_commuting(mut self, commuting: Vec<DMatrix<f64>>) -> Self {
        self.commuting = commuting;
        self
    }

    /// The LCU family `lambda = (omega, mu)`: `D omega = [I | 0]`, `dOmega` the
    /// unfolding directions.
    pub fn from_unfolding(omega0: DVector<f64>, unfolding: &revlin::LinearUnfolding, symmetry: ReversingStructure) -> Result<Self> {
        let n = omega0.len();
        let c = unfolding.codimension();
        let mut d_omega = DMatrix::zeros(n, n + c);
        d_omega.view_mut((0, 0), (n, n)).fill_with_identity();
        let zero = StructuredMatrix::new_unchecked(DMatrix::zeros(symmetry.dim(), symmetry.dim()), Parity::Minus);
        let mut dm: Vec<StructuredMatrix> = (0..n).map(|_| zero.clone()).collect();
        dm.extend(unfolding.directions.iter().cloned());
        Self::new(omega0, unfolding.base.clone(), d_omega, dm, symmetry)
    }
}

/// Basis of `B+ = Fix(R) ∩ Fix(S_l)` (the twist only counts when `l >= 2`).
pub fn b_plus(symmetry: &ReversingStructure, tol: &Tolerances) -> DMatrix<f64> {
    let n = symmetry.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let mut rows = symmetry.r() - &id;
    if let Some(t) = symmetry.twist().filter(|t| t.order >= 2) {
        let mut stacked = DMatrix::zeros(2 * n, n);
        stacked.view_mut((0, 0), (n, n)).copy_from(&rows);
        stacked.view_mut((n, 0), (n, n)).copy_from(&(&t.matrix - &id));
        rows = stacked;
    }
    linalg::null_space(&rows, tol)
}

/// Injectivity of `omega` on the column span of `basis`, with witness.
fn injective_on(omega: &DMatrix<f64>, basis: &DMatrix<f64>, name: &str, tol: &Tolerances) -> ConditionReport {
    if basis.ncols() == 0 {
        return ConditionReport {
            condition: name.into(),
            verdict: Verdict::Holds,
            margin: f64::INFINITY,
            witness: None,
            deficit: None,
        };
    }
    let scale = linalg::norm2(omega);
    let m = omega * basis;
    let svd = linalg::svd(&m, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let k = basis.ncols();
    // thin SVD of a tall matrix has k singular values; pad for wide ones
    let (imin, smin) = if sv.len() < k {
        (usize::MAX, 0.0)
    } else {
        (0..sv.len()).map(|i| (i, sv[i])).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
    };
    let verdict = if scale == 0.0 {
        Verdict::Fails
    } else {
        Verdict::from_ratio(smin / scale, tol)
    };
    let witness = if verdict == Verdict::Holds {
        None
    } else {
        let coeffs = if imin == usize::MAX {
            linalg::null_space(&m, tol).column(0).into_owned()
        } else {
            vt.row(imin).transpose()
        };
        let mut w = basis * coeffs;
        let norm = w.norm();
        if norm > 0.0 {
            w /= norm;
        }
        // sign convention: largest entry positive
        let imax = w.iamax();
        if w[imax] < 0.0 {
            w = -w;
        }
        Some(w.iter().copied().collect())
    };
    ConditionReport {
        condition: name.into(),
        verdict,
        margin: smin,
        witness,
        deficit: None,
    }
}

/// BHT(i): `ker Omega0 ∩ B+ = {0}`. The margin is `sigma_min(Omega0|B+)`,
/// so every perturbation `E` with `|E|_2 < margin` keeps the verdict.
pub fn bht_i(omega0: &StructuredMatrix, symmetry: &ReversingStructure, tol: &Tolerances) -> Result<ConditionReport> {
    if omega0.dim() != symmetry.dim() {
        return Err(dim_err("Omega0 does not match dim_z"));
    }
    Ok(injective_on(&omega0.entries, &b_plus(symmetry, tol), "bht_i", tol))
}

/// BHT(ii): `lambda -> (D omega, D Omega)` together with `{0} x im ad+(Omega0)`
/// spans `R^n x gl-`.
pub fn bht_ii(fam: &FamilyAtPoint, tol: &Tolerances) -> Result<ConditionReport> {
    let n = fam.omega0.len();
    let s = fam.d_omega.ncols();
    let sym = &fam.symmetry;
    let (plus_basis, minus_basis) = revlin::equivariant_bases(sym, &fam.commuting, tol)?;
    let dm = minus_basis.ncols();
    let ad = adjoint_matrix(&fam.omega_mat, Parity::Plus, sym)? * &plus_basis;
    let rows = n + dm;
    let mut big = DMatrix::zeros(rows, s + ad.ncols());
    big.view_mut((0, 0), (n, s)).copy_from(&fam.d_omega);
    for (j, a) in fam.d_omega_mat.iter().enumerate() {
        let c = minus_basis.transpose() * sym.gl_coords(&a.entries, Parity::Minus);
        big.view_mut((n, j), (dm, 1)).copy_from(&c);
    }
    big.view_mut((n, s), (dm, ad.ncols())).copy_from(&(minus_basis.transpose() * ad));
    let info = linalg::rank_info(&big, tol);
    let smax = info.singular_values.first().copied().unwrap_or(0.0);
    let margin = if smax == 0.0 || info.singular_values.len() < rows {
        0.0
    } else {
        info.singular_values[rows - 1] / smax
    };
    let verdict = if rows == 0 {
        Verdict::Holds
    } else if info.singular_values.len() < rows || smax == 0.0 {
        Verdict::Fails
    } else {
        Verdict::from_ratio(margin, tol)
    };
    Ok(ConditionReport {
        condition: "bht_ii".into(),
        verdict,
        margin,
        witness: None,
        deficit: Some(rows - info.rank.min(rows)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Corollary {
    /// `Omega(0)` invertible.
    Plain,
    /// `Omega(0)` injective on Fix(S) for the deck twist `S`.
    CoveringL2,
    /// `ker Omega(0) ⊆ Fix(-R)`.
    ZeroKernel,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateReport {
    pub case: Corollary,
    pub hypothesis: ConditionReport,
    pub bht_ii: ConditionReport,
    pub verdict: Verdict,
}

pub fn corollary_gate(fam: &FamilyAtPoint, case: Corollary, tol: &Tolerances) -> Result<GateReport> {
    let om = &fam.omega_mat.entries;
    let n = om.nrows();
    let hypothesis = match case {
        Corollary::Plain => injective_on(om, &DMatrix::identity(n, n), "invertible", tol),
        Corollary::CoveringL2 => {
            let twist = fam
                .symmetry
                .twist()
                .ok_or_else(|| invalid("covering_l2 needs a twist S"))?;
            let fix_s = linalg::null_space(&(&twist.matrix - DMatrix::<f64>::identity(n, n)), tol);
            injective_on(om, &fix_s, "injective_on_fix_s", tol)
        }
        Corollary::ZeroKernel => kernel_in_fix_minus(om, fam.symmetry.r(), tol),
    };
    let ii = bht_ii(fam, tol)?;
    Ok(GateReport {
        case,
        verdict: hypothesis.verdict.and(ii.verdict),
        hypothesis,
        bht_ii: ii,
    })
}

fn kernel_in_fix_minus(om: &DMatrix<f64>, r: &DMatrix<f64>, tol: &Tolerances) -> ConditionReport {
    let n = om.nrows();
    let (ker, info) = linalg::null_space_info(om, tol);
    if info.ambiguous {
        return ConditionReport {
            condition: "kernel_in_fix_minus_r".into(),
            verdict: Verdict::Indeterminate,
            margin: info.gap.1,
            witness: None,
            deficit: None,
        };
    }
    if ker.ncols() == 0 {
        return ConditionReport {
            condition: "kernel_in_fix_minus_r".into(),
            verdict: Verdict::Holds,
            margin: f64::INFINITY,
            witness: None,
            deficit: None,
        };
    }
    // the component of ker in Fix(R) must vanish
    let plus_part = (DMatrix::<f64>::identity(n, n) + r) * &ker * 0.5;
    let svd = linalg::svd(&plus_part, true, false);
    let u = svd.u.expect("u requested");
    let (imax, smax) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let verdict = if smax <= tol.rank_tol / tol.ambiguity_window {
        Verdict::Holds
    } else if smax >= tol.rank_tol * tol.ambiguity_window {
        Verdict::Fails
    } else {
        Verdict::Indeterminate
    };
    ConditionReport {
        condition: "kernel_in_fix_minus_r".into(),
        verdict,
        margin: smax,
        witness: (verdict != Verdict::Holds).then(|| u.column(imax).iter().copied().collect()),
        deficit: None,
    }
}
