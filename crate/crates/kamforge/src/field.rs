//! Field definitions.
//!
//! ```json
//! {
//!   "dims": { "n": 2, "m": 1, "p": 1 },
//!   "symmetry": { "r": [[-1, 0], [0, 1]] },
//!   "commuting": [],
//!   "polynomial": {
//!     "f": [[{ "exponent": [0, 0, 0], "coeff": 1.0 }], [{ "exponent": [0, 0, 0], "coeff": 1.618 }]],
//!     "g": [[]],
//!     "h": [[{ "exponent": [0, 0, 1], "coeff": 1.0 }], [{ "exponent": [0, 1, 0], "coeff": -1.0 }]]
//!   },
//!   "fourier": [{ "k": [1, 1], "block": "h", "row": 1, "col": 0, "coeff": [0.0, -0.05] }],
//!   "project_reversible": true
//! }
//! ```
//!
//! Polynomials are in the `m + 2p` variables `(y, z)`. Each Fourier term
//! sets one coefficient of the mode `k`; the conjugate coefficient at `-k`
//! is added so the field is real. Blocks are named as in
//! [`kamforge_core::fourier::COMPONENTS`].

use kamforge_core::fourier::{FourierField, ModeJet, C64, COMPONENTS};
use kamforge_core::models::IntegrableField;
use kamforge_core::poly::Poly;
use kamforge_core::revlin::{lcu_equivariant, LinearUnfolding, Parity, ReversingStructure, StructuredMatrix};
use kamforge_core::Tolerances;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponent: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polynomials {
    #[serde(default)]
    pub f: Vec<Vec<Term>>,
    #[serde(default)]
    pub g: Vec<Vec<Term>>,
    #[serde(default)]
    pub h: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeff {
    Real(f64),
    Complex([f64; 2]),
}

impl Coeff {
    pub fn value(self) -> C64 {
        match self {
            Coeff::Real(v) => C64::new(v, 0.0),
            Coeff::Complex([a, b]) => C64::new(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: Vec<i64>,
    pub block: String,
    #[serde(default)]
    pub row: usize,
    #[serde(default)]
    pub col: usize,
    pub coeff: Coeff,
}

/// `{base, directions, codimension}` with plain row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnfoldingDoc {
    #[serde(with = "kamforge_core::serde_rows::mat")]
    pub base: DMatrix<f64>,
    #[serde(with = "kamforge_core::serde_rows::mats")]
    pub directions: Vec<DMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codimension: Option<usize>,
}

impl UnfoldingDoc {
    pub fn from_unfolding(u: &LinearUnfolding) -> Self {
        UnfoldingDoc {
            base: u.base.entries.clone(),
            directions: u.directions.iter().map(|d| d.entries.clone()).collect(),
            codimension: Some(u.codimension()),
        }
    }

    /// Checks shapes, the stated codimension and, given a structure, membership in gl-.
    pub fn to_unfolding(&self, structure: Option<&ReversingStructure>, tol: &Tolerances) -> Result<LinearUnfolding> {
        let q = self.base.nrows();
        if self.base.ncols() != q || self.directions.iter().any(|d| d.nrows() != q || d.ncols() != q) {
            return Err(config_err("unfolding matrices must be square and of one size"));
        }
        if let Some(c) = self.codimension {
            if c != self.directions.len() {
                return Err(config_err(format!("unfolding states codimension {c} but has {} directions", self.directions.len())));
            }
        }
        let tag = |m: &DMatrix<f64>| match structure {
            Some(st) => Ok(StructuredMatrix::new(m.clone(), Parity::Minus, st, tol)?),
            None => Ok(StructuredMatrix::new_unchecked(m.clone(), Parity::Minus)),
        };
        Ok(LinearUnfolding {
            base: tag(&self.base)?,
            directions: self.directions.iter().map(tag).collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub dims: Dims,
    pub symmetry: ReversingStructure,
    #[serde(default, with = "kamforge_core::serde_rows::mats")]
    pub commuting: Vec<DMatrix<f64>>,
    #[serde(default)]
    pub polynomial: Polynomials,
    #[serde(default)]
    pub fourier: Vec<FourierTerm>,
    /// Replace the Fourier part by its reversible projection `(X - G_* X) / 2`.
    #[serde(default)]
    pub project_reversible: bool,
    #[serde(default)]
    pub unfolding: Option<UnfoldingDoc>,
}

fn polys(name: &str, list: &[Vec<Term>], count: usize, d: usize) -> Result<Vec<Poly>> {
    if list.is_empty() && count > 0 {
        // absent component list: all zero
        return Ok(vec![Poly::zero(d); count]);
    }
    if list.len() != count {
        return Err(config_err(format!("polynomial.{name} has {} entries, expected {count}", list.len())));
    }
    list.iter()
        .enumerate()
        .map(|(i, terms)| {
            let mut q = Poly::zero(d);
            for t in terms {
                if t.exponent.len() != d {
                    return Err(config_err(format!(
                        "polynomial.{name}[{i}]: exponent {:?} needs m + 2p = {d} entries",
                        t.exponent
                    )));
                }
                q.add_term(&t.exponent, t.coeff);
            }
            Ok(q)
        })
        .collect()
}

fn entry<'a>(jet: &'a mut ModeJet, block: &str, row: usize, col: usize) -> Result<&'a mut C64> {
    let m = match block {
        "f" | "g" | "h" => {
            let v = match block {
                "f" => &mut jet.f,
                "g" => &mut jet.g,
                _ => &mut jet.h,
            };
            if col != 0 || row >= v.len() {
                return Err(config_err(format!("{block}[{row}, {col}] is out of range")));
            }
            return Ok(&mut v[row]);
        }
        "f_eta" => &mut jet.f_eta,
        "f_zeta" => &mut jet.f_zeta,
        "g_eta" => &mut jet.g_eta,
        "g_zeta" => &mut jet.g_zeta,
        "h_eta" => &mut jet.h_eta,
        "h_zeta" => &mut jet.h_zeta,
        other => {
            return Err(config_err(format!("unknown block {other:?}; expected one of {COMPONENTS:?}")));
        }
    };
    if row >= m.nrows() || col >= m.ncols() {
        return Err(config_err(format!("{block}[{row}, {col}] is out of range for a {}x{} block", m.nrows(), m.ncols())));
    }
    Ok(&mut m[(row, col)])
}

impl FieldDef {
    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        let def: FieldDef = serde_json::from_value(v.clone()).map_err(|e| config_err(format!("field: {e}")))?;
        def.validate()?;
        Ok(def)
    }

    fn validate(&self) -> Result<()> {
        let Dims { n, p, .. } = self.dims;
        if n == 0 || p == 0 {
            return Err(config_err("field dims need n >= 1 and p >= 1"));
        }
        if self.symmetry.dim() != 2 * p {
            return Err(config_err(format!("symmetry.r is {0}x{0}, expected 2p = {1}", self.symmetry.dim(), 2 * p)));
        }
        if self.commuting.iter().any(|c| c.nrows() != 2 * p || c.ncols() != 2 * p) {
            return Err(config_err("commuting matrices must be 2p x 2p"));
        }
        for t in &self.fourier {
            if t.k.len() != n {
                return Err(config_err(format!("fourier term k = {:?} needs n = {n} entries", t.k)));
            }
            if t.k.iter().all(|&v| v == 0) && t.coeff.value().im != 0.0 {
                return Err(config_err("fourier term at k = 0 must be real"));
            }
        }
        Ok(())
    }

    pub fn integrable(&self) -> Result<IntegrableField> {
        let Dims { n, m, p } = self.dims;
        let d = m + 2 * p;
        let pl = &self.polynomial;
        let x = IntegrableField::new(
            (n, m, p),
            polys("f", &pl.f, n, d)?,
            polys("g", &pl.g, m, d)?,
            polys("h", &pl.h, 2 * p, d)?,
            self.symmetry.clone(),
        )?
        .with_commuting(self.commuting.clone());
        Ok(x)
    }

    /// The integrable part with its unfolding: the given one, or the LCU at
    /// the Floquet matrix inside the centralizer of `commuting`.
    pub fn integrable_unfolded(&self, tol: &Tolerances) -> Result<IntegrableField> {
        let x = self.integrable()?;
        let unf = match &self.unfolding {
            Some(u) => u.to_unfolding(Some(&self.symmetry), tol)?,
            None => {
                let om = StructuredMatrix::new(x.dominant_part().floquet, Parity::Minus, &self.symmetry, tol)?;
                lcu_equivariant(&om, &self.symmetry, &self.commuting, tol)?
            }
        };
        Ok(x.with_unfolding(unf)?)
    }

    pub fn perturbation(&self) -> Result<FourierField> {
        let Dims { n, m, p } = self.dims;
        let k_max = self.fourier.iter().map(|t| t.k.iter().map(|v| v.unsigned_abs() as usize).sum()).max().unwrap_or(0);
        let mut out = FourierField::zero(n, m, p, k_max);
        for t in &self.fourier {
            let c = t.coeff.value();
            *entry(out.mode_mut(&t.k), &t.block, t.row, t.col)? += c;
            if t.k.iter().any(|&v| v != 0) {
                let mk: Vec<i64> = t.k.iter().map(|v| -v).collect();
                *entry(out.mode_mut(&mk), &t.block, t.row, t.col)? += c.conj();
            }
        }
        if self.project_reversible {
            let mut rev = out.reversal_image(self.symmetry.r()).scaled(C64::new(-0.5, 0.0));
            rev.axpy(C64::new(0.5, 0.0), &out)?;
            out = rev;
        }
        Ok(out)
    }

    /// Affine part of the integrable field at `k = 0` plus the perturbation.
    pub fn full_field(&self) -> Result<FourierField> {
        let x = self.integrable()?;
        let mut out = self.perturbation()?;
        out.add_mode(&vec![0; self.dims.n], C64::new(1.0, 0.0), &x.affine_jet());
        Ok(out)
    }
}
