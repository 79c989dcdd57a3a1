//! Integrable reversible fields, their normal-linear part, scaling and
//! localization, a single KAM step and the forced-oscillator response solver.
//!
//! An [`IntegrableField`] on `T^n x R^m x R^{2p}` is
//! `x' = f(y, z)`, `y' = g(y, z)`, `z' = h(y, z)` with polynomial components
//! in the `m + 2p` variables `(y, z)`.

mod kam;
mod response;

pub use kam::{defect_norm, kam_step, KamOptions, PerturbedField, StepReport};
pub use response::{linspace, response_solve, response_sweep, FloquetKind, ResponseOptions, ResponseProblem, ResponseSolution, SweepPoint};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand_core::Rng;
use rand_pcg::Pcg32;

use crate::error::{dim_err, invalid, Result};
use crate::fourier::{ModeJet, C64};
use crate::poly::{Jet, Poly};
use crate::revlin::{LinearUnfolding, Parity, ReversingStructure, StructuredMatrix};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrableField {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub f: Vec<Poly>,
    pub g: Vec<Poly>,
    pub h: Vec<Poly>,
    pub structure: ReversingStructure,
    /// Directions used for the `Omega` parameter shift.
    pub unfolding: Option<LinearUnfolding>,
    /// Extra linear symmetries commuting with the normal dynamics.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mats"))]
    pub commuting: Vec<DMatrix<f64>>,
    /// Action value the field has been localized at.
    pub anchor: Vec<f64>,
}

/// `(omega, Omega)` of `N(X) = omega d/dx + Omega z d/dz`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DominantPart {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::vector"))]
    pub omega: DVector<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    pub floquet: DMatrix<f64>,
}

fn z_degree(e: &[u32], m: usize) -> u32 {
    e[m..].iter().sum()
}

impl IntegrableField {
    pub fn new(
        (n, m, p): (usize, usize, usize),
        f: Vec<Poly>,
        g: Vec<Poly>,
        h: Vec<Poly>,
        structure: ReversingStructure,
    ) -> Result<Self> {
        let d = m + 2 * p;
        if f.len() != n || g.len() != m || h.len() != 2 * p {
            return Err(dim_err(format!(
                "component counts ({}, {}, {}) differ from (n, m, 2p) = ({n}, {m}, {})",
                f.len(),
                g.len(),
                h.len(),
                2 * p
            )));
        }
        if f.iter().chain(&g).chain(&h).any(|q| q.nvars != d) {
            return Err(dim_err(format!("every polynomial must have m + 2p = {d} variables")));
        }
        if structure.dim() != 2 * p {
            return Err(dim_err("reversing involution does not act on R^{2p}"));
        }
        Ok(IntegrableField {
            n,
            m,
            p,
            f,
            g,
            h,
            structure,
            unfolding: None,
            commuting: Vec::new(),
            anchor: vec![0.0; m],
        })
    }

    /// `x' = omega`, `z' = Omega z`.
    pub fn normal_linear(omega: &[f64], m: usize, floquet: &DMatrix<f64>, structure: ReversingStructure) -> Result<Self> {
        let q = floquet.nrows();
        let d = m + q;
        let f = omega.iter().map(|&w| Poly::constant(d, w)).collect();
        let g = (0..m).map(|_| Poly::zero(d)).collect();
        let h = (0..q)
            .map(|i| {
                (0..q).fold(Poly::zero(d), |acc, j| acc.add(&Poly::linear(d, m + j, floquet[(i, j)])))
            })
            .collect();
        IntegrableField::new((omega.len(), m, q / 2), f, g, h, structure)
    }

    pub fn with_unfolding(mut self, unfolding: LinearUnfolding) -> Result<Self> {
        if unfolding.dim() != 2 * self.p {
            return Err(dim_err("unfolding does not act on R^{2p}"));
        }
        self.unfolding = Some(unfolding);
        Ok(self)
    }

    pub fn with_commuting(mut self, commuting: Vec<DMatrix<f64>>) -> Self {
        self.commuting = commuting;
        self
    }

    pub fn nvars(&self) -> usize {
        self.m + 2 * self.p
    }

    /// Torus-family conditions `g(y, 0) = 0` and `h(y, 0) = 0`: every `y = const`,
    /// `z = 0` is an invariant torus.
    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        for (name, comps) in [("g", &self.g), ("h", &self.h)] {
            for (i, q) in comps.iter().enumerate() {
                for e in q.terms.keys() {
                    if z_degree(e, m) == 0 {
                        return Err(invalid(format!("{name}[{i}] term {e:?} does not vanish at z = 0")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds `f(y, 0) = omega` and `D_z h(y, 0) = Omega`: all tori share the
    /// normal-linear part.
    pub fn validate_higher_order(&self) -> Result<()> {
        self.validate()?;
        let m = self.m;
        for (i, q) in self.f.iter().enumerate() {
            for e in q.terms.keys() {
                if z_degree(e, m) == 0 && e.iter().any(|&k| k > 0) {
                    return Err(invalid(format!("f[{i}] term {e:?} depends on y along z = 0")));
                }
            }
        }
        for (i, q) in self.h.iter().enumerate() {
            for e in q.terms.keys() {
                if z_degree(e, m) == 1 && e[..m].iter().any(|&k| k > 0) {
                    return Err(invalid(format!("h[{i}] term {e:?} makes D_z h(y, 0) depend on y")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of `f(y,Rz) = f`, `g(y,Rz) = -g`, `R h(y,Rz) = -h` at
    /// fixed pseudo-random points.
    pub fn reversibility_defect(&self) -> f64 {
        let mut rng = Pcg32::new(0x5eed, 7);
        let r = self.structure.r();
        let q = 2 * self.p;
        let mut worst: f64 = 0.0;
        for _ in 0..16 {
            let pt: Vec<f64> = (0..self.nvars())
                .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
                .collect();
            let z = DVector::from_column_slice(&pt[self.m..]);
            let rz = r * &z;
            let mut img = pt.clone();
            img[self.m..].copy_from_slice(rz.as_slice());
            for q in &self.f {
                worst = worst.max((q.eval(&img) - q.eval(&pt)).abs());
            }
            for q in &self.g {
                worst = worst.max((q.eval(&img) + q.eval(&pt)).abs());
            }
            let h0 = DVector::from_iterator(q, self.h.iter().map(|c| c.eval(&pt)));
            let h1 = DVector::from_iterator(q, self.h.iter().map(|c| c.eval(&img)));
            worst = worst.max((r * h1 + h0).amax());
        }
        worst
    }

    pub fn dominant_part(&self) -> DominantPart {
        let omega = DVector::from_iterator(self.n, self.f.iter().map(|q| q.constant_term()));
        let q = 2 * self.p;
        let mut fl = DMatrix::zeros(q, q);
        for (i, c) in self.h.iter().enumerate() {
            let lin = c.linear_part();
            for j in 0..q {
                fl[(i, j)] = lin[self.m + j];
            }
        }
        DominantPart { omega, floquet: fl }
    }

    pub fn floquet_structured(&self) -> Result<StructuredMatrix> {
        StructuredMatrix::new(self.dominant_part().floquet, Parity::Minus, &self.structure, &Default::default())
    }

    /// `(D_eps)^* X` for `D_eps(x, y, z) = (x, eps y, eps z)`.
    pub fn scaled(&self, eps: f64) -> IntegrableField {
        let s = vec![eps; self.nvars()];
        let mut out = self.clone();
        out.f = self.f.iter().map(|q| q.rescaled(&s)).collect();
        out.g = self.g.iter().map(|q| q.rescaled(&s).scaled(1.0 / eps)).collect();
        out.h = self.h.iter().map(|q| q.rescaled(&s).scaled(1.0 / eps)).collect();
        out
    }

    /// Largest coefficient of `X - N(X)`.
    pub fn distance_to_dominant(&self) -> f64 {
        let n = IntegrableField::normal_linear(
            self.dominant_part().omega.as_slice(),
            self.m,
            &self.dominant_part().floquet,
            self.structure.clone(),
        )
        .expect("shapes are consistent");
        self.f
            .iter()
            .chain(&self.g)
            .chain(&self.h)
            .zip(n.f.iter().chain(&n.g).chain(&n.h))
            .flat_map(|(a, b)| a.add(&b.scaled(-1.0)).terms.into_values())
            .fold(0.0, |acc, c| acc.max(c.abs()))
    }

    /// Re-expansion around `y = nu`, so the torus `y = nu` becomes `y = 0`.
    pub fn localize(&self, nu: &[f64]) -> Result<IntegrableField> {
        if nu.len() != self.m {
            return Err(dim_err(format!("nu has {} entries, m = {}", nu.len(), self.m)));
        }
        let mut s = nu.to_vec();
        s.resize(self.nvars(), 0.0);
        let mut out = self.clone();
        out.f = self.f.iter().map(|q| q.shifted(&s)).collect();
        out.g = self.g.iter().map(|q| q.shifted(&s)).collect();
        out.h = self.h.iter().map(|q| q.shifted(&s)).collect();
        out.anchor = self.anchor.iter().zip(nu).map(|(a, b)| a + b).collect();
        Ok(out)
    }

    /// Adds `delta1` to the frequencies and `sum delta2_i A_i` to `Omega`.
    pub fn shift_parameters(&self, delta1: &[f64], delta2: &[f64]) -> Result<IntegrableField> {
        if delta1.len() != self.n {
            return Err(dim_err("frequency shift has the wrong length"));
        }
        let mut out = self.clone();
        let d = self.nvars();
        for (q, &v) in out.f.iter_mut().zip(delta1) {
            *q = q.add(&Poly::constant(d, v));
        }
        if delta2.iter().any(|&v| v != 0.0) {
            let unf = self
                .unfolding
                .as_ref()
                .ok_or_else(|| invalid("a Floquet shift needs an unfolding"))?;
            if unf.codimension() != delta2.len() {
                return Err(dim_err("Floquet shift length differs from the codimension"));
            }
            let mut a = DMatrix::zeros(2 * self.p, 2 * self.p);
            for (dir, &c) in unf.directions.iter().zip(delta2) {
                a += &dir.entries * c;
            }
            for (i, q) in out.h.iter_mut().enumerate() {
                for j in 0..2 * self.p {
                    *q = q.add(&Poly::linear(d, self.m + j, a[(i, j)]));
                }
            }
        }
        Ok(out)
    }

    /// Components at `(y, z)` given as jets.
    pub fn eval_jet(&self, vars: &[Jet]) -> (Vec<Jet>, Vec<Jet>, Vec<Jet>) {
        (
            self.f.iter().map(|q| q.eval_jet(vars)).collect(),
            self.g.iter().map(|q| q.eval_jet(vars)).collect(),
            self.h.iter().map(|q| q.eval_jet(vars)).collect(),
        )
    }

    /// Affine part at `(y, z) = (0, 0)` in the layout of a Fourier mode.
    pub fn affine_jet(&self) -> ModeJet {
        let d = self.nvars();
        let vars: Vec<Jet> = (0..d).map(|i| Jet::variable(0.0, i, d)).collect();
        let (f, g, h) = self.eval_jet(&vars);
        jets_to_mode(&f, &g, &h, self.m)
    }
}

/// Packs value/gradient jets into a mode (gradient split into `y` and `z`).
pub(crate) fn jets_to_mode(f: &[Jet], g: &[Jet], h: &[Jet], m: usize) -> ModeJet {
    let q = h.len();
    let mut out = ModeJet::zeros(f.len(), m, q / 2);
    let put = |val: &mut DVector<C64>, eta: &mut DMatrix<C64>, zeta: &mut DMatrix<C64>, js: &[Jet]| {
        for (i, j) in js.iter().enumerate() {
            val[i] = C64::new(j.v, 0.0);
            for l in 0..m {
                eta[(i, l)] = C64::new(j.g[l], 0.0);
            }
            for l in 0..q {
                zeta[(i, l)] = C64::new(j.g[m + l], 0.0);
            }
        }
    };
    put(&mut out.f, &mut out.f_eta, &mut out.f_zeta, f);
    put(&mut out.g, &mut out.g_eta, &mut out.g_zeta, g);
    put(&mut out.h, &mut out.h_eta, &mut out.h_zeta, h);
    out
}

/// Integrable part of the forced oscillator: `x' = (1, omega)`, `z1' = z2`,
/// `z2' = hbar(z)`, with `R = diag(-1, 1)`.
pub fn planar_integrable(omega: f64, hbar: &Poly) -> Result<IntegrableField> {
    if hbar.nvars != 2 {
        return Err(dim_err("hbar is a polynomial in (z1, z2)"));
    }
    let f = vec![Poly::constant(2, 1.0), Poly::constant(2, omega)];
    let h = vec![Poly::linear(2, 1, 1.0), hbar.clone()];
    IntegrableField::new((2, 0, 1), f, Vec::new(), h, crate::presets::planar_structure())
}
