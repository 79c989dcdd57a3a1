//! Vector fields on `T^n x R^m x R^{2p}` that are affine in `(y, z)`, stored
//! as truncated Fourier series in the angles:
//!
//! ```text
//! x' = sum_k e^{i<k,x>} (f_k + f_eta_k y + f_zeta_k z)
//! y' = sum_k e^{i<k,x>} (g_k + g_eta_k y + g_zeta_k z)
//! z' = sum_k e^{i<k,x>} (h_k + h_eta_k y + h_zeta_k z)
//! ```
//!
//! On an `l`-fold cover the angle `x_j` runs over `R / 2 pi l_j Z` and the
//! basis functions are `e^{i k_j x_j / l_j}` (`periods[j] = l_j`).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{dim_err, Result};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Coefficients of one Fourier mode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeJet {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cvec"))]
    pub f: DVector<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cmat"))]
    pub f_eta: DMatrix<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cmat"))]
    pub f_zeta: DMatrix<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cvec"))]
    pub g: DVector<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cmat"))]
    pub g_eta: DMatrix<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cmat"))]
    pub g_zeta: DMatrix<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cvec"))]
    pub h: DVector<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cmat"))]
    pub h_eta: DMatrix<C64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cmat"))]
    pub h_zeta: DMatrix<C64>,
}

/// Names of the nine coefficient blocks, in storage order.
pub const COMPONENTS: [&str; 9] = ["f", "f_eta", "f_zeta", "g", "g_eta", "g_zeta", "h", "h_eta", "h_zeta"];

impl ModeJet {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        let q = 2 * p;
        ModeJet {
            f: DVector::zeros(n),
            f_eta: DMatrix::zeros(n, m),
            f_zeta: DMatrix::zeros(n, q),
            g: DVector::zeros(m),
            g_eta: DMatrix::zeros(m, m),
            g_zeta: DMatrix::zeros(m, q),
            h: DVector::zeros(q),
            h_eta: DMatrix::zeros(q, m),
            h_zeta: DMatrix::zeros(q, q),
        }
    }

    /// Blocks as column-major slices, in the order of [`COMPONENTS`].
    pub fn blocks(&self) -> [&[C64]; 9] {
        [
            self.f.as_slice(),
            self.f_eta.as_slice(),
            self.f_zeta.as_slice(),
            self.g.as_slice(),
            self.g_eta.as_slice(),
            self.g_zeta.as_slice(),
            self.h.as_slice(),
            self.h_eta.as_slice(),
            self.h_zeta.as_slice(),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [C64]; 9] {
        [
            self.f.as_mut_slice(),
            self.f_eta.as_mut_slice(),
            self.f_zeta.as_mut_slice(),
            self.g.as_mut_slice(),
            self.g_eta.as_mut_slice(),
            self.g_zeta.as_mut_slice(),
            self.h.as_mut_slice(),
            self.h_eta.as_mut_slice(),
            self.h_zeta.as_mut_slice(),
        ]
    }

    pub fn map(&self, mut op: impl FnMut(C64) -> C64) -> Self {
        let mut out = self.clone();
        for b in out.blocks_mut() {
            for v in b.iter_mut() {
                *v = op(*v);
            }
        }
        out
    }

    pub fn axpy(&mut self, a: C64, other: &ModeJet) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| *v == C64::new(0.0, 0.0)))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FourierField {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// Truncation order of `|k|_1`.
    pub k_max: usize,
    /// Covering factor of each angle (1 on the base torus).
    pub periods: Vec<i64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::modes"))]
    pub modes: BTreeMap<Vec<i64>, ModeJet>,
}

/// Location of a coefficient inside a field.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Location {
    pub k: Vec<i64>,
    pub component: String,
    pub row: usize,
    pub col: usize,
}

impl core::fmt::Display for Location {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}[{}, {}] at k = {:?}", self.component, self.row, self.col, self.k)
    }
}

impl FourierField {
    pub fn zero(n: usize, m: usize, p: usize, k_max: usize) -> Self {
        FourierField {
            n,
            m,
            p,
            k_max,
            periods: vec![1; n],
            modes: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.p)
    }

    pub fn same_shape(&self, other: &FourierField) -> Result<()> {
        if self.dims() != other.dims() || self.periods != other.periods {
            return Err(dim_err(format!(
                "field shapes differ: {:?} vs {:?}",
                (self.dims(), &self.periods),
                (other.dims(), &other.periods)
            )));
        }
        Ok(())
    }

    pub fn empty_jet(&self) -> ModeJet {
        ModeJet::zeros(self.n, self.m, self.p)
    }

    /// Mutable access to mode `k`, created as zero when absent.
    pub fn mode_mut(&mut self, k: &[i64]) -> &mut ModeJet {
        let (n, m, p) = self.dims();
        self.modes.entry(k.to_vec()).or_insert_with(|| ModeJet::zeros(n, m, p))
    }

    pub fn mode(&self, k: &[i64]) -> Option<&ModeJet> {
        self.modes.get(k)
    }

    pub fn zero_mode(&self) -> ModeJet {
        self.mode(&vec![0; self.n]).cloned().unwrap_or_else(|| self.empty_jet())
    }

    pub fn add_mode(&mut self, k: &[i64], a: C64, jet: &ModeJet) {
        self.mode_mut(k).axpy(a, jet);
    }

    pub fn scaled(&self, a: C64) -> Self {
        let mut out = self.clone();
        for j in out.modes.values_mut() {
            *j = j.map(|v| v * a);
        }
        out
    }

    pub fn axpy(&mut self, a: C64, other: &FourierField) -> Result<()> {
        self.same_shape(other)?;
        for (k, j) in &other.modes {
            self.add_mode(k, a, j);
        }
        Ok(())
    }

    pub fn sub(&self, other: &FourierField) -> Result<FourierField> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Drops modes with `|k|_1 > k_max` and exactly zero modes.
    pub fn truncate(&mut self, k_max: usize) {
        self.k_max = k_max;
        self.modes.retain(|k, j| norm1(k) <= k_max as i64 && !j.is_zero());
    }

    /// Weighted sup norm `max_k e^{rho |k|_1} max |coefficient|`.
    pub fn norm(&self, rho: f64) -> f64 {
        self.modes
            .iter()
            .map(|(k, j)| libm::exp(rho * norm1(k) as f64) * j.max_abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|c_{-k} - conj(c_k)|`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let zero = self.empty_jet();
        for (k, j) in &self.modes {
            let mk: Vec<i64> = k.iter().map(|v| -v).collect();
            let other = self.modes.get(&mk).unwrap_or(&zero);
            for (a, b) in j.blocks().iter().zip(other.blocks()) {
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y.conj()).norm());
                }
            }
        }
        worst
    }

    /// `(X_k + conj(X_{-k})) / 2`, the nearest real field.
    pub fn symmetrize_reality(&self) -> FourierField {
        let mut out = self.clone();
        out.modes.clear();
        let zero = self.empty_jet();
        let keys: Vec<Vec<i64>> = self
            .modes
            .keys()
            .flat_map(|k| [k.clone(), k.iter().map(|v| -v).collect()])
            .collect();
        for k in keys {
            if out.modes.contains_key(&k) {
                continue;
            }
            let mk: Vec<i64> = k.iter().map(|v| -v).collect();
            let a = self.modes.get(&k).unwrap_or(&zero);
            let b = self.modes.get(&mk).unwrap_or(&zero).map(|v| v.conj());
            let mut j = a.clone();
            j.axpy(C64::new(1.0, 0.0), &b);
            out.modes.insert(k, j.map(|v| v * 0.5));
        }
        out.modes.retain(|_, j| !j.is_zero());
        out
    }

    fn phase(&self, k: &[i64], x: &[f64]) -> C64 {
        let arg: f64 = k
            .iter()
            .zip(x)
            .zip(&self.periods)
            .map(|((&kj, &xj), &l)| kj as f64 * xj / l as f64)
            .sum();
        C64::new(libm::cos(arg), libm::sin(arg))
    }

    /// Real part of the field at `(x, y, z)`.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let yc = DVector::from_iterator(y.len(), y.iter().map(|&v| C64::new(v, 0.0)));
        let zc = DVector::from_iterator(z.len(), z.iter().map(|&v| C64::new(v, 0.0)));
        let mut fx = DVector::<C64>::zeros(self.n);
        let mut gy = DVector::<C64>::zeros(self.m);
        let mut hz = DVector::<C64>::zeros(2 * self.p);
        for (k, j) in &self.modes {
            let e = self.phase(k, x);
            fx += (&j.f + &j.f_eta * &yc + &j.f_zeta * &zc) * e;
            gy += (&j.g + &j.g_eta * &yc + &j.g_zeta * &zc) * e;
            hz += (&j.h + &j.h_eta * &yc + &j.h_zeta * &zc) * e;
        }
        (fx.map(|v| v.re), gy.map(|v| v.re), hz.map(|v| v.re))
    }

    /// Mode-wise matrix-valued evaluation of one block at the angle `x`.
    pub fn eval_block(&self, x: &[f64], pick: impl Fn(&ModeJet) -> DMatrix<C64>) -> DMatrix<f64> {
        let mut acc: Option<DMatrix<C64>> = None;
        for (k, j) in &self.modes {
            let term = pick(j) * self.phase(k, x);
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        acc.map(|a| a.map(|v| v.re)).unwrap_or_else(|| {
            let t = pick(&self.empty_jet());
            DMatrix::zeros(t.nrows(), t.ncols())
        })
    }

    /// First coefficient whose modulus exceeds `tol`, scanning modes in order.
    pub fn locate(&self, tol: f64) -> Option<Location> {
        for (k, j) in &self.modes {
            if let Some(loc) = locate_in(k, j, tol) {
                return Some(loc);
            }
        }
        None
    }
}

/// Symmetry actions on fields.
impl FourierField {
    /// Push-forward `G_* X` under `G(x, y, z) = (-x, y, R z)`.
    pub fn reversal_image(&self, r: &DMatrix<f64>) -> FourierField {
        let rc = to_c(r);
        let mut out = self.clone();
        out.modes.clear();
        for (k, j) in &self.modes {
            let mk: Vec<i64> = k.iter().map(|v| -v).collect();
            let img = ModeJet {
                f: -&j.f,
                f_eta: -&j.f_eta,
                f_zeta: -(&j.f_zeta * &rc),
                g: j.g.clone(),
                g_eta: j.g_eta.clone(),
                g_zeta: &j.g_zeta * &rc,
                h: &rc * &j.h,
                h_eta: &rc * &j.h_eta,
                h_zeta: &rc * &j.h_zeta * &rc,
            };
            out.modes.insert(mk, img);
        }
        out
    }

    /// `X + G_* X`; zero exactly when the field is reversible.
    pub fn reversibility_defect(&self, r: &DMatrix<f64>) -> FourierField {
        let mut d = self.reversal_image(r);
        d.axpy(C64::new(1.0, 0.0), self).expect("same shape");
        d
    }

    /// `X - G_* X`; zero exactly when the field is `G`-equivariant.
    pub fn equivariance_defect(&self, r: &DMatrix<f64>) -> FourierField {
        let mut d = self.reversal_image(r).scaled(C64::new(-1.0, 0.0));
        d.axpy(C64::new(1.0, 0.0), self).expect("same shape");
        d
    }

    /// `X(F u) - DF X(u)` for the deck map `F(x, y, z) = (x_1 - 2 pi, .., y, S z)`.
    pub fn deck_defect(&self, s: &DMatrix<f64>) -> FourierField {
        let sc = to_c(s);
        let l = self.periods.first().copied().unwrap_or(1);
        let mut out = self.clone();
        for (k, j) in out.modes.iter_mut() {
            let c = unit_phase(-k[0], l);
            let d = ModeJet {
                f: &j.f * c - &j.f,
                f_eta: &j.f_eta * c - &j.f_eta,
                f_zeta: &j.f_zeta * &sc * c - &j.f_zeta,
                g: &j.g * c - &j.g,
                g_eta: &j.g_eta * c - &j.g_eta,
                g_zeta: &j.g_zeta * &sc * c - &j.g_zeta,
                h: &j.h * c - &sc * &j.h,
                h_eta: &j.h_eta * c - &sc * &j.h_eta,
                h_zeta: &j.h_zeta * &sc * c - &sc * &j.h_zeta,
            };
            *j = d;
        }
        out
    }
}

/// `e^{2 pi i a / l}`, exact when `2a / l` is an integer.
pub fn unit_phase(a: i64, l: i64) -> C64 {
    let a = a.rem_euclid(l);
    if a == 0 {
        return C64::new(1.0, 0.0);
    }
    if 2 * a == l {
        return C64::new(-1.0, 0.0);
    }
    if 4 * a == l {
        return C64::new(0.0, 1.0);
    }
    if 4 * a == 3 * l {
        return C64::new(0.0, -1.0);
    }
    let t = 2.0 * core::f64::consts::PI * a as f64 / l as f64;
    C64::new(libm::cos(t), libm::sin(t))
}

pub(crate) fn locate_in(k: &[i64], j: &ModeJet, tol: f64) -> Option<Location> {
    let shapes = [
        (j.f.nrows(), 1),
        j.f_eta.shape(),
        j.f_zeta.shape(),
        (j.g.nrows(), 1),
        j.g_eta.shape(),
        j.g_zeta.shape(),
        (j.h.nrows(), 1),
        j.h_eta.shape(),
        j.h_zeta.shape(),
    ];
    let mut best: Option<(f64, Location)> = None;
    for ((name, block), (rows, _)) in COMPONENTS.iter().zip(j.blocks()).zip(shapes) {
        for (idx, v) in block.iter().enumerate() {
            let a = v.norm();
            if a > tol && best.as_ref().map_or(true, |b| a > b.0) {
                best = Some((
                    a,
                    Location {
                        k: k.to_vec(),
                        component: String::from(*name),
                        row: idx % rows.max(1),
                        col: idx / rows.max(1),
                    },
                ));
            }
        }
    }
    best.map(|b| b.1)
}

pub fn norm1(k: &[i64]) -> i64 {
    k.iter().map(|v| v.abs()).sum()
}

pub fn to_c(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

pub fn to_cv(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}
