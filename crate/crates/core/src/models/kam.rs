//! One KAM iteration: solve the homological equation for the defect of
//! `Z = X + P`, conjugate by the affine map
//! `Phi(x, y, z) = (x + U, y + V0 + V1 y + V2 z, z + W0 + W1 y + W2 z)`
//! at the shifted parameters and measure the new defect.
//!
//! The conjugated field is sampled on a uniform angle grid with first-order
//! jets in `(y, z)` and transformed back to Fourier modes. The defect classes
//! are the `x`-component at `(y, z) = 0`, the value and `z`-derivative of the
//! `y`-component, and the value and `z`-derivative of the `z`-component.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{jets_to_mode, IntegrableField};
use crate::diophantine::DiophantineSpec;
use crate::error::{dim_err, invalid, Result};
use crate::fourier::{norm1, FourierField, ModeJet, C64};
use crate::homological::{self, NormalLinear};
use crate::linalg::Tolerances;
use crate::nondegen::{bht_i, bht_ii, FamilyAtPoint, Verdict};
use crate::poly::Jet;
use crate::revlin::{LinearUnfolding, Parity, StructuredMatrix};

/// Integrable base plus an angle-dependent perturbation (affine in `(y, z)`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbedField {
    pub base: IntegrableField,
    pub perturbation: FourierField,
}

impl PerturbedField {
    pub fn new(base: IntegrableField, perturbation: FourierField) -> Result<Self> {
        if perturbation.dims() != (base.n, base.m, base.p) {
            return Err(dim_err("perturbation and base have different dimensions"));
        }
        if perturbation.periods.iter().any(|&l| l != 1) {
            return Err(invalid("perturbations live on the base torus"));
        }
        Ok(PerturbedField { base, perturbation })
    }

    pub fn remainder(&self, rho: f64) -> f64 {
        defect_norm(&self.perturbation, rho)
    }

    /// Largest coefficient of `P + G_* P`.
    pub fn reversibility_defect(&self) -> f64 {
        self.perturbation
            .reversibility_defect(self.base.structure.r())
            .norm(0.0)
            .max(self.base.reversibility_defect())
    }
}

/// Weighted sup norm of the defect classes `f`, `g`, `g_zeta`, `h`, `h_zeta`.
pub fn defect_norm(field: &FourierField, rho: f64) -> f64 {
    let sup = |s: &[C64]| s.iter().map(|v| v.norm()).fold(0.0, f64::max);
    field
        .modes
        .iter()
        .map(|(k, j)| {
            let w = libm::exp(rho * norm1(k) as f64);
            let v = sup(j.f.as_slice())
                .max(sup(j.g.as_slice()))
                .max(sup(j.g_zeta.as_slice()))
                .max(sup(j.h.as_slice()))
                .max(sup(j.h_zeta.as_slice()));
            w * v
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KamOptions {
    /// Grid points per angle.
    pub grid: usize,
    /// Largest `|k|_1` kept in the new perturbation.
    pub k_out: usize,
    pub rho: f64,
}

impl Default for KamOptions {
    fn default() -> Self {
        KamOptions {
            grid: 32,
            k_out: 12,
            rho: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepReport {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub before: f64,
    pub after: f64,
    /// `after / before^2`.
    pub contraction: f64,
    pub residual: f64,
    pub min_divisor: f64,
    pub bht_i: Verdict,
    pub bht_ii: Verdict,
}

/// Real parts of a field's blocks and their angle derivatives at `x`.
struct Sampled {
    val: ModeJet,
    /// `d/dx_j` of every block.
    dx: Vec<ModeJet>,
}

fn sample(field: &FourierField, x: &[f64]) -> Sampled {
    let n = field.n;
    let mut val = field.empty_jet();
    let mut dx = vec![field.empty_jet(); n];
    for (k, j) in &field.modes {
        let arg: f64 = k.iter().zip(x).map(|(&a, &b)| a as f64 * b).sum();
        let e = C64::new(libm::cos(arg), libm::sin(arg));
        val.axpy(e, j);
        for (i, d) in dx.iter_mut().enumerate() {
            d.axpy(e * C64::new(0.0, k[i] as f64), j);
        }
    }
    let re = |m: &ModeJet| m.map(|v| C64::new(v.re, 0.0));
    Sampled {
        val: re(&val),
        dx: dx.iter().map(re).collect(),
    }
}

fn re_m(m: &DMatrix<C64>) -> DMatrix<f64> {
    m.map(|v| v.re)
}

fn re_v(v: &DVector<C64>) -> DVector<f64> {
    v.map(|c| c.re)
}

/// `a + M v` on jets.
fn affine_jets(a: &DVector<f64>, m: &DMatrix<f64>, v: &[Jet]) -> Vec<Jet> {
    let d = v.first().map_or(0, |j| j.g.len());
    (0..m.nrows())
        .map(|i| {
            let mut acc = Jet::constant(a[i], d);
            for (l, vl) in v.iter().enumerate() {
                acc.axpy(m[(i, l)], vl);
            }
            acc
        })
        .collect()
}

fn mat_jets(m: &DMatrix<f64>, v: &[Jet]) -> Vec<Jet> {
    affine_jets(&DVector::zeros(m.nrows()), m, v)
}

/// Jets of `(Phi^* Z)` at `(x, 0, 0)` minus the affine jet of `X`.
fn conjugated_defect(
    shifted: &IntegrableField,
    base_affine: &ModeJet,
    pert: &FourierField,
    psi: &FourierField,
    x: &[f64],
) -> Result<ModeJet> {
    let (n, m, p) = psi.dims();
    let q = 2 * p;
    let d = m + q;
    let s = sample(psi, x);
    let u = re_v(&s.val.f);
    let xs: Vec<f64> = x.iter().zip(u.iter()).map(|(a, b)| a + b).collect();

    // Phi(x, y, z) for (y, z) near 0
    let vars: Vec<Jet> = (0..d).map(|i| Jet::variable(0.0, i, d)).collect();
    let (yv, zv) = vars.split_at(m);
    let v1 = re_m(&s.val.g_eta);
    let v2 = re_m(&s.val.g_zeta);
    let w1 = re_m(&s.val.h_eta);
    let w2 = re_m(&s.val.h_zeta);
    let mut gy = DMatrix::zeros(m, d);
    gy.view_mut((0, 0), (m, m)).copy_from(&(DMatrix::identity(m, m) + &v1));
    gy.view_mut((0, m), (m, q)).copy_from(&v2);
    let mut gz = DMatrix::zeros(q, d);
    gz.view_mut((0, 0), (q, m)).copy_from(&w1);
    gz.view_mut((0, m), (q, q)).copy_from(&(DMatrix::identity(q, q) + &w2));
    let y_img = affine_jets(&re_v(&s.val.g), &gy, &vars);
    let z_img = affine_jets(&re_v(&s.val.h), &gz, &vars);

    // Z at the image point
    let mut img = y_img.clone();
    img.extend(z_img.iter().cloned());
    let (mut zx, mut zy, mut zz) = shifted.eval_jet(&img);
    let ps = sample(pert, &xs).val;
    let add = |tgt: &mut Vec<Jet>, c: &DVector<C64>, ce: &DMatrix<C64>, cz: &DMatrix<C64>| {
        let a = affine_jets(&re_v(c), &re_m(ce), &y_img);
        let b = mat_jets(&re_m(cz), &z_img);
        for ((t, a), b) in tgt.iter_mut().zip(&a).zip(&b) {
            *t = t.add(a).add(b);
        }
    };
    add(&mut zx, &ps.f, &ps.f_eta, &ps.f_zeta);
    add(&mut zy, &ps.g, &ps.g_eta, &ps.g_zeta);
    add(&mut zz, &ps.h, &ps.h_eta, &ps.h_zeta);

    // (D Phi)^{-1} Z
    let mut du = DMatrix::zeros(n, n);
    for j in 0..n {
        du.set_column(j, &re_v(&s.dx[j].f));
    }
    let ax = (DMatrix::identity(n, n) + du)
        .try_inverse()
        .ok_or_else(|| invalid("I + DU is singular"))?;
    let out_x = mat_jets(&ax, &zx);
    let row_rhs = |z_comp: &[Jet], val: fn(&ModeJet) -> &DVector<C64>, eta: fn(&ModeJet) -> &DMatrix<C64>, zeta: fn(&ModeJet) -> &DMatrix<C64>| {
        let rows = z_comp.len();
        let mut out = z_comp.to_vec();
        for j in 0..n {
            let dj = &s.dx[j];
            let e = re_m(eta(dj));
            let zm = re_m(zeta(dj));
            let v = re_v(val(dj));
            // d/dx_j of the row at (y, z)
            for i in 0..rows {
                let mut b = Jet::constant(v[i], d);
                for l in 0..m {
                    b.axpy(e[(i, l)], &yv[l]);
                }
                for l in 0..q {
                    b.axpy(zm[(i, l)], &zv[l]);
                }
                out[i] = out[i].sub(&b.mul(&out_x[j]));
            }
        }
        out
    };
    let ry = row_rhs(&zy, |j| &j.g, |j| &j.g_eta, |j| &j.g_zeta);
    let rz = row_rhs(&zz, |j| &j.h, |j| &j.h_eta, |j| &j.h_zeta);
    let mut lower = DMatrix::zeros(m + q, m + q);
    lower.view_mut((0, 0), (m, d)).copy_from(&gy);
    lower.view_mut((m, 0), (q, d)).copy_from(&gz);
    let linv = lower.try_inverse().ok_or_else(|| invalid("normal part of D Phi is singular"))?;
    let mut rhs = ry;
    rhs.extend(rz);
    let sol = mat_jets(&linv, &rhs);
    let (out_y, out_z) = sol.split_at(m);
    let mut mode = jets_to_mode(&out_x, out_y, out_z, m);
    mode.axpy(C64::new(-1.0, 0.0), base_affine);
    Ok(mode)
}

/// Fourier coefficients of grid samples, for `|k|_1 <= k_out`.
fn grid_transform(samples: &[ModeJet], n: usize, grid: usize, k_out: usize, template: &FourierField) -> FourierField {
    let mut out = template.clone();
    out.modes.clear();
    out.k_max = k_out;
    let half = (grid / 2).saturating_sub(1) as i64;
    let kmax = (k_out as i64).min(half);
    let ks: Vec<Vec<i64>> = lattice(n, kmax);
    let tw: Vec<C64> = (0..grid)
        .map(|j| {
            let t = -2.0 * core::f64::consts::PI * j as f64 / grid as f64;
            C64::new(libm::cos(t), libm::sin(t))
        })
        .collect();
    let total = samples.len() as f64;
    for k in ks {
        let mut acc = template.empty_jet();
        for (idx, s) in samples.iter().enumerate() {
            let mut rem = idx;
            let mut pow: i64 = 0;
            for &kj in k.iter().rev() {
                let j = (rem % grid) as i64;
                rem /= grid;
                pow += kj * j;
            }
            let e = tw[pow.rem_euclid(grid as i64) as usize];
            acc.axpy(e, s);
        }
        let acc = acc.map(|v| v / total);
        if !acc.is_zero() {
            out.modes.insert(k, acc);
        }
    }
    out
}

fn lattice(n: usize, kmax: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &out {
            for c in -kmax..=kmax {
                let mut w = v.clone();
                w.push(c);
                if norm1(&w) <= kmax {
                    next.push(w);
                }
            }
        }
        out = next;
    }
    out
}

fn grid_point(idx: usize, n: usize, grid: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut rem = idx;
    for xi in x.iter_mut().rev() {
        *xi = 2.0 * core::f64::consts::PI * (rem % grid) as f64 / grid as f64;
        rem /= grid;
    }
    x
}

/// One KAM step at the base's normal-linear part.
pub fn kam_step(z: &PerturbedField, spec: &DiophantineSpec, opts: &KamOptions, tol: &Tolerances) -> Result<(PerturbedField, StepReport)> {
    let x = &z.base;
    x.validate_higher_order()?;
    if opts.grid < 4 {
        return Err(invalid("grid must have at least 4 points per angle"));
    }
    let dom = x.dominant_part();
    let omega0 = StructuredMatrix::new(dom.floquet.clone(), Parity::Minus, &x.structure, tol)?;
    let unf = x.unfolding.clone().unwrap_or(LinearUnfolding {
        base: omega0.clone(),
        directions: Vec::new(),
    });
    let nx = NormalLinear::new(dom.omega.as_slice().to_vec(), omega0.clone(), unf.clone(), x.structure.clone())?
        .with_commuting(x.commuting.clone());
    let fam = FamilyAtPoint::from_unfolding(dom.omega.clone(), &unf, x.structure.clone())?.with_commuting(x.commuting.clone());
    let v_i = bht_i(&omega0, &x.structure, tol)?.verdict;
    let v_ii = bht_ii(&fam, tol)?.verdict;

    let sol = homological::solve(&nx, &z.perturbation, spec, tol)?;
    let before = defect_norm(&z.perturbation, opts.rho);
    let shifted = x.shift_parameters(&sol.lambda1, &sol.lambda2)?;
    let base_affine = x.affine_jet();
    let n = x.n;
    let total = opts
        .grid
        .checked_pow(n as u32)
        .ok_or_else(|| invalid(format!("grid {}^{n} is too large", opts.grid)))?;
    let mut samples = Vec::with_capacity(total);
    for idx in 0..total {
        let pt = grid_point(idx, n, opts.grid);
        samples.push(conjugated_defect(&shifted, &base_affine, &z.perturbation, &sol.psi, &pt)?);
    }
    let new_p = grid_transform(&samples, n, opts.grid, opts.k_out, &z.perturbation);
    let after = defect_norm(&new_p, opts.rho);
    let report = StepReport {
        lambda1: sol.lambda1.clone(),
        lambda2: sol.lambda2.clone(),
        before,
        after,
        contraction: if before > 0.0 { after / (before * before) } else { 0.0 },
        residual: sol.residual,
        min_divisor: sol.min_divisor,
        bht_i: v_i,
        bht_ii: v_ii,
    };
    Ok((
        PerturbedField {
            base: x.clone(),
            perturbation: new_p,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::revlin::lcu;

    /// `n = 2, m = 1, p = 2` with the R of the double-resonance example.
    pub(crate) fn kam_base() -> IntegrableField {
        let st = presets::double_resonance_structure();
        let tol = Tolerances::default();
        let om = presets::double_resonance_omega(0.2, 0.3);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut x = IntegrableField::normal_linear(&[1.0, phi], 1, &om, st.clone()).unwrap();
        // higher-order terms: f even, g odd, h R-odd under z -> Rz
        x.f[0].add_term(&[1, 1, 0, 0, 0], 0.3);
        x.f[1].add_term(&[0, 0, 1, 1, 0], -0.2);
        x.g[0].add_term(&[0, 0, 1, 0, 1], 0.4);
        x.h[0].add_term(&[0, 0, 0, 1, 1], 0.5);
        x.h[2].add_term(&[0, 1, 0, 0, 1], -0.25);
        let base = StructuredMatrix::minus(om, &st).unwrap();
        let unf = lcu(&base, &st, &tol).unwrap();
        x.with_unfolding(unf).unwrap()
    }

    /// Single-mode perturbation in the `f`, `g_zeta` and `h_zeta` classes.
    pub(crate) fn single_mode(x: &IntegrableField, k: &[i64], eps: f64) -> FourierField {
        let r = x.structure.r().clone();
        let mut p = FourierField::zero(x.n, x.m, x.p, norm1(k) as usize);
        let j = p.mode_mut(k);
        j.f[0] = C64::new(0.5, 0.2);
        j.f[1] = C64::new(-0.3, 0.1);
        for (i, v) in j.g_zeta.iter_mut().enumerate() {
            *v = C64::new(0.1 * i as f64 - 0.15, 0.05);
        }
        for (i, v) in j.h_zeta.iter_mut().enumerate() {
            *v = C64::new(((i * 7) % 5) as f64 * 0.2 - 0.4, ((i * 3) % 4) as f64 * 0.1 - 0.15);
        }
        let p = p.symmetrize_reality();
        let mut rev = p.reversal_image(&r).scaled(C64::new(-0.5, 0.0));
        rev.axpy(C64::new(0.5, 0.0), &p).unwrap();
        rev.scaled(C64::new(eps, 0.0))
    }

    #[test]
    fn fixtures_are_valid() {
        let x = kam_base();
        x.validate_higher_order().unwrap();
        assert_eq!(x.reversibility_defect(), 0.0);
        let p = single_mode(&x, &[1, 1], 1.0);
        assert!(p.reversibility_defect(x.structure.r()).norm(0.0) < 1e-16);
        assert!(p.modes.contains_key(&vec![-1, -1]));
    }

    #[test]
    fn unperturbed_step_is_identity() {
        let x = kam_base();
        let z = PerturbedField::new(x.clone(), FourierField::zero(2, 1, 2, 4)).unwrap();
        let spec = DiophantineSpec::new(0.01, 1.5, 12);
        let (out, rep) = kam_step(&z, &spec, &KamOptions { grid: 8, ..Default::default() }, &Tolerances::default()).unwrap();
        assert!(rep.lambda1.iter().chain(&rep.lambda2).all(|&v| v == 0.0));
        assert_eq!(rep.before, 0.0);
        assert!(rep.after < 1e-15, "{}", rep.after);
        assert_eq!(out.base, x);
    }

    #[test]
    fn quadratic_contraction() {
        let x = kam_base();
        let spec = DiophantineSpec::new(0.01, 1.5, 12);
        let opts = KamOptions { grid: 16, k_out: 8, rho: 0.0 };
        let mut pts = Vec::new();
        for eps in [1e-2, 3e-3, 1e-3] {
            let z = PerturbedField::new(x.clone(), single_mode(&x, &[1, 1], eps)).unwrap();
            let (out, rep) = kam_step(&z, &spec, &opts, &Tolerances::default()).unwrap();
            assert!(rep.after < rep.before);
            assert!(out.reversibility_defect() < 1e-12);
            pts.push((eps, rep.after));
        }
        let slope = (pts[0].1 / pts[2].1).log10() / (pts[0].0 / pts[2].0).log10();
        assert!((1.7..=2.3).contains(&slope), "{slope} {pts:?}");
    }

    #[test]
    fn constant_floquet_perturbation_shifts_parameters() {
        let x = kam_base();
        let r = x.structure.r().clone();
        let mut p = FourierField::zero(2, 1, 2, 0);
        let a = x.structure.project(&DMatrix::from_fn(4, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0), Parity::Minus);
        p.mode_mut(&[0, 0]).h_zeta = crate::fourier::to_c(&(a * 1e-3));
        assert!(p.reversibility_defect(&r).norm(0.0) < 1e-18);
        let z = PerturbedField::new(x.clone(), p.clone()).unwrap();
        let spec = DiophantineSpec::new(0.01, 1.5, 12);
        let tol = Tolerances::default();
        let (_, rep) = kam_step(&z, &spec, &KamOptions { grid: 8, ..Default::default() }, &tol).unwrap();
        let dom = x.dominant_part();
        let nx = NormalLinear::new(
            dom.omega.as_slice().to_vec(),
            StructuredMatrix::minus(dom.floquet.clone(), &x.structure).unwrap(),
            x.unfolding.clone().unwrap(),
            x.structure.clone(),
        )
        .unwrap();
        let sol = homological::solve(&nx, &p, &spec, &tol).unwrap();
        assert_eq!(rep.lambda2, sol.lambda2);
        assert!(rep.lambda2.iter().any(|v| v.abs() > 1e-6));
        assert!(rep.after < 1e-2 * rep.before, "{} {}", rep.after, rep.before);
    }
}
