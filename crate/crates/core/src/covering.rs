//! Co-rotating coordinates: unimodular changes of the torus angles, Van der
//! Pol rotations of normal planes and `l:1` coverings with their deck map.
//!
//! Conventions. A unimodular `sigma` acts on angles as `x -> sigma x`, so
//! frequencies transform by `sigma` and integer covectors by `sigma^{-T}`.
//! Normal planes are indexed from 1: block `j` is `(z_{2j-1}, z_{2j})`, and
//! the rotation by `theta` is `exp(theta J)` with `J = [[0, -1], [1, 0]]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{dim_err, invalid, Error, Result};
use crate::fourier::{locate_in, to_c, unit_phase, FourierField, Location, ModeJet, C64};
use crate::linalg::{null_space, Tolerances};
use crate::revlin::ReversingStructure;

/// An element of `GL(n, Z)` together with its inverse transpose.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnimodularTransform {
    pub sigma: Vec<Vec<i64>>,
    pub inv_t: Vec<Vec<i64>>,
}

impl UnimodularTransform {
    pub fn identity(n: usize) -> Self {
        let id: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i64).collect()).collect();
        UnimodularTransform {
            sigma: id.clone(),
            inv_t: id,
        }
    }

    /// Builds the transform from `sigma` alone, checking `|det| = 1`.
    pub fn from_sigma(sigma: Vec<Vec<i64>>) -> Result<Self> {
        let n = sigma.len();
        if sigma.iter().any(|r| r.len() != n) {
            return Err(dim_err("sigma must be square"));
        }
        let d = det_exact(&sigma)?;
        if d.abs() != 1 {
            return Err(invalid(format!("det(sigma) = {d}, expected +-1")));
        }
        let inv = inverse_unimodular(&sigma, d)?;
        let inv_t = (0..n).map(|i| (0..n).map(|j| inv[j][i]).collect()).collect();
        Ok(UnimodularTransform { sigma, inv_t })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim())
    }

    pub fn det(&self) -> Result<i128> {
        det_exact(&self.sigma)
    }

    /// `sigma omega`.
    pub fn frequency(&self, omega: &[f64]) -> Vec<f64> {
        self.sigma
            .iter()
            .map(|row| row.iter().zip(omega).map(|(&s, &w)| s as f64 * w).sum())
            .collect()
    }

    /// `sigma^{-T} k`.
    pub fn covector(&self, k: &[i64]) -> Vec<i64> {
        self.inv_t
            .iter()
            .map(|row| row.iter().zip(k).map(|(&s, &v)| s * v).sum())
            .collect()
    }

    fn sigma_c(&self) -> DMatrix<C64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| C64::new(self.sigma[i][j] as f64, 0.0))
    }

    /// Field in the new angles `x' = sigma x`.
    pub fn apply(&self, field: &FourierField) -> Result<FourierField> {
        if field.n != self.dim() {
            return Err(dim_err(format!("field has n = {}, transform has {}", field.n, self.dim())));
        }
        if field.periods.iter().any(|&l| l != 1) {
            return Err(invalid("unimodular transforms act on base fields only"));
        }
        let s = self.sigma_c();
        let mut out = field.clone();
        out.modes.clear();
        for (k, j) in &field.modes {
            let mut t = j.clone();
            t.f = &s * &j.f;
            t.f_eta = &s * &j.f_eta;
            t.f_zeta = &s * &j.f_zeta;
            out.modes.insert(self.covector(k), t);
        }
        out.k_max = out.modes.keys().map(|k| crate::fourier::norm1(k) as usize).max().unwrap_or(0);
        Ok(out)
    }
}

fn checked(v: Option<i128>) -> Result<i128> {
    v.ok_or(Error::Overflow)
}

fn det_exact(a: &[Vec<i64>]) -> Result<i128> {
    // Bareiss elimination
    let n = a.len();
    if n == 0 {
        return Ok(1);
    }
    let mut m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(i) => {
                    m.swap(i, k);
                    sign = -sign;
                }
                None => return Ok(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let a = checked(m[i][j].checked_mul(m[k][k]))?;
                let b = checked(m[i][k].checked_mul(m[k][j]))?;
                m[i][j] = checked(a.checked_sub(b))? / prev;
            }
        }
        prev = m[k][k];
    }
    Ok(sign * m[n - 1][n - 1])
}

fn inverse_unimodular(a: &[Vec<i64>], det: i128) -> Result<Vec<Vec<i64>>> {
    // row reduction by gcd steps, exact over i128
    let n = a.len();
    let mut m: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut inv: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
    for c in 0..n {
        loop {
            let piv = (c..n).filter(|&i| m[i][c] != 0).min_by_key(|&i| m[i][c].abs());
            let Some(piv) = piv else {
                return Err(invalid(format!("matrix is singular (det {det})")));
            };
            m.swap(c, piv);
            inv.swap(c, piv);
            let mut done = true;
            for i in c + 1..n {
                let q = m[i][c] / m[c][c];
                if q != 0 {
                    for j in 0..n {
                        m[i][j] = checked(m[i][j].checked_sub(checked(q.checked_mul(m[c][j]))?))?;
                        inv[i][j] = checked(inv[i][j].checked_sub(checked(q.checked_mul(inv[c][j]))?))?;
                    }
                }
                if m[i][c] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if m[c][c].abs() != 1 {
            return Err(invalid("matrix is not unimodular"));
        }
    }
    for c in (0..n).rev() {
        let s = m[c][c];
        for j in 0..n {
            m[c][j] *= s;
            inv[c][j] *= s;
        }
        for i in 0..c {
            let q = m[i][c];
            if q != 0 {
                for j in 0..n {
                    m[i][j] = checked(m[i][j].checked_sub(checked(q.checked_mul(m[c][j]))?))?;
                    inv[i][j] = checked(inv[i][j].checked_sub(checked(q.checked_mul(inv[c][j]))?))?;
                }
            }
        }
    }
    inv.into_iter()
        .map(|r| r.into_iter().map(|v| i64::try_from(v).map_err(|_| Error::Overflow)).collect())
        .collect()
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

/// `sigma` in `SL(n, Z)` with `sigma^{-T} k = (k1, 0, .., 0)`.
///
/// `k1 = gcd(k) > 0` whenever `n >= 2`; for `n = 1` the only choice is
/// `sigma = 1` and `k1 = k`.
pub fn normalize_resonance(k: &[i64]) -> Result<(UnimodularTransform, i64)> {
    let n = k.len();
    if n == 0 || k.iter().all(|&v| v == 0) {
        return Err(invalid("resonance vector must be nonzero"));
    }
    if n == 1 {
        return Ok((UnimodularTransform::identity(1), k[0]));
    }
    let g = k.iter().fold(0, |a, &b| gcd(a, b));
    let mut v: Vec<i128> = k.iter().map(|&x| (x / g) as i128).collect();
    // u v = e1 with u unimodular; rows of u are updated alongside v.
    let mut u: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
    loop {
        let nz: Vec<usize> = (0..n).filter(|&i| v[i] != 0).collect();
        let p = *nz.iter().min_by_key(|&&i| v[i].abs()).expect("v is nonzero");
        if nz.len() == 1 {
            v.swap(0, p);
            u.swap(0, p);
            if p != 0 {
                // keep det(u) = det of the row operations; the swap flips it
                for x in u[p].iter_mut() {
                    *x = -*x;
                }
                v[p] = -v[p];
            }
            if v[0] < 0 {
                v[0] = -v[0];
                for x in u[0].iter_mut() {
                    *x = -*x;
                }
                for x in u[1].iter_mut() {
                    *x = -*x;
                }
                v[1] = -v[1];
            }
            break;
        }
        for &i in &nz {
            if i == p {
                continue;
            }
            let q = v[i].div_euclid(v[p]);
            v[i] -= q * v[p];
            for j in 0..n {
                u[i][j] = checked(u[i][j].checked_sub(checked(q.checked_mul(u[p][j]))?))?;
            }
        }
    }
    debug_assert_eq!(v[0], 1);
    // sigma^{-T} = u
    let inv_t: Vec<Vec<i64>> = u
        .iter()
        .map(|r| r.iter().map(|&x| i64::try_from(x).map_err(|_| Error::Overflow)).collect())
        .collect::<Result<_>>()?;
    let inv_t_t: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| inv_t[j][i]).collect()).collect();
    let sigma = inverse_unimodular(&inv_t_t, 1)?;
    let t = UnimodularTransform { sigma, inv_t };
    debug_assert_eq!(t.det().ok(), Some(1));
    Ok((t, g))
}

/// Describes an `l:1` covering that removes the resonance `k1 omega_1 = alpha_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoveringData {
    pub l: i64,
    /// Normal planes to rotate, 1-based.
    pub j: Vec<usize>,
    pub k1: i64,
    pub sigma: Vec<Vec<i64>>,
}

impl CoveringData {
    pub fn new(l: i64, j: Vec<usize>, k1: i64, n: usize) -> Self {
        CoveringData {
            l,
            j,
            k1,
            sigma: UnimodularTransform::identity(n).sigma,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.l < 1 {
            return Err(invalid(format!("covering order l = {} must be >= 1", self.l)));
        }
        check_blocks(&self.j, p)?;
        if gcd(self.k1, self.l) != 1 {
            return Err(invalid(format!(
                "k1 = {} is not coprime to l = {}; the covering is not compatible",
                self.k1, self.l
            )));
        }
        Ok(())
    }

    /// Deck matrix `S = exp(2 pi k1 / l J)` on the selected planes.
    pub fn deck_matrix(&self, p: usize) -> DMatrix<f64> {
        let c = unit_phase(self.k1, self.l);
        plane_rotation(p, &self.j, c.re, c.im)
    }
}

fn check_blocks(j: &[usize], p: usize) -> Result<()> {
    if j.is_empty() {
        return Err(invalid("no normal plane selected"));
    }
    for &b in j {
        if b == 0 || b > p {
            return Err(invalid(format!("plane index {b} out of range 1..={p}")));
        }
    }
    Ok(())
}

/// `cos I + sin J` on the selected planes, identity elsewhere.
pub fn plane_rotation(p: usize, blocks: &[usize], cos: f64, sin: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(2 * p, 2 * p);
    for &b in blocks {
        let i = 2 * (b - 1);
        r[(i, i)] = cos;
        r[(i + 1, i + 1)] = cos;
        r[(i, i + 1)] = -sin;
        r[(i + 1, i)] = sin;
    }
    r
}

fn j_hat(p: usize, blocks: &[usize]) -> DMatrix<f64> {
    let mut jm = DMatrix::zeros(2 * p, 2 * p);
    for &b in blocks {
        let i = 2 * (b - 1);
        jm[(i, i + 1)] = -1.0;
        jm[(i + 1, i)] = 1.0;
    }
    jm
}

/// Spectral pieces of the plane rotation: `rot(theta) = P0 + e^{i theta} P+ + e^{-i theta} P-`.
fn rotation_parts(p: usize, blocks: &[usize]) -> [DMatrix<C64>; 3] {
    let jc = to_c(&j_hat(p, blocks));
    let mut proj = DMatrix::<C64>::zeros(2 * p, 2 * p);
    for &b in blocks {
        let i = 2 * (b - 1);
        proj[(i, i)] = C64::new(1.0, 0.0);
        proj[(i + 1, i + 1)] = C64::new(1.0, 0.0);
    }
    let p0 = DMatrix::<C64>::identity(2 * p, 2 * p) - &proj;
    let half = C64::new(0.5, 0.0);
    let ij = &jc * C64::new(0.0, 1.0);
    let plus = (&proj - &ij) * half;
    let minus = (&proj + &ij) * half;
    [p0, plus, minus]
}

fn shifted(k: &[i64], s: i64) -> Vec<i64> {
    let mut out = k.to_vec();
    out[0] += s;
    out
}

/// Push-forward under `z = rot(shift x_1 / l_1) zeta` on the selected planes.
fn rotate(field: &FourierField, blocks: &[usize], shift: i64) -> Result<FourierField> {
    if field.n == 0 {
        return Err(invalid("the torus must have at least one angle"));
    }
    check_blocks(blocks, field.p)?;
    if shift == 0 {
        return Ok(field.clone());
    }
    for (k, jet) in &field.modes {
        let row_eta = jet.f_eta.row(0).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let row_zeta = jet.f_zeta.row(0).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if row_eta.max(row_zeta) > 0.0 {
            return Err(invalid(format!(
                "x_1' depends on (y, z) at k = {k:?}; the field is not in Floquet form"
            )));
        }
    }
    let [p0, pp, pm] = rotation_parts(field.p, blocks);
    let rot = [(0, &p0), (shift, &pp), (-shift, &pm)];
    let rot_inv = [(0, &p0), (-shift, &pp), (shift, &pm)];
    let rate = shift as f64 / field.periods[0] as f64;
    let jc = to_c(&j_hat(field.p, blocks));
    let mut out = field.clone();
    out.modes.clear();
    for (k, jet) in &field.modes {
        {
            let t = out.mode_mut(k);
            t.f += &jet.f;
            t.f_eta += &jet.f_eta;
            t.g += &jet.g;
            t.g_eta += &jet.g_eta;
            t.h_zeta -= &jc * (jet.f[0] * rate);
        }
        for (s, pr) in rot {
            let t = out.mode_mut(&shifted(k, s));
            t.f_zeta += &jet.f_zeta * pr;
            t.g_zeta += &jet.g_zeta * pr;
        }
        for (s1, p1) in rot_inv {
            let t = out.mode_mut(&shifted(k, s1));
            t.h += p1 * &jet.h;
            t.h_eta += p1 * &jet.h_eta;
            let left = p1 * &jet.h_zeta;
            for (s2, p2) in rot {
                let t = out.mode_mut(&shifted(k, s1 + s2));
                t.h_zeta += &left * p2;
            }
        }
    }
    out.modes.retain(|_, j| !j.is_zero());
    out.k_max = out
        .modes
        .keys()
        .map(|k| crate::fourier::norm1(k) as usize)
        .max()
        .unwrap_or(0)
        .max(field.k_max);
    Ok(out)
}

/// Van der Pol transformation `z_II -> e^{i k1 x_1} z_II` on the planes `j` (1-based).
pub fn vanderpol(field: &FourierField, j: &[usize], k1: i64) -> Result<FourierField> {
    rotate(field, j, k1)
}

/// The deck transformation of a covering.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeckMap {
    pub l: i64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    pub s: DMatrix<f64>,
}

/// Point on the cover: sheet index, base angles and normal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverPoint {
    pub sheet: i64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl DeckMap {
    /// `F(sheet, x, y, zeta) = (sheet - 1, x, y, S zeta)`.
    pub fn apply(&self, q: &CoverPoint) -> CoverPoint {
        let z = &self.s * DVector::from_column_slice(&q.zeta);
        CoverPoint {
            sheet: (q.sheet - 1).rem_euclid(self.l),
            x: q.x.clone(),
            y: q.y.clone(),
            zeta: z.as_slice().to_vec(),
        }
    }

    /// `S^e`, by repeated multiplication.
    pub fn power(&self, e: i64) -> DMatrix<f64> {
        let mut out = DMatrix::identity(self.s.nrows(), self.s.ncols());
        for _ in 0..e.rem_euclid(self.l) {
            out = &out * &self.s;
        }
        out
    }
}

/// Covering projection `Pi(sheet, x, y, zeta) = (x, y, rot(k1 x_1 / l) S^sheet zeta)`.
pub fn project_point(cov: &CoveringData, deck: &DeckMap, q: &CoverPoint) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = q.zeta.len() / 2;
    let th = cov.k1 as f64 * q.x[0] / cov.l as f64;
    let r = plane_rotation(p, &cov.j, libm::cos(th), libm::sin(th));
    let z = r * (deck.power(q.sheet) * DVector::from_column_slice(&q.zeta));
    (q.x.clone(), q.y.clone(), z.as_slice().to_vec())
}

/// Lifts a base field to the `l`-fold cover and returns it with the deck map.
///
/// The lifted field uses angle `xi_1` of period `2 pi l` and is expressed in
/// the co-rotating normal coordinates `zeta`.
pub fn lift_to_cover(field: &FourierField, cov: &CoveringData) -> Result<(FourierField, DeckMap)> {
    cov.validate(field.p)?;
    if field.periods.iter().any(|&l| l != 1) {
        return Err(invalid("lift expects a field on the base torus"));
    }
    let t = UnimodularTransform::from_sigma(cov.sigma.clone())?;
    let base = if t.is_identity() { field.clone() } else { t.apply(field)? };
    let mut cover = base.clone();
    cover.modes.clear();
    for (k, jet) in &base.modes {
        cover.modes.insert(shifted(k, k[0] * (cov.l - 1)), jet.clone());
    }
    cover.periods[0] = cov.l;
    cover.k_max = base.k_max * cov.l as usize;
    let lifted = rotate(&cover, &cov.j, cov.k1)?;
    let deck = DeckMap {
        l: cov.l,
        s: cov.deck_matrix(field.p),
    };
    Ok((lifted, deck))
}

/// `D Pi X_hat` at the cover point over `(x, y, z)` on sheet `sheet`.
pub fn push_forward_at(
    lifted: &FourierField,
    cov: &CoveringData,
    deck: &DeckMap,
    sheet: i64,
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let p = lifted.p;
    let l = cov.l as f64;
    let th = cov.k1 as f64 * x[0] / l;
    let rot = plane_rotation(p, &cov.j, libm::cos(th), libm::sin(th));
    let sp = deck.power(sheet);
    // zeta with Pi(sheet, x, y, zeta) = (x, y, z)
    let zeta = sp.transpose() * (rot.transpose() * DVector::from_column_slice(z));
    let mut xi = x.to_vec();
    xi[0] += 2.0 * core::f64::consts::PI * sheet as f64;
    let (dx, dy, dzeta) = lifted.eval(&xi, y, zeta.as_slice());
    let full = &rot * &sp;
    let dz = &full * &dzeta + (&rot * j_hat(p, &cov.j) * &sp * &zeta) * (cov.k1 as f64 / l * dx[0]);
    (dx, dy, dz)
}

/// One symmetry check with the largest offending coefficient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymmetryCheck {
    pub name: String,
    pub passed: bool,
    pub defect: f64,
    pub location: Option<Location>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigmaReport {
    pub checks: Vec<SymmetryCheck>,
    pub passed: bool,
}

fn record(name: &str, d: &FourierField, tol: f64) -> SymmetryCheck {
    let defect = d.norm(0.0);
    SymmetryCheck {
        name: String::from(name),
        passed: defect <= tol,
        defect,
        location: d.locate(tol),
    }
}

fn record_jet(name: &str, k: &[i64], jet: &ModeJet, tol: f64) -> SymmetryCheck {
    let defect = jet.max_abs();
    SymmetryCheck {
        name: String::from(name),
        passed: defect <= tol,
        defect,
        location: locate_in(k, jet, tol),
    }
}

/// Checks reversibility, deck equivariance and the parities they imply.
pub fn check_sigma_reversibility(field: &FourierField, structure: &ReversingStructure, tol: f64) -> Result<SigmaReport> {
    let q = 2 * field.p;
    if structure.dim() != q {
        return Err(dim_err(format!("structure acts on R^{}, field has 2p = {q}", structure.dim())));
    }
    let r = structure.r();
    let mut checks = vec![record("G-reversibility", &field.reversibility_defect(r), tol)];
    let zero_k = vec![0; field.n];
    let z = field.zero_mode();
    let empty = field.empty_jet();
    let only = |f: &dyn Fn(&mut ModeJet)| {
        let mut e = empty.clone();
        f(&mut e);
        e
    };
    let vanish = |name: &str, fix: &DMatrix<f64>| {
        let fc = to_c(fix);
        let jet = only(&|e: &mut ModeJet| {
            e.g = z.g.clone();
            e.g_eta = z.g_eta.clone();
            e.g_zeta = DMatrix::zeros(field.m, q);
            let gz = &z.g_zeta * &fc;
            e.g_zeta.columns_mut(0, gz.ncols()).copy_from(&gz);
        });
        record_jet(name, &zero_k, &jet, tol)
    };
    let tols = Tolerances::default();
    let fix_r = null_space(&(r - DMatrix::identity(q, q)), &tols);
    checks.push(vanish("g vanishes on Fix(R)", &fix_r));
    if let Some(tw) = structure.twist().filter(|t| t.order >= 2) {
        let s = &tw.matrix;
        let sc = to_c(s);
        checks.push(record("F-equivariance", &field.deck_defect(s), tol));
        let f_even = only(&|e| {
            e.f_zeta = &z.f_zeta * &sc - &z.f_zeta;
        });
        checks.push(record_jet("f even in z_II", &zero_k, &f_even, tol));
        let g_even = only(&|e| {
            e.g_zeta = &z.g_zeta * &sc - &z.g_zeta;
        });
        checks.push(record_jet("g even in z_II", &zero_k, &g_even, tol));
        let h_odd = only(&|e| {
            e.h = &z.h - &sc * &z.h;
            e.h_eta = &z.h_eta - &sc * &z.h_eta;
            e.h_zeta = &z.h_zeta * &sc - &sc * &z.h_zeta;
        });
        checks.push(record_jet("h odd in z_II", &zero_k, &h_odd, tol));
        let sr = s * r;
        let fix_sr = null_space(&(&sr - DMatrix::identity(q, q)), &tols);
        checks.push(vanish("g vanishes on Fix(SR)", &fix_sr));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(SigmaReport { checks, passed })
}
