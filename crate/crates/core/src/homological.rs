//! Truncated-Fourier solver for the homological equation
//!
//! ```text
//! [N, Psi] = L + Lambda1 d/dx + Omega(Lambda2) zeta d/dzeta,   N = sigma d/dx + Omega zeta d/dzeta
//! ```
//!
//! with `Psi = U d/dx + (V0 + V1 eta + V2 zeta) d/dy + (W0 + W1 eta + W2 zeta) d/dz`.
//! `Psi` is stored as a [`FourierField`]: `U` in the `f` slot, `V0, V1, V2` in
//! `g, g_eta, g_zeta` and `W0, W1, W2` in `h, h_eta, h_zeta`. The `f_eta` and
//! `f_zeta` parts of the right-hand side are not touched by the equation and
//! are ignored.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::diophantine::DiophantineSpec;
use crate::error::{dim_err, invalid, Error, Result};
use crate::fourier::{norm1, to_c, FourierField, ModeJet, C64, I};
use crate::linalg::{self, Tolerances};
use crate::nondegen::b_plus;
use crate::revlin::{adjoint_matrix, equivariant_bases, LinearUnfolding, Parity, ReversingStructure, StructuredMatrix};

/// Normal-linear data `(sigma, Omega(nu))` with the unfolding used for `Lambda2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalLinear {
    pub sigma: Vec<f64>,
    pub omega: StructuredMatrix,
    pub unfolding: LinearUnfolding,
    pub structure: ReversingStructure,
    /// Extra linear symmetries that `Psi` must commute with at `k = 0`.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mats"))]
    pub commuting: Vec<DMatrix<f64>>,
}

impl NormalLinear {
    pub fn new(sigma: Vec<f64>, omega: StructuredMatrix, unfolding: LinearUnfolding, structure: ReversingStructure) -> Result<Self> {
        let q = structure.dim();
        if omega.dim() != q || unfolding.dim() != q {
            return Err(dim_err(format!("Omega and the unfolding must act on R^{q}")));
        }
        if omega.parity != Parity::Minus {
            return Err(invalid("Omega must be infinitesimally reversible"));
        }
        Ok(NormalLinear {
            sigma,
            omega,
            unfolding,
            structure,
            commuting: Vec::new(),
        })
    }

    pub fn with_commuting(mut self, commuting: Vec<DMatrix<f64>>) -> Self {
        self.commuting = commuting;
        self
    }

    fn symmetries(&self) -> Vec<DMatrix<f64>> {
        let mut all = self.commuting.clone();
        if let Some(t) = self.structure.twist().filter(|t| t.order >= 2) {
            all.push(t.matrix.clone());
        }
        all
    }

    /// `sum_i lambda2_i A_i`.
    pub fn shift_matrix(&self, lambda2: &[f64]) -> DMatrix<f64> {
        let q = self.structure.dim();
        let mut m = DMatrix::zeros(q, q);
        for (a, &c) in self.unfolding.directions.iter().zip(lambda2) {
            m += &a.entries * c;
        }
        m
    }

    fn check_field(&self, field: &FourierField) -> Result<()> {
        if field.n != self.sigma.len() || 2 * field.p != self.structure.dim() {
            return Err(dim_err(format!(
                "field has (n, p) = ({}, {}), normal data has ({}, {})",
                field.n,
                field.p,
                self.sigma.len(),
                self.structure.p()
            )));
        }
        Ok(())
    }

    /// `<k, sigma>` with the covering periods taken into account.
    pub fn pairing(&self, field: &FourierField, k: &[i64]) -> f64 {
        k.iter()
            .zip(&self.sigma)
            .zip(&field.periods)
            .map(|((&kj, &s), &l)| kj as f64 * s / l as f64)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HomologicalSolution {
    pub psi: FourierField,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub residual: f64,
    /// Smallest divisor met over the nonzero modes.
    pub min_divisor: f64,
}

/// Smallest of `|<k,sigma>|`, `|i<k,sigma> - lambda_j|` and `|i<k,sigma> - (lambda_j - lambda_l)|`.
pub fn divisor(nu: f64, eigs: &[C64]) -> f64 {
    let iv = C64::new(0.0, nu);
    let mut d = nu.abs();
    for a in eigs {
        d = d.min((iv - a).norm());
        for b in eigs {
            d = d.min((iv - (a - b)).norm());
        }
    }
    d
}

/// Refusal threshold `0.5 gamma |k|^-tau`.
pub fn divisor_bound(k: &[i64], spec: &DiophantineSpec) -> f64 {
    0.5 * spec.gamma * libm::pow(norm1(k) as f64, -spec.tau)
}

fn solve_square(a: &DMatrix<C64>, b: &DMatrix<C64>, k: &[i64]) -> Result<DMatrix<C64>> {
    a.clone().lu().solve(b).ok_or_else(|| Error::SmallDivisor {
        k: k.to_vec(),
        divisor: 0.0,
        bound: 0.0,
    })
}

/// `vec(Omega W - W Omega) = ad vec(W)`.
fn ad_kron(om: &DMatrix<C64>) -> DMatrix<C64> {
    let q = om.nrows();
    let id = DMatrix::<C64>::identity(q, q);
    linalg::kron(&id, om) - linalg::kron(&om.transpose(), &id)
}

fn mode_nonzero(om: &DMatrix<C64>, adk: &DMatrix<C64>, nu: f64, k: &[i64], r: &ModeJet) -> Result<ModeJet> {
    let q = om.nrows();
    let iv = I * nu;
    let mut s = r.clone();
    s.f = &r.f / iv;
    s.f_eta.fill(C64::new(0.0, 0.0));
    s.f_zeta.fill(C64::new(0.0, 0.0));
    s.g = &r.g / iv;
    s.g_eta = &r.g_eta / iv;
    let idq = DMatrix::<C64>::identity(q, q);
    let right = (&idq * iv + om).transpose();
    s.g_zeta = solve_square(&right, &r.g_zeta.transpose(), k)?.transpose();
    let left = &idq * iv - om;
    s.h = solve_square(&left, &DMatrix::from_column_slice(q, 1, r.h.as_slice()), k)?
        .column(0)
        .into_owned();
    s.h_eta = solve_square(&left, &r.h_eta, k)?;
    let kk = DMatrix::<C64>::identity(q * q, q * q) * iv - adk;
    let w2 = solve_square(&kk, &DMatrix::from_column_slice(q * q, 1, r.h_zeta.as_slice()), k)?;
    s.h_zeta = DMatrix::from_column_slice(q, q, w2.as_slice());
    Ok(s)
}

fn unsolvable(component: &'static str, defect: f64, witness: Vec<f64>) -> Error {
    Error::Unsolvable {
        component,
        defect,
        witness,
    }
}

/// Least squares `a x = b` with the relative defect.
fn restricted(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: &Tolerances) -> (DMatrix<C64>, f64) {
    let x = linalg::lstsq(a, b, tol);
    let res = (a * &x - b).iter().map(|v| v.norm()).fold(0.0, f64::max);
    (x, res)
}

fn kernel_witness(m: &DMatrix<f64>, basis: &DMatrix<f64>, tol: &Tolerances) -> Vec<f64> {
    let ns = linalg::null_space(&(m * basis), tol);
    if ns.ncols() == 0 {
        return Vec::new();
    }
    let mut w = basis * ns.column(0);
    let imax = w.iamax();
    if w[imax] < 0.0 {
        w = -w;
    }
    w.iter().copied().collect()
}

/// Solves the homological equation mode by mode.
pub fn solve(nx: &NormalLinear, rhs: &FourierField, spec: &DiophantineSpec, tol: &Tolerances) -> Result<HomologicalSolution> {
    nx.check_field(rhs)?;
    let q = nx.structure.dim();
    let om_r = &nx.omega.entries;
    let om = to_c(om_r);
    let eigs = linalg::eigenvalues(om_r);
    let adk = ad_kron(&om);
    let scale = 1.0 + rhs.norm(0.0);
    let accept = 1e3 * tol.rank_tol * scale;
    let zero_k = vec![0i64; rhs.n];

    let mut psi = FourierField::zero(rhs.n, rhs.m, rhs.p, rhs.k_max);
    psi.periods = rhs.periods.clone();
    let mut min_div = f64::INFINITY;
    for (k, r) in &rhs.modes {
        if *k == zero_k {
            continue;
        }
        let nu = nx.pairing(rhs, k);
        let d = divisor(nu, &eigs);
        let bound = divisor_bound(k, spec);
        if d < bound {
            return Err(Error::SmallDivisor {
                k: k.clone(),
                divisor: d,
                bound,
            });
        }
        min_div = min_div.min(d);
        psi.modes.insert(k.clone(), mode_nonzero(&om, &adk, nu, k, r)?);
    }

    // k = 0
    let r0 = rhs.zero_mode();
    let lambda1: Vec<f64> = r0.f.iter().map(|v| -v.re).collect();
    let g_free = r0.g.iter().chain(r0.g_eta.iter()).map(|v| v.norm()).fold(0.0, f64::max);
    if g_free > accept {
        return Err(unsolvable("V0/V1", g_free, Vec::new()));
    }
    let bp = b_plus(&nx.structure, tol);
    let bpc = to_c(&bp);
    let mut s0 = rhs.empty_jet();
    // W0, W1 in B+
    let a = &om * &bpc;
    let (x, d0) = restricted(&a, &-DMatrix::from_column_slice(q, 1, r0.h.as_slice()), tol);
    if d0 > accept {
        return Err(unsolvable("W0", d0, kernel_witness(om_r, &bp, tol)));
    }
    s0.h = (&bpc * x).column(0).into_owned();
    let (x, d1) = restricted(&a, &-&r0.h_eta, tol);
    if d1 > accept {
        return Err(unsolvable("W1", d1, kernel_witness(om_r, &bp, tol)));
    }
    s0.h_eta = &bpc * x;
    // V2 with V2 R = V2 (and V2 S = V2)
    let idq = DMatrix::<f64>::identity(q, q);
    let mut rows = (nx.structure.r() - &idq).transpose();
    for s in nx.symmetries() {
        let mut st = DMatrix::zeros(rows.nrows() + q, q);
        st.view_mut((0, 0), (rows.nrows(), q)).copy_from(&rows);
        st.view_mut((rows.nrows(), 0), (q, q)).copy_from(&(s - &idq).transpose());
        rows = st;
    }
    let c = linalg::null_space(&rows, tol);
    let cc = to_c(&c);
    let (y, dv) = restricted(&(om.transpose() * &cc), &r0.g_zeta.transpose(), tol);
    if dv > accept {
        return Err(unsolvable("V2", dv, kernel_witness(&om_r.transpose(), &c, tol)));
    }
    s0.g_zeta = (&cc * y).transpose();
    // W2 in gl+ and Lambda2 jointly
    let st = &nx.structure;
    let (qp, _) = equivariant_bases(st, &nx.symmetries(), tol)?;
    let ad = adjoint_matrix(&nx.omega, Parity::Plus, st)? * &qp;
    let dirs = nx.unfolding.direction_coords(st);
    let mut joint = DMatrix::zeros(ad.nrows(), ad.ncols() + dirs.ncols());
    joint.view_mut((0, 0), ad.shape()).copy_from(&ad);
    joint.view_mut((0, ad.ncols()), dirs.shape()).copy_from(&dirs);
    let hz = r0.h_zeta.map(|v| v.re);
    let target = -st.gl_coords(&hz, Parity::Minus);
    let sol = linalg::lstsq_vec(&joint, &target, tol);
    let w2 = st.from_gl_coords(&(&qp * sol.rows(0, ad.ncols())), Parity::Plus);
    let lambda2: Vec<f64> = sol.rows(ad.ncols(), dirs.ncols()).iter().copied().collect();
    let dw = (&joint * &sol - &target).amax();
    if dw > accept {
        return Err(unsolvable("W2/Lambda2", dw, Vec::new()));
    }
    s0.h_zeta = to_c(&w2);
    if !s0.is_zero() {
        psi.modes.insert(zero_k, s0);
    }
    let mut out = HomologicalSolution {
        psi,
        lambda1,
        lambda2,
        residual: 0.0,
        min_divisor: min_div,
    };
    out.residual = residual(nx, &out, rhs)?;
    Ok(out)
}

/// `[N, Psi]` mode by mode, in the layout of the right-hand side.
pub fn apply_adjoint(nx: &NormalLinear, psi: &FourierField) -> Result<FourierField> {
    nx.check_field(psi)?;
    let om = to_c(&nx.omega.entries);
    let mut out = psi.clone();
    out.modes.clear();
    for (k, s) in &psi.modes {
        let iv = I * nx.pairing(psi, k);
        let mut l = psi.empty_jet();
        l.f = &s.f * iv;
        l.g = &s.g * iv;
        l.g_eta = &s.g_eta * iv;
        l.g_zeta = &s.g_zeta * iv + &s.g_zeta * &om;
        l.h = &s.h * iv - &om * &s.h;
        l.h_eta = &s.h_eta * iv - &om * &s.h_eta;
        l.h_zeta = &s.h_zeta * iv - (&om * &s.h_zeta - &s.h_zeta * &om);
        out.modes.insert(k.clone(), l);
    }
    Ok(out)
}

/// Defect of the homological equation as a field (the `f_eta`, `f_zeta` slots stay zero).
pub fn defect(nx: &NormalLinear, sol: &HomologicalSolution, rhs: &FourierField) -> Result<FourierField> {
    nx.check_field(rhs)?;
    let mut d = apply_adjoint(nx, &sol.psi)?;
    let mut r = rhs.clone();
    for j in r.modes.values_mut() {
        j.f_eta.fill(C64::new(0.0, 0.0));
        j.f_zeta.fill(C64::new(0.0, 0.0));
    }
    let zk = vec![0; rhs.n];
    let z = r.mode_mut(&zk);
    for (f, &l) in z.f.iter_mut().zip(&sol.lambda1) {
        *f += l;
    }
    z.h_zeta += to_c(&nx.shift_matrix(&sol.lambda2));
    d.axpy(C64::new(-1.0, 0.0), &r)?;
    Ok(d)
}

/// Sup over modes of the componentwise defect.
pub fn residual(nx: &NormalLinear, sol: &HomologicalSolution, rhs: &FourierField) -> Result<f64> {
    Ok(defect(nx, sol, rhs)?.norm(0.0))
}
