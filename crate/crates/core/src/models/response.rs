//! Quasi-periodic response tori of the forced oscillator
//! `x' = (1, omega)`, `z1' = z2`, `z2' = mu z1 + hbar(z) + sum a_k sin(k.x)`.
//!
//! The embedding `z1(x)` is odd in `x` and expanded in `sin(k.x)` over the
//! half lattice spanned by the forcing modes. Newton's method is run on the
//! sine coefficients of the invariance equation `D^2 z1 = h(x, z1, D z1)`
//! with `D = d/dx1 + omega d/dx2`, collocated on a uniform grid.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};

use crate::diophantine::{norm1, DiophantineSpec};
use crate::error::{dim_err, invalid, Error, Result};
use crate::fourier::C64;
use crate::poly::Poly;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponseProblem {
    pub omega: f64,
    pub mu: f64,
    /// Averaged nonlinearity in `(z1, z2)`, without the `mu z1` term.
    pub hbar: Poly,
    /// `(k, a_k)` for the terms `a_k sin(k.x)`.
    pub forcing: Vec<(Vec<i64>, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponseOptions {
    /// Truncation of `|k|_1`.
    pub k_max: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        ResponseOptions {
            k_max: 12,
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FloquetKind {
    /// Imaginary pair.
    Elliptic,
    /// Real pair.
    Hyperbolic,
    /// Double eigenvalue.
    Parabolic,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponseSolution {
    /// Sine coefficients of `z1`.
    pub modes: Vec<(Vec<i64>, f64)>,
    pub residual: f64,
    pub iterations: usize,
    /// Averaged linearization `[[0, 1], [<d1 h>, <d2 h>]]` along the torus.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::mat"))]
    pub floquet: DMatrix<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cpair"))]
    pub eigenvalues: [C64; 2],
    pub kind: FloquetKind,
}

impl ResponseSolution {
    pub fn coefficient(&self, k: &[i64]) -> f64 {
        self.modes.iter().find(|(m, _)| m.as_slice() == k).map_or(0.0, |(_, c)| *c)
    }

    pub fn amplitude(&self) -> f64 {
        self.modes.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }

    /// `(z1, z2)` at the angle `x`.
    pub fn eval(&self, x: &[f64], omega: f64) -> (f64, f64) {
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        for (k, c) in &self.modes {
            let arg = k[0] as f64 * x[0] + k[1] as f64 * x[1];
            z1 += c * libm::sin(arg);
            z2 += c * (k[0] as f64 + k[1] as f64 * omega) * libm::cos(arg);
        }
        (z1, z2)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub mu: f64,
    pub amplitude: f64,
    pub iterations: usize,
    pub residual: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::cpair"))]
    pub eigenvalues: [C64; 2],
    pub kind: FloquetKind,
}

impl SweepPoint {
    pub fn from_solution(mu: f64, s: &ResponseSolution) -> Self {
        SweepPoint {
            mu,
            amplitude: s.amplitude(),
            iterations: s.iterations,
            residual: s.residual,
            eigenvalues: s.eigenvalues,
            kind: s.kind,
        }
    }
}

fn to_half(k: &[i64]) -> (Vec<i64>, f64) {
    match k.iter().find(|&&v| v != 0) {
        Some(&v) if v < 0 => (k.iter().map(|v| -v).collect(), -1.0),
        _ => (k.to_vec(), 1.0),
    }
}

/// Half-lattice points with `|k|_1 <= k_max` reachable from the forcing modes.
fn basis(forcing: &[(Vec<i64>, f64)], k_max: usize) -> Vec<Vec<i64>> {
    let mut set: BTreeSet<Vec<i64>> = forcing
        .iter()
        .filter(|(k, a)| *a != 0.0 && k.iter().any(|&v| v != 0))
        .map(|(k, _)| to_half(k).0)
        .filter(|k| norm1(k) as usize <= k_max)
        .collect();
    loop {
        let cur: Vec<Vec<i64>> = set.iter().cloned().collect();
        let mut grew = false;
        for a in &cur {
            for b in &cur {
                for s in [1, -1] {
                    let c: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + s * y).collect();
                    if c.iter().all(|&v| v == 0) || norm1(&c) as usize > k_max {
                        continue;
                    }
                    grew |= set.insert(to_half(&c).0);
                }
            }
        }
        if !grew {
            return set.into_iter().collect();
        }
    }
}

struct Grid {
    n: usize,
    /// `sin(k.x)` and `cos(k.x)` per basis mode, row-major over the grid.
    sin: Vec<Vec<f64>>,
    cos: Vec<Vec<f64>>,
    forcing: Vec<f64>,
    /// `k.(1, omega)`.
    freq: Vec<f64>,
}

impl Grid {
    fn new(p: &ResponseProblem, basis: &[Vec<i64>], n: usize) -> Grid {
        let pts: Vec<(f64, f64)> = (0..n * n)
            .map(|i| (2.0 * PI * (i / n) as f64 / n as f64, 2.0 * PI * (i % n) as f64 / n as f64))
            .collect();
        let arg = |k: &[i64], (a, b): (f64, f64)| k[0] as f64 * a + k[1] as f64 * b;
        Grid {
            n,
            sin: basis.iter().map(|k| pts.iter().map(|&x| libm::sin(arg(k, x))).collect()).collect(),
            cos: basis.iter().map(|k| pts.iter().map(|&x| libm::cos(arg(k, x))).collect()).collect(),
            forcing: pts
                .iter()
                .map(|&x| p.forcing.iter().map(|(k, a)| a * libm::sin(arg(k, x))).sum())
                .collect(),
            freq: basis.iter().map(|k| k[0] as f64 + k[1] as f64 * p.omega).collect(),
        }
    }
}

/// Projected residual, Jacobian and the grid averages of `d1 h`, `d2 h`.
fn assemble(p: &ResponseProblem, g: &Grid, c: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, [f64; 2]) {
    let nb = c.len();
    let pts = g.n * g.n;
    let d1 = p.hbar.derivative(0);
    let d2 = p.hbar.derivative(1);
    let w = 2.0 / pts as f64;
    let mut f = DVector::zeros(nb);
    let mut jac = DMatrix::zeros(nb, nb);
    let mut avg = [0.0; 2];
    for i in 0..pts {
        let mut z1 = 0.0;
        let mut z2 = 0.0;
        let mut dd = 0.0;
        for j in 0..nb {
            z1 += c[j] * g.sin[j][i];
            z2 += c[j] * g.freq[j] * g.cos[j][i];
            dd -= c[j] * g.freq[j] * g.freq[j] * g.sin[j][i];
        }
        let z = [z1, z2];
        let h = p.mu * z1 + p.hbar.eval(&z) + g.forcing[i];
        let h1 = p.mu + d1.eval(&z);
        let h2 = d2.eval(&z);
        avg[0] += h1;
        avg[1] += h2;
        let r = dd - h;
        for k in 0..nb {
            let sk = g.sin[k][i];
            f[k] += w * r * sk;
            for j in 0..nb {
                let col = -g.freq[j] * g.freq[j] * g.sin[j][i] - h1 * g.sin[j][i] - h2 * g.freq[j] * g.cos[j][i];
                jac[(k, j)] += w * sk * col;
            }
        }
    }
    (f, jac, [avg[0] / pts as f64, avg[1] / pts as f64])
}

fn classify(a: &DMatrix<f64>) -> ([C64; 2], FloquetKind) {
    let tr = a[(0, 0)] + a[(1, 1)];
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let disc = tr * tr / 4.0 - det;
    let scale = 1.0 + tr.abs() + det.abs();
    if disc.abs() <= 1e-14 * scale {
        let l = C64::new(tr / 2.0, 0.0);
        ([l, l], FloquetKind::Parabolic)
    } else if disc > 0.0 {
        let s = libm::sqrt(disc);
        ([C64::new(tr / 2.0 + s, 0.0), C64::new(tr / 2.0 - s, 0.0)], FloquetKind::Hyperbolic)
    } else {
        let s = libm::sqrt(-disc);
        ([C64::new(tr / 2.0, s), C64::new(tr / 2.0, -s)], FloquetKind::Elliptic)
    }
}

fn check_problem(p: &ResponseProblem) -> Result<()> {
    if p.hbar.nvars != 2 {
        return Err(dim_err("hbar is a polynomial in (z1, z2)"));
    }
    if p.forcing.iter().any(|(k, _)| k.len() != 2) {
        return Err(dim_err("forcing modes live in Z^2"));
    }
    if !p.omega.is_finite() || !p.mu.is_finite() {
        return Err(invalid("omega and mu must be finite"));
    }
    if let Some(e) = p.hbar.terms.keys().find(|e| e[0] % 2 == 0) {
        return Err(invalid(alloc::format!("hbar must be odd in z1, found exponent {e:?}")));
    }
    Ok(())
}

/// Newton solve for the response torus from a zero initial guess.
pub fn response_solve(p: &ResponseProblem, opts: &ResponseOptions, spec: Option<&DiophantineSpec>) -> Result<ResponseSolution> {
    check_problem(p)?;
    let basis = basis(&p.forcing, opts.k_max);
    if let Some(spec) = spec {
        spec.validate(2)?;
        for k in &basis {
            let d = (k[0] as f64 + k[1] as f64 * p.omega).abs();
            let bound = 0.5 * spec.gamma * libm::pow(norm1(k) as f64, -spec.tau);
            if d < bound {
                return Err(Error::SmallDivisor {
                    k: k.clone(),
                    divisor: d,
                    bound,
                });
            }
        }
    }
    let deg = p.hbar.degree().max(1) as usize;
    let mut n = (4 * opts.k_max + 2).max((deg + 1) * opts.k_max + 2);
    n += n % 2;
    let g = Grid::new(p, &basis, n);
    let mut c = DVector::zeros(basis.len());
    let mut iterations = 0;
    let (mut f, mut jac, mut avg) = assemble(p, &g, &c);
    let mut res = f.amax();
    while res > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        let step = jac
            .clone()
            .lu()
            .solve(&f)
            .ok_or(Error::NoConvergence { iterations, residual: res })?;
        c -= step;
        iterations += 1;
        (f, jac, avg) = assemble(p, &g, &c);
        res = f.amax();
        if !res.is_finite() {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
    }
    let floquet = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, avg[0], avg[1]]);
    let (eigenvalues, kind) = classify(&floquet);
    Ok(ResponseSolution {
        modes: basis.into_iter().zip(c.iter().copied()).collect(),
        residual: res,
        iterations,
        floquet,
        eigenvalues,
        kind,
    })
}

/// Independent solves at each `mu`; sweep points do not share state.
pub fn response_sweep(p: &ResponseProblem, mus: &[f64], opts: &ResponseOptions, spec: Option<&DiophantineSpec>) -> Result<Vec<SweepPoint>> {
    mus.iter()
        .map(|&mu| {
            let q = ResponseProblem { mu, ..p.clone() };
            response_solve(&q, opts, spec).map(|s| SweepPoint::from_solution(mu, &s))
        })
        .collect()
}

/// `mu` values evenly spaced over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(c: f64, eps: f64, omega: f64) -> ResponseProblem {
        ResponseProblem {
            omega,
            mu: -c,
            hbar: Poly::zero(2),
            forcing: vec![(vec![1, 1], eps)],
        }
    }

    fn cubic(mu: f64) -> ResponseProblem {
        let mut hbar = Poly::zero(2);
        hbar.add_term(&[3, 0], -1.0);
        hbar.add_term(&[1, 2], 0.5);
        ResponseProblem {
            omega: (5f64.sqrt() - 1.0) / 2.0,
            mu,
            hbar,
            forcing: vec![(vec![1, 1], 0.1)],
        }
    }

    #[test]
    fn linear_oracle_grid() {
        let w0 = (5f64.sqrt() - 1.0) / 2.0;
        for c in [0.5, 1.0, 1.5] {
            for eps in [1e-3, 1e-2, 1e-1] {
                for dw in [-0.01, 0.0, 0.01] {
                    let w = w0 + dw;
                    let s = response_solve(&linear(c, eps, w), &ResponseOptions::default(), None).unwrap();
                    let exact = eps / (c - (1.0 + w) * (1.0 + w));
                    assert!((s.coefficient(&[1, 1]) - exact).abs() < 1e-10, "{c} {eps} {dw}");
                    assert!(s.modes.iter().all(|(k, v)| k == &[1, 1] || v.abs() < 1e-10));
                    assert!(s.residual <= 1e-10);
                    assert_eq!(s.kind, FloquetKind::Elliptic);
                }
            }
        }
    }

    #[test]
    fn unforced_torus_is_zero() {
        let mut p = linear(2.0, 0.0, 0.6);
        p.forcing.clear();
        let s = response_solve(&p, &ResponseOptions::default(), None).unwrap();
        assert!(s.modes.is_empty());
        assert_eq!(s.iterations, 0);
        assert_eq!(s.floquet, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]));
        assert!((s.eigenvalues[0] - C64::new(0.0, 2f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn negative_modes_fold_into_the_half_lattice() {
        let mut p = linear(1.0, 0.0, 0.6);
        p.forcing = vec![(vec![-1, -1], 0.2)];
        let s = response_solve(&p, &ResponseOptions::default(), None).unwrap();
        let exact = -0.2 / (1.0 - 1.6 * 1.6);
        assert!((s.coefficient(&[1, 1]) - exact).abs() < 1e-12);
    }

    #[test]
    fn cubic_torus_is_invariant() {
        let p = cubic(-0.3);
        let s = response_solve(&p, &ResponseOptions::default(), None).unwrap();
        assert!(s.iterations > 1);
        // pointwise invariance off the grid
        let h = 1e-4;
        for x in [[0.3, 1.1], [2.0, -0.7], [4.4, 5.9]] {
            let at = |t: f64| s.eval(&[x[0] + t, x[1] + t * p.omega], p.omega);
            let (z1, z2) = at(0.0);
            let dz2 = (at(h).1 - at(-h).1) / (2.0 * h);
            let rhs = p.mu * z1 + p.hbar.eval(&[z1, z2]) + 0.1 * libm::sin(x[0] + x[1]);
            assert!((dz2 - rhs).abs() < 1e-6, "{dz2} {rhs}");
        }
    }

    #[test]
    fn sweep_changes_floquet_type() {
        let mus = linspace(-0.5, 0.5, 21);
        let pts = response_sweep(&cubic(0.0), &mus, &ResponseOptions::default(), None).unwrap();
        assert_eq!(pts.len(), 21);
        assert!(pts.iter().all(|p| p.residual <= 1e-10));
        assert_eq!(pts[0].kind, FloquetKind::Elliptic);
        assert_eq!(pts[20].kind, FloquetKind::Hyperbolic);
        let switches = pts.windows(2).filter(|w| w[0].kind != w[1].kind).count();
        assert!((1..=2).contains(&switches));
    }

    #[test]
    fn rejects_even_nonlinearity_and_small_divisors() {
        let mut p = cubic(0.1);
        p.hbar.add_term(&[2, 0], 1.0);
        assert!(matches!(response_solve(&p, &ResponseOptions::default(), None), Err(Error::InvalidInput(_))));
        let q = ResponseProblem {
            forcing: vec![(vec![1, -1], 0.1)],
            ..linear(1.0, 0.1, 1.0 + 1e-9)
        };
        let spec = DiophantineSpec::new(0.1, 1.5, 12);
        assert!(matches!(response_solve(&q, &ResponseOptions::default(), Some(&spec)), Err(Error::SmallDivisor { .. })));
    }
}
