//! Sparse real polynomials in a fixed number of variables and first-order jets.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

/// `sum c_a v^a` with exponent multi-indices `a`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Poly {
    pub nvars: usize,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_rows::terms"))]
    pub terms: BTreeMap<Vec<u32>, f64>,
}

/// Value and gradient of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, d: usize) -> Jet {
        Jet { v, g: vec![0.0; d] }
    }

    pub fn variable(v: f64, i: usize, d: usize) -> Jet {
        let mut g = vec![0.0; d];
        g[i] = 1.0;
        Jet { v, g }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a * o.v + self.v * b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            v: self.v * c,
            g: self.g.iter().map(|a| a * c).collect(),
        }
    }

    /// `self + c * o`.
    pub fn axpy(&mut self, c: f64, o: &Jet) {
        self.v += c * o.v;
        for (a, b) in self.g.iter_mut().zip(&o.g) {
            *a += c * b;
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl Poly {
    pub fn zero(nvars: usize) -> Poly {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Poly {
        let mut p = Poly::zero(nvars);
        p.add_term(&vec![0; nvars], c);
        p
    }

    /// `c v_i`.
    pub fn linear(nvars: usize, i: usize, c: f64) -> Poly {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(&e, c);
        p
    }

    pub fn add_term(&mut self, exps: &[u32], c: f64) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(exps.to_vec()).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(exps);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &v) in &self.terms {
            out.add_term(e, v * c);
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&vec![0; self.nvars])
    }

    /// Gradient at the origin.
    pub fn linear_part(&self) -> Vec<f64> {
        (0..self.nvars)
            .map(|i| {
                let mut e = vec![0; self.nvars];
                e[i] = 1;
                self.coeff(&e)
            })
            .collect()
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| c * e.iter().zip(v).map(|(&k, &x)| libm::pow(x, k as f64)).product::<f64>())
            .sum()
    }

    pub fn eval_jet(&self, v: &[Jet]) -> Jet {
        let d = v.first().map_or(0, |j| j.g.len());
        let mut acc = Jet::constant(0.0, d);
        for (e, &c) in &self.terms {
            let mut t = Jet::constant(c, d);
            for (&k, x) in e.iter().zip(v) {
                for _ in 0..k {
                    t = t.mul(x);
                }
            }
            acc = acc.add(&t);
        }
        acc
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(&f, c * e[i] as f64);
            }
        }
        out
    }

    /// Substitution `v -> v + shift`.
    pub fn shifted(&self, shift: &[f64]) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            // expand prod (v_i + s_i)^{e_i}
            let mut parts: Vec<(Vec<u32>, f64)> = vec![(vec![0; self.nvars], c)];
            for (i, &k) in e.iter().enumerate() {
                let mut next = Vec::new();
                for (pe, pc) in &parts {
                    for j in 0..=k {
                        let coef = binomial(k, j) * libm::pow(shift[i], (k - j) as f64);
                        if coef == 0.0 {
                            continue;
                        }
                        let mut ne = pe.clone();
                        ne[i] += j;
                        next.push((ne, pc * coef));
                    }
                }
                parts = next;
            }
            for (pe, pc) in parts {
                out.add_term(&pe, pc);
            }
        }
        out
    }

    /// Substitution `v_i -> s_i v_i`.
    pub fn rescaled(&self, s: &[f64]) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            let f: f64 = e.iter().zip(s).map(|(&k, &x)| libm::pow(x, k as f64)).product();
            out.add_term(e, c * f);
        }
        out
    }

    /// Degree of each term in the variables `range`.
    pub fn partial_degrees(&self, range: core::ops::Range<usize>) -> Vec<(Vec<u32>, u32)> {
        self.terms
            .keys()
            .map(|e| (e.clone(), e[range.clone()].iter().sum()))
            .collect()
    }
}
