//! Diophantine conditions `|<k, omega> + <l, alpha>| >= gamma |k|^-tau` over a
//! finite truncation `0 < |k|_1 <= K`, `|l|_1 <= 2`, resonance classification,
//! and Monte-Carlo estimates of the Diophantine fraction of a parameter box.
//!
//! Only half of the lattice is enumerated (first nonzero entry of `k`
//! positive); the other half gives the same moduli with `(k, l) -> (-k, -l)`.
//! Verdicts certify nothing for `|k| > K`.
//!
//! Sampling uses PCG32 (`state <- state * 6364136223846793005 + inc`, 64-bit
//! state, XSH-RR output). A coordinate is `lo + u * (hi - lo)` with
//! `u = (next_u64 >> 11) * 2^-53`, coordinates drawn in order, points in order.

use alloc::vec;
use alloc::vec::Vec;
use rand_core::Rng;
use rand_pcg::Pcg32;

use crate::error::{dim_err, invalid, Result};
use crate::revlin::{normal_frequencies, LinearUnfolding};

/// Stream selector passed to [`Pcg32::new`] together with the seed.
pub const PCG_STREAM: u64 = 0xa02b_dbf7_bb3c_0a7;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiophantineSpec {
    pub gamma: f64,
    pub tau: f64,
    /// Truncation of `|k|_1`.
    pub k_max: usize,
    /// Always 2.
    pub ell_max: usize,
}

impl DiophantineSpec {
    pub fn new(gamma: f64, tau: f64, k_max: usize) -> Self {
        DiophantineSpec {
            gamma,
            tau,
            k_max,
            ell_max: 2,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_max == 0 {
            return Err(invalid("truncation K must be positive"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma must be positive"));
        }
        if !(self.tau > n as f64 - 1.0) {
            return Err(invalid("tau must exceed n - 1"));
        }
        if self.ell_max != 2 {
            return Err(invalid("ell_max is fixed to 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ResonanceKind {
    Internal,
    FirstMelnikov,
    SumDifference,
    Doubling,
}

impl ResonanceKind {
    pub fn of(ell: &[i64]) -> ResonanceKind {
        let support: Vec<i64> = ell.iter().copied().filter(|&v| v != 0).collect();
        match support.as_slice() {
            [] => ResonanceKind::Internal,
            [a] if a.abs() == 1 => ResonanceKind::FirstMelnikov,
            [_] => ResonanceKind::Doubling,
            _ => ResonanceKind::SumDifference,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResonanceReport {
    pub k: Vec<i64>,
    pub ell: Vec<i64>,
    /// `<k, omega> + <ell, alpha>`.
    pub value: f64,
    pub kind: ResonanceKind,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiophantineVerdict {
    pub satisfied: bool,
    /// `min |<k,omega> + <l,alpha>| * |k|^tau`; satisfied iff `>= gamma`.
    pub margin: f64,
    pub worst_k: Vec<i64>,
    pub worst_ell: Vec<i64>,
    /// The verdict covers `|k|_1 <= truncated_at` only.
    pub truncated_at: usize,
}

/// All `k` with `0 < |k|_1 <= k_max` whose first nonzero entry is positive.
pub fn half_lattice(n: usize, k_max: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut k = vec![0i64; n];
    fn rec(i: usize, budget: i64, k: &mut Vec<i64>, leading: bool, out: &mut Vec<Vec<i64>>) {
        if i == k.len() {
            if !leading {
                out.push(k.clone());
            }
            return;
        }
        let lo = if leading { 0 } else { -budget };
        for v in lo..=budget {
            k[i] = v;
            rec(i + 1, budget - v.abs(), k, leading && v == 0, out);
        }
        k[i] = 0;
    }
    if n > 0 {
        rec(0, k_max as i64, &mut k, true, &mut out);
    }
    out
}

/// All `ell` in `Z^dim` with `|ell|_1 <= 2`, the zero vector first.
pub fn ell_vectors(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0; dim]];
    for i in 0..dim {
        for s in [1, -1] {
            let mut l = vec![0; dim];
            l[i] = s;
            out.push(l);
        }
    }
    for i in 0..dim {
        for s in [2, -2] {
            let mut l = vec![0; dim];
            l[i] = s;
            out.push(l);
        }
        for j in i + 1..dim {
            for (a, b) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let mut l = vec![0; dim];
                l[i] = a;
                l[j] = b;
                out.push(l);
            }
        }
    }
    out
}

pub fn norm1(k: &[i64]) -> i64 {
    k.iter().map(|v| v.abs()).sum()
}

fn dot(k: &[i64], w: &[f64]) -> f64 {
    k.iter().zip(w).map(|(&a, &b)| a as f64 * b).sum()
}

pub fn dioph_check(omega: &[f64], alpha: &[f64], spec: &DiophantineSpec) -> Result<DiophantineVerdict> {
    spec.validate(omega.len())?;
    if omega.is_empty() {
        return Err(dim_err("omega is empty"));
    }
    let ells = ell_vectors(alpha.len());
    let shifts: Vec<f64> = ells.iter().map(|l| dot(l, alpha)).collect();
    let mut best = (f64::INFINITY, 0usize, 0usize);
    let lattice = half_lattice(omega.len(), spec.k_max);
    for (ki, k) in lattice.iter().enumerate() {
        let kw = dot(k, omega);
        let weight = libm::pow(norm1(k) as f64, spec.tau);
        for (li, s) in shifts.iter().enumerate() {
            let m = libm::fabs(kw + s) * weight;
            if m < best.0 {
                best = (m, ki, li);
            }
        }
    }
    Ok(DiophantineVerdict {
        satisfied: best.0 >= spec.gamma,
        margin: best.0,
        worst_k: lattice[best.1].clone(),
        worst_ell: ells[best.2].clone(),
        truncated_at: spec.k_max,
    })
}

/// Every `(k, ell)` in the truncation with `|<k,omega> + <ell,alpha>| <= tol`,
/// sorted by modulus then `|k|_1`.
pub fn detect_resonances(omega: &[f64], alpha: &[f64], tol: f64, k_max: usize) -> Result<Vec<ResonanceReport>> {
    if !(tol > 0.0) {
        return Err(invalid("tol must be positive"));
    }
    let ells = ell_vectors(alpha.len());
    let mut out = Vec::new();
    for k in half_lattice(omega.len(), k_max) {
        let kw = dot(&k, omega);
        for l in &ells {
            let v = kw + dot(l, alpha);
            if libm::fabs(v) <= tol {
                out.push(ResonanceReport {
                    k: k.clone(),
                    ell: l.clone(),
                    value: v,
                    kind: ResonanceKind::of(l),
                });
            }
        }
    }
    out.sort_by(|a, b| {
        libm::fabs(a.value)
            .total_cmp(&libm::fabs(b.value))
            .then(norm1(&a.k).cmp(&norm1(&b.k)))
    });
    Ok(out)
}

/// Axis-aligned box in `(omega, mu)` space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterBox {
    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(dim_err("box bounds differ in length"));
        }
        if self.lower.is_empty() {
            return Err(invalid("degenerate box: no coordinates"));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(hi - lo > 0.0) {
                return Err(invalid(alloc::format!("degenerate box: width of coordinate {i} is not positive")));
            }
        }
        Ok(())
    }
}

/// The `samples` points of the box, deterministic in `seed`.
pub fn sample_points(bx: &ParameterBox, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Pcg32::new(seed, PCG_STREAM);
    (0..samples)
        .map(|_| {
            bx.lower
                .iter()
                .zip(&bx.upper)
                .map(|(lo, hi)| {
                    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// One evaluated sample: a CSV row `(omega..., mu..., in_gamma, worst_k, worst_ell, margin)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleResult {
    pub omega: Vec<f64>,
    pub mu: Vec<f64>,
    pub in_gamma: bool,
    pub worst_k: Vec<i64>,
    pub worst_ell: Vec<i64>,
    pub margin: f64,
}

/// Normal frequencies of `Omega(mu)`, empty without an unfolding.
pub fn alpha_at(unfolding: Option<&LinearUnfolding>, mu: &[f64]) -> Result<Vec<f64>> {
    match unfolding {
        None => {
            if !mu.is_empty() {
                return Err(dim_err("mu given without an unfolding"));
            }
            Ok(Vec::new())
        }
        Some(u) => Ok(normal_frequencies(&u.eval_structured(mu)?)),
    }
}

pub fn evaluate_point(point: &[f64], n: usize, unfolding: Option<&LinearUnfolding>, spec: &DiophantineSpec) -> Result<SampleResult> {
    let (omega, mu) = point.split_at(n);
    let alpha = alpha_at(unfolding, mu)?;
    let v = dioph_check(omega, &alpha, spec)?;
    Ok(SampleResult {
        omega: omega.to_vec(),
        mu: mu.to_vec(),
        in_gamma: v.satisfied,
        worst_k: v.worst_k,
        worst_ell: v.worst_ell,
        margin: v.margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureEstimate {
    pub fraction: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub in_gamma: usize,
    pub samples: usize,
}

impl MeasureEstimate {
    pub fn from_counts(in_gamma: usize, samples: usize) -> Self {
        let nf = samples as f64;
        let p = in_gamma as f64 / nf;
        let z = 1.959_963_984_540_054;
        let denom = 1.0 + z * z / nf;
        let centre = (p + z * z / (2.0 * nf)) / denom;
        let half = z * libm::sqrt(p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)) / denom;
        MeasureEstimate {
            fraction: p,
            ci_low: (centre - half).max(0.0),
            ci_high: (centre + half).min(1.0),
            in_gamma,
            samples,
        }
    }
}

pub fn check_measure_inputs(bx: &ParameterBox, n: usize, unfolding: Option<&LinearUnfolding>, samples: usize) -> Result<()> {
    bx.validate()?;
    if samples < 100 {
        return Err(invalid("at least 100 samples are required"));
    }
    let c = unfolding.map_or(0, |u| u.codimension());
    if bx.lower.len() != n + c {
        return Err(dim_err(alloc::format!("box has {} coordinates, expected n + c = {}", bx.lower.len(), n + c)));
    }
    Ok(())
}

/// Sequential Monte-Carlo estimate; the first `n` box coordinates are `omega`.
pub fn measure_estimate(
    bx: &ParameterBox,
    n: usize,
    unfolding: Option<&LinearUnfolding>,
    spec: &DiophantineSpec,
    samples: usize,
    seed: u64,
) -> Result<(MeasureEstimate, Vec<SampleResult>)> {
    check_measure_inputs(bx, n, unfolding, samples)?;
    spec.validate(n)?;
    let rows = sample_points(bx, samples, seed)
        .iter()
        .map(|p| evaluate_point(p, n, unfolding, spec))
        .collect::<Result<Vec<_>>>()?;
    let hits = rows.iter().filter(|r| r.in_gamma).count();
    Ok((MeasureEstimate::from_counts(hits, samples), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn lattice_counts() {
        // half of the 2 K (K + 1) nonzero points of the 1-ball in Z^2
        for k in 1..=6 {
            assert_eq!(half_lattice(2, k).len(), k * (k + 1));
        }
        assert_eq!(ell_vectors(4).len(), 1 + 8 + 8 + 24);
        assert_eq!(ell_vectors(0).len(), 1);
    }

    #[test]
    fn golden_mean_margin_matches_brute_force() {
        // oracle: every k in the full 1-ball, both signs
        let spec = DiophantineSpec::new(0.1, 1.5, 50);
        let mut oracle = f64::INFINITY;
        for a in -50i64..=50 {
            for b in -50i64..=50 {
                let n1 = a.abs() + b.abs();
                if n1 == 0 || n1 > 50 {
                    continue;
                }
                let v = (a as f64 + b as f64 * GOLDEN).abs() * (n1 as f64).powf(1.5);
                oracle = oracle.min(v);
            }
        }
        let v = dioph_check(&[1.0, GOLDEN], &[], &spec).unwrap();
        assert!(v.satisfied);
        assert!((v.margin - oracle).abs() <= 1e-14 * oracle);
        assert_eq!(v.truncated_at, 50);
    }

    #[test]
    fn rational_frequency_is_resonant() {
        let v = dioph_check(&[1.0, 0.5], &[], &DiophantineSpec::new(0.1, 1.5, 10)).unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.margin, 0.0);
        assert_eq!(v.worst_k, [1, -2]);
    }

    #[test]
    fn double_resonance_preset() {
        let alpha = [-1.0, -1.0, 1.0, 1.0];
        let v = dioph_check(&[2.0, GOLDEN], &alpha, &DiophantineSpec::new(0.01, 1.5, 5)).unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.margin, 0.0);
        let found = detect_resonances(&[2.0, GOLDEN], &alpha, 1e-12, 5).unwrap();
        let at_k: Vec<&ResonanceReport> = found.iter().filter(|r| r.k == [1, 0]).collect();
        assert!(at_k.iter().any(|r| r.kind == ResonanceKind::SumDifference && r.ell == [0, 0, -1, -1]));
        assert!(at_k.iter().any(|r| r.kind == ResonanceKind::Doubling && r.ell == [0, 0, -2, 0]));
    }

    #[test]
    fn constructed_first_melnikov() {
        let a = 1.0 + GOLDEN;
        let found = detect_resonances(&[1.0, GOLDEN], &[-a, a], 1e-12, 3).unwrap();
        assert!(found.iter().any(|r| r.k == [1, 1] && r.ell == [0, -1] && r.kind == ResonanceKind::FirstMelnikov));
    }

    #[test]
    fn diophantine_pair_has_no_resonances_below_margin() {
        let spec = DiophantineSpec::new(0.1, 1.5, 20);
        let v = dioph_check(&[1.0, GOLDEN], &[-0.3, 0.3], &spec).unwrap();
        assert!(detect_resonances(&[1.0, GOLDEN], &[-0.3, 0.3], 0.5 * v.margin / 20f64.powf(1.5), 20)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn spec_validation() {
        assert!(dioph_check(&[1.0, GOLDEN], &[], &DiophantineSpec::new(0.1, 1.5, 0)).is_err());
        assert!(dioph_check(&[1.0, GOLDEN], &[], &DiophantineSpec::new(0.1, 0.9, 5)).is_err());
        assert!(dioph_check(&[1.0, GOLDEN], &[], &DiophantineSpec::new(0.0, 1.5, 5)).is_err());
    }

    #[test]
    fn sampler_is_reproducible() {
        let bx = ParameterBox {
            lower: alloc::vec![0.9, 0.5],
            upper: alloc::vec![1.1, 0.7],
        };
        let a = sample_points(&bx, 10, 7);
        assert_eq!(a, sample_points(&bx, 10, 7));
        assert_ne!(a, sample_points(&bx, 10, 8));
        assert!(a.iter().all(|p| p[0] >= 0.9 && p[0] < 1.1 && p[1] >= 0.5 && p[1] < 0.7));
    }

    #[test]
    fn degenerate_box_and_sample_count() {
        let spec = DiophantineSpec::new(1e-3, 1.5, 10);
        let flat = ParameterBox {
            lower: alloc::vec![1.0, 0.5],
            upper: alloc::vec![1.0, 0.7],
        };
        assert!(measure_estimate(&flat, 2, None, &spec, 100, 1).is_err());
        let bx = ParameterBox {
            lower: alloc::vec![0.9, 0.5],
            upper: alloc::vec![1.1, 0.7],
        };
        assert!(measure_estimate(&bx, 2, None, &spec, 99, 1).is_err());
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let m = MeasureEstimate::from_counts(97, 100);
        assert!(m.ci_low < 0.97 && 0.97 < m.ci_high && m.ci_high <= 1.0);
        let m = MeasureEstimate::from_counts(100, 100);
        assert_eq!(m.ci_high, 1.0);
        assert!(m.ci_low > 0.95);
    }
}
