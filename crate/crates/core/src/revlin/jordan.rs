use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ReversingStructure, StructuredMatrix};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCluster {
    pub mean: Complex64,
    pub multiplicity: usize,
    /// Size of the largest Jordan block (1 when semisimple on the cluster).
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanChevalley {
    pub semisimple: StructuredMatrix,
    pub nilpotent: StructuredMatrix,
    pub clusters: Vec<EigenCluster>,
    /// Clustering distance that produced the admissible splitting.
    pub threshold: f64,
}

/// Additive Jordan-Chevalley decomposition `Omega = S + N` from spectral
/// projectors of clustered eigenvalues.
///
/// Eigenvalues closer than `cluster_tol * |Omega|` are always merged. If the
/// resulting generalized eigenspaces do not have the right dimensions, or
/// their joint basis is worse conditioned than `cond_max`, the clustering
/// distance is raised (single linkage) up to `merge_cap * |Omega|`.
pub fn jordan_chevalley(
    omega: &StructuredMatrix,
    structure: &ReversingStructure,
    tol: &Tolerances,
) -> Result<JordanChevalley> {
    let n = omega.dim();
    if n != structure.dim() {
        return Err(dim_err("Omega does not match dim_z"));
    }
    let om = &omega.entries;
    let norm = linalg::norm2(om);
    if norm == 0.0 {
        return Ok(JordanChevalley {
            semisimple: StructuredMatrix::new_unchecked(DMatrix::zeros(n, n), omega.parity),
            nilpotent: StructuredMatrix::new_unchecked(DMatrix::zeros(n, n), omega.parity),
            clusters: vec![EigenCluster {
                mean: Complex64::new(0.0, 0.0),
                multiplicity: n,
                index: 1,
            }],
            threshold: 0.0,
        });
    }
    let ev = linalg::eigenvalues(om);
    let base = tol.cluster_tol * norm;
    let cap = tol.merge_cap * norm;
    let mut cuts = vec![base];
    for i in 0..n {
        for j in i + 1..n {
            let d = (ev[i] - ev[j]).norm();
            if d > base && d <= cap {
                cuts.push(d);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let omc = linalg::to_complex(om);
    let mut previous: Option<Vec<usize>> = None;
    for &t in &cuts {
        let labels = single_linkage(&ev, t);
        if previous.as_ref() == Some(&labels) {
            continue;
        }
        if let Some((s, clusters)) = try_clusters(&omc, &ev, &labels, norm, tol) {
            let (s, nil) = if clusters.iter().all(|c| c.index == 1) {
                (om.clone(), DMatrix::zeros(n, n))
            } else {
                let s = structure.project(&s, omega.parity);
                let nil = om - &s;
                (s, nil)
            };
            return Ok(JordanChevalley {
                semisimple: StructuredMatrix::new_unchecked(s, omega.parity),
                nilpotent: StructuredMatrix::new_unchecked(nil, omega.parity),
                clusters,
                threshold: t,
            });
        }
        previous = Some(labels);
    }
    Err(Error::IllConditioned(format!(
        "no eigenvalue clustering up to {cap:e} gives a well-conditioned splitting"
    )))
}

/// Connected components of the graph `|a - b| <= t`, labelled by first member.
fn single_linkage(ev: &[Complex64], t: f64) -> Vec<usize> {
    let n = ev.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= t {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

fn try_clusters(
    omc: &DMatrix<Complex64>,
    ev: &[Complex64],
    labels: &[usize],
    norm: f64,
    tol: &Tolerances,
) -> Option<(DMatrix<f64>, Vec<EigenCluster>)> {
    let n = ev.len();
    let mut roots: Vec<usize> = labels.to_vec();
    roots.sort_unstable();
    roots.dedup();
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    let mut diag = Vec::with_capacity(n);
    let mut clusters = Vec::with_capacity(roots.len());
    let mut col = 0;
    for root in roots {
        let members: Vec<Complex64> = (0..n).filter(|&i| labels[i] == root).map(|i| ev[i]).collect();
        let m = members.len();
        let mut mean = members.iter().sum::<Complex64>() / m as f64;
        if mean.norm() <= tol.cluster_tol * norm {
            mean = Complex64::new(0.0, 0.0);
        }
        if mean.im.abs() <= tol.cluster_tol * norm {
            mean.im = 0.0;
        }
        let shifted = omc - DMatrix::<Complex64>::identity(n, n) * mean;
        let scale = norm + mean.norm();
        let mut power = shifted.clone();
        let mut index = 0;
        let mut basis = None;
        for k in 1..=m {
            if k > 1 {
                power = &power * &shifted;
            }
            let thr = tol.rank_tol * libm::pow(scale, k as f64);
            let (vecs, sv) = smallest_right_vectors(&power, m);
            let nullity = sv.iter().filter(|&&s| s <= thr).count();
            if nullity > m {
                return None;
            }
            if nullity == m {
                index = k;
                basis = Some(vecs);
                break;
            }
        }
        let basis = basis?;
        v.view_mut((0, col), (n, m)).copy_from(&basis);
        diag.extend(core::iter::repeat(mean).take(m));
        clusters.push(EigenCluster {
            mean,
            multiplicity: m,
            index,
        });
        col += m;
    }
    if linalg::cond(&v) > tol.cond_max {
        return None;
    }
    let vinv = v.clone().try_inverse()?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let s = &v * d * vinv;
    Some((linalg::real_part(&s), clusters))
}

/// Right singular vectors of the `k` smallest singular values, and all
/// singular values in increasing order.
fn smallest_right_vectors(a: &DMatrix<Complex64>, k: usize) -> (DMatrix<Complex64>, Vec<f64>) {
    let n = a.ncols();
    let svd = linalg::svd(a, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&x, &y| sv[x].total_cmp(&sv[y]));
    let mut out = DMatrix::zeros(n, k);
    for (j, &i) in order[..k].iter().enumerate() {
        for r in 0..n {
            out[(r, j)] = vt[(i, r)].conj();
        }
    }
    (out, order.iter().map(|&i| sv[i]).collect())
}
