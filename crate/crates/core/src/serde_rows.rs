//! Serde adapters: matrices as row-major nested arrays, complex numbers as
//! `[re, im]`, Fourier modes as `{k, jet}` lists and polynomial terms as
//! `{exponent, coeff}` lists.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::fourier::{ModeJet, C64};

fn rows_of<T: Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows<E: serde::de::Error>(rows: Vec<Vec<f64>>, cols_if_empty: usize) -> Result<DMatrix<f64>, E> {
    let r = rows.len();
    let c = rows.first().map_or(cols_if_empty, |v| v.len());
    if rows.iter().any(|v| v.len() != c) {
        return Err(E::custom("rows have different lengths"));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten()))
}

pub mod mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        from_rows(Vec::<Vec<f64>>::deserialize(d)?, 0)
    }
}

pub mod mats {
    use super::*;

    pub fn serialize<S: Serializer>(m: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(rows_of).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Vec::<Vec<Vec<f64>>>::deserialize(d)?.into_iter().map(|r| from_rows(r, 0)).collect()
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

fn pair(c: &C64) -> [f64; 2] {
    [c.re, c.im]
}

pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<C64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| m.row(i).iter().map(pair).collect()).collect();
        (m.nrows(), m.ncols(), rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<C64>, D::Error> {
        let (r, c, rows) = <(usize, usize, Vec<Vec<[f64; 2]>>)>::deserialize(d)?;
        if rows.len() != r || rows.iter().any(|v| v.len() != c) {
            return Err(D::Error::custom("complex matrix shape does not match its rows"));
        }
        Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten().map(|[a, b]| C64::new(a, b))))
    }
}

pub mod cvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<C64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<C64>, D::Error> {
        let v = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(DVector::from_iterator(v.len(), v.into_iter().map(|[a, b]| C64::new(a, b))))
    }
}

pub mod cpair {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64; 2], s: S) -> Result<S::Ok, S::Error> {
        [pair(&v[0]), pair(&v[1])].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[C64; 2], D::Error> {
        let [a, b] = <[[f64; 2]; 2]>::deserialize(d)?;
        Ok([C64::new(a[0], a[1]), C64::new(b[0], b[1])])
    }
}

#[derive(Serialize, Deserialize)]
struct ModeEntry {
    k: Vec<i64>,
    jet: ModeJet,
}

pub mod modes {
    use super::*;

    pub fn serialize<S: Serializer>(m: &BTreeMap<Vec<i64>, ModeJet>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(k, j)| ModeEntry { k: k.clone(), jet: j.clone() })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Vec<i64>, ModeJet>, D::Error> {
        Ok(Vec::<ModeEntry>::deserialize(d)?.into_iter().map(|e| (e.k, e.jet)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct Term {
    exponent: Vec<u32>,
    coeff: f64,
}

pub mod terms {
    use super::*;

    pub fn serialize<S: Serializer>(m: &BTreeMap<Vec<u32>, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(e, &c)| Term { exponent: e.clone(), coeff: c })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Vec<u32>, f64>, D::Error> {
        let mut out = BTreeMap::new();
        for t in Vec::<Term>::deserialize(d)? {
            *out.entry(t.exponent).or_insert(0.0) += t.coeff;
        }
        out.retain(|_, c| *c != 0.0);
        Ok(out)
    }
}
