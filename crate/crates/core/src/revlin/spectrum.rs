use alloc::vec::Vec;
use num_complex::Complex64;

use super::StructuredMatrix;
use crate::linalg;

/// Eigenvalues sorted by imaginary then real part.
pub fn spectrum(omega: &StructuredMatrix) -> Vec<Complex64> {
    let mut ev = linalg::eigenvalues(&omega.entries);
    ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    ev
}

/// Imaginary parts of the eigenvalues, with multiplicity, ascending.
pub fn normal_frequencies(omega: &StructuredMatrix) -> Vec<f64> {
    let mut alpha: Vec<f64> = linalg::eigenvalues(&omega.entries).iter().map(|z| z.im).collect();
    alpha.sort_by(f64::total_cmp);
    alpha
}
