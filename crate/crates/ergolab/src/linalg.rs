//! Shared dense complex linear algebra helpers (LAPACK-backed).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, OperationNorm, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

pub fn matvec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let x = Array1::from(v.to_vec());
    m.dot(&x).to_vec()
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

/// Right eigendecomposition: eigenvalues and eigenvectors as matrix columns.
pub fn eig_pairs(m: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    let (w, v) = m
        .eig()
        .map_err(|e| Error::Invalid(format!("eigendecomposition failed: {e}")))?;
    Ok((w.to_vec(), v))
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.inv()
        .map_err(|_| Error::IllConditionedEigenbasis(f64::INFINITY))
}

/// 2-norm condition number via singular values.
pub fn cond_2(m: &CMat) -> Result<f64> {
    let (_, s, _) = m
        .svd(false, false)
        .map_err(|e| Error::Invalid(format!("svd failed: {e}")))?;
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

pub fn largest_singular_value(m: &CMat) -> Result<f64> {
    let (_, s, _) = m
        .svd(false, false)
        .map_err(|e| Error::Invalid(format!("svd failed: {e}")))?;
    Ok(s.iter().cloned().fold(0.0_f64, f64::max))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0_f64, f64::max)
}

pub fn one_norm(m: &CMat) -> f64 {
    m.opnorm_one().unwrap_or(f64::NAN)
}

/// Spectral projector onto the span of selected right eigenvectors along the
/// complementary invariant subspace: P = V (W^H V)^{-1} W^H with V the
/// selected right eigenvectors of A and W the matching left eigenvectors
/// (right eigenvectors of A^H at the conjugate eigenvalues).
///
/// Works when the selected eigenvalues are semisimple even if the rest of the
/// spectrum is defective. A near-singular W^H V signals a defective selected
/// eigenvalue.
pub fn spectral_projector(
    a: &CMat,
    select: impl Fn(Complex64) -> bool,
    cond_cap: f64,
) -> Result<CMat> {
    let n = a.nrows();
    let (w_right, v_right) = eig_pairs(a)?;
    let ah = a.t().mapv(|c| c.conj());
    let (w_left, v_left) = eig_pairs(&ah)?;

    let sel_r: Vec<usize> = (0..n).filter(|&i| select(w_right[i])).collect();
    let sel_l: Vec<usize> = (0..n).filter(|&i| select(w_left[i].conj())).collect();
    if sel_r.len() != sel_l.len() {
        return Err(Error::Invalid(format!(
            "left/right eigenvalue selections disagree ({} vs {})",
            sel_r.len(),
            sel_l.len()
        )));
    }
    if sel_r.is_empty() {
        return Ok(CMat::zeros((n, n)));
    }
    let k = sel_r.len();
    let mut v = CMat::zeros((n, k));
    let mut w = CMat::zeros((n, k));
    for (j, &i) in sel_r.iter().enumerate() {
        v.column_mut(j).assign(&v_right.column(i));
    }
    for (j, &i) in sel_l.iter().enumerate() {
        w.column_mut(j).assign(&v_left.column(i));
    }
    let wh = w.t().mapv(|c| c.conj());
    let gram = wh.dot(&v);
    let cond = cond_2(&gram)?;
    if !cond.is_finite() || cond > cond_cap {
        return Err(Error::IllConditionedEigenbasis(cond));
    }
    let gram_inv = inverse(&gram)?;
    Ok(v.dot(&gram_inv).dot(&wh))
}

pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, m), flat).map_err(|e| Error::Dimension(e.to_string()))
}
