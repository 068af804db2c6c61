//! Dense complex helpers shared by the fast and full operator layers.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Absolute Hermiticity tolerance, scaled by `max(1, max|entry|)`.
pub const TOL_HERM: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian matrix, values ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

pub fn max_abs(m: &Mat<c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn frobenius(m: &Mat<c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// max |m_ij - conj(m_ji)|; infinity for non-square input.
pub fn hermitian_deviation(m: &Mat<c64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &Mat<c64>) -> bool {
    hermitian_deviation(m) <= TOL_HERM * max_abs(m).max(1.0)
}

pub fn adjoint(m: &Mat<c64>) -> Mat<c64> {
    m.adjoint().to_owned()
}

/// (m + m^dagger)/2.
pub fn hermitize(m: &Mat<c64>) -> Mat<c64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Eigen-decomposition with a Hermiticity precheck at `TOL_HERM`.
pub fn herm_eig(m: &Mat<c64>) -> Result<Eigen> {
    let dev = hermitian_deviation(m);
    if dev > TOL_HERM * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    herm_eig_unchecked(m)
}

/// Eigen-decomposition of the Hermitian part, reading the lower triangle.
pub fn herm_eig_unchecked(m: &Mat<c64>) -> Result<Eigen> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        });
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalConsistency(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

/// V f(values) V^dagger.
pub fn spectral_apply(eig: &Eigen, f: impl Fn(f64) -> c64) -> Mat<c64> {
    let n = eig.values.len();
    let fv: Vec<c64> = eig.values.iter().map(|&x| f(x)).collect();
    let scaled = Mat::from_fn(n, n, |i, j| eig.vectors[(i, j)] * fv[j]);
    &scaled * eig.vectors.adjoint()
}

/// Largest singular value of a (tall) matrix via its Gram matrix.
pub fn spectral_norm(m: &Mat<c64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let gram = hermitize(&gram);
    match herm_eig_unchecked(&gram) {
        Ok(e) => e.values.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_sorted_and_reconstructs() {
        let m = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new([3.0, 1.0, 2.0][i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let e = herm_eig(&m).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        let back = spectral_apply(&e, |x| c64::new(x, 0.0));
        assert!(frobenius(&(&back - &m)) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = Mat::from_fn(2, 2, |i, j| c64::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn spectral_norm_of_diag() {
        let m = Mat::from_fn(4, 2, |i, j| if i == j { c64::new(-3.0 + j as f64 * 5.0, 0.0) } else { c64::new(0.0, 0.0) });
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
    }
}
