#![allow(dead_code)]

use faer::{c64, Mat};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use qaction::fast_algebra::FastOperator;
use qaction::linalg;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_hermitian(rng: &mut StdRng, n: usize) -> FastOperator {
    let a = Mat::<c64>::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    FastOperator::from_mat(linalg::hermitize(&a)).unwrap()
}

/// Haar-ish unitary from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary(rng: &mut StdRng, n: usize) -> Mat<c64> {
    linalg::herm_eig(random_hermitian(rng, n).mat()).unwrap().vectors
}

/// S = U diag(labels) U† together with U.
pub fn action_from_labels(u: &Mat<c64>, labels: &[i64]) -> FastOperator {
    let n = labels.len();
    let d = Mat::<c64>::from_fn(n, n, |i, j| if i == j { c64::new(labels[i] as f64, 0.0) } else { c64::new(0.0, 0.0) });
    FastOperator::from_mat(u * d * u.adjoint()).unwrap()
}

/// Random integer labels in 0..n, with some repeats when `degenerate`.
pub fn random_labels(rng: &mut StdRng, n: usize, degenerate: bool) -> Vec<i64> {
    if degenerate {
        (0..n).map(|_| rng.random_range(0..n as i64)).collect()
    } else {
        let mut l: Vec<i64> = (0..n as i64).collect();
        for i in (1..n).rev() {
            l.swap(i, rng.random_range(0..=i));
        }
        l
    }
}

/// e^{itS} built directly from U and the labels.
pub fn exp_action(u: &Mat<c64>, labels: &[i64], t: f64) -> Mat<c64> {
    let n = labels.len();
    let d = Mat::<c64>::from_fn(n, n, |i, j| {
        if i == j {
            c64::cis(t * labels[i] as f64)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    u * d * u.adjoint()
}

pub fn max_abs(m: &Mat<c64>) -> f64 {
    linalg::max_abs(m)
}
