//! Truncated fast Heisenberg algebra: ladder pair, Weyl-symmetrized
//! polynomials and the Hermitian eigen kernel.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Eigen};

/// Default number of untrusted top fast levels.
pub const DEFAULT_N_GUARD: usize = 4;

/// Degree at and below which `weyl_poly` averages over explicit orderings.
pub const PERMUTATION_MAX_DEGREE: usize = 6;

fn cz() -> c64 {
    c64::new(0.0, 0.0)
}

/// Complex square matrix in the truncated number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FastOperator {
    m: Mat<c64>,
}

impl FastOperator {
    pub fn from_mat(m: Mat<c64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "fast operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    pub(crate) fn from_mat_unchecked(m: Mat<c64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        Self { m: Mat::from_fn(dim, dim, f) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: Mat::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: linalg::identity(dim) }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { c64::new(values[i], 0.0) } else { cz() })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn mat(&self) -> &Mat<c64> {
        &self.m
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: linalg::adjoint(&self.m) }
    }

    /// Recomputed on every call.
    pub fn is_hermitian(&self) -> bool {
        linalg::is_hermitian(&self.m)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.m)
    }

    pub fn hermitize(&self) -> Self {
        Self { m: linalg::hermitize(&self.m) }
    }

    pub fn scale(&self, c: c64) -> Self {
        Self { m: Mat::from_fn(self.dim(), self.dim(), |i, j| self.m[(i, j)] * c) }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(c64::new(c, 0.0))
    }

    /// self += c * other
    pub fn axpy(&mut self, c: c64, other: &FastOperator) {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                self.m[(i, j)] += other.m[(i, j)] * c;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.m)
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.m)
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.m[(i, i)]).sum()
    }

    /// Symmetrized product (AB + BA)/2.
    pub fn sym(&self, other: &FastOperator) -> FastOperator {
        let ab = &self.m * &other.m;
        let ba = &other.m * &self.m;
        Self { m: (&ab + &ba) * faer::Scale(c64::new(0.5, 0.0)) }
    }

    /// Top-left `k x k` block.
    pub fn compress(&self, k: usize) -> FastOperator {
        let k = k.min(self.dim());
        Self::from_fn(k, |i, j| self.m[(i, j)])
    }

    /// U^dagger self U.
    pub fn to_basis(&self, u: &Mat<c64>) -> FastOperator {
        Self { m: u.adjoint() * &self.m * u }
    }

    /// U self U^dagger.
    pub fn from_basis(&self, u: &Mat<c64>) -> FastOperator {
        Self { m: u * &self.m * u.adjoint() }
    }
}

impl<'a> Add<&'a FastOperator> for &'a FastOperator {
    type Output = FastOperator;
    fn add(self, rhs: &FastOperator) -> FastOperator {
        FastOperator { m: &self.m + &rhs.m }
    }
}

impl<'a> Sub<&'a FastOperator> for &'a FastOperator {
    type Output = FastOperator;
    fn sub(self, rhs: &FastOperator) -> FastOperator {
        FastOperator { m: &self.m - &rhs.m }
    }
}

impl<'a> Mul<&'a FastOperator> for &'a FastOperator {
    type Output = FastOperator;
    fn mul(self, rhs: &FastOperator) -> FastOperator {
        FastOperator { m: &self.m * &rhs.m }
    }
}

impl Mul<f64> for &FastOperator {
    type Output = FastOperator;
    fn mul(self, rhs: f64) -> FastOperator {
        self.scale_re(rhs)
    }
}

impl Neg for &FastOperator {
    type Output = FastOperator;
    fn neg(self) -> FastOperator {
        self.scale_re(-1.0)
    }
}

impl AddAssign<&FastOperator> for FastOperator {
    fn add_assign(&mut self, rhs: &FastOperator) {
        self.axpy(c64::new(1.0, 0.0), rhs);
    }
}

/// Hermitian pair A1 = (a+a†)/√2, A2 = (a−a†)/(i√2).
#[derive(Clone, Debug)]
pub struct LadderPair {
    pub a1: FastOperator,
    pub a2: FastOperator,
}

impl LadderPair {
    pub fn dim(&self) -> usize {
        self.a1.dim()
    }

    /// Number operator a†a (exactly diagonal, no truncation artifact).
    pub fn number(&self) -> FastOperator {
        FastOperator::diag(&(0..self.dim()).map(|k| k as f64).collect::<Vec<_>>())
    }
}

/// Truncated ladder pair with `a[k-1,k] = sqrt(k)`.
pub fn ladder_pair(nf: usize) -> Result<LadderPair> {
    if nf < 2 {
        return Err(Error::InvalidDimension(format!("ladder pair needs nf >= 2, got {nf}")));
    }
    let s2 = std::f64::consts::SQRT_2;
    let a = |i: usize, j: usize| if j == i + 1 { (j as f64).sqrt() } else { 0.0 };
    let a1 = FastOperator::from_fn(nf, |i, j| c64::new((a(i, j) + a(j, i)) / s2, 0.0));
    // (a - a†)/(i√2) = -i (a - a†)/√2
    let a2 = FastOperator::from_fn(nf, |i, j| c64::new(0.0, -(a(i, j) - a(j, i)) / s2));
    Ok(LadderPair { a1, a2 })
}

/// One term `c * Sym(A1^m A2^n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastMonomial {
    pub m: usize,
    pub n: usize,
    pub re: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub im: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl FastMonomial {
    pub fn new(m: usize, n: usize, c: f64) -> Self {
        Self { m, n, re: c, im: 0.0 }
    }

    pub fn coeff(&self) -> c64 {
        c64::new(self.re, self.im)
    }

    pub fn degree(&self) -> usize {
        self.m + self.n
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Sum over all distinct words with `m` copies of A1 and `n` of A2, divided
/// by their count. Uses U(m,n) = A1 U(m-1,n) + A2 U(m,n-1).
fn sym_by_words(a1: &FastOperator, a2: &FastOperator, m: usize, n: usize) -> FastOperator {
    let dim = a1.dim();
    let mut table: Vec<Vec<Option<FastOperator>>> = vec![vec![None; n + 1]; m + 1];
    table[0][0] = Some(FastOperator::identity(dim));
    for i in 0..=m {
        for j in 0..=n {
            if i == 0 && j == 0 {
                continue;
            }
            let mut acc = FastOperator::zeros(dim);
            if i > 0 {
                acc += &(a1 * table[i - 1][j].as_ref().unwrap());
            }
            if j > 0 {
                acc += &(a2 * table[i][j - 1].as_ref().unwrap());
            }
            table[i][j] = Some(acc);
        }
    }
    table[m][n].take().unwrap().scale_re(1.0 / binomial(m + n, m))
}

fn power(a: &FastOperator, k: usize) -> FastOperator {
    let mut out = FastOperator::identity(a.dim());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// McCoy form: Sym(A1^m A2^n) = 2^-m Σ_k C(m,k) A1^k A2^n A1^(m-k),
/// valid when [A1,A2] is a c-number on the relevant block.
fn sym_mccoy(a1: &FastOperator, a2: &FastOperator, m: usize, n: usize) -> FastOperator {
    let dim = a1.dim();
    let p2 = power(a2, n);
    let pows: Vec<FastOperator> = (0..=m).map(|k| power(a1, k)).collect();
    let mut acc = FastOperator::zeros(dim);
    for k in 0..=m {
        let term = &(&pows[k] * &p2) * &pows[m - k];
        acc.axpy(c64::new(binomial(m, k), 0.0), &term);
    }
    acc.scale_re(0.5f64.powi(m as i32))
}

/// Which symmetrization route `weyl_poly` takes for a monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymRoute {
    Permutation,
    McCoy,
}

/// Sym(A1^m A2^n) on an `nf`-level truncation, by the given route.
///
/// Products are formed with ladder matrices enlarged by the total degree and
/// then cut back to `nf` levels, so every retained entry equals the
/// corresponding entry of the untruncated operator. Without the enlargement,
/// truncated products such as A1² + A2² acquire a spurious top eigenvalue.
pub fn weyl_monomial(nf: usize, m: usize, n: usize, route: SymRoute) -> Result<FastOperator> {
    let big = ladder_pair(nf + m + n + 1)?;
    let full = match route {
        SymRoute::Permutation => sym_by_words(&big.a1, &big.a2, m, n),
        SymRoute::McCoy => sym_mccoy(&big.a1, &big.a2, m, n),
    };
    Ok(full.compress(nf))
}

/// Σ c · Sym(A1^m A2^n) on the truncation size of `ladder`.
pub fn weyl_poly(mono_coeffs: &[FastMonomial], ladder: &LadderPair) -> Result<FastOperator> {
    let nf = ladder.dim();
    let mut acc = FastOperator::zeros(nf);
    for mono in mono_coeffs {
        if mono.degree() > nf - 1 {
            log::warn!(
                "weyl_poly: degree {} exceeds nf-1 = {}; low levels stay exact, upper ones are cut",
                mono.degree(),
                nf - 1
            );
        }
        let route = if mono.degree() <= PERMUTATION_MAX_DEGREE {
            SymRoute::Permutation
        } else {
            SymRoute::McCoy
        };
        let term = weyl_monomial(nf, mono.m, mono.n, route)?;
        acc.axpy(mono.coeff(), &term);
    }
    Ok(acc)
}

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian operator.
pub fn hermitian_eig(f: &FastOperator) -> Result<Eigen> {
    linalg::herm_eig(f.mat())
}

pub fn commutator(f: &FastOperator, g: &FastOperator) -> Result<FastOperator> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { left: f.dim(), right: g.dim() });
    }
    Ok(&(f * g) - &(g * f))
}

/// exp(i t F) for Hermitian F.
pub fn matrix_exp(f: &FastOperator, t: f64) -> Result<FastOperator> {
    let eig = hermitian_eig(f)?;
    Ok(FastOperator::from_mat_unchecked(linalg::spectral_apply(&eig, |x| {
        c64::from_polar(1.0, t * x)
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn close(a: c64, b: c64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn ladder_nf2() {
        let lp = ladder_pair(2).unwrap();
        let h = 1.0 / SQRT_2;
        assert!(close(lp.a1.get(0, 1), c64::new(h, 0.0), 1e-15));
        assert!(close(lp.a1.get(1, 0), c64::new(h, 0.0), 1e-15));
        assert!(close(lp.a1.get(0, 0), cz(), 0.0));
        assert!(lp.a1.is_hermitian() && lp.a2.is_hermitian());
        let s = &(&lp.a1 * &lp.a1) + &(&lp.a2 * &lp.a2);
        assert!(close(s.get(0, 0), c64::new(1.0, 0.0), 1e-14));
        assert!(close(s.get(1, 1), c64::new(1.0, 0.0), 1e-14));
        assert!(ladder_pair(1).is_err());
    }

    #[test]
    fn ladder_commutator_pattern() {
        let lp = ladder_pair(3).unwrap();
        let c = commutator(&lp.a1, &lp.a2).unwrap().scale(c64::new(0.0, -1.0));
        let d: Vec<f64> = (0..3).map(|k| c.get(k, k).re).collect();
        assert!((d[0] - 1.0).abs() < 1e-14 && (d[1] - 1.0).abs() < 1e-14 && (d[2] + 2.0).abs() < 1e-14);
        let lp = ladder_pair(5).unwrap();
        let c = commutator(&lp.a1, &lp.a2).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { c64::new(0.0, if i == 4 { -4.0 } else { 1.0 }) } else { cz() };
                assert!(close(c.get(i, j), want, 1e-14));
            }
        }
    }

    #[test]
    fn weyl_examples() {
        let lp = ladder_pair(6).unwrap();
        let x = weyl_poly(&[FastMonomial::new(1, 1, 1.0)], &lp).unwrap();
        let want = lp.a1.sym(&lp.a2);
        // A1A2 on the top level differs only through truncation; compare the trusted block.
        assert!((&x.compress(5) - &want.compress(5)).max_abs() < 1e-14);

        let five = weyl_poly(&[FastMonomial::new(0, 0, 5.0)], &lp).unwrap();
        assert!((&five - &FastOperator::identity(6).scale_re(5.0)).max_abs() < 1e-15);

        let lp4 = ladder_pair(4).unwrap();
        let osc = weyl_poly(&[FastMonomial::new(2, 0, 1.0), FastMonomial::new(0, 2, 1.0)], &lp4).unwrap();
        // oracle: 2 a†a + 1 from the number operator
        let oracle = &lp4.number().scale_re(2.0) + &FastOperator::identity(4);
        assert!((&osc - &oracle).max_abs() < 1e-13);
    }

    #[test]
    fn eig_examples() {
        let e = hermitian_eig(&FastOperator::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);

        let px = FastOperator::from_fn(2, |i, j| if i != j { c64::new(1.0, 0.0) } else { cz() });
        let e = hermitian_eig(&px).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let v0 = (e.vectors[(0, 0)], e.vectors[(1, 0)]);
        assert!((v0.0 + v0.1).norm() < 1e-14);

        let lp = ladder_pair(8).unwrap();
        let osc = weyl_poly(&[FastMonomial::new(2, 0, 1.0), FastMonomial::new(0, 2, 1.0)], &lp).unwrap();
        let e = hermitian_eig(&osc).unwrap();
        for k in 0..5 {
            assert!((e.values[k] - (2 * k + 1) as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn exp_examples() {
        let f = FastOperator::diag(&[0.0, 1.0, 2.0]);
        let u = matrix_exp(&f, 2.0 * PI).unwrap();
        assert!((&u - &FastOperator::identity(3)).max_abs() < 1e-12);
        let lp = ladder_pair(5).unwrap();
        let c = commutator(&lp.a1, &lp.a1).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn routes_agree_on_overlap() {
        for deg in 0..=PERMUTATION_MAX_DEGREE {
            for m in 0..=deg {
                let p = weyl_monomial(10, m, deg - m, SymRoute::Permutation).unwrap();
                let q = weyl_monomial(10, m, deg - m, SymRoute::McCoy).unwrap();
                let scale = p.max_abs().max(1.0);
                assert!((&p - &q).max_abs() < 1e-11 * scale, "m={m} n={}", deg - m);
            }
        }
    }

    #[test]
    fn explicit_orderings_oracle() {
        // Sym(A1^2 A2) = (A1A1A2 + A1A2A1 + A2A1A1)/3 on the enlarged space.
        let big = ladder_pair(12).unwrap();
        let (a, b) = (&big.a1, &big.a2);
        let words = &(&(&(a * a) * b) + &(&(a * b) * a)) + &(&(b * a) * a);
        let oracle = words.scale_re(1.0 / 3.0).compress(8);
        let got = weyl_monomial(8, 2, 1, SymRoute::Permutation).unwrap();
        assert!((&got - &oracle).max_abs() < 1e-13);
    }
}
