//! Band decomposition, the action operator S(x) = Σ k P_k(x), the averaging
//! (&) and integrating (#) superoperators, and the term function calculus.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::fast_algebra::{FastOperator, DEFAULT_N_GUARD};
use crate::geometry::{BandField, OperatorField, SlowGrid};
use crate::linalg;

/// Tolerance for rounding the spectrum of an action operator to integers.
pub const ACTION_INTEGER_TOL: f64 = 1e-6;

/// Default minimal admissible gap between trusted bands.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct BandConfig {
    pub n_guard: usize,
    pub gap_tol: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { n_guard: DEFAULT_N_GUARD, gap_tol: DEFAULT_GAP_TOL }
    }
}

/// Eigen-data of H(x) on every grid point with ascending labels.
#[derive(Clone, Debug)]
pub struct BandSystem {
    pub grid: SlowGrid,
    /// All `nf` eigenvalues per point; only `0..trusted` are reported.
    pub lambdas: BandField,
    /// Eigenvector matrices, column k spans the range of P_k.
    pub vectors: Vec<Mat<c64>>,
    /// Number of trusted bands, K_max + 1.
    pub trusted: usize,
    pub min_gap: f64,
}

impl BandSystem {
    pub fn nf(&self) -> usize {
        self.lambdas.nbands
    }

    pub fn k_max(&self) -> usize {
        self.trusted - 1
    }

    pub fn projector(&self, p: usize, k: usize) -> FastOperator {
        let v = &self.vectors[p];
        let n = v.nrows();
        FastOperator::from_fn(n, |i, j| v[(i, k)] * v[(j, k)].conj())
    }

    /// Σ_k g(k) P_k(x_p) over all levels.
    pub fn function_of_labels(&self, p: usize, g: impl Fn(usize) -> f64) -> FastOperator {
        diag_in_basis(&self.vectors[p], &(0..self.nf()).map(g).collect::<Vec<_>>())
    }

    /// Σ_{k ≤ K_max} λ_k P_k at point `p`.
    pub fn reconstruct_trusted(&self, p: usize) -> FastOperator {
        let lam = self.lambdas.at(p);
        let trusted = self.trusted;
        self.function_of_labels(p, |k| if k < trusted { lam[k] } else { 0.0 })
    }
}

/// V diag(d) V^dagger.
pub fn diag_in_basis(v: &Mat<c64>, d: &[f64]) -> FastOperator {
    let n = v.nrows();
    let scaled = Mat::from_fn(n, d.len(), |i, j| v[(i, j)] * d[j]);
    FastOperator::from_mat_unchecked(&scaled * v.adjoint())
}

/// Per-point ascending eigen-decomposition with a gap audit on trusted bands.
pub fn band_decompose(h: &OperatorField, cfg: &BandConfig) -> Result<BandSystem> {
    let grid = h.grid;
    let nf = h.fast_dim();
    if nf <= cfg.n_guard {
        return Err(Error::InvalidDimension(format!(
            "fast dimension {nf} leaves no levels outside the guard band {}",
            cfg.n_guard
        )));
    }
    let trusted = nf - cfg.n_guard;
    let mut lambdas = BandField::zeros(grid, nf);
    let mut vectors = Vec::with_capacity(grid.len());
    let mut min_gap = f64::INFINITY;
    for (p, hp) in h.values.iter().enumerate() {
        let eig = linalg::herm_eig(hp.mat()).map_err(|e| e.context(format!("band_decompose at point {p}")))?;
        for k in 0..nf {
            lambdas.set(p, k, eig.values[k]);
        }
        for k in 0..trusted.saturating_sub(1) {
            let gap = eig.values[k + 1] - eig.values[k];
            if gap < cfg.gap_tol {
                return Err(Error::BandCrossing { point: p, k, gap });
            }
            min_gap = min_gap.min(gap);
        }
        vectors.push(eig.vectors);
    }
    Ok(BandSystem { grid, lambdas, vectors, trusted, min_gap })
}

/// Eigenbasis of an action operator with integer labels per column.
#[derive(Clone, Debug)]
pub struct ActionBasis {
    pub vectors: Mat<c64>,
    pub labels: Vec<i64>,
}

impl ActionBasis {
    /// Diagonalizes `s` and rounds its spectrum; fails if it is not integer.
    pub fn from_operator(s: &FastOperator) -> Result<Self> {
        let eig = linalg::herm_eig(s.mat())?;
        let mut dev = 0.0f64;
        let labels = eig
            .values
            .iter()
            .map(|&v| {
                let r = v.round();
                dev = dev.max((v - r).abs());
                r as i64
            })
            .collect();
        if dev > ACTION_INTEGER_TOL {
            return Err(Error::InvalidAction { deviation: dev });
        }
        Ok(Self { vectors: eig.vectors, labels })
    }

    pub fn from_bands(bands: &BandSystem, p: usize) -> Self {
        Self { vectors: bands.vectors[p].clone(), labels: (0..bands.nf() as i64).collect() }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Matrix elements in the action basis.
    pub fn to_basis(&self, t: &FastOperator) -> Mat<c64> {
        self.vectors.adjoint() * t.mat() * &self.vectors
    }

    pub fn from_basis(&self, m: &Mat<c64>) -> FastOperator {
        FastOperator::from_mat_unchecked(&self.vectors * m * self.vectors.adjoint())
    }

    /// T^& : keeps the blocks with equal labels.
    pub fn average(&self, t: &FastOperator) -> FastOperator {
        let tb = self.to_basis(t);
        let n = self.dim();
        let kept = Mat::from_fn(n, n, |k, l| {
            if self.labels[k] == self.labels[l] {
                tb[(k, l)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        self.from_basis(&kept)
    }

    /// T^# : off-diagonal blocks divided by i(k-l).
    pub fn sharp(&self, t: &FastOperator) -> FastOperator {
        let tb = self.to_basis(t);
        self.from_basis(&self.sharp_in_basis(&tb))
    }

    pub fn sharp_in_basis(&self, tb: &Mat<c64>) -> Mat<c64> {
        let n = self.dim();
        Mat::from_fn(n, n, |k, l| {
            let d = self.labels[k] - self.labels[l];
            if d == 0 {
                c64::new(0.0, 0.0)
            } else {
                tb[(k, l)] / c64::new(0.0, d as f64)
            }
        })
    }

    /// g(S) from samples of g at the labels.
    pub fn function(&self, g: impl Fn(i64) -> f64) -> FastOperator {
        let d: Vec<f64> = self.labels.iter().map(|&k| g(k)).collect();
        diag_in_basis(&self.vectors, &d)
    }

    /// Diagonal entries ⟨k|T|k⟩ in the action basis.
    pub fn diagonal(&self, t: &FastOperator) -> Vec<c64> {
        let tb = self.to_basis(t);
        (0..self.dim()).map(|k| tb[(k, k)]).collect()
    }

    /// Largest off-diagonal (label-mixing) entry of T in the action basis.
    pub fn offdiag_mass(&self, t: &FastOperator) -> f64 {
        let tb = self.to_basis(t);
        let n = self.dim();
        let mut m = 0.0f64;
        for k in 0..n {
            for l in 0..n {
                if self.labels[k] != self.labels[l] {
                    m = m.max(tb[(k, l)].norm());
                }
            }
        }
        m
    }
}

/// The & operation relative to the action operator `s`.
pub fn average(t: &FastOperator, s: &FastOperator) -> Result<FastOperator> {
    Ok(ActionBasis::from_operator(s)?.average(t))
}

/// The # operation relative to the action operator `s`.
pub fn sharp(t: &FastOperator, s: &FastOperator) -> Result<FastOperator> {
    Ok(ActionBasis::from_operator(s)?.sharp(t))
}

/// S(x) = Σ_k k P_k(x) with its eigenbasis cache.
#[derive(Clone, Debug)]
pub struct ActionField {
    pub s: OperatorField,
    pub bases: Vec<ActionBasis>,
}

impl ActionField {
    pub fn grid(&self) -> SlowGrid {
        self.s.grid
    }

    /// max_x ‖exp(2πiS) − I‖ restricted to trusted levels.
    pub fn periodicity_defect(&self, trusted: usize) -> f64 {
        let mut worst = 0.0f64;
        for (sp, b) in self.s.values.iter().zip(&self.bases) {
            let e = crate::fast_algebra::matrix_exp(sp, 2.0 * std::f64::consts::PI).expect("hermitian S");
            let m = b.to_basis(&e);
            for k in 0..trusted {
                for l in 0..trusted {
                    let want = if k == l { 1.0 } else { 0.0 };
                    worst = worst.max((m[(k, l)] - c64::new(want, 0.0)).norm());
                }
            }
        }
        worst
    }
}

/// Labels every level of H(x) by its ascending position.
pub fn action_operator(bands: &BandSystem) -> ActionField {
    let labels: Vec<f64> = (0..bands.nf()).map(|k| k as f64).collect();
    let values = bands.vectors.iter().map(|v| diag_in_basis(v, &labels)).collect();
    let bases = (0..bands.grid.len()).map(|p| ActionBasis::from_bands(bands, p)).collect();
    ActionField { s: OperatorField::new(bands.grid, values), bases }
}

/// f(k,x) = λ_k(x) with its discrete derivative and divided difference in k.
#[derive(Clone, Debug)]
pub struct TermFunction {
    pub lambdas: BandField,
    pub trusted: usize,
}

impl TermFunction {
    pub fn f(&self, p: usize, k: usize) -> f64 {
        self.lambdas.get(p, k)
    }

    /// Centered difference in k, one-sided at the end labels.
    pub fn df(&self, p: usize, k: usize) -> f64 {
        let n = self.lambdas.nbands;
        let l = self.lambdas.at(p);
        if n < 2 {
            0.0
        } else if k == 0 {
            l[1] - l[0]
        } else if k == n - 1 {
            l[n - 1] - l[n - 2]
        } else {
            0.5 * (l[k + 1] - l[k - 1])
        }
    }

    pub fn delta(&self, p: usize, k: usize, l: usize) -> f64 {
        if k == l {
            self.df(p, k)
        } else {
            (self.f(p, k) - self.f(p, l)) / (k as f64 - l as f64)
        }
    }
}

/// Builds the term function and checks strict monotonicity on trusted bands.
pub fn term_calculus(bands: &BandSystem) -> Result<TermFunction> {
    if bands.trusted < 3 {
        return Err(Error::InvalidDimension(format!(
            "term calculus needs at least 3 trusted bands, got {}",
            bands.trusted
        )));
    }
    for p in 0..bands.grid.len() {
        let l = bands.lambdas.at(p);
        for k in 0..bands.trusted - 1 {
            if l[k + 1] <= l[k] {
                return Err(Error::Monotonicity { point: p, k, value: l[k + 1] - l[k] });
            }
        }
    }
    Ok(TermFunction { lambdas: bands.lambdas.clone(), trusted: bands.trusted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fast_algebra::{ladder_pair, weyl_poly, FastMonomial};
    use crate::quadrature::gauss_legendre;
    use std::f64::consts::PI;

    fn t22() -> FastOperator {
        FastOperator::from_fn(2, |i, j| c64::new((1 + 2 * i + j) as f64, 0.0))
    }

    #[test]
    fn average_and_sharp_examples() {
        let s = FastOperator::diag(&[0.0, 1.0]);
        let t = t22();
        let a = average(&t, &s).unwrap();
        assert!((a.get(0, 0) - c64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(a.get(0, 1).norm() < 1e-14 && a.get(1, 0).norm() < 1e-14);
        assert!((a.get(1, 1) - c64::new(4.0, 0.0)).norm() < 1e-14);
        let sh = sharp(&t, &s).unwrap();
        assert!((sh.get(0, 1) - c64::new(0.0, 2.0)).norm() < 1e-14);
        assert!((sh.get(1, 0) - c64::new(0.0, -3.0)).norm() < 1e-14);
        assert!(sh.get(0, 0).norm() < 1e-14);
        let id = FastOperator::identity(2);
        assert!((&average(&id, &s).unwrap() - &id).max_abs() < 1e-14);
    }

    #[test]
    fn quadrature_oracle_small() {
        // (1/2π)∫ e^{itS} T e^{-itS} (t-π) dt by Gauss-Legendre.
        let s = FastOperator::diag(&[0.0, 1.0]);
        let t = t22();
        let (nodes, weights) = gauss_legendre(256, 0.0, 2.0 * PI);
        let mut acc = FastOperator::zeros(2);
        for (x, w) in nodes.iter().zip(&weights) {
            let u = crate::fast_algebra::matrix_exp(&s, *x).unwrap();
            let conj = &(&u * &t) * &u.adjoint();
            acc.axpy(c64::new(w * (x - PI) / (2.0 * PI), 0.0), &conj);
        }
        assert!((&acc - &sharp(&t, &s).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn non_integer_action_rejected() {
        let s = FastOperator::diag(&[0.0, 1.5]);
        assert!(matches!(average(&t22(), &s), Err(Error::InvalidAction { .. })));
    }

    fn scaled_osc_field(grid: SlowGrid, nf: usize) -> OperatorField {
        let lp = ladder_pair(nf).unwrap();
        let osc = weyl_poly(&[FastMonomial::new(2, 0, 0.5), FastMonomial::new(0, 2, 0.5)], &lp).unwrap();
        OperatorField::from_fn(grid, |x| osc.scale_re(1.0 + x[0] * x[0] + x[1] * x[1]))
    }

    #[test]
    fn scaled_oscillator_bands() {
        let grid = SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [5, 5]).unwrap();
        let h = scaled_osc_field(grid, 10);
        let bands = band_decompose(&h, &BandConfig::default()).unwrap();
        let tf = term_calculus(&bands).unwrap();
        for p in 0..grid.len() {
            let x = grid.point(p);
            let r = 1.0 + x[0] * x[0] + x[1] * x[1];
            for k in 0..bands.trusted {
                assert!((bands.lambdas.get(p, k) - (k as f64 + 0.5) * r).abs() < 1e-7);
                assert!((tf.df(p, k) - r).abs() < 1e-9);
            }
            let rec = bands.reconstruct_trusted(p);
            let proj = bands.function_of_labels(p, |k| if k < bands.trusted { 1.0 } else { 0.0 });
            let want = &(&proj * &h.values[p]) * &proj;
            assert!((&rec - &want).max_abs() < 1e-8);
        }
    }

    #[test]
    fn action_periodic_and_constant() {
        let grid = SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [3, 3]).unwrap();
        let h = OperatorField::from_fn(grid, |_| FastOperator::diag(&[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0]));
        let bands = band_decompose(&h, &BandConfig::default()).unwrap();
        let act = action_operator(&bands);
        assert!(act.periodicity_defect(bands.trusted) < 1e-9);
        for p in 1..grid.len() {
            assert!((&act.s.values[p] - &act.s.values[0]).max_abs() < 1e-14);
        }
    }

    #[test]
    fn crossing_detected() {
        let grid = SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [3, 3]).unwrap();
        let h = OperatorField::from_fn(grid, |x| FastOperator::diag(&[0.0, x[0].abs(), 3.0, 4.0, 5.0, 6.0, 7.0]));
        assert!(matches!(band_decompose(&h, &BandConfig::default()), Err(Error::BandCrossing { .. })));
    }
}
