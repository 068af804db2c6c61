//! Full quantization on a position grid and the residual metrics measured on
//! a low-energy subspace.

use std::f64::consts::PI;

use faer::{c64, Mat};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fast_algebra::FastOperator;
use crate::geometry::{OperatorField, SlowGrid};
use crate::linalg::{self, Eigen};

/// Reference-state amplitude allowed at the edges of the q and p grids.
pub const DECAY_TOL: f64 = 1e-10;

/// Default size of the projected subspace Π.
pub const DEFAULT_N_PROJ: usize = 32;

/// Default number of compared eigenvalues per band.
pub const DEFAULT_N_CMP: usize = 8;

/// Minimal weight of an eigenvector on the band projector.
pub const BAND_WEIGHT_MIN: f64 = 0.9;

/// Position grid q_j = q_min + j·dq, j < nq, with momentum samples
/// p_k = k·dp, k ∈ [−nq/2, nq/2), dp = 2πε/(nq·dq).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowSpace {
    pub nq: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub epsilon: f64,
}

impl SlowSpace {
    pub fn new(nq: usize, q_min: f64, q_max: f64, epsilon: f64) -> Result<Self> {
        if nq < 4 || !nq.is_power_of_two() {
            return Err(Error::InvalidDimension(format!("nq must be a power of two >= 4, got {nq}")));
        }
        if !(q_max > q_min) || !(epsilon > 0.0) {
            return Err(Error::InvalidDimension("slow space needs q_max > q_min and epsilon > 0".into()));
        }
        Ok(Self { nq, q_min, q_max, epsilon })
    }

    /// Symmetric domain whose q and p extents coincide: L² = π·nq·ε/2.
    pub fn balanced(nq: usize, epsilon: f64) -> Result<Self> {
        let l = (PI * nq as f64 * epsilon / 2.0).sqrt();
        Self::new(nq, -l, l, epsilon)
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.nq as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI * self.epsilon / (self.nq as f64 * self.dq())
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.dq()
    }

    /// Grid of quantization nodes: (2nq−1) midpoints × nq momenta.
    pub fn quant_grid(&self) -> SlowGrid {
        let half = (self.nq / 2) as f64;
        SlowGrid::from_spacing([self.q_min, -half * self.dp()], [0.5 * self.dq(), self.dp()], [2 * self.nq - 1, self.nq])
            .expect("nq >= 4")
    }
}

/// Matrix on (slow position basis) ⊗ (fast number basis), index j·nf + a.
#[derive(Clone, Debug)]
pub struct FullOperator {
    pub mat: Mat<c64>,
    pub nq: usize,
    pub nf: usize,
}

impl FullOperator {
    pub fn dim(&self) -> usize {
        self.nq * self.nf
    }

    pub fn zeros(nq: usize, nf: usize) -> Self {
        Self { mat: Mat::zeros(nq * nf, nq * nf), nq, nf }
    }

    /// slow ⊗ fast.
    pub fn kron(slow: &Mat<c64>, fast: &FastOperator) -> Self {
        let mut out = Self::zeros(slow.nrows(), fast.dim());
        out.add_kron(c64::new(1.0, 0.0), slow, fast);
        out
    }

    /// self += c · slow ⊗ fast.
    pub fn add_kron(&mut self, c: c64, slow: &Mat<c64>, fast: &FastOperator) {
        let (nq, nf) = (self.nq, self.nf);
        for jp in 0..nq {
            for j in 0..nq {
                let s = slow[(j, jp)] * c;
                if s == c64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..nf {
                    for a in 0..nf {
                        self.mat[(j * nf + a, jp * nf + b)] += s * fast.get(a, b);
                    }
                }
            }
        }
    }

    pub fn axpy(&mut self, c: c64, other: &FullOperator) {
        let d = self.dim();
        for j in 0..d {
            for i in 0..d {
                self.mat[(i, j)] += other.mat[(i, j)] * c;
            }
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.mat)
    }

    pub fn eig(&self) -> Result<Eigen> {
        linalg::herm_eig_unchecked(&linalg::hermitize(&self.mat))
    }
}

fn check_finite(samples: &[c64]) -> Result<()> {
    if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Resolution("symbol has non-finite samples".into()));
    }
    Ok(())
}

/// Several slow Weyl transforms sharing one FFT plan.
pub struct WeylQuantizer {
    space: SlowSpace,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl WeylQuantizer {
    pub fn new(space: SlowSpace) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(space.nq);
        Self { space, fft }
    }

    pub fn space(&self) -> &SlowSpace {
        &self.space
    }

    /// A_{jj'} = (1/nq) Σ_k a(m_{j+j'}, p_k) e^{2πik(j−j')/nq}; `samples` in quant-grid order.
    pub fn weyl_samples(&self, samples: &[c64]) -> Result<Mat<c64>> {
        let n = self.space.nq;
        if samples.len() != (2 * n - 1) * n {
            return Err(Error::UnsupportedForm(format!(
                "expected {} symbol samples, got {}",
                (2 * n - 1) * n,
                samples.len()
            )));
        }
        check_finite(samples)?;
        // c_i[s] = (1/n) (−1)^s Σ_{k'} b_i[k'] e^{2πi k' s / n}
        let mut rows: Vec<Vec<c64>> = Vec::with_capacity(2 * n - 1);
        for i in 0..2 * n - 1 {
            let mut buf: Vec<c64> = samples[i * n..(i + 1) * n].to_vec();
            self.fft.process(&mut buf);
            for (s, v) in buf.iter_mut().enumerate() {
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                *v *= sign / n as f64;
            }
            rows.push(buf);
        }
        Ok(Mat::from_fn(n, n, |j, jp| {
            let s = (j + n - jp) % n;
            // (−1)^s depends on the true difference j − j', which has the parity of s
            rows[j + jp][s]
        }))
    }

    pub fn weyl(&self, symbol: impl Fn([f64; 2]) -> f64) -> Result<Mat<c64>> {
        let g = self.space.quant_grid();
        let samples: Vec<c64> = (0..g.len()).map(|p| c64::new(symbol(g.point(p)), 0.0)).collect();
        self.weyl_samples(&samples)
    }

    /// Entry-wise quantization of an operator field sampled on the quant grid.
    pub fn quantize_field(&self, field: &OperatorField) -> Result<FullOperator> {
        let g = self.space.quant_grid();
        if field.grid != g {
            return Err(Error::UnsupportedForm(
                "operator field is not sampled on the quantization grid of this slow space".into(),
            ));
        }
        let nf = field.fast_dim();
        let n = self.space.nq;
        let mut out = FullOperator::zeros(n, nf);
        let mut samples = vec![c64::new(0.0, 0.0); g.len()];
        for a in 0..nf {
            for b in 0..nf {
                let mut any = false;
                for (p, s) in samples.iter_mut().enumerate() {
                    *s = field.values[p].get(a, b);
                    any |= s.norm() > 0.0;
                }
                if !any {
                    continue;
                }
                let m = self.weyl_samples(&samples)?;
                for jp in 0..n {
                    for j in 0..n {
                        out.mat[(j * nf + a, jp * nf + b)] = m[(j, jp)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Σ_α weyl(c_α) ⊗ M_α for scalar symbols with constant fast operators.
    pub fn quantize_separable(&self, terms: &[(Box<dyn Fn([f64; 2]) -> f64 + '_>, FastOperator)]) -> Result<FullOperator> {
        let nf = terms
            .first()
            .map(|t| t.1.dim())
            .ok_or_else(|| Error::UnsupportedForm("empty separable symbol".into()))?;
        let mut out = FullOperator::zeros(self.space.nq, nf);
        for (c, m) in terms {
            let slow = self.weyl(c)?;
            out.add_kron(c64::new(1.0, 0.0), &slow, m);
        }
        Ok(out)
    }
}

/// Free-function form of the slow Weyl transform.
pub fn slow_weyl(symbol: impl Fn([f64; 2]) -> f64, space: &SlowSpace) -> Result<Mat<c64>> {
    WeylQuantizer::new(*space).weyl(symbol)
}

/// Product states of slow oscillator levels and fast number levels.
#[derive(Clone, Debug)]
pub struct ReferenceSubspace {
    /// Orthonormal columns in the full space.
    pub vectors: Mat<c64>,
    /// (slow level, fast level) per column.
    pub labels: Vec<(usize, usize)>,
}

/// Eigenvectors of the slow reference oscillator (q² + p²)/(2ε), ascending.
pub fn slow_reference_states(q: &WeylQuantizer) -> Result<Eigen> {
    let eps = q.space().epsilon;
    let osc = q.weyl(|x| (x[0] * x[0] + x[1] * x[1]) / (2.0 * eps))?;
    linalg::herm_eig_unchecked(&linalg::hermitize(&osc))
}

/// Largest edge amplitude of a slow state in position and momentum, relative to its peak.
pub fn edge_amplitude(v: &[c64]) -> f64 {
    let n = v.len();
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let edge_q = [v[0], v[1], v[n - 2], v[n - 1]].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut buf = v.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let peak_p = buf.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let h = n / 2;
    let edge_p = [buf[h - 1], buf[h], buf[h + 1]].iter().map(|z| z.norm()).fold(0.0, f64::max);
    (edge_q / peak).max(edge_p / peak_p)
}

impl ReferenceSubspace {
    /// Lowest `count` product states ordered by (slow + fast level, fast level),
    /// optionally limited to fast levels below `max_fast`.
    pub fn build(q: &WeylQuantizer, nf: usize, count: usize, max_fast: usize) -> Result<Self> {
        Self::build_inner(q, nf, count, max_fast, true)
    }

    fn build_inner(q: &WeylQuantizer, nf: usize, count: usize, max_fast: usize, audit: bool) -> Result<Self> {
        let slow = slow_reference_states(q)?;
        let nq = q.space().nq;
        let max_fast = max_fast.min(nf);
        let mut labels: Vec<(usize, usize)> = Vec::new();
        'outer: for total in 0.. {
            for a in 0..=total {
                let n = total - a;
                if a < max_fast && n < nq {
                    labels.push((n, a));
                    if labels.len() == count {
                        break 'outer;
                    }
                }
            }
            if total > nq + nf {
                break;
            }
        }
        let max_slow = labels.iter().map(|l| l.0).max().unwrap_or(0);
        for n in (0..=max_slow).filter(|_| audit) {
            let v: Vec<c64> = (0..nq).map(|j| slow.vectors[(j, n)]).collect();
            let amp = edge_amplitude(&v);
            if amp > DECAY_TOL {
                return Err(Error::EdgeContamination(format!(
                    "slow reference level {n} has edge amplitude {amp:.2e} > {DECAY_TOL:.0e}; enlarge nq"
                )));
            }
        }
        let mut vectors = Mat::<c64>::zeros(nq * nf, labels.len());
        for (c, &(n, a)) in labels.iter().enumerate() {
            for j in 0..nq {
                vectors[(j * nf + a, c)] = slow.vectors[(j, n)];
            }
        }
        Ok(Self { vectors, labels })
    }

    /// All product states with slow + fast level ≤ `total`, fast < `max_fast`.
    /// Used as a Rayleigh–Ritz basis only, so high slow levels are not
    /// audited for edge decay; Ritz residuals guard that use instead.
    pub fn shell(q: &WeylQuantizer, nf: usize, total: usize, max_fast: usize) -> Result<Self> {
        let mf = max_fast.min(nf).min(total + 1);
        let count: usize = (0..mf).map(|a| total - a + 1).sum();
        Self::build_inner(q, nf, count, max_fast, false)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// ‖A Π‖ for a full matrix A.
pub fn projected_norm(a: &Mat<c64>, pi: &Mat<c64>) -> f64 {
    linalg::spectral_norm(&(a * pi))
}

/// U f(σ) U† X for an eigen-decomposition.
fn apply_function(eig: &Eigen, x: &Mat<c64>, f: impl Fn(f64) -> c64) -> Mat<c64> {
    let ux = eig.vectors.adjoint() * x;
    let scaled = Mat::from_fn(ux.nrows(), ux.ncols(), |i, j| ux[(i, j)] * f(eig.values[i]));
    &eig.vectors * &scaled
}

/// ‖(exp(2πiŜ_ε) − I)Π‖.
pub fn periodicity_residual(s_eps: &Eigen, pi: &Mat<c64>) -> f64 {
    let out = apply_function(s_eps, pi, |s| c64::from_polar(1.0, 2.0 * PI * s) - c64::new(1.0, 0.0));
    linalg::spectral_norm(&out)
}

/// (r_XX, [r_SX¹, r_SX²]) with r_XX = ‖([X̂¹,X̂²] − iε)Π‖ and r_SX = ‖[Ŝ_ε,X̂^j]Π‖.
pub fn commutation_residuals(x: [&FullOperator; 2], s_eps: &FullOperator, pi: &Mat<c64>, epsilon: f64) -> (f64, [f64; 2]) {
    let x1p = &x[0].mat * pi;
    let x2p = &x[1].mat * pi;
    let sp = &s_eps.mat * pi;
    let mut c = &x[0].mat * &x2p - &x[1].mat * &x1p;
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, j)] -= pi[(i, j)] * c64::new(0.0, epsilon);
        }
    }
    let r_xx = linalg::spectral_norm(&c);
    let r_sx1 = linalg::spectral_norm(&(&s_eps.mat * &x1p - &x[0].mat * &sp));
    let r_sx2 = linalg::spectral_norm(&(&s_eps.mat * &x2p - &x[1].mat * &sp));
    (r_xx, [r_sx1, r_sx2])
}

/// Eigenvector columns of Ŝ_ε grouped by the nearest integer eigenvalue.
pub fn action_clusters(s_eps: &Eigen) -> Vec<(i64, Vec<usize>)> {
    let mut out: Vec<(i64, Vec<usize>)> = Vec::new();
    for (c, &v) in s_eps.values.iter().enumerate() {
        let k = v.round() as i64;
        match out.iter_mut().find(|e| e.0 == k) {
            Some(e) => e.1.push(c),
            None => out.push((k, vec![c])),
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

fn columns(m: &Mat<c64>, cols: &[usize]) -> Mat<c64> {
    Mat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Π_k X for the spectral projector of Ŝ_ε onto cluster `cols`, returned as (U_k, U_k† X).
fn project_cluster(s_eps: &Eigen, cols: &[usize], x: &Mat<c64>) -> (Mat<c64>, Mat<c64>) {
    let uk = columns(&s_eps.vectors, cols);
    let c = uk.adjoint() * x;
    (uk, c)
}

#[derive(Clone, Debug)]
pub struct ConjugationResult {
    pub residual: f64,
    pub unitarity_drift: f64,
}

/// ‖(ĤV̂ − V̂F̂)Π‖ with V̂ = exp(iεR̂) and F̂ = Σ_k Π_k Ĝ_k Π_k, where Π_k are
/// spectral projectors of Ŝ_ε and Ĝ_k quantizes f_ε(k, X_ε).
pub fn conjugation_check(
    h: &FullOperator,
    r: Option<&FullOperator>,
    s_eps: &Eigen,
    pi: &Mat<c64>,
    epsilon: f64,
    mut g_of: impl FnMut(i64) -> Result<Option<FullOperator>>,
) -> Result<ConjugationResult> {
    let (d, np) = (pi.nrows(), pi.ncols());
    // F̂Π
    let mut fpi = Mat::<c64>::zeros(d, np);
    for (k, cols) in action_clusters(s_eps) {
        let (uk, c) = project_cluster(s_eps, &cols, pi);
        if linalg::max_abs(&c) < 1e-14 {
            continue;
        }
        let Some(g) = g_of(k)? else {
            return Err(Error::BandIsolation(format!("Π has weight on action cluster {k} but no symbol is available")));
        };
        let v = &uk * &c;
        let gv = &g.mat * &v;
        let back = &uk * (uk.adjoint() * &gv);
        fpi += &back;
    }
    let (vpi, vfpi, drift) = match r {
        Some(r) => {
            let eig = r.eig()?;
            let phase = |s: f64| c64::from_polar(1.0, epsilon * s);
            let vpi = apply_function(&eig, pi, phase);
            let vfpi = apply_function(&eig, &fpi, phase);
            let gram = vpi.adjoint() * &vpi;
            let drift = linalg::max_abs(&(&gram - &linalg::identity(np)));
            (vpi, vfpi, drift)
        }
        None => (pi.clone(), fpi, 0.0),
    };
    if drift > 1e-8 {
        return Err(Error::Unitarity(drift));
    }
    let res = &h.mat * &vpi - &vfpi;
    Ok(ConjugationResult { residual: linalg::spectral_norm(&res), unitarity_drift: drift })
}

/// Eigenvalues closer than this (relative) form one degenerate group.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Largest weight outside the trusted subspace T for an accepted eigenvector.
pub const LEAK_TOL: f64 = 1e-2;

/// An eigenpair selected for band comparison.
#[derive(Clone, Debug)]
pub struct LocalizedStates {
    pub values: Vec<f64>,
    /// 1 − ‖T†v‖² per value.
    pub leaks: Vec<f64>,
    /// Weight on the requested band subspace per value.
    pub weights: Vec<f64>,
}

/// Selects eigenpairs of a Hermitian decomposition whose vectors lie in the
/// trusted subspace `t` (leak ≤ `leak_tol`) and, when `band` is given, have
/// weight ≥ `weight_min` on its column span.
///
/// Degenerate eigenvalue groups are rotated within the group so that the
/// localized combinations are separated from edge states before testing.
pub fn localized_states(
    eig: &Eigen,
    t: &Mat<c64>,
    band: Option<&Mat<c64>>,
    weight_min: f64,
    leak_tol: f64,
    count: usize,
) -> Result<LocalizedStates> {
    let n = eig.values.len();
    let mut out = LocalizedStates { values: vec![], leaks: vec![], weights: vec![] };
    let mut start = 0;
    while start < n && out.values.len() < count {
        let v0 = eig.values[start];
        let mut end = start + 1;
        while end < n && (eig.values[end] - v0).abs() <= DEGENERACY_TOL * v0.abs().max(1.0) {
            end += 1;
        }
        let cols: Vec<usize> = (start..end).collect();
        let vg = columns(&eig.vectors, &cols);
        let tv = t.adjoint() * &vg;
        let c = linalg::hermitize(&(tv.adjoint() * &tv));
        let ce = linalg::herm_eig_unchecked(&c)?;
        // directions of the group that stay inside T
        let inside: Vec<usize> = (0..ce.values.len()).rev().take_while(|&i| 1.0 - ce.values[i] <= leak_tol).collect();
        if !inside.is_empty() {
            let value = eig.values[start..end].iter().sum::<f64>() / (end - start) as f64;
            let w = &vg * columns(&ce.vectors, &inside);
            // levels of different bands can coincide; separate them by band weight
            let (dirs, weights) = match band {
                Some(b) => {
                    let bw = b.adjoint() * &w;
                    let be = linalg::herm_eig_unchecked(&linalg::hermitize(&(bw.adjoint() * &bw)))?;
                    let idx: Vec<usize> = (0..be.values.len()).rev().collect();
                    (&w * columns(&be.vectors, &idx), idx.iter().map(|&i| be.values[i]).collect::<Vec<_>>())
                }
                None => (w, vec![1.0; inside.len()]),
            };
            for (j, &weight) in weights.iter().enumerate() {
                if weight < weight_min || out.values.len() == count {
                    break;
                }
                let tv = t.adjoint() * dirs.col(j);
                let leak = 1.0 - (0..tv.nrows()).map(|r| tv[r].norm_sqr()).sum::<f64>();
                out.values.push(value);
                out.leaks.push(leak.max(0.0));
                out.weights.push(weight);
            }
        }
        start = end;
    }
    Ok(out)
}

/// Outcome of one band comparison.
#[derive(Clone, Debug)]
pub struct BandComparison {
    pub k: usize,
    pub exact: Vec<f64>,
    pub effective: Vec<f64>,
    /// Band-restricted spectrum of f_ε(Ŝ_ε, X̂_ε), when supplied.
    pub deformed: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Largest leak out of T among the accepted exact eigenvectors.
    pub max_leak: f64,
}

impl BandComparison {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// max |effective − deformed| over compared pairs.
    pub fn form_gap(&self) -> Option<f64> {
        self.deformed.as_ref().map(|d| {
            d.iter().zip(&self.effective).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
    }
}

/// Options for `band_spectrum_compare`.
#[derive(Clone, Copy, Debug)]
pub struct BandCompareOptions {
    pub n_cmp: usize,
    pub weight_min: f64,
    pub leak_tol: f64,
    /// Slow reference states spanning the trusted region of Ê_k.
    pub slow_states: usize,
}

impl Default for BandCompareOptions {
    fn default() -> Self {
        Self { n_cmp: DEFAULT_N_CMP, weight_min: BAND_WEIGHT_MIN, leak_tol: LEAK_TOL, slow_states: 36 }
    }
}

/// Compares the band-k part of the spectrum of Ĥ with the effective slow
/// operator Ê_k.
///
/// Exact values are eigenvalues of Ĥ whose eigenvectors lie in the trusted
/// subspace `t` and have weight ≥ `weight_min` on the Ŝ_ε cluster k.
/// Effective values are eigenvalues of Ê_k localized on the leading slow
/// reference states. The optional deformed form Π_kĜ_kΠ_k is diagonalized
/// inside the cluster.
#[allow(clippy::too_many_arguments)]
pub fn band_spectrum_compare(
    h_eig: &Eigen,
    s_eps: &Eigen,
    e_k: &Mat<c64>,
    slow: &Eigen,
    deformed: Option<&FullOperator>,
    t: &Mat<c64>,
    k: usize,
    opts: &BandCompareOptions,
) -> Result<BandComparison> {
    let clusters = action_clusters(s_eps);
    let cluster = clusters
        .iter()
        .find(|c| c.0 == k as i64)
        .map(|c| c.1.clone())
        .ok_or_else(|| Error::BandIsolation(format!("no action cluster for band {k}")))?;
    let uk = columns(&s_eps.vectors, &cluster);
    let exact_set = localized_states(h_eig, t, Some(&uk), opts.weight_min, opts.leak_tol, opts.n_cmp)?;
    if exact_set.values.len() < opts.n_cmp {
        return Err(Error::BandIsolation(format!(
            "band {k}: only {} of {} eigenpairs are localized with band weight >= {}; try a smaller epsilon",
            exact_set.values.len(),
            opts.n_cmp,
            opts.weight_min
        )));
    }
    let max_leak = exact_set.leaks.iter().copied().fold(0.0, f64::max);

    let ns = opts.slow_states.min(slow.values.len());
    let ts = Mat::from_fn(slow.vectors.nrows(), ns, |i, j| slow.vectors[(i, j)]);
    let e_eig = linalg::herm_eig_unchecked(&linalg::hermitize(e_k))?;
    let effective = localized_states(&e_eig, &ts, None, 0.0, opts.leak_tol, opts.n_cmp)?.values;
    if effective.len() < opts.n_cmp {
        return Err(Error::BandIsolation(format!("band {k}: effective operator has too few localized eigenvalues")));
    }

    let deformed = match deformed {
        Some(g) => {
            // f_ε(Ŝ_ε, X̂_ε) on band k is Π_k Ĝ_k Π_k
            let gk = linalg::hermitize(&(uk.adjoint() * (&g.mat * &uk)));
            let ge = linalg::herm_eig_unchecked(&gk)?;
            let lifted = Eigen { values: ge.values, vectors: &uk * &ge.vectors };
            let v = localized_states(&lifted, t, None, 0.0, opts.leak_tol, opts.n_cmp)?.values;
            (v.len() == opts.n_cmp).then_some(v)
        }
        None => None,
    };

    let residuals = exact_set.values.iter().zip(&effective).map(|(a, b)| (a - b).abs()).collect();
    Ok(BandComparison { k, exact: exact_set.values, effective, deformed, residuals, max_leak })
}

/// ‖(Ĥ − f(Ŝ,x̂) − εQ̂)Π‖ with f affine in s: f(Ŝ,x̂) = Sym(ĉ₁, Ŝ) + ĉ₀.
pub fn weyl_composition_residual(
    h: &FullOperator,
    s: &FullOperator,
    c0: &Mat<c64>,
    c1: &Mat<c64>,
    q: Option<&FullOperator>,
    pi: &Mat<c64>,
    epsilon: f64,
) -> f64 {
    let nf = h.nf;
    let id = FastOperator::identity(nf);
    let c0f = FullOperator::kron(c0, &id);
    let c1f = FullOperator::kron(c1, &id);
    let sp = &s.mat * pi;
    let c1p = &c1f.mat * pi;
    let fpi = (&c1f.mat * &sp + &s.mat * &c1p) * faer::Scale(c64::new(0.5, 0.0)) + &c0f.mat * pi;
    let mut res = &h.mat * pi - &fpi;
    if let Some(q) = q {
        res -= (&q.mat * pi) * faer::Scale(c64::new(epsilon, 0.0));
    }
    linalg::spectral_norm(&res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(eps: f64) -> SlowSpace {
        SlowSpace::balanced(64, eps).unwrap()
    }

    #[test]
    fn position_and_constant_symbols() {
        let sp = space(0.1);
        let q = WeylQuantizer::new(sp);
        let x = q.weyl(|x| x[0]).unwrap();
        for j in 0..sp.nq {
            for jp in 0..sp.nq {
                let want = if j == jp { sp.q(j) } else { 0.0 };
                assert!((x[(j, jp)] - c64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        let c = q.weyl(|_| 2.5).unwrap();
        assert!((&c - &linalg::identity(sp.nq) * faer::Scale(c64::new(2.5, 0.0))).norm_max() < 1e-12);
    }

    #[test]
    fn oscillator_spectrum() {
        let sp = space(0.1);
        let q = WeylQuantizer::new(sp);
        let h = q.weyl(|x| x[0] * x[0] + x[1] * x[1]).unwrap();
        assert!(linalg::hermitian_deviation(&h) < 1e-12);
        let e = linalg::herm_eig_unchecked(&linalg::hermitize(&h)).unwrap();
        for k in 0..=10 {
            assert!((e.values[k] - 0.1 * (2 * k + 1) as f64).abs() < 1e-6, "k={k}: {}", e.values[k]);
        }
    }

    #[test]
    fn canonical_commutator_sign() {
        let sp = space(0.05);
        let q = WeylQuantizer::new(sp);
        let x1 = q.weyl(|x| x[0]).unwrap();
        let x2 = q.weyl(|x| x[1]).unwrap();
        let ref_states = slow_reference_states(&q).unwrap();
        let t = Mat::from_fn(sp.nq, 6, |i, j| ref_states.vectors[(i, j)]);
        let c = &x1 * (&x2 * &t) - &x2 * (&x1 * &t);
        let want = &t * faer::Scale(c64::new(0.0, sp.epsilon));
        assert!(linalg::spectral_norm(&(&c - &want)) < 1e-8);
    }

    #[test]
    fn reference_subspace_is_orthonormal() {
        let q = WeylQuantizer::new(space(0.1));
        let r = ReferenceSubspace::build(&q, 6, DEFAULT_N_PROJ, 6).unwrap();
        assert_eq!(r.dim(), DEFAULT_N_PROJ);
        let g = r.vectors.adjoint() * &r.vectors;
        assert!(linalg::max_abs(&(&g - &linalg::identity(r.dim()))) < 1e-12);
        let s = ReferenceSubspace::shell(&q, 6, 3, 6).unwrap();
        assert_eq!(s.dim(), 10);
    }

    #[test]
    fn field_quantization_matches_separable() {
        let sp = space(0.1);
        let q = WeylQuantizer::new(sp);
        let f = FastOperator::from_fn(3, |i, j| c64::new((i + j) as f64, i as f64 - j as f64));
        let field = OperatorField::from_fn(sp.quant_grid(), |x| f.scale_re(x[0] * x[1] + 1.0));
        let a = q.quantize_field(&field).unwrap();
        let terms: Vec<(Box<dyn Fn([f64; 2]) -> f64>, FastOperator)> = vec![(Box::new(|x: [f64; 2]| x[0] * x[1] + 1.0), f.clone())];
        let b = q.quantize_separable(&terms).unwrap();
        assert!(linalg::max_abs(&(&a.mat - &b.mat)) < 1e-12);
        assert!(a.hermitian_deviation() < 1e-12);
        let wrong = OperatorField::from_fn(SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [5, 5]).unwrap(), |_| f.clone());
        assert!(matches!(q.quantize_field(&wrong), Err(Error::UnsupportedForm(_))));
    }

    #[test]
    fn identity_action_is_periodic() {
        let nf = 4;
        let q = WeylQuantizer::new(space(0.1));
        let s = FullOperator::kron(&linalg::identity(64), &FastOperator::diag(&[0.0, 1.0, 2.0, 3.0]));
        let pi = ReferenceSubspace::build(&q, nf, 8, nf).unwrap();
        let e = s.eig().unwrap();
        assert!(periodicity_residual(&e, &pi.vectors) < 1e-10);
    }
}
