//! Slow phase-space geometry: grid, gradients, Ỹ, curvature, primitive θ,
//! drift y and the deformed coordinates.

use faer::c64;

use crate::error::{Error, Result};
use crate::fast_algebra::FastOperator;
use crate::quadrature;
use crate::spectral_action::{diag_in_basis, ActionField};

/// Symplectic tensor J^{jl} for n = 1.
pub const J: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];
/// J^{-1} = -J.
pub const J_INV: [[f64; 2]; 2] = [[0.0, 1.0], [-1.0, 0.0]];

/// Default number of trapezoid nodes along each homotopy ray.
pub const DEFAULT_RAY_NODES: usize = 97;

/// Width (in cells) of the boundary layer excluded from reports.
pub const BOUNDARY_LAYER: usize = 2;

/// Rectangular grid on the two-dimensional slow phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowGrid {
    lo: [f64; 2],
    h: [f64; 2],
    n: [usize; 2],
}

impl SlowGrid {
    pub fn new(bounds: [[f64; 2]; 2], points: [usize; 2]) -> Result<Self> {
        let mut h = [0.0; 2];
        for a in 0..2 {
            if points[a] < 3 {
                return Err(Error::GridTooCoarse(format!("axis {} has {} points, need >= 3", a + 1, points[a])));
            }
            if !(bounds[a][1] > bounds[a][0]) {
                return Err(Error::GridTooCoarse(format!("axis {} has empty bounds", a + 1)));
            }
            h[a] = (bounds[a][1] - bounds[a][0]) / (points[a] - 1) as f64;
        }
        Ok(Self { lo: [bounds[0][0], bounds[1][0]], h, n: points })
    }

    pub fn from_spacing(lo: [f64; 2], h: [f64; 2], n: [usize; 2]) -> Result<Self> {
        if n[0] < 3 || n[1] < 3 {
            return Err(Error::GridTooCoarse(format!("grid {}x{} needs >= 3 points per axis", n[0], n[1])));
        }
        Ok(Self { lo, h, n })
    }

    /// Slow half-dimension; the pipeline is fixed to n = 1.
    pub fn half_dim(&self) -> usize {
        1
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> [usize; 2] {
        self.n
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.h
    }

    pub fn lo(&self) -> [f64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 2] {
        [self.lo[0] + (self.n[0] - 1) as f64 * self.h[0], self.lo[1] + (self.n[1] - 1) as f64 * self.h[1]]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n[1] + j
    }

    pub fn ij(&self, p: usize) -> (usize, usize) {
        (p / self.n[1], p % self.n[1])
    }

    pub fn point(&self, p: usize) -> [f64; 2] {
        let (i, j) = self.ij(p);
        [self.lo[0] + i as f64 * self.h[0], self.lo[1] + j as f64 * self.h[1]]
    }

    pub fn center(&self) -> [f64; 2] {
        let hi = self.hi();
        [0.5 * (self.lo[0] + hi[0]), 0.5 * (self.lo[1] + hi[1])]
    }

    /// Distance in cells to the nearest edge.
    pub fn edge_distance(&self, p: usize) -> usize {
        let (i, j) = self.ij(p);
        i.min(self.n[0] - 1 - i).min(j).min(self.n[1] - 1 - j)
    }

    pub fn is_interior(&self, p: usize, width: usize) -> bool {
        self.edge_distance(p) >= width
    }

    /// Second-order stencil for ∂/∂x^axis at point p.
    pub fn stencil(&self, p: usize, axis: usize) -> [(usize, f64); 3] {
        let (i, j) = self.ij(p);
        let pos = if axis == 0 { i } else { j };
        let n = self.n[axis];
        let h = self.h[axis];
        let at = |q: usize| if axis == 0 { self.index(q, j) } else { self.index(i, q) };
        if pos == 0 {
            [(at(0), -1.5 / h), (at(1), 2.0 / h), (at(2), -0.5 / h)]
        } else if pos == n - 1 {
            [(at(n - 1), 1.5 / h), (at(n - 2), -2.0 / h), (at(n - 3), 0.5 / h)]
        } else {
            [(at(pos - 1), -0.5 / h), (at(pos + 1), 0.5 / h), (at(pos), 0.0)]
        }
    }

    /// Bilinear interpolation cell: (lower-left index, fractions), or None if outside.
    pub fn locate(&self, x: [f64; 2]) -> Option<([usize; 2], [f64; 2])> {
        let mut cell = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..2 {
            let u = (x[a] - self.lo[a]) / self.h[a];
            let max = (self.n[a] - 1) as f64;
            if !(-1e-9..=max + 1e-9).contains(&u) {
                return None;
            }
            let u = u.clamp(0.0, max);
            let c = (u.floor() as usize).min(self.n[a] - 2);
            cell[a] = c;
            frac[a] = u - c as f64;
        }
        Some((cell, frac))
    }

    /// Bilinear weights of the four corners around x.
    pub fn bilinear(&self, x: [f64; 2]) -> Option<[(usize, f64); 4]> {
        let (c, f) = self.locate(x)?;
        Some([
            (self.index(c[0], c[1]), (1.0 - f[0]) * (1.0 - f[1])),
            (self.index(c[0] + 1, c[1]), f[0] * (1.0 - f[1])),
            (self.index(c[0], c[1] + 1), (1.0 - f[0]) * f[1]),
            (self.index(c[0] + 1, c[1] + 1), f[0] * f[1]),
        ])
    }
}

/// A FastOperator per grid point.
#[derive(Clone, Debug)]
pub struct OperatorField {
    pub grid: SlowGrid,
    pub values: Vec<FastOperator>,
}

impl OperatorField {
    pub fn new(grid: SlowGrid, values: Vec<FastOperator>) -> Self {
        assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: SlowGrid, mut f: impl FnMut([f64; 2]) -> FastOperator) -> Self {
        let values = (0..grid.len()).map(|p| f(grid.point(p))).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: SlowGrid, nf: usize) -> Self {
        Self { grid, values: vec![FastOperator::zeros(nf); grid.len()] }
    }

    pub fn fast_dim(&self) -> usize {
        self.values.first().map(|v| v.dim()).unwrap_or(0)
    }

    pub fn map(&self, mut f: impl FnMut(usize, &FastOperator) -> FastOperator) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().enumerate().map(|(p, v)| f(p, v)).collect(),
        }
    }

    /// max over points of max|entry| of (self - other).
    pub fn max_diff(&self, other: &OperatorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).max_abs())
            .fold(0.0, f64::max)
    }
}

/// Real scalar per grid point and band label.
#[derive(Clone, Debug, PartialEq)]
pub struct BandField {
    pub grid: SlowGrid,
    pub nbands: usize,
    data: Vec<f64>,
}

impl BandField {
    pub fn zeros(grid: SlowGrid, nbands: usize) -> Self {
        Self { grid, nbands, data: vec![0.0; grid.len() * nbands] }
    }

    pub fn from_fn(grid: SlowGrid, nbands: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(grid, nbands);
        for p in 0..grid.len() {
            for k in 0..nbands {
                out.data[p * nbands + k] = f(p, k);
            }
        }
        out
    }

    pub fn get(&self, p: usize, k: usize) -> f64 {
        self.data[p * self.nbands + k]
    }

    pub fn set(&mut self, p: usize, k: usize, v: f64) {
        self.data[p * self.nbands + k] = v;
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.nbands..(p + 1) * self.nbands]
    }

    pub fn interpolate(&self, k: usize, x: [f64; 2]) -> Option<f64> {
        let w = self.grid.bilinear(x)?;
        Some(w.iter().map(|&(q, c)| c * self.get(q, k)).sum())
    }

    /// max over interior points and bands < nb of |self - other|.
    pub fn max_diff_interior(&self, other: &BandField, nb: usize, width: usize) -> f64 {
        let mut m = 0.0f64;
        for p in 0..self.grid.len() {
            if !self.grid.is_interior(p, width) {
                continue;
            }
            for k in 0..nb {
                m = m.max((self.get(p, k) - other.get(p, k)).abs());
            }
        }
        m
    }
}

/// Centered-difference gradient (one-sided second order at edges).
pub fn grad_field(f: &OperatorField) -> Result<[OperatorField; 2]> {
    let grid = f.grid;
    let n = grid.points();
    if n[0] < 3 || n[1] < 3 {
        return Err(Error::GridTooCoarse("gradient needs >= 3 points per axis".into()));
    }
    let one = |axis: usize| {
        let values = (0..grid.len())
            .map(|p| {
                let st = grid.stencil(p, axis);
                let mut acc = FastOperator::zeros(f.fast_dim());
                for (q, w) in st {
                    if w != 0.0 {
                        acc.axpy(c64::new(w, 0.0), &f.values[q]);
                    }
                }
                acc
            })
            .collect();
        OperatorField::new(grid, values)
    };
    Ok([one(0), one(1)])
}

/// Gradient of a per-band scalar field.
pub fn grad_bands(f: &BandField) -> Result<[BandField; 2]> {
    let grid = f.grid;
    let n = grid.points();
    if n[0] < 3 || n[1] < 3 {
        return Err(Error::GridTooCoarse("gradient needs >= 3 points per axis".into()));
    }
    let one = |axis: usize| {
        BandField::from_fn(grid, f.nbands, |p, k| {
            grid.stencil(p, axis).iter().map(|&(q, w)| w * f.get(q, k)).sum()
        })
    };
    Ok([one(0), one(1)])
}

/// Gradient of a sampled scalar function.
pub fn grad_scalar(grid: SlowGrid, f: impl Fn([f64; 2]) -> f64) -> [Vec<f64>; 2] {
    let samples: Vec<f64> = (0..grid.len()).map(|p| f(grid.point(p))).collect();
    let one = |axis: usize| {
        (0..grid.len())
            .map(|p| grid.stencil(p, axis).iter().map(|&(q, w)| w * samples[q]).sum())
            .collect()
    };
    [one(0), one(1)]
}

/// Ỹ^j = J^{jm} (D_m S)^#.
pub fn y_tilde(action: &ActionField, ds: &[OperatorField; 2]) -> [OperatorField; 2] {
    let grid = action.grid();
    let nf = action.s.fast_dim();
    let mut out = [OperatorField::zeros(grid, nf), OperatorField::zeros(grid, nf)];
    for p in 0..grid.len() {
        let b = &action.bases[p];
        let sharp = [b.sharp(&ds[0].values[p]), b.sharp(&ds[1].values[p])];
        for j in 0..2 {
            let mut acc = FastOperator::zeros(nf);
            for m in 0..2 {
                if J[j][m] != 0.0 {
                    acc.axpy(c64::new(J[j][m], 0.0), &sharp[m]);
                }
            }
            out[j].values[p] = acc;
        }
    }
    out
}

/// max over interior points of ‖i[S,Ỹ^j] − J^{jm}(D_m S − (D_m S)^&)‖ (max entry).
pub fn y_tilde_residual(action: &ActionField, ds: &[OperatorField; 2], yt: &[OperatorField; 2], width: usize) -> f64 {
    let grid = action.grid();
    let mut worst = 0.0f64;
    for p in 0..grid.len() {
        if !grid.is_interior(p, width) {
            continue;
        }
        let s = &action.s.values[p];
        let b = &action.bases[p];
        for j in 0..2 {
            let comm = &(s * &yt[j].values[p]) - &(&yt[j].values[p] * s);
            let mut r = comm.scale(c64::new(0.0, 1.0));
            for m in 0..2 {
                if J[j][m] != 0.0 {
                    let off = &ds[m].values[p] - &b.average(&ds[m].values[p]);
                    r.axpy(c64::new(-J[j][m], 0.0), &off);
                }
            }
            worst = worst.max(r.max_abs());
        }
    }
    worst
}

/// max over interior points of |⟨k|D_j S|l⟩| with labels k = l < `trusted`.
/// Vanishes in the continuum; on a grid it measures stencil error.
pub fn ds_average_residual(action: &ActionField, ds: &[OperatorField; 2], trusted: usize, width: usize) -> f64 {
    let grid = action.grid();
    let mut worst = 0.0f64;
    for p in 0..grid.len() {
        if !grid.is_interior(p, width) {
            continue;
        }
        let b = &action.bases[p];
        for d in ds {
            let m = b.to_basis(&d.values[p]);
            for l in 0..b.dim() {
                for k in 0..b.dim() {
                    if b.labels[k] == b.labels[l] && (b.labels[k] as usize) < trusted {
                        worst = worst.max(m[(k, l)].norm());
                    }
                }
            }
        }
    }
    worst
}

/// Per-band curvature k̃^{12} and ω_{12}; the other components follow by antisymmetry.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub ktilde12: BandField,
    pub omega12: BandField,
    /// Largest label-mixing entry of −i[Ỹ¹,Ỹ²] over interior points.
    pub offdiag_mass: f64,
}

impl Curvature {
    pub fn ktilde(&self, p: usize, k: usize) -> [[f64; 2]; 2] {
        antisym(self.ktilde12.get(p, k))
    }

    pub fn omega(&self, p: usize, k: usize) -> [[f64; 2]; 2] {
        antisym(self.omega12.get(p, k))
    }
}

fn antisym(a12: f64) -> [[f64; 2]; 2] {
    [[0.0, a12], [-a12, 0.0]]
}

fn mat2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// ω = J^{-1} k̃ J^{-1}.
pub fn omega_from_ktilde(kt: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    mat2(mat2(J_INV, kt), J_INV)
}

/// Imaginary-part tolerance for per-band diagonal scalars.
pub const DIAG_IMAG_TOL: f64 = 1e-9;

/// k̃^{12}(k,x) = ⟨k|−i[Ỹ¹,Ỹ²]|k⟩ and ω₁₂ = (J^{-1}k̃J^{-1})₁₂.
pub fn curvature(action: &ActionField, yt: &[OperatorField; 2]) -> Result<Curvature> {
    let grid = action.grid();
    let nf = action.s.fast_dim();
    let mut kt = BandField::zeros(grid, nf);
    let mut om = BandField::zeros(grid, nf);
    let mut offdiag = 0.0f64;
    for p in 0..grid.len() {
        let (a, b) = (&yt[0].values[p], &yt[1].values[p]);
        let c = (&(a * b) - &(b * a)).scale(c64::new(0.0, -1.0));
        let basis = &action.bases[p];
        let cb = basis.to_basis(&c);
        for k in 0..nf {
            let v = cb[(k, k)];
            if v.im.abs() > DIAG_IMAG_TOL * v.re.abs().max(1.0) {
                return Err(Error::Hermiticity { what: "curvature diagonal", value: v.im });
            }
            kt.set(p, k, v.re);
            om.set(p, k, omega_from_ktilde(antisym(v.re))[0][1]);
        }
        if grid.is_interior(p, BOUNDARY_LAYER) {
            for k in 0..nf {
                for l in 0..nf {
                    if k != l {
                        offdiag = offdiag.max(cb[(k, l)].norm());
                    }
                }
            }
        }
    }
    Ok(Curvature { ktilde12: kt, omega12: om, offdiag_mass: offdiag })
}

/// Discrete dΩ. A 2-form on a two-dimensional phase space has no 3-form
/// components, so for n = 1 this is identically zero per band.
pub fn closedness_residual(omega12: &BandField) -> Vec<f64> {
    assert_eq!(omega12.grid.half_dim(), 1);
    vec![0.0; omega12.nbands]
}

/// Per-band max over interior points of |D₂θ₁ − D₁θ₂ − ω₁₂|.
pub fn exactness_residual(theta: &[BandField; 2], omega12: &BandField, nb: usize, width: usize) -> Result<Vec<f64>> {
    let d1 = grad_bands(&theta[0])?;
    let d2 = grad_bands(&theta[1])?;
    let grid = omega12.grid;
    let mut res = vec![0.0f64; nb];
    for p in 0..grid.len() {
        if !grid.is_interior(p, width) {
            continue;
        }
        for (k, r) in res.iter_mut().enumerate() {
            let dth = d1[1].get(p, k) - d2[0].get(p, k);
            *r = r.max((dth - omega12.get(p, k)).abs());
        }
    }
    Ok(res)
}

/// Homotopy primitive of ω about `center` by composite trapezoid along rays.
pub fn primitive_one_form(omega12: &BandField, center: [f64; 2], ray_nodes: usize) -> Result<[BandField; 2]> {
    let grid = omega12.grid;
    let nb = omega12.nbands;
    let (ts, ws) = quadrature::trapezoid(ray_nodes.max(2), 0.0, 1.0);
    let mut th1 = BandField::zeros(grid, nb);
    let mut th2 = BandField::zeros(grid, nb);
    let mut acc = vec![0.0f64; nb];
    for p in 0..grid.len() {
        let x = grid.point(p);
        let d = [x[0] - center[0], x[1] - center[1]];
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (&t, &w) in ts.iter().zip(&ws) {
            let xt = [center[0] + t * d[0], center[1] + t * d[1]];
            let corners = grid.bilinear(xt).ok_or(Error::Domain { point: p })?;
            for (k, a) in acc.iter_mut().enumerate() {
                let om: f64 = corners.iter().map(|&(q, c)| c * omega12.get(q, k)).sum();
                *a += w * t * om;
            }
        }
        for k in 0..nb {
            // θ₁ = ∫ t ω₁₂ d², θ₂ = ∫ t ω₂₁ d¹
            th1.set(p, k, acc[k] * d[1]);
            th2.set(p, k, -acc[k] * d[0]);
        }
    }
    Ok([th1, th2])
}

/// θ → θ + Dχ with χ independent of the band label, using the grid stencil.
pub fn gauge_shift(theta: &[BandField; 2], chi: impl Fn([f64; 2]) -> f64) -> [BandField; 2] {
    let grid = theta[0].grid;
    let dchi = grad_scalar(grid, chi);
    let shift = |a: usize| BandField::from_fn(grid, theta[a].nbands, |p, k| theta[a].get(p, k) + dchi[a][p]);
    [shift(0), shift(1)]
}

/// Sign convention relating the drift y to θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DriftConvention {
    /// y = −Jθ = J^{-1}θ, for which K̃ + K̲ vanishes.
    #[default]
    MinusJ,
    /// y = Jθ.
    PlusJ,
}

impl DriftConvention {
    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            DriftConvention::MinusJ => J_INV,
            DriftConvention::PlusJ => J,
        }
    }
}

/// Drift field y^j(k,x) and its operator form Y̲^j = Σ_k y^j(k,x) P_k(x).
#[derive(Clone, Debug)]
pub struct Drift {
    pub y: [BandField; 2],
    pub ybar: [OperatorField; 2],
}

pub fn y_drift(theta: &[BandField; 2], action: &ActionField, convention: DriftConvention) -> Drift {
    let grid = theta[0].grid;
    let nb = theta[0].nbands;
    let m = convention.matrix();
    let comp = |j: usize| {
        BandField::from_fn(grid, nb, |p, k| m[j][0] * theta[0].get(p, k) + m[j][1] * theta[1].get(p, k))
    };
    let y = [comp(0), comp(1)];
    let ybar_of = |j: usize| {
        let values = (0..grid.len())
            .map(|p| diag_in_basis(&action.bases[p].vectors, y[j].at(p)))
            .collect();
        OperatorField::new(grid, values)
    };
    let ybar = [ybar_of(0), ybar_of(1)];
    Drift { y, ybar }
}

/// Symbols X_ε^j(x) = x^j + ε(Ỹ^j + Y̲^j).
#[derive(Clone, Debug)]
pub struct DeformedCoords {
    pub x: [OperatorField; 2],
    pub epsilon: f64,
}

pub fn deformed_coordinates(yt: &[OperatorField; 2], ybar: &[OperatorField; 2], epsilon: f64) -> DeformedCoords {
    let grid = yt[0].grid;
    let nf = yt[0].fast_dim();
    let comp = |j: usize| {
        let values = (0..grid.len())
            .map(|p| {
                let mut v = FastOperator::identity(nf).scale_re(grid.point(p)[j]);
                v.axpy(c64::new(epsilon, 0.0), &yt[j].values[p]);
                v.axpy(c64::new(epsilon, 0.0), &ybar[j].values[p]);
                v
            })
            .collect();
        OperatorField::new(grid, values)
    };
    DeformedCoords { x: [comp(0), comp(1)], epsilon }
}

/// Per-band column norm of K¹² = K̃¹² + K̲¹² in the action basis, max over
/// interior points. K̃ uses the covariant derivative ∇ = D + iJ^{-1}[Ỹ,·].
pub fn k_cancellation(action: &ActionField, yt: &[OperatorField; 2], drift: &Drift, nb: usize, width: usize) -> Result<Vec<f64>> {
    let grid = action.grid();
    let nf = action.s.fast_dim();
    let dyt = [grad_field(&yt[0])?, grad_field(&yt[1])?];
    let dy = [grad_bands(&drift.y[0])?, grad_bands(&drift.y[1])?];
    let mut out = vec![0.0f64; nb];
    let i = c64::new(0.0, 1.0);
    for p in 0..grid.len() {
        if !grid.is_interior(p, width) {
            continue;
        }
        let y = [&yt[0].values[p], &yt[1].values[p]];
        let comm = |a: &FastOperator, b: &FastOperator| &(a * b) - &(b * a);
        // ∇_m Ỹ^l
        let nabla = |m: usize, l: usize| {
            let mut v = dyt[l][m].values[p].clone();
            for n in 0..2 {
                if J_INV[m][n] != 0.0 {
                    v.axpy(i * J_INV[m][n], &comm(y[n], y[l]));
                }
            }
            v
        };
        let mut kt = comm(y[0], y[1]).scale(-i);
        for m in 0..2 {
            if J[0][m] != 0.0 {
                kt.axpy(c64::new(J[0][m], 0.0), &nabla(m, 1));
            }
            if J[1][m] != 0.0 {
                kt.axpy(c64::new(-J[1][m], 0.0), &nabla(m, 0));
            }
        }
        let kl: Vec<f64> = (0..nf)
            .map(|k| {
                (0..2)
                    .map(|m| J[0][m] * dy[1][m].get(p, k) - J[1][m] * dy[0][m].get(p, k))
                    .sum()
            })
            .collect();
        let basis = &action.bases[p];
        let kb = basis.to_basis(&kt);
        for (k, o) in out.iter_mut().enumerate() {
            let mut col = 0.0;
            for l in 0..nf {
                let mut v = kb[(l, k)];
                if l == k {
                    v += c64::new(kl[k], 0.0);
                }
                col += v.norm_sqr();
            }
            *o = o.max(col.sqrt());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SlowGrid {
        SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [21, 21]).unwrap()
    }

    #[test]
    fn symplectic_tensor() {
        let jj = mat2(J, J);
        assert_eq!(jj, [[-1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(mat2(J, J_INV), [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn gradients_exact_on_quadratics() {
        let g = grid();
        let f = OperatorField::from_fn(g, |x| FastOperator::identity(2).scale_re(x[0]));
        let d = grad_field(&f).unwrap();
        for p in 0..g.len() {
            assert!((&d[0].values[p] - &FastOperator::identity(2)).max_abs() < 1e-12);
            assert!(d[1].values[p].max_abs() < 1e-12);
        }
        let f = OperatorField::from_fn(g, |x| FastOperator::identity(2).scale_re(x[0] * x[0]));
        let d = grad_field(&f).unwrap();
        for p in 0..g.len() {
            let want = FastOperator::identity(2).scale_re(2.0 * g.point(p)[0]);
            assert!((&d[0].values[p] - &want).max_abs() < 1e-12);
        }
    }

    #[test]
    fn constant_form_primitive() {
        let g = grid();
        let om = BandField::from_fn(g, 2, |_, _| -1.0);
        let th = primitive_one_form(&om, [0.0, 0.0], DEFAULT_RAY_NODES).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            assert!((th[0].get(p, 1) + x[1] / 2.0).abs() < 1e-12);
            assert!((th[1].get(p, 1) - x[0] / 2.0).abs() < 1e-12);
        }
        let r = exactness_residual(&th, &om, 2, BOUNDARY_LAYER).unwrap();
        assert!(r.iter().all(|&v| v < 1e-12));
        let zero = BandField::zeros(g, 1);
        let th = primitive_one_form(&zero, g.center(), DEFAULT_RAY_NODES).unwrap();
        assert!(th[0].at(0).iter().chain(th[1].at(7)).all(|&v| v == 0.0));
    }

    #[test]
    fn ray_outside_grid_is_domain_error() {
        let g = grid();
        let om = BandField::zeros(g, 1);
        assert!(matches!(primitive_one_form(&om, [5.0, 0.0], 9), Err(Error::Domain { .. })));
    }

    #[test]
    fn gauge_shift_preserves_exterior_derivative() {
        let g = grid();
        let om = BandField::from_fn(g, 1, |p, _| {
            let x = g.point(p);
            0.3 + x[0] * x[1]
        });
        let th = primitive_one_form(&om, g.center(), DEFAULT_RAY_NODES).unwrap();
        let sh = gauge_shift(&th, |x| x[0] * x[1]);
        let d_a = [grad_bands(&th[0]).unwrap(), grad_bands(&th[1]).unwrap()];
        let d_b = [grad_bands(&sh[0]).unwrap(), grad_bands(&sh[1]).unwrap()];
        for p in 0..g.len() {
            let a = d_a[0][1].get(p, 0) - d_a[1][0].get(p, 0);
            let b = d_b[0][1].get(p, 0) - d_b[1][0].get(p, 0);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_contraction() {
        assert_eq!(omega_from_ktilde(antisym(1.0)), antisym(-1.0));
        assert_eq!(closedness_residual(&BandField::zeros(grid(), 3)), vec![0.0; 3]);
    }

    #[test]
    fn bilinear_reproduces_affine() {
        let g = grid();
        let f = BandField::from_fn(g, 1, |p, _| {
            let x = g.point(p);
            2.0 * x[0] - x[1] + 0.5
        });
        let v = f.interpolate(0, [0.33, -0.71]).unwrap();
        assert!((v - (2.0 * 0.33 + 0.71 + 0.5)).abs() < 1e-12);
        assert!(f.interpolate(0, [1.5, 0.0]).is_none());
    }
}
