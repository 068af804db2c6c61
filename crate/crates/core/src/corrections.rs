//! First-order corrections: W, S_ε, m, μ, f_ε, M, R and Q.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::fast_algebra::FastOperator;
use crate::geometry::{grad_bands, BandField, Drift, OperatorField, BOUNDARY_LAYER};
use crate::spectral_action::{ActionBasis, ActionField, TermFunction};

/// Asymmetry bound used by the strict variant of the W builder.
pub const W_ASYMMETRY_TOL: f64 = 1e-6;

/// Smallest admissible |δf(k,l)| when forming R.
pub const DELTA_F_TOL: f64 = 1e-8;

/// W = ½ Σ_{jl} D_jS J^{jl} (D_lS)^# = ½ Σ_j D_jS Ỹ^j, Hermitized.
///
/// Returns the field and the largest anti-Hermitian part seen before
/// Hermitization. That part is label-off-diagonal, so W^& is unaffected;
/// it is generally O(1), and the Hermitian part is the representative used.
pub fn action_correction_w(ds: &[OperatorField; 2], yt: &[OperatorField; 2]) -> Result<(OperatorField, f64)> {
    let grid = ds[0].grid;
    let mut asym = 0.0f64;
    let mut values = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let mut w = &ds[0].values[p] * &yt[0].values[p];
        w += &(&ds[1].values[p] * &yt[1].values[p]);
        let w = w.scale_re(0.5);
        asym = asym.max((&w - &w.adjoint()).max_abs());
        values.push(w.hermitize());
    }
    log::debug!("W asymmetry before Hermitization: {asym:.3e}");
    Ok((OperatorField::new(grid, values), asym))
}

/// Strict variant that refuses to Hermitize a visibly non-Hermitian W.
pub fn action_correction_w_strict(ds: &[OperatorField; 2], yt: &[OperatorField; 2]) -> Result<OperatorField> {
    let (w, asym) = action_correction_w(ds, yt)?;
    if asym > W_ASYMMETRY_TOL {
        return Err(Error::NumericalConsistency(format!("W asymmetry {asym:.3e}")));
    }
    Ok(w)
}

/// S_ε = S + εW.
pub fn quantum_action_symbol(s: &OperatorField, w: &OperatorField, epsilon: f64) -> OperatorField {
    s.map(|p, sp| {
        let mut v = sp.clone();
        v.axpy(c64::new(epsilon, 0.0), &w.values[p]);
        v
    })
}

/// Largest tolerated |Im m| on trusted bands. The imaginary part vanishes
/// exactly in the continuum; on a grid it measures stencil error in DS.
pub const M_IMAG_TOL: f64 = 1e-3;

/// m(k,x) = ⟨k| (Σ_j D_jH Ỹ^j)^& |k⟩ / 2, with the largest |Im m| seen on
/// the first `trusted` bands at interior points.
pub fn m_function(
    dh: &[OperatorField; 2],
    yt: &[OperatorField; 2],
    action: &ActionField,
    trusted: usize,
) -> Result<(BandField, f64)> {
    let grid = action.grid();
    let nf = action.s.fast_dim();
    let mut m = BandField::zeros(grid, nf);
    let mut imag = 0.0f64;
    for p in 0..grid.len() {
        let mut t = &dh[0].values[p] * &yt[0].values[p];
        t += &(&dh[1].values[p] * &yt[1].values[p]);
        let diag = action.bases[p].diagonal(&t);
        let interior = grid.is_interior(p, BOUNDARY_LAYER);
        for (k, d) in diag.iter().enumerate() {
            let v = d * 0.5;
            if k < trusted && interior {
                imag = imag.max(v.im.abs() / v.re.abs().max(1.0));
            }
            m.set(p, k, v.re);
        }
    }
    if imag > M_IMAG_TOL {
        return Err(Error::Hermiticity { what: "m function", value: imag });
    }
    Ok((m, imag))
}

/// μ_k = −m − y·Dλ_k.
pub fn mu_correction(m: &BandField, y: &[BandField; 2], dlambda: &[BandField; 2]) -> BandField {
    BandField::from_fn(m.grid, m.nbands, |p, k| {
        -m.get(p, k) - y[0].get(p, k) * dlambda[0].get(p, k) - y[1].get(p, k) * dlambda[1].get(p, k)
    })
}

/// f_ε = f − ε(m + y·Df).
pub fn effective_symbol(tf: &TermFunction, m: &BandField, y: &[BandField; 2], df: &[BandField; 2], epsilon: f64) -> BandField {
    BandField::from_fn(m.grid, m.nbands, |p, k| {
        let ydf = y[0].get(p, k) * df[0].get(p, k) + y[1].get(p, k) * df[1].get(p, k);
        tf.f(p, k) - epsilon * (m.get(p, k) + ydf)
    })
}

/// Dλ_k by the grid stencil.
pub fn term_gradient(tf: &TermFunction) -> Result<[BandField; 2]> {
    grad_bands(&tf.lambdas)
}

/// Operator-valued ingredients of M and Q at one point.
struct PointTerms {
    /// Σ_j Sym(D_jH, Y^j)
    dh_y: FastOperator,
    /// Σ_j Sym(D_jf(S), Y^j)
    df_y: FastOperator,
    /// Z = Σ_j Sym(D_jS, Y^j)
    z: FastOperator,
    /// ∂f(S)
    dsf: FastOperator,
}

fn point_terms(
    p: usize,
    basis: &ActionBasis,
    ds: &[OperatorField; 2],
    dh: &[OperatorField; 2],
    y: &[FastOperator; 2],
    tf: &TermFunction,
    dlambda: &[BandField; 2],
) -> PointTerms {
    let nf = basis.dim();
    let mut dh_y = FastOperator::zeros(nf);
    let mut df_y = FastOperator::zeros(nf);
    let mut z = FastOperator::zeros(nf);
    for j in 0..2 {
        let dfs = basis.function(|k| dlambda[j].get(p, k as usize));
        dh_y += &dh[j].values[p].sym(&y[j]);
        df_y += &dfs.sym(&y[j]);
        z += &ds[j].values[p].sym(&y[j]);
    }
    let dsf = basis.function(|k| tf.df(p, k as usize));
    PointTerms { dh_y, df_y, z, dsf }
}

/// Full vector field Y^j = Ỹ^j + Y̲^j at point p.
pub fn full_y(yt: &[OperatorField; 2], drift: &Drift, p: usize) -> [FastOperator; 2] {
    [&yt[0].values[p] + &drift.ybar[0].values[p], &yt[1].values[p] + &drift.ybar[1].values[p]]
}

/// M = ½ Sym(DH + Df(S), Y) − ½ Sym(Z − Z^&, ∂f(S)), Z = Sym(DS, Y).
pub fn m_symbol(
    action: &ActionField,
    ds: &[OperatorField; 2],
    dh: &[OperatorField; 2],
    yt: &[OperatorField; 2],
    drift: &Drift,
    tf: &TermFunction,
    dlambda: &[BandField; 2],
) -> OperatorField {
    let grid = action.grid();
    let values = (0..grid.len())
        .map(|p| {
            let basis = &action.bases[p];
            let y = full_y(yt, drift, p);
            let t = point_terms(p, basis, ds, dh, &y, tf, dlambda);
            let mut m = (&t.dh_y + &t.df_y).scale_re(0.5);
            let zoff = &t.z - &basis.average(&t.z);
            m.axpy(c64::new(-0.5, 0.0), &zoff.sym(&t.dsf));
            m
        })
        .collect();
    OperatorField::new(grid, values)
}

/// Q = ½ Sym(Z, ∂f(S)) − ½ Sym(DH, Y) + ½ Sym(Df(S), Y).
pub fn q_symbol(
    action: &ActionField,
    ds: &[OperatorField; 2],
    dh: &[OperatorField; 2],
    yt: &[OperatorField; 2],
    drift: &Drift,
    tf: &TermFunction,
    dlambda: &[BandField; 2],
) -> OperatorField {
    let grid = action.grid();
    let values = (0..grid.len())
        .map(|p| {
            let basis = &action.bases[p];
            let y = full_y(yt, drift, p);
            let t = point_terms(p, basis, ds, dh, &y, tf, dlambda);
            let mut q = t.z.sym(&t.dsf).scale_re(0.5);
            q.axpy(c64::new(-0.5, 0.0), &t.dh_y);
            q.axpy(c64::new(0.5, 0.0), &t.df_y);
            q
        })
        .collect();
    OperatorField::new(grid, values)
}

/// R at one point: R_kl = (M^#)_kl / δf(k,l) in the action basis, with
/// δf given on action labels. `point` is only used for error reporting.
pub fn r_at(m: &FastOperator, basis: &ActionBasis, delta: impl Fn(usize, usize) -> f64, point: usize) -> Result<FastOperator> {
    let ms = basis.sharp_in_basis(&basis.to_basis(m));
    let n = basis.dim();
    let mut r = Mat::<c64>::zeros(n, n);
    for l in 0..n {
        for k in 0..n {
            if k == l {
                continue;
            }
            let (a, b) = (basis.labels[k] as usize, basis.labels[l] as usize);
            let d = delta(a, b);
            if d.abs() < DELTA_F_TOL {
                return Err(Error::Monotonicity { point, k: a.min(b), value: d });
            }
            r[(k, l)] = ms[(k, l)] / d;
        }
    }
    Ok(basis.from_basis(&r))
}

/// R over the grid.
pub fn r_symbol(m: &OperatorField, action: &ActionField, tf: &TermFunction) -> Result<OperatorField> {
    let grid = action.grid();
    let values = (0..grid.len())
        .map(|p| r_at(&m.values[p], &action.bases[p], |a, b| tf.delta(p, a, b), p))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorField::new(grid, values))
}

/// All first-order correction fields on one grid.
#[derive(Clone, Debug)]
pub struct CorrectionBundle {
    pub w: OperatorField,
    pub w_asymmetry: f64,
    /// Relative |Im m| on trusted bands.
    pub m_imag: f64,
    pub m_op: OperatorField,
    pub q: OperatorField,
    pub r: OperatorField,
    pub m: BandField,
    pub mu: BandField,
    pub dlambda: [BandField; 2],
}

impl CorrectionBundle {
    /// f_ε(k,x) = λ_k + εμ_k.
    pub fn f_eps(&self, tf: &TermFunction, epsilon: f64) -> BandField {
        BandField::from_fn(self.mu.grid, self.mu.nbands, |p, k| tf.f(p, k) + epsilon * self.mu.get(p, k))
    }

    pub fn s_eps(&self, action: &ActionField, epsilon: f64) -> OperatorField {
        quantum_action_symbol(&action.s, &self.w, epsilon)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn compute_corrections(
    action: &ActionField,
    ds: &[OperatorField; 2],
    dh: &[OperatorField; 2],
    yt: &[OperatorField; 2],
    drift: &Drift,
    tf: &TermFunction,
) -> Result<CorrectionBundle> {
    let (w, w_asymmetry) = action_correction_w(ds, yt)?;
    let dlambda = term_gradient(tf)?;
    let (m, m_imag) = m_function(dh, yt, action, tf.trusted)?;
    let mu = mu_correction(&m, &drift.y, &dlambda);
    let m_op = m_symbol(action, ds, dh, yt, drift, tf, &dlambda);
    let q = q_symbol(action, ds, dh, yt, drift, tf, &dlambda);
    let r = r_symbol(&m_op, action, tf)?;
    Ok(CorrectionBundle { w, w_asymmetry, m_imag, m_op, q, r, m, mu, dlambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SlowGrid;

    fn diag_basis(n: usize) -> ActionBasis {
        ActionBasis::from_operator(&FastOperator::diag(&(0..n).map(|k| k as f64).collect::<Vec<_>>())).unwrap()
    }

    #[test]
    fn r_divides_sharp_by_difference_quotient() {
        let basis = diag_basis(3);
        let m = FastOperator::from_fn(3, |i, j| c64::new((i + j) as f64, i as f64 - j as f64));
        // f(k) = 2k gives δf ≡ 2
        let r = r_at(&m, &basis, |_, _| 2.0, 0).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let want = if k == l { c64::new(0.0, 0.0) } else { m.get(k, l) / c64::new(0.0, 2.0 * (k as f64 - l as f64)) };
                assert!((r.get(k, l) - want).norm() < 1e-14, "({k},{l})");
            }
        }
    }

    #[test]
    fn flat_term_function_rejected() {
        let basis = diag_basis(2);
        let m = FastOperator::identity(2);
        assert!(matches!(r_at(&m, &basis, |_, _| 0.0, 7), Err(Error::Monotonicity { point: 7, .. })));
    }

    #[test]
    fn mu_combines_m_and_drift() {
        let grid = SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [3, 3]).unwrap();
        let m = BandField::from_fn(grid, 2, |_, k| -(k as f64 + 0.5));
        let y = [BandField::from_fn(grid, 2, |_, _| 0.5), BandField::from_fn(grid, 2, |_, _| -1.0)];
        let dl = [BandField::from_fn(grid, 2, |_, k| k as f64), BandField::from_fn(grid, 2, |_, _| 2.0)];
        let mu = mu_correction(&m, &y, &dl);
        for p in 0..grid.len() {
            assert!((mu.get(p, 0) - 2.5).abs() < 1e-15);
            assert!((mu.get(p, 1) - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quantum_action_is_affine_in_epsilon() {
        let grid = SlowGrid::new([[-1.0, 1.0], [-1.0, 1.0]], [3, 3]).unwrap();
        let s = OperatorField::new(grid, vec![FastOperator::diag(&[0.0, 1.0]); grid.len()]);
        let w = OperatorField::new(grid, vec![FastOperator::identity(2); grid.len()]);
        let se = quantum_action_symbol(&s, &w, 0.25);
        assert!((se.values[4].get(1, 1) - c64::new(1.25, 0.0)).norm() < 1e-15);
        assert!((se.values[4].get(0, 0) - c64::new(0.25, 0.0)).norm() < 1e-15);
    }
}
