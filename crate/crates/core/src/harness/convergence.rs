//! Full-quantization runs over ε and log-log slope fits.

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fast_algebra::FastOperator;
use crate::geometry::{self, OperatorField};
use crate::harness::model::{GaugeTag, ModelSpec};
use crate::harness::pipeline::{analyze, Analysis, PipelineOptions};
use crate::linalg;
use crate::quantizer::{
    band_spectrum_compare, commutation_residuals, conjugation_check, weyl_composition_residual, periodicity_residual,
    slow_reference_states, BandCompareOptions, BandComparison, FullOperator, ReferenceSubspace, SlowSpace,
    WeylQuantizer,
};
use crate::spectral_action::BandConfig;

/// Residuals below this value are treated as the numerical floor.
pub const FLOOR: f64 = 1e-6;

/// Minimal R² of an accepted slope fit.
pub const MIN_R2: f64 = 0.98;

/// A correction switched off for a control experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Control {
    NoW,
    NoY,
    NoR,
    NoMu,
}

impl Control {
    pub const ALL: [Control; 4] = [Control::NoW, Control::NoY, Control::NoR, Control::NoMu];

    pub fn as_str(self) -> &'static str {
        match self {
            Control::NoW => "no-W",
            Control::NoY => "no-Y",
            Control::NoR => "no-R",
            Control::NoMu => "no-mu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "no-w" => Ok(Control::NoW),
            "no-y" => Ok(Control::NoY),
            "no-r" => Ok(Control::NoR),
            "no-mu" => Ok(Control::NoMu),
            other => Err(Error::Schema(format!("unknown control `{other}` (no-W, no-Y, no-R, no-mu)"))),
        }
    }

    /// Metric family whose slope this control is expected to degrade.
    pub fn metric(self) -> &'static str {
        match self {
            Control::NoW => "periodicity",
            Control::NoY => "r_sx",
            Control::NoR => "conjugation",
            Control::NoMu => "band",
        }
    }
}

/// Which metrics one ε-run evaluates.
#[derive(Clone, Debug)]
pub struct MetricSelection {
    pub periodicity: bool,
    pub commutators: bool,
    pub conjugation: bool,
    pub bands: Vec<usize>,
    pub composition: bool,
    pub controls: Vec<Control>,
}

impl MetricSelection {
    pub fn all(spec: &ModelSpec) -> Self {
        Self {
            periodicity: true,
            commutators: true,
            conjugation: true,
            bands: spec.bands.clone(),
            composition: true,
            controls: Control::ALL.to_vec(),
        }
    }

    pub fn none() -> Self {
        Self { periodicity: false, commutators: false, conjugation: false, bands: vec![], composition: false, controls: vec![] }
    }

    fn has(&self, c: Control) -> bool {
        self.controls.contains(&c)
    }
}

/// Named residual values of one ε-run.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonMetrics {
    pub epsilon: f64,
    pub values: Vec<(String, f64)>,
    #[serde(skip)]
    pub bands: Vec<BandComparison>,
}

impl EpsilonMetrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn push(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }
}

pub fn control_name(metric: &str, c: Control) -> String {
    format!("{metric}[{}]", c.as_str())
}

/// Operator of G_k(x) = f(k,x)·I + ε Σ_j D_j f(k,x) Y^j(x) on the grid.
fn transport_symbol(a: &Analysis, f: &geometry::BandField, df: &[geometry::BandField; 2], k: usize, epsilon: f64) -> OperatorField {
    let nf = a.action.s.fast_dim();
    let values = (0..a.grid.len())
        .map(|p| {
            let mut g = FastOperator::identity(nf).scale_re(f.get(p, k));
            for j in 0..2 {
                let c = c64::new(epsilon * df[j].get(p, k), 0.0);
                g.axpy(c, &a.yt[j].values[p]);
                g.axpy(c, &a.drift.ybar[j].values[p]);
            }
            g
        })
        .collect();
    OperatorField::new(a.grid, values)
}

fn samples_of(a: &Analysis, g: impl Fn(usize) -> f64) -> Vec<c64> {
    (0..a.grid.len()).map(|p| c64::new(g(p), 0.0)).collect()
}

/// Builds every quantized object for one ε and evaluates the selected metrics.
pub fn epsilon_run(spec: &ModelSpec, epsilon: f64, gauge: GaugeTag, sel: &MetricSelection) -> Result<EpsilonMetrics> {
    let ctx = |e: Error| e.context(format!("model {} epsilon {epsilon}", spec.name));
    let qs = &spec.quantizer;
    let space = SlowSpace::balanced(qs.nq, epsilon)?;
    let quant = WeylQuantizer::new(space);
    let grid = space.quant_grid();
    let symbol = spec.symbol()?;
    let opts = PipelineOptions { gauge, bands: BandConfig { n_guard: spec.n_guard, ..Default::default() }, ..Default::default() };
    let a = analyze(&symbol, grid, &opts).map_err(ctx)?;
    let nf = spec.fast_dim;
    let trusted = a.trusted();

    let terms: Vec<(Box<dyn Fn([f64; 2]) -> f64>, FastOperator)> = symbol
        .terms
        .iter()
        .map(|(c, m)| {
            let c = c.clone();
            (Box::new(move |x: [f64; 2]| crate::harness::model::poly_eval(&c, x)) as Box<dyn Fn([f64; 2]) -> f64>, m.clone())
        })
        .collect();
    let h = quant.quantize_separable(&terms)?;
    let pi_ref = ReferenceSubspace::build(&quant, nf, qs.n_proj, trusted).map_err(ctx)?;
    let pi_bands = pi_ref.labels.iter().map(|l| l.1 + 1).max().unwrap_or(1);
    let pi = pi_ref.vectors;

    let mut out = EpsilonMetrics { epsilon, values: Vec::new(), bands: Vec::new() };
    let s_hat = quant.quantize_field(&a.action.s)?;
    let w_hat = quant.quantize_field(&a.corrections.w)?;
    let mut s_eps = s_hat.clone();
    s_eps.axpy(c64::new(epsilon, 0.0), &w_hat);
    drop(w_hat);
    let s_eps_eig = s_eps.eig()?;

    if sel.periodicity {
        out.push("periodicity", periodicity_residual(&s_eps_eig, &pi));
        if sel.has(Control::NoW) {
            out.push(control_name("periodicity", Control::NoW), periodicity_residual(&s_hat.eig()?, &pi));
        }
    }

    if sel.commutators {
        let xs = a.deformed(epsilon);
        let x1 = quant.quantize_field(&xs.x[0])?;
        let x2 = quant.quantize_field(&xs.x[1])?;
        let (rxx, rsx) = commutation_residuals([&x1, &x2], &s_eps, &pi, epsilon);
        out.push("r_xx", rxx);
        out.push("r_sx", rsx[0].max(rsx[1]));
        if sel.has(Control::NoY) {
            let id = FastOperator::identity(nf);
            let u1 = FullOperator::kron(&quant.weyl(|x| x[0])?, &id);
            let u2 = FullOperator::kron(&quant.weyl(|x| x[1])?, &id);
            let (_, rsx0) = commutation_residuals([&u1, &u2], &s_eps, &pi, epsilon);
            out.push(control_name("r_sx", Control::NoY), rsx0[0].max(rsx0[1]));
        }
    }

    let f_eps = a.f_eps(epsilon);
    let df_eps = geometry::grad_bands(&f_eps)?;
    let mut g_cache: Vec<(i64, FullOperator)> = Vec::new();
    let mut g_of = |k: i64| -> Result<Option<FullOperator>> {
        if k < 0 || k as usize >= nf {
            return Ok(None);
        }
        if let Some((_, g)) = g_cache.iter().find(|e| e.0 == k) {
            return Ok(Some(g.clone()));
        }
        let g = quant.quantize_field(&transport_symbol(&a, &f_eps, &df_eps, k as usize, epsilon))?;
        if g_cache.len() < 6 {
            g_cache.push((k, g.clone()));
        }
        Ok(Some(g))
    };

    if sel.conjugation {
        let r_hat = quant.quantize_field(&a.corrections.r)?;
        let res = conjugation_check(&h, Some(&r_hat), &s_eps_eig, &pi, epsilon, &mut g_of).map_err(ctx)?;
        out.push("conjugation", res.residual);
        out.push("unitarity_drift", res.unitarity_drift);
        if sel.has(Control::NoR) {
            let res0 = conjugation_check(&h, None, &s_eps_eig, &pi, epsilon, &mut g_of).map_err(ctx)?;
            out.push(control_name("conjugation", Control::NoR), res0.residual);
        }
    }

    if !sel.bands.is_empty() {
        let t = ReferenceSubspace::shell(&quant, nf, qs.trusted_shell, trusted).map_err(ctx)?.vectors;
        let h_eig = h.eig()?;
        let slow = slow_reference_states(&quant)?;
        let bopts = BandCompareOptions { n_cmp: qs.n_cmp, ..Default::default() };
        for &k in &sel.bands {
            let e_k = quant.weyl_samples(&samples_of(&a, |p| f_eps.get(p, k)))?;
            let g_k = g_of(k as i64)?;
            let cmp = band_spectrum_compare(&h_eig, &s_eps_eig, &e_k, &slow, g_k.as_ref(), &t, k, &bopts).map_err(ctx)?;
            out.push(format!("band{k}"), cmp.max_residual());
            if let Some(gap) = cmp.form_gap() {
                out.push(format!("band{k}_form_gap"), gap);
            }
            out.push(format!("band{k}_leak"), cmp.max_leak);
            out.bands.push(cmp);
            if sel.has(Control::NoMu) {
                let e0 = quant.weyl_samples(&samples_of(&a, |p| a.tf.f(p, k)))?;
                let cmp0 = band_spectrum_compare(&h_eig, &s_eps_eig, &e0, &slow, None, &t, k, &bopts).map_err(ctx)?;
                out.push(control_name(&format!("band{k}"), Control::NoMu), cmp0.max_residual());
            }
        }
    }

    if sel.composition {
        let (c0, c1, defect) = affine_term(&a, pi_bands);
        log::debug!("affine defect of the term function on Π bands: {defect:.2e}");
        out.push("composition_affine_defect", defect);
        let c0m = quant.weyl_samples(&c0)?;
        let c1m = quant.weyl_samples(&c1)?;
        let q_hat = quant.quantize_field(&a.corrections.q)?;
        out.push("composition", weyl_composition_residual(&h, &s_hat, &c0m, &c1m, Some(&q_hat), &pi, epsilon));
        out.push("composition_without_q", weyl_composition_residual(&h, &s_hat, &c0m, &c1m, None, &pi, epsilon));
    }
    Ok(out)
}

/// c₀ = λ₀, c₁ = λ₁ − λ₀ and the largest deviation of λ_k from c₀ + k c₁
/// over the bands that Π touches.
fn affine_term(a: &Analysis, nbands: usize) -> (Vec<c64>, Vec<c64>, f64) {
    let mut defect = 0.0f64;
    let mut c0 = Vec::with_capacity(a.grid.len());
    let mut c1 = Vec::with_capacity(a.grid.len());
    for p in 0..a.grid.len() {
        let l0 = a.tf.f(p, 0);
        let d = a.tf.f(p, 1) - l0;
        if a.grid.is_interior(p, geometry::BOUNDARY_LAYER) {
            for k in 0..nbands.min(a.trusted()) {
                defect = defect.max((a.tf.f(p, k) - l0 - k as f64 * d).abs());
            }
        }
        c0.push(c64::new(l0, 0.0));
        c1.push(c64::new(d, 0.0));
    }
    (c0, c1, defect)
}

/// Least-squares slope of log(value) against log(ε).
#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub metric: String,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
    /// All values below `FLOOR`: no fit is meaningful.
    pub floor: bool,
}

pub fn fit_slope(metric: &str, eps: &[f64], vals: &[f64]) -> SlopeFit {
    let floor = vals.iter().all(|&v| v < FLOOR);
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    SlopeFit { metric: metric.into(), epsilons: eps.to_vec(), values: vals.to_vec(), slope, r2, floor }
}

impl SlopeFit {
    /// Slope inside the window with R² ≥ MIN_R2, or at the floor.
    pub fn passes(&self, lo: f64, hi: f64) -> bool {
        self.floor || (self.slope >= lo && self.slope <= hi && self.r2 >= MIN_R2)
    }

    pub fn describe(&self) -> String {
        if self.floor {
            format!("{}: floor (max {:.2e})", self.metric, self.values.iter().copied().fold(0.0, f64::max))
        } else {
            format!("{}: slope {:.3} (R² {:.4})", self.metric, self.slope, self.r2)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub model: String,
    pub gauge: GaugeTag,
    pub runs: Vec<EpsilonMetrics>,
    pub fits: Vec<SlopeFit>,
}

impl ConvergenceReport {
    pub fn fit(&self, metric: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.metric == metric)
    }
}

/// Expected slope window of a full-pipeline metric.
pub fn expected_window(metric: &str) -> Option<(f64, f64)> {
    let base = metric.split('[').next().unwrap_or(metric);
    if metric.contains('[') {
        return None;
    }
    match base {
        "periodicity" | "r_sx" | "conjugation" | "composition" => Some((1.7, 2.3)),
        "r_xx" => Some((2.6, 3.4)),
        b if b.starts_with("band") && b[4..].chars().all(|c| c.is_ascii_digit()) => Some((1.7, 2.3)),
        _ => None,
    }
}

/// Window of a control slope whose full counterpart is second order.
pub const CONTROL_WINDOW: (f64, f64) = (0.7, 1.3);

/// One pass/fail line.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Slope checks for every metric with an expected window, and for each
/// control whose full counterpart achieved a fitted slope near 2.
pub fn evaluate(report: &ConvergenceReport) -> Vec<Check> {
    let mut out = Vec::new();
    for f in &report.fits {
        if let Some((lo, hi)) = expected_window(&f.metric) {
            out.push(Check {
                name: format!("{} {}", report.model, f.metric),
                passed: f.passes(lo, hi),
                detail: format!("{} window [{lo}, {hi}]", f.describe()),
            });
        }
    }
    for f in &report.fits {
        let Some(open) = f.metric.find('[') else { continue };
        let base = &f.metric[..open];
        let Some(full) = report.fit(base) else { continue };
        if full.floor || !(full.slope >= 1.7 && full.slope <= 2.3) {
            continue;
        }
        let (lo, hi) = CONTROL_WINDOW;
        out.push(Check {
            name: format!("{} {}", report.model, f.metric),
            passed: !f.floor && f.slope >= lo && f.slope <= hi && f.r2 >= MIN_R2,
            detail: format!("{} window [{lo}, {hi}] (full {:.3})", f.describe(), full.slope),
        });
    }
    out
}

fn check_geometric(eps: &[f64]) -> Result<()> {
    if eps.len() < 3 {
        return Err(Error::Schema("epsilon_list needs at least 3 values".into()));
    }
    let r = eps[1] / eps[0];
    for w in eps.windows(2) {
        if ((w[1] / w[0]) / r - 1.0).abs() > 1e-9 {
            return Err(Error::Schema("epsilon_list must be a geometric progression".into()));
        }
    }
    Ok(())
}

/// Metric values over `spec.epsilon_list` with one fit per metric name.
pub fn convergence_study(spec: &ModelSpec, gauge: GaugeTag, sel: &MetricSelection) -> Result<ConvergenceReport> {
    check_geometric(&spec.epsilon_list)?;
    let mut runs = Vec::new();
    for (i, &eps) in spec.epsilon_list.iter().enumerate() {
        match epsilon_run(spec, eps, gauge, sel) {
            Ok(r) => runs.push(r),
            Err(e) if i == 0 && matches!(innermost(&e), Error::BandIsolation(_)) => {
                return Err(Error::BandIsolation(format!("{e}; consider a smaller largest epsilon")));
            }
            Err(e) => return Err(e),
        }
    }
    let names: Vec<String> = runs[0].values.iter().map(|(n, _)| n.clone()).collect();
    let eps: Vec<f64> = runs.iter().map(|r| r.epsilon).collect();
    let fits = names
        .iter()
        .filter_map(|n| {
            let vals: Option<Vec<f64>> = runs.iter().map(|r| r.get(n)).collect();
            vals.map(|v| fit_slope(n, &eps, &v))
        })
        .collect();
    Ok(ConvergenceReport { model: spec.name.clone(), gauge, runs, fits })
}

fn innermost(e: &Error) -> &Error {
    match e {
        Error::Context { source, .. } => innermost(source),
        other => other,
    }
}

/// ‖A‖ helper reused by examples: max |entry| of a full matrix.
pub fn max_entry(m: &Mat<c64>) -> f64 {
    linalg::max_abs(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let eps = [0.1, 0.05, 0.025];
        let vals: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let f = fit_slope("x", &eps, &vals);
        assert!((f.slope - 2.0).abs() < 1e-12 && f.r2 > 0.999999 && !f.floor);
        assert!(f.passes(1.7, 2.3));
        let f = fit_slope("y", &eps, &[1e-12, 3e-13, 2e-12]);
        assert!(f.floor && f.passes(1.7, 2.3));
    }

    #[test]
    fn epsilon_list_checked() {
        assert!(check_geometric(&[0.1, 0.05]).is_err());
        assert!(check_geometric(&[0.1, 0.05, 0.02]).is_err());
        assert!(check_geometric(&[0.1, 0.05, 0.025]).is_ok());
    }

    #[test]
    fn windows() {
        assert_eq!(expected_window("r_xx"), Some((2.6, 3.4)));
        assert_eq!(expected_window("band3"), Some((1.7, 2.3)));
        assert_eq!(expected_window("band3_leak"), None);
        assert_eq!(expected_window("band3[no-mu]"), None);
        assert_eq!(expected_window("unitarity_drift"), None);
    }

    #[test]
    fn control_names() {
        for c in Control::ALL {
            assert_eq!(Control::parse(c.as_str()).unwrap(), c);
        }
        assert_eq!(control_name("band0", Control::NoMu), "band0[no-mu]");
    }
}
