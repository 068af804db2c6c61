//! Analytic oracles, derived by hand and frozen here.

use faer::c64;

use qaction::harness::convergence::{epsilon_run, MetricSelection};
use qaction::harness::model::{GaugeTag, ModelSpec};
use qaction::harness::pipeline::{analyze, Analysis, PipelineOptions};
use qaction::spectral_action::BandConfig;

fn analysis(spec: &ModelSpec, gauge: GaugeTag) -> Analysis {
    let opts = PipelineOptions { gauge, bands: BandConfig { n_guard: spec.n_guard, ..Default::default() }, ..Default::default() };
    analyze(&spec.symbol().unwrap(), spec.slow_grid().unwrap(), &opts).unwrap()
}

/// Displaced oscillator, b = a − α(x): S = b†b, (D₁S)^# = −i(b − b†)/√2,
/// (D₂S)^# = −(b + b†)/√2, hence W = ½ Σ D_jS Ỹ^j = −S − ½.
#[test]
fn displaced_oscillator_w() {
    let spec = ModelSpec::m2();
    let a = analysis(&spec, GaugeTag::Centered);
    let levels = 10;
    let mut worst = 0.0f64;
    for p in (0..a.grid.len()).filter(|&p| a.grid.is_interior(p, 2)) {
        let basis = &a.action.bases[p];
        let wb = basis.to_basis(&a.corrections.w.values[p]);
        for k in 0..levels {
            for l in 0..levels {
                let want = if k == l { c64::new(-(basis.labels[k] as f64) - 0.5, 0.0) } else { c64::new(0.0, 0.0) };
                worst = worst.max((wb[(k, l)] - want).norm());
            }
        }
    }
    assert!(worst < 1e-5, "max |W + S + 1/2| = {worst:.3e}");
}

/// ω₁₂ = −1, m = −(k+½), μ = k+½ and, with y = −Jθ, y = +x/2.
#[test]
fn displaced_oscillator_fields() {
    let spec = ModelSpec::m2();
    let a = analysis(&spec, GaugeTag::Centered);
    let mut worst = [0.0f64; 4];
    for p in (0..a.grid.len()).filter(|&p| a.grid.is_interior(p, 2)) {
        let x = a.grid.point(p);
        for k in 0..5 {
            let h = k as f64 + 0.5;
            worst[0] = worst[0].max((a.curvature.omega12.get(p, k) + 1.0).abs());
            worst[1] = worst[1].max((a.corrections.m.get(p, k) + h).abs());
            worst[2] = worst[2].max((a.corrections.mu.get(p, k) - h).abs());
            let dy = (a.drift.y[0].get(p, k) - 0.5 * x[0]).abs().max((a.drift.y[1].get(p, k) - 0.5 * x[1]).abs());
            worst[3] = worst[3].max(dy);
        }
    }
    for (name, v) in ["omega12", "m", "mu", "y"].iter().zip(worst) {
        assert!(v < 1e-5, "{name}: {v:.3e}");
    }
}

/// With H(0) = ½(A₁² + A₂²), the bands at the origin are k + ½.
#[test]
fn anisotropic_model_at_origin() {
    let spec = ModelSpec::m3();
    let a = analysis(&spec, GaugeTag::Centered);
    let [n1, n2] = a.grid.points();
    let p = a.grid.index(n1 / 2, n2 / 2);
    assert!(a.grid.point(p).iter().all(|c| c.abs() < 1e-12));
    for k in 0..5 {
        assert!((a.tf.f(p, k) - (k as f64 + 0.5)).abs() < 1e-10, "band {k}: {}", a.tf.f(p, k));
    }
}

/// Dilated oscillator λ_k = (k+½)(1+|x|²), χ = x¹x². The shifted gauge adds
/// ε{χ,λ} to f_ε; its spectrum differs from the conjugated one by
/// ½ε²⟨{χ,{χ,λ}}⟩ = ε²(2k+1)⟨|x̂|²⟩ = ε³(2k+1)(2n+1) on slow level n.
#[test]
fn dilated_oscillator_gauge_term() {
    let spec = ModelSpec::m1();
    let eps = 0.05;
    let mut sel = MetricSelection::none();
    sel.bands = vec![0, 2];
    let centered = epsilon_run(&spec, eps, GaugeTag::Centered, &sel).unwrap();
    let shifted = epsilon_run(&spec, eps, GaugeTag::ShiftedX1X2, &sel).unwrap();
    for (bc, bs) in centered.bands.iter().zip(&shifted.bands) {
        assert!(bc.max_residual() < 1e-8, "band {}: centered {:.3e}", bc.k, bc.max_residual());
        for (n, r) in bs.residuals.iter().enumerate() {
            let want = eps.powi(3) * (2 * bs.k + 1) as f64 * (2 * n + 1) as f64;
            assert!((r - want).abs() < 0.05 * want, "band {} level {n}: {r:.4e} vs {want:.4e}", bs.k);
        }
    }
}
