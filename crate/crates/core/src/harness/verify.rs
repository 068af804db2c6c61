//! Symbol-level invariant suite and grid-refinement study.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{SlowGrid, BOUNDARY_LAYER};
use crate::harness::convergence::Check;
use crate::harness::model::{GaugeTag, ModelSpec};
use crate::harness::pipeline::{analyze, Diagnostics, PipelineOptions};
use crate::spectral_action::BandConfig;

/// Largest ‖exp(2πiS) − I‖ on trusted levels.
pub const PERIODICITY_TOL: f64 = 1e-8;

/// Largest residual of i[S, Ỹ] = J(DS − (DS)^&).
pub const Y_EQUATION_TOL: f64 = 1e-8;

/// Required shrink factor of grid-limited residuals when h is halved.
pub const REFINEMENT_FACTOR: f64 = 3.5;

#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub model: String,
    pub coarse_points: [usize; 2],
    pub fine_points: [usize; 2],
    pub coarse: Diagnostics,
    pub fine: Diagnostics,
}

fn refined(grid: SlowGrid) -> Result<SlowGrid> {
    let [n1, n2] = grid.points();
    let h = grid.spacing();
    SlowGrid::from_spacing(grid.lo(), [h[0] / 2.0, h[1] / 2.0], [2 * n1 - 1, 2 * n2 - 1])
}

fn options(spec: &ModelSpec, gauge: GaugeTag) -> PipelineOptions {
    PipelineOptions { gauge, bands: BandConfig { n_guard: spec.n_guard, ..Default::default() }, ..Default::default() }
}

/// Diagnostics on the model grid and on a grid with half the spacing.
pub fn refinement_study(spec: &ModelSpec, gauge: GaugeTag) -> Result<RefinementReport> {
    let symbol = spec.symbol()?;
    let grid = spec.slow_grid()?;
    let fine = refined(grid)?;
    let opts = options(spec, gauge);
    let coarse_d = analyze(&symbol, grid, &opts)?.diagnostics()?;
    // same physical boundary layer on both grids
    let fine_d = analyze(&symbol, fine, &opts)?.diagnostics_with_layer(2 * BOUNDARY_LAYER)?;
    Ok(RefinementReport {
        model: spec.name.clone(),
        coarse_points: grid.points(),
        fine_points: fine.points(),
        coarse: coarse_d,
        fine: fine_d,
    })
}

fn bands_max(v: &[f64], bands: &[usize]) -> f64 {
    bands.iter().filter_map(|&k| v.get(k)).copied().fold(0.0, f64::max)
}

fn ratio_check(name: String, coarse: f64, fine: f64) -> Check {
    let ratio = coarse / fine.max(1e-300);
    // both at round-off: nothing left to refine
    let floor = coarse < 1e-10 && fine < 1e-10;
    Check {
        name,
        passed: floor || ratio >= REFINEMENT_FACTOR,
        detail: if floor {
            format!("coarse {coarse:.3e}, fine {fine:.3e}: both at round-off")
        } else {
            format!("coarse {coarse:.3e}, fine {fine:.3e}, ratio {ratio:.2} (need >= {REFINEMENT_FACTOR})")
        },
    }
}

impl RefinementReport {
    pub fn checks(&self, bands: &[usize]) -> Vec<Check> {
        let m = &self.model;
        vec![
            ratio_check(format!("{m} (DS)^& refinement"), self.coarse.ds_average, self.fine.ds_average),
            ratio_check(
                format!("{m} exactness refinement"),
                bands_max(&self.coarse.exactness, bands),
                bands_max(&self.fine.exactness, bands),
            ),
        ]
    }
}

/// Threshold checks on one set of diagnostics.
pub fn invariant_checks(model: &str, d: &Diagnostics) -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: &str, v: f64, tol: f64| {
        out.push(Check { name: format!("{model} {name}"), passed: v <= tol, detail: format!("{v:.3e} (tol {tol:.0e})") });
    };
    push("action periodicity", d.action_periodicity, PERIODICITY_TOL);
    push("Y-tilde equation", d.y_tilde_equation, Y_EQUATION_TOL);
    out
}
