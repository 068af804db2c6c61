//! Symbol-level pipeline: bands → action → geometry → corrections.

use serde::Serialize;

use crate::corrections::{compute_corrections, CorrectionBundle};
use crate::error::{Error, Result};
use crate::geometry::{
    self, BandField, Curvature, DeformedCoords, Drift, DriftConvention, OperatorField, SlowGrid, BOUNDARY_LAYER,
    DEFAULT_RAY_NODES,
};
use crate::harness::model::{GaugeTag, ModelSpec, SeparableSymbol};
use crate::spectral_action::{action_operator, band_decompose, term_calculus, ActionField, BandConfig, BandSystem, TermFunction};

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub convention: DriftConvention,
    pub gauge: GaugeTag,
    pub ray_nodes: usize,
    pub bands: BandConfig,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            convention: DriftConvention::default(),
            gauge: GaugeTag::Centered,
            ray_nodes: DEFAULT_RAY_NODES,
            bands: BandConfig::default(),
        }
    }
}

/// Every symbol-level field of one model on one grid.
pub struct Analysis {
    pub grid: SlowGrid,
    pub bands: BandSystem,
    pub action: ActionField,
    pub tf: TermFunction,
    pub ds: [OperatorField; 2],
    pub dh: [OperatorField; 2],
    pub yt: [OperatorField; 2],
    pub curvature: Curvature,
    pub theta: [BandField; 2],
    pub drift: Drift,
    pub corrections: CorrectionBundle,
}

pub fn chi_x1x2(x: [f64; 2]) -> f64 {
    x[0] * x[1]
}

pub fn analyze(symbol: &SeparableSymbol, grid: SlowGrid, opts: &PipelineOptions) -> Result<Analysis> {
    let h = symbol.field(grid);
    let bands = band_decompose(&h, &opts.bands)?;
    drop(h);
    let action = action_operator(&bands);
    let tf = term_calculus(&bands)?;
    let ds = geometry::grad_field(&action.s)?;
    let dh = symbol.grad_field(grid);
    let yt = geometry::y_tilde(&action, &ds);
    let curvature = geometry::curvature(&action, &yt)?;
    let theta0 = geometry::primitive_one_form(&curvature.omega12, grid.center(), opts.ray_nodes)?;
    let theta = match opts.gauge {
        GaugeTag::Centered => theta0,
        GaugeTag::ShiftedX1X2 => geometry::gauge_shift(&theta0, chi_x1x2),
    };
    let drift = geometry::y_drift(&theta, &action, opts.convention);
    let corrections = compute_corrections(&action, &ds, &dh, &yt, &drift, &tf)?;
    Ok(Analysis { grid, bands, action, tf, ds, dh, yt, curvature, theta, drift, corrections })
}

impl Analysis {
    pub fn trusted(&self) -> usize {
        self.bands.trusted
    }

    pub fn f_eps(&self, epsilon: f64) -> BandField {
        self.corrections.f_eps(&self.tf, epsilon)
    }

    pub fn deformed(&self, epsilon: f64) -> DeformedCoords {
        geometry::deformed_coordinates(&self.yt, &self.drift.ybar, epsilon)
    }

    pub fn diagnostics(&self) -> Result<Diagnostics> {
        self.diagnostics_with_layer(BOUNDARY_LAYER)
    }

    /// Diagnostics excluding `w` grid points at each edge.
    pub fn diagnostics_with_layer(&self, w: usize) -> Result<Diagnostics> {
        let nb = self.trusted();
        Ok(Diagnostics {
            min_gap: self.bands.min_gap,
            action_periodicity: self.action.periodicity_defect(nb),
            ds_average: geometry::ds_average_residual(&self.action, &self.ds, nb, w),
            y_tilde_equation: geometry::y_tilde_residual(&self.action, &self.ds, &self.yt, w),
            curvature_offdiag: self.curvature.offdiag_mass,
            closedness: geometry::closedness_residual(&self.curvature.omega12)[..nb].to_vec(),
            exactness: geometry::exactness_residual(&self.theta, &self.curvature.omega12, nb, w)?,
            k_cancellation: geometry::k_cancellation(&self.action, &self.yt, &self.drift, nb, w)?,
            w_asymmetry: self.corrections.w_asymmetry,
            m_imag: self.corrections.m_imag,
        })
    }
}

/// Consistency measures of one analysis; interior values exclude a 2h layer.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub min_gap: f64,
    pub action_periodicity: f64,
    pub ds_average: f64,
    pub y_tilde_equation: f64,
    pub curvature_offdiag: f64,
    pub closedness: Vec<f64>,
    pub exactness: Vec<f64>,
    pub k_cancellation: Vec<f64>,
    pub w_asymmetry: f64,
    pub m_imag: f64,
}

/// One row of a per-band field table.
#[derive(Clone, Debug, Serialize)]
pub struct FieldRow {
    pub x1: f64,
    pub x2: f64,
    pub k: usize,
    pub lambda: f64,
    pub mu: f64,
    pub omega12: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub y1: f64,
    pub y2: f64,
    pub m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BandTable {
    pub k: usize,
    pub gauge: GaugeTag,
    pub rows: Vec<FieldRow>,
}

impl BandTable {
    pub fn from_analysis(a: &Analysis, k: usize, gauge: GaugeTag) -> Self {
        let c = &a.corrections;
        let rows = (0..a.grid.len())
            .map(|p| {
                let x = a.grid.point(p);
                FieldRow {
                    x1: x[0],
                    x2: x[1],
                    k,
                    lambda: a.tf.f(p, k),
                    mu: c.mu.get(p, k),
                    omega12: a.curvature.omega12.get(p, k),
                    theta1: a.theta[0].get(p, k),
                    theta2: a.theta[1].get(p, k),
                    y1: a.drift.y[0].get(p, k),
                    y2: a.drift.y[1].get(p, k),
                    m: c.m.get(p, k),
                }
            })
            .collect();
        Self { k, gauge, rows }
    }

    /// max over interior rows of |g(row)|.
    pub fn interior_max(&self, grid: &SlowGrid, g: impl Fn(&FieldRow) -> f64) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(p, _)| grid.is_interior(*p, BOUNDARY_LAYER))
            .map(|(_, r)| g(r).abs())
            .fold(0.0, f64::max)
    }
}

/// Pipeline output on the model grid, plus any convergence results.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub model: String,
    pub tables: Vec<BandTable>,
    pub diagnostics: Vec<(GaugeTag, Diagnostics)>,
    pub convergence: Option<crate::harness::convergence::ConvergenceReport>,
    pub provenance: crate::harness::export::Provenance,
}

/// Runs the symbol pipeline for every requested band and gauge.
pub fn run_pipeline(spec: &ModelSpec) -> Result<RunReport> {
    spec.validate()?;
    let symbol = spec.symbol()?;
    let grid = spec.slow_grid()?;
    let mut tables = Vec::new();
    let mut diagnostics = Vec::new();
    for &gauge in &spec.gauges {
        let opts = PipelineOptions { gauge, bands: BandConfig { n_guard: spec.n_guard, ..Default::default() }, ..Default::default() };
        let a = analyze(&symbol, grid, &opts).map_err(|e| e.context(format!("model {} gauge {}", spec.name, gauge.as_str())))?;
        for &k in &spec.bands {
            if k >= a.trusted() {
                return Err(Error::Schema(format!("band {k} is outside the {} trusted bands", a.trusted())));
            }
            tables.push(BandTable::from_analysis(&a, k, gauge));
        }
        diagnostics.push((gauge, a.diagnostics()?));
    }
    Ok(RunReport {
        model: spec.name.clone(),
        tables,
        diagnostics,
        convergence: None,
        provenance: crate::harness::export::Provenance::for_spec(spec),
    })
}
