//! Model configuration: separable polynomial symbols H(x) = Σ c_α(x) M_α.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fast_algebra::{ladder_pair, weyl_poly, FastMonomial, FastOperator, DEFAULT_N_GUARD};
use crate::geometry::{OperatorField, SlowGrid};
use crate::quantizer::{DEFAULT_N_CMP, DEFAULT_N_PROJ};

/// c · (x¹)^p1 (x²)^p2
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlowMonomial {
    pub p1: u32,
    pub p2: u32,
    pub c: f64,
}

impl SlowMonomial {
    pub fn new(p1: u32, p2: u32, c: f64) -> Self {
        Self { p1, p2, c }
    }
}

/// One separable term: scalar polynomial times a Weyl-symmetrized fast polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Vec<SlowMonomial>,
    pub fast: Vec<FastMonomial>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: [[f64; 2]; 2],
    pub points: [usize; 2],
}

/// Gauge of the primitive θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeTag {
    /// Homotopy primitive about the grid center.
    #[default]
    Centered,
    /// Centered primitive plus Dχ with χ = x¹x².
    ShiftedX1X2,
}

impl GaugeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            GaugeTag::Centered => "centered",
            GaugeTag::ShiftedX1X2 => "shifted-x1x2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(GaugeTag::Centered),
            "shifted-x1x2" | "shifted" => Ok(GaugeTag::ShiftedX1X2),
            other => Err(Error::Schema(format!("unknown gauge `{other}` (expected centered or shifted-x1x2)"))),
        }
    }
}

/// Settings of the full-quantization verifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSpec {
    pub nq: usize,
    pub n_proj: usize,
    pub n_cmp: usize,
    /// Shell of the trusted subspace T (slow + fast level ≤ shell) that
    /// compared eigenvectors must lie in.
    pub trusted_shell: usize,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        Self { nq: 64, n_proj: DEFAULT_N_PROJ, n_cmp: DEFAULT_N_CMP, trusted_shell: 26 }
    }
}

fn default_guard() -> usize {
    DEFAULT_N_GUARD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub fast_dim: usize,
    pub grid: GridSpec,
    pub terms: Vec<Term>,
    pub epsilon_list: Vec<f64>,
    pub bands: Vec<usize>,
    pub gauges: Vec<GaugeTag>,
    #[serde(default = "default_guard")]
    pub n_guard: usize,
    #[serde(default)]
    pub quantizer: QuantizerSpec,
}

/// Parameters of the frequency-modulated model M3.
#[derive(Clone, Copy, Debug)]
pub struct M3Params {
    pub alpha: f64,
    pub beta: f64,
    /// Coefficient of the scalar confinement ½γ|x|².
    pub gamma: f64,
}

impl Default for M3Params {
    fn default() -> Self {
        Self { alpha: 0.2, beta: 0.3, gamma: 1.0 }
    }
}

fn base_spec(name: &str, terms: Vec<Term>) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        fast_dim: 24,
        grid: GridSpec { bounds: [[-1.0, 1.0], [-1.0, 1.0]], points: [41, 41] },
        terms,
        epsilon_list: vec![0.1, 0.05, 0.025],
        bands: vec![0, 1, 2, 3, 4],
        gauges: vec![GaugeTag::Centered, GaugeTag::ShiftedX1X2],
        n_guard: DEFAULT_N_GUARD,
        quantizer: QuantizerSpec::default(),
    }
}

fn osc_half() -> Vec<FastMonomial> {
    vec![FastMonomial::new(2, 0, 0.5), FastMonomial::new(0, 2, 0.5)]
}

impl ModelSpec {
    /// M1: (1 + |x|²) · ½(A1² + A2²).
    pub fn m1() -> Self {
        let coeff = vec![SlowMonomial::new(0, 0, 1.0), SlowMonomial::new(2, 0, 1.0), SlowMonomial::new(0, 2, 1.0)];
        base_spec("M1", vec![Term { coeff, fast: osc_half() }])
    }

    /// M2: ½((A1 − x¹)² + (A2 − x²)²).
    pub fn m2() -> Self {
        let one = FastMonomial::new(0, 0, 1.0);
        let terms = vec![
            Term { coeff: vec![SlowMonomial::new(0, 0, 1.0)], fast: osc_half() },
            Term { coeff: vec![SlowMonomial::new(1, 0, -1.0)], fast: vec![FastMonomial::new(1, 0, 1.0)] },
            Term { coeff: vec![SlowMonomial::new(0, 1, -1.0)], fast: vec![FastMonomial::new(0, 1, 1.0)] },
            Term { coeff: vec![SlowMonomial::new(2, 0, 0.5), SlowMonomial::new(0, 2, 0.5)], fast: vec![one] },
        ];
        // the fast displacement grows with |x|, so the quantization domain
        // needs a larger fast basis than the default
        ModelSpec { fast_dim: 32, ..base_spec("M2", terms) }
    }

    /// M3: ½(A2² + (1 + α(x¹)²)A1²) + β(x¹A1 + x²A2) + ½γ|x|².
    pub fn m3() -> Self {
        Self::m3_with(M3Params::default())
    }

    pub fn m3_with(par: M3Params) -> Self {
        let mut terms = vec![
            Term { coeff: vec![SlowMonomial::new(0, 0, 0.5)], fast: vec![FastMonomial::new(0, 2, 1.0)] },
            Term {
                coeff: vec![SlowMonomial::new(0, 0, 0.5), SlowMonomial::new(2, 0, 0.5 * par.alpha)],
                fast: vec![FastMonomial::new(2, 0, 1.0)],
            },
            Term { coeff: vec![SlowMonomial::new(1, 0, par.beta)], fast: vec![FastMonomial::new(1, 0, 1.0)] },
            Term { coeff: vec![SlowMonomial::new(0, 1, par.beta)], fast: vec![FastMonomial::new(0, 1, 1.0)] },
        ];
        if par.gamma != 0.0 {
            terms.push(Term {
                coeff: vec![SlowMonomial::new(2, 0, 0.5 * par.gamma), SlowMonomial::new(0, 2, 0.5 * par.gamma)],
                fast: vec![FastMonomial::new(0, 0, 1.0)],
            });
        }
        base_spec("M3", terms)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "M1" => Some(Self::m1()),
            "M2" => Some(Self::m2()),
            "M3" => Some(Self::m3()),
            _ => None,
        }
    }

    pub fn max_fast_degree(&self) -> usize {
        self.terms.iter().flat_map(|t| t.fast.iter().map(|m| m.degree())).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("field `name` must not be empty".into()));
        }
        if self.terms.is_empty() {
            return Err(Error::Schema("field `terms` must contain at least one term".into()));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.coeff.is_empty() || t.fast.is_empty() {
                return Err(Error::Schema(format!("terms[{i}]: `coeff` and `fast` must be non-empty")));
            }
            if t.coeff.iter().any(|m| !m.c.is_finite()) || t.fast.iter().any(|m| !m.re.is_finite() || !m.im.is_finite()) {
                return Err(Error::Schema(format!("terms[{i}]: non-finite coefficient")));
            }
        }
        let max_band = self.bands.iter().copied().max().unwrap_or(0);
        let need = self.max_fast_degree() + self.n_guard + max_band + 2;
        if self.fast_dim < need {
            return Err(Error::Schema(format!(
                "field `fast_dim` = {} is too small: need >= max fast degree + n_guard + max band + 2 = {need}",
                self.fast_dim
            )));
        }
        for a in 0..2 {
            if !(self.grid.bounds[a][1] > self.grid.bounds[a][0]) {
                return Err(Error::Schema(format!("field `grid.bounds[{a}]` must be increasing")));
            }
            if self.grid.points[a] < 3 {
                return Err(Error::Schema(format!("field `grid.points[{a}]` must be >= 3")));
            }
        }
        if self.epsilon_list.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Schema("field `epsilon_list` must contain positive values".into()));
        }
        if !self.quantizer.nq.is_power_of_two() || self.quantizer.nq < 4 {
            return Err(Error::Schema("field `quantizer.nq` must be a power of two >= 4".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model spec serializes");
        s.push('\n');
        s
    }

    pub fn slow_grid(&self) -> Result<SlowGrid> {
        SlowGrid::new(self.grid.bounds, self.grid.points)
    }

    /// Compressed fast operators M_α, one per term.
    pub fn fast_operators(&self) -> Result<Vec<FastOperator>> {
        let lp = ladder_pair(self.fast_dim)?;
        self.terms.iter().map(|t| weyl_poly(&t.fast, &lp)).collect()
    }

    /// Evaluated separable form.
    pub fn symbol(&self) -> Result<SeparableSymbol> {
        let ops = self.fast_operators()?;
        Ok(SeparableSymbol {
            terms: self.terms.iter().zip(ops).map(|(t, m)| (t.coeff.clone(), m)).collect(),
        })
    }
}

/// H(x) = Σ_α c_α(x) M_α with polynomial c_α.
#[derive(Clone, Debug)]
pub struct SeparableSymbol {
    pub terms: Vec<(Vec<SlowMonomial>, FastOperator)>,
}

pub fn poly_eval(c: &[SlowMonomial], x: [f64; 2]) -> f64 {
    c.iter().map(|m| m.c * x[0].powi(m.p1 as i32) * x[1].powi(m.p2 as i32)).sum()
}

/// ∂/∂x^axis of a polynomial.
pub fn poly_grad(c: &[SlowMonomial], x: [f64; 2], axis: usize) -> f64 {
    c.iter()
        .map(|m| {
            let (p, q) = (m.p1 as i32, m.p2 as i32);
            if axis == 0 {
                if p == 0 { 0.0 } else { m.c * p as f64 * x[0].powi(p - 1) * x[1].powi(q) }
            } else if q == 0 {
                0.0
            } else {
                m.c * q as f64 * x[0].powi(p) * x[1].powi(q - 1)
            }
        })
        .sum()
}

impl SeparableSymbol {
    pub fn fast_dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    pub fn at(&self, x: [f64; 2]) -> FastOperator {
        let mut acc = FastOperator::zeros(self.fast_dim());
        for (c, m) in &self.terms {
            acc.axpy(faer::c64::new(poly_eval(c, x), 0.0), m);
        }
        acc
    }

    pub fn grad_at(&self, x: [f64; 2], axis: usize) -> FastOperator {
        let mut acc = FastOperator::zeros(self.fast_dim());
        for (c, m) in &self.terms {
            acc.axpy(faer::c64::new(poly_grad(c, x, axis), 0.0), m);
        }
        acc
    }

    pub fn field(&self, grid: SlowGrid) -> OperatorField {
        OperatorField::from_fn(grid, |x| self.at(x))
    }

    /// Analytic DH on the grid.
    pub fn grad_field(&self, grid: SlowGrid) -> [OperatorField; 2] {
        [OperatorField::from_fn(grid, |x| self.grad_at(x, 0)), OperatorField::from_fn(grid, |x| self.grad_at(x, 1))]
    }
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    ModelSpec::from_json(&text)
}

pub fn save_model(spec: &ModelSpec, path: &Path) -> Result<()> {
    std::fs::write(path, spec.to_json()).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

/// Preset name or path to a JSON file.
pub fn resolve_model(name_or_path: &str) -> Result<ModelSpec> {
    match ModelSpec::preset(name_or_path) {
        Some(s) => Ok(s),
        None => load_model(Path::new(name_or_path)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for s in [ModelSpec::m1(), ModelSpec::m2(), ModelSpec::m3()] {
            s.validate().unwrap();
        }
    }

    #[test]
    fn m2_matches_completed_square() {
        let spec = ModelSpec::m2();
        let sym = spec.symbol().unwrap();
        let lp = ladder_pair(spec.fast_dim).unwrap();
        let x = [0.3, -0.7];
        let want = weyl_poly(
            &[
                FastMonomial::new(2, 0, 0.5),
                FastMonomial::new(0, 2, 0.5),
                FastMonomial::new(1, 0, -x[0]),
                FastMonomial::new(0, 1, -x[1]),
                FastMonomial::new(0, 0, 0.5 * (x[0] * x[0] + x[1] * x[1])),
            ],
            &lp,
        )
        .unwrap();
        assert!((&sym.at(x) - &want).max_abs() < 1e-13);
    }

    #[test]
    fn m1_round_trip_is_byte_identical() {
        let a = ModelSpec::m1().to_json();
        let b = ModelSpec::from_json(&a).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_bounds_named() {
        let mut v: serde_json::Value = serde_json::from_str(&ModelSpec::m2().to_json()).unwrap();
        v["grid"].as_object_mut().unwrap().remove("bounds");
        let err = ModelSpec::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("bounds"), "{err}");
    }

    #[test]
    fn small_fast_dim_rejected() {
        let mut s = ModelSpec::m3();
        s.fast_dim = 8;
        let err = ModelSpec::from_json(&s.to_json()).unwrap_err();
        assert!(err.to_string().contains("fast_dim"));
    }

    #[test]
    fn analytic_gradient_matches_difference() {
        let sym = ModelSpec::m3().symbol().unwrap();
        let x = [0.4, -0.2];
        let h = 1e-5;
        for axis in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (&sym.at(xp) - &sym.at(xm)).scale_re(0.5 / h);
            assert!((&fd - &sym.grad_at(x, axis)).max_abs() < 1e-8);
        }
    }
}
