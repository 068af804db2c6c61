//! CSV and JSON exports. Output is deterministic: no timestamps, fixed
//! float formatting and stable ordering.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corrections::{DELTA_F_TOL, W_ASYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::geometry::OperatorField;
use crate::harness::convergence::{ConvergenceReport, FLOOR, MIN_R2};
use crate::harness::model::{GaugeTag, ModelSpec};
use crate::harness::pipeline::{BandTable, RunReport};
use crate::linalg::TOL_HERM;
use crate::quantizer::{BAND_WEIGHT_MIN, DECAY_TOL};

pub const FIELDS_FORMAT: &str = "fields-csv/1";
pub const RESIDUALS_FORMAT: &str = "residuals-csv/1";
pub const MANIFEST_FORMAT: &str = "manifest-json/1";

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub w_asymmetry: f64,
    pub delta_f: f64,
    pub edge_decay: f64,
    pub band_weight: f64,
    pub floor: f64,
    pub min_r2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: TOL_HERM,
            w_asymmetry: W_ASYMMETRY_TOL,
            delta_f: DELTA_F_TOL,
            edge_decay: DECAY_TOL,
            band_weight: BAND_WEIGHT_MIN,
            floor: FLOOR,
            min_r2: MIN_R2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub crate_version: String,
    /// SHA-256 of the canonical model JSON.
    pub config_hash: String,
    pub tolerances: Tolerances,
    pub formats: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

impl Provenance {
    pub fn for_spec(spec: &ModelSpec) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: sha256_hex(spec.to_json().as_bytes()),
            tolerances: Tolerances::default(),
            formats: vec![
                ("fields".into(), FIELDS_FORMAT.into()),
                ("residuals".into(), RESIDUALS_FORMAT.into()),
                ("manifest".into(), MANIFEST_FORMAT.into()),
            ],
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn fields_csv(table: &BandTable) -> String {
    let mut s = String::from("x1,x2,k,lambda,mu,omega12,theta1,theta2,y1,y2,m\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            num(r.x1),
            num(r.x2),
            r.k,
            num(r.lambda),
            num(r.mu),
            num(r.omega12),
            num(r.theta1),
            num(r.theta2),
            num(r.y1),
            num(r.y2),
            num(r.m)
        );
    }
    s
}

pub fn residuals_csv(model: &str, conv: &ConvergenceReport) -> String {
    let mut s = String::from("model,gauge,epsilon,metric,value,slope,r2\n");
    for f in &conv.fits {
        for (e, v) in f.epsilons.iter().zip(&f.values) {
            let _ = writeln!(s, "{model},{},{},{},{},{},{}", conv.gauge.as_str(), num(*e), f.metric, num(*v), num(f.slope), num(f.r2));
        }
    }
    s
}

pub fn slopes_csv(model: &str, conv: &ConvergenceReport) -> String {
    let mut s = String::from("model,gauge,metric,slope,r2,floor\n");
    for f in &conv.fits {
        let _ = writeln!(s, "{model},{},{},{},{},{}", conv.gauge.as_str(), f.metric, num(f.slope), num(f.r2), f.floor);
    }
    s
}

/// Operator field as JSON with keys lo, spacing, points, dim, re, im; the
/// entry arrays are point-major, then column-major per matrix.
pub fn operator_field_json(field: &OperatorField) -> String {
    #[derive(Serialize)]
    struct Dump<'a> {
        lo: [f64; 2],
        spacing: [f64; 2],
        points: [usize; 2],
        dim: usize,
        re: &'a [f64],
        im: &'a [f64],
    }
    let n = field.fast_dim();
    let mut re = Vec::with_capacity(field.values.len() * n * n);
    let mut im = Vec::with_capacity(field.values.len() * n * n);
    for v in &field.values {
        for j in 0..n {
            for i in 0..n {
                let z = v.get(i, j);
                re.push(z.re);
                im.push(z.im);
            }
        }
    }
    let g = field.grid;
    let dump = Dump { lo: g.lo(), spacing: g.spacing(), points: g.points(), dim: n, re: &re, im: &im };
    serde_json::to_string(&dump).expect("serializable") + "\n"
}

/// `fields_band{k}.csv` for the centered gauge, `fields_band{k}_{gauge}.csv` otherwise.
fn file_name(table: &BandTable) -> String {
    if table.gauge == GaugeTag::Centered {
        format!("fields_band{}.csv", table.k)
    } else {
        format!("fields_band{}_{}.csv", table.k, table.gauge.as_str())
    }
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(path)
}

/// Writes all tables, residuals and a manifest into `dir`; returns written paths.
pub fn export_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    let mut written = Vec::new();
    for t in &report.tables {
        written.push(write(dir.join(file_name(t)), &fields_csv(t))?);
    }
    if let Some(c) = &report.convergence {
        written.push(write(dir.join("residuals.csv"), &residuals_csv(&report.model, c))?);
        written.push(write(dir.join("slopes.csv"), &slopes_csv(&report.model, c))?);
    }
    #[derive(Serialize)]
    struct Manifest<'a> {
        model: &'a str,
        files: Vec<String>,
        diagnostics: &'a [(GaugeTag, crate::harness::pipeline::Diagnostics)],
        provenance: &'a Provenance,
    }
    let files = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    let manifest =
        Manifest { model: &report.model, files, diagnostics: &report.diagnostics, provenance: &report.provenance };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    written.push(write(dir.join("manifest.json"), &text)?);
    Ok(written)
}

/// Writes W, R and Q dumps for one analysis.
pub fn export_operator_fields(a: &crate::harness::pipeline::Analysis, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    let c = &a.corrections;
    Ok(vec![
        write(dir.join("w.json"), &operator_field_json(&c.w))?,
        write(dir.join("r.json"), &operator_field_json(&c.r))?,
        write(dir.join("q.json"), &operator_field_json(&c.q))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let a = Provenance::for_spec(&ModelSpec::m2());
        let b = Provenance::for_spec(&ModelSpec::m2());
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, Provenance::for_spec(&ModelSpec::m1()).config_hash);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, -1.5, 1e-17, 3.141592653589793] {
            let s = num(v);
            assert!((s.parse::<f64>().unwrap() - v).abs() <= 1e-12 * v.abs().max(1e-300));
        }
    }
}
