//! First-order corrections: W, m, μ and the effective band symbol f_ε, with
//! CSV export of the field tables.
//!
//! cargo run --example corrections -- [M1|M2|M3|path.json] [out_dir]

use qaction::harness::export::export_report;
use qaction::harness::model::{resolve_model, GaugeTag};
use qaction::harness::pipeline::run_pipeline;

fn main() -> qaction::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "M2".into());
    let mut spec = resolve_model(&name)?;
    spec.gauges = vec![GaugeTag::Centered];
    let grid = spec.slow_grid()?;
    let report = run_pipeline(&spec)?;
    let (_, d) = &report.diagnostics[0];
    println!("W anti-Hermitian part before symmetrizing: {:.3e}", d.w_asymmetry);
    println!("relative |Im m| on trusted bands: {:.3e}", d.m_imag);
    for t in &report.tables {
        let mu_lo = t.rows.iter().map(|r| r.mu).fold(f64::INFINITY, f64::min);
        let mu_hi = t.rows.iter().map(|r| r.mu).fold(f64::NEG_INFINITY, f64::max);
        let m_max = t.interior_max(&grid, |r| r.m);
        println!("band {}: mu in [{mu_lo:+.5}, {mu_hi:+.5}], max |m| interior {m_max:.5}", t.k);
    }
    if let Some(dir) = args.next() {
        for p in export_report(&report, std::path::Path::new(&dir))? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
