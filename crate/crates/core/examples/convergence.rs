//! Full-quantization residuals over ε and their log-log slopes.
//!
//! cargo run --example convergence -- [M1|M2|M3|path.json]

use qaction::harness::convergence::{convergence_study, MetricSelection};
use qaction::harness::model::{resolve_model, GaugeTag};

fn main() -> qaction::Result<()> {
    env_logger::init();
    let name = std::env::args().nth(1).unwrap_or_else(|| "M2".into());
    let spec = resolve_model(&name)?;
    let sel = MetricSelection::all(&spec);
    let t = std::time::Instant::now();
    let report = convergence_study(&spec, GaugeTag::Centered, &sel)?;
    for run in &report.runs {
        println!("epsilon = {}", run.epsilon);
        for (n, v) in &run.values {
            println!("  {n:<28} {v:.3e}");
        }
    }
    println!("fits:");
    for f in &report.fits {
        println!("  {}", f.describe());
    }
    eprintln!("elapsed {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
