//! Full Weyl quantization at one ε: exact band spectra of Ĥ compared with
//! the effective operator f_ε(k, x̂).
//!
//! cargo run --example quantize_spectrum -- [M1|M2|M3|path.json] [epsilon]

use qaction::harness::convergence::{epsilon_run, MetricSelection};
use qaction::harness::model::{resolve_model, GaugeTag};

fn main() -> qaction::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec = resolve_model(&args.next().unwrap_or_else(|| "M3".into()))?;
    let eps: f64 = args.next().map(|s| s.parse().expect("epsilon")).unwrap_or(0.05);
    let mut sel = MetricSelection::none();
    sel.bands = spec.bands.clone();
    let run = epsilon_run(&spec, eps, GaugeTag::Centered, &sel)?;
    for b in &run.bands {
        println!("band {} (max leak {:.1e}):", b.k, b.max_leak);
        for i in 0..b.exact.len().min(4) {
            println!("  exact {:.10}  effective {:.10}  diff {:.2e}", b.exact[i], b.effective[i], b.residuals[i]);
        }
    }
    Ok(())
}
