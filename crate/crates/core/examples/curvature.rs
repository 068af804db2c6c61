//! Band curvature ω, its primitive θ in two gauges and the resulting drift y.
//!
//! cargo run --example curvature -- [M1|M2|M3|path.json]

use qaction::harness::model::{resolve_model, GaugeTag};
use qaction::harness::pipeline::{analyze, PipelineOptions};
use qaction::spectral_action::BandConfig;

fn main() -> qaction::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "M3".into());
    let spec = resolve_model(&name)?;
    let grid = spec.slow_grid()?;
    let symbol = spec.symbol()?;
    let [n1, n2] = grid.points();
    let probes = [grid.index(n1 / 2, n2 / 2), grid.index(n1 / 4, n2 / 2), grid.index(3 * n1 / 4, 3 * n2 / 4)];
    for gauge in [GaugeTag::Centered, GaugeTag::ShiftedX1X2] {
        let opts = PipelineOptions { gauge, bands: BandConfig { n_guard: spec.n_guard, ..Default::default() }, ..Default::default() };
        let a = analyze(&symbol, grid, &opts)?;
        let d = a.diagnostics()?;
        println!("gauge {}: exactness residual per band {:?}", gauge.as_str(), &d.exactness[..3]);
        for &p in &probes {
            let x = grid.point(p);
            println!(
                "  x = ({:+.3}, {:+.3})  omega12 = {:+.5}  theta = ({:+.5}, {:+.5})  y = ({:+.5}, {:+.5})",
                x[0],
                x[1],
                a.curvature.omega12.get(p, 0),
                a.theta[0].get(p, 0),
                a.theta[1].get(p, 0),
                a.drift.y[0].get(p, 0),
                a.drift.y[1].get(p, 0),
            );
        }
    }
    Ok(())
}
