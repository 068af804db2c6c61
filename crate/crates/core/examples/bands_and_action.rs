//! Band decomposition of H(x) on a slow grid and the action operator S(x)
//! with its average and sharp superoperators.
//!
//! cargo run --example bands_and_action -- [M1|M2|M3|path.json]

use qaction::harness::model::resolve_model;
use qaction::geometry::{ds_average_residual, grad_field};
use qaction::spectral_action::{action_operator, band_decompose, term_calculus, BandConfig};

fn main() -> qaction::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "M3".into());
    let spec = resolve_model(&name)?;
    let grid = spec.slow_grid()?;
    let h = spec.symbol()?.field(grid);
    let bands = band_decompose(&h, &BandConfig { n_guard: spec.n_guard, ..Default::default() })?;
    println!("{}: {} points, {} trusted bands, min gap {:.4}", spec.name, grid.len(), bands.trusted, bands.min_gap);

    let tf = term_calculus(&bands)?;
    let p = grid.index(grid.points()[0] / 2, grid.points()[1] / 2);
    let corner = grid.index(0, 0);
    for (label, q) in [("center", p), ("corner", corner)] {
        let x = grid.point(q);
        let f: Vec<String> = (0..5).map(|k| format!("{:.5}", tf.f(q, k))).collect();
        println!("{label} x = ({:.3}, {:.3}): lambda_k = {}", x[0], x[1], f.join(", "));
    }

    let action = action_operator(&bands);
    println!("max |exp(2πiS) - I| on trusted levels: {:.2e}", action.periodicity_defect(bands.trusted));

    // DS has no diagonal-label part; its sharp feeds the vector field Ỹ
    let ds = grad_field(&action.s)?;
    println!("max |(DS)^&| on trusted levels, interior: {:.3e}", ds_average_residual(&action, &ds, bands.trusted, 2));
    let q = grid.index(grid.points()[0] / 3, grid.points()[1] / 2);
    for (j, d) in ds.iter().enumerate() {
        println!("max |(D{}S)^#| at x = {:?}: {:.3e}", j + 1, grid.point(q), action.bases[q].sharp(&d.values[q]).max_abs());
    }
    Ok(())
}
