//! Ladder operators, Weyl-symmetrized polynomials and the spectral tools on
//! the truncated fast space.
//!
//! cargo run --example fast_algebra

use qaction::fast_algebra::{commutator, hermitian_eig, ladder_pair, matrix_exp, weyl_poly, FastMonomial};
use qaction::FastOperator;

fn main() -> qaction::Result<()> {
    let nf = 12;
    let lad = ladder_pair(nf)?;

    // [A1, A2] = i away from the truncation edge
    let c = commutator(&lad.a1, &lad.a2)?;
    let diag: Vec<String> = (0..4).map(|k| format!("{:+.3}i", c.get(k, k).im)).collect();
    println!("[A1,A2] low diagonal: {}", diag.join(" "));

    // ½(A1² + A2²) is the number operator plus ½
    let osc = weyl_poly(&[FastMonomial::new(2, 0, 0.5), FastMonomial::new(0, 2, 0.5)], &lad)?;
    let e = hermitian_eig(&osc)?;
    println!("oscillator levels: {:?}", &e.values[..6]);

    // Sym(A1 A2) has no ordering ambiguity left
    let mixed = weyl_poly(&[FastMonomial::new(1, 1, 1.0)], &lad)?;
    println!("Sym(A1 A2) hermitian deviation: {:.2e}", mixed.hermitian_deviation());

    // exp(2πi N) = I since N has integer spectrum
    let n = lad.number();
    let u = matrix_exp(&n, 2.0 * std::f64::consts::PI)?;
    println!("|exp(2πiN) - I| = {:.2e}", (&u - &FastOperator::identity(nf)).max_abs());
    Ok(())
}
