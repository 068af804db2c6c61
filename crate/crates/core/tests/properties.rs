mod common;

use faer::c64;
use proptest::prelude::*;

use common::*;
use qaction::fast_algebra::{
    commutator, hermitian_eig, ladder_pair, matrix_exp, weyl_monomial, weyl_poly, FastMonomial, SymRoute,
};
use qaction::harness::convergence::fit_slope;
use qaction::harness::model::{M3Params, ModelSpec};
use qaction::spectral_action::ActionBasis;
use qaction::FastOperator;

fn setup(seed: u64, n: usize, degenerate: bool) -> (FastOperator, ActionBasis, FastOperator) {
    let mut r = rng(seed);
    let labels = random_labels(&mut r, n, degenerate);
    let u = random_unitary(&mut r, n);
    let s = action_from_labels(&u, &labels);
    let basis = ActionBasis::from_operator(&s).unwrap();
    let t = random_hermitian(&mut r, n);
    (s, basis, t)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(48) })]

    #[test]
    fn commutator_inverts_sharp(seed in any::<u64>(), n in 2usize..10, degenerate in any::<bool>()) {
        let (s, basis, t) = setup(seed, n, degenerate);
        let lhs = commutator(&s, &basis.sharp(&t)).unwrap().scale(c64::new(0.0, 1.0));
        prop_assert!((&lhs - &(&t - &basis.average(&t))).max_abs() < 1e-10);
    }

    #[test]
    fn average_is_a_projection(seed in any::<u64>(), n in 2usize..10, degenerate in any::<bool>()) {
        let (_, basis, t) = setup(seed, n, degenerate);
        let a = basis.average(&t);
        prop_assert!((&basis.average(&a) - &a).max_abs() < 1e-12);
        prop_assert!(basis.average(&basis.sharp(&t)).max_abs() < 1e-12);
        prop_assert!(basis.sharp(&a).max_abs() < 1e-12);
        // averaging preserves Hermiticity and the trace
        prop_assert!(a.hermitian_deviation() < 1e-12);
        prop_assert!((a.trace() - t.trace()).norm() < 1e-10);
    }

    #[test]
    fn superoperators_are_linear(seed in any::<u64>(), n in 2usize..8, c in -3.0f64..3.0) {
        let (_, basis, t) = setup(seed, n, true);
        let mut r = rng(seed ^ 0x5a5a);
        let u = random_hermitian(&mut r, n);
        let mut comb = t.clone();
        comb.axpy(c64::new(c, 0.0), &u);
        let mut want = basis.sharp(&t);
        want.axpy(c64::new(c, 0.0), &basis.sharp(&u));
        prop_assert!((&basis.sharp(&comb) - &want).max_abs() < 1e-11);
    }

    #[test]
    fn weyl_poly_is_hermitian_and_linear(m in 0usize..4, n in 0usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let lad = ladder_pair(10).unwrap();
        let p = FastMonomial::new(m, n, a);
        let q = FastMonomial::new(n, m, b);
        let sum = weyl_poly(&[p.clone(), q.clone()], &lad).unwrap();
        let mut parts = weyl_poly(&[p], &lad).unwrap();
        parts += &weyl_poly(&[q], &lad).unwrap();
        prop_assert!((&sum - &parts).max_abs() < 1e-12);
        prop_assert!(sum.hermitian_deviation() < 1e-12);
    }

    #[test]
    fn symmetrization_routes_agree(m in 0usize..5, n in 0usize..5) {
        let a = weyl_monomial(8, m, n, SymRoute::Permutation).unwrap();
        let b = weyl_monomial(8, m, n, SymRoute::McCoy).unwrap();
        prop_assert!((&a - &b).max_abs() < 1e-9 * a.max_abs().max(1.0));
    }

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), n in 1usize..12) {
        let mut r = rng(seed);
        let f = random_hermitian(&mut r, n);
        let e = hermitian_eig(&f).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let rec = qaction::linalg::spectral_apply(&e, |x| c64::new(x, 0.0));
        prop_assert!(max_abs(&(&rec - f.mat())) < 1e-12);
    }

    #[test]
    fn exp_has_inverse(seed in any::<u64>(), n in 1usize..10, t in -4.0f64..4.0) {
        let mut r = rng(seed);
        let f = random_hermitian(&mut r, n);
        let u = matrix_exp(&f, t).unwrap();
        let v = matrix_exp(&f, -t).unwrap();
        prop_assert!((&(&u * &v) - &FastOperator::identity(n)).max_abs() < 1e-12);
        prop_assert!((&u.adjoint() - &v).max_abs() < 1e-12);
    }

    #[test]
    fn slope_fit_recovers_power(p in 0.5f64..4.0, c in 1e-6f64..10.0) {
        let eps = [0.1, 0.05, 0.025];
        let vals: Vec<f64> = eps.iter().map(|e: &f64| c * e.powf(p)).collect();
        let f = fit_slope("m", &eps, &vals);
        if vals.iter().all(|v| *v < qaction::harness::convergence::FLOOR) {
            prop_assert!(f.floor);
        } else {
            prop_assert!((f.slope - p).abs() < 1e-9);
            prop_assert!(f.r2 > 1.0 - 1e-9);
        }
    }

    #[test]
    fn m3_specs_round_trip(alpha in 0.0f64..0.5, beta in 0.0f64..0.5) {
        let spec = ModelSpec::m3_with(M3Params { alpha, beta, ..Default::default() });
        let json = spec.to_json();
        prop_assert_eq!(ModelSpec::from_json(&json).unwrap().to_json(), json);
    }
}
