use orlicz_var::nfunc::{
    biconjugate_check, conjugate_eval, holder_check, luxemburg_norm, modular_rho, young_gap, Conjugate,
};
use orlicz_var::{NFunction, SampledFunction, YoungFunction};
use proptest::prelude::*;

fn builtins() -> Vec<NFunction<f64>> {
    vec![
        NFunction::power(2.0).unwrap(),
        NFunction::power(3.0).unwrap(),
        NFunction::power_log(2.0).unwrap(),
        NFunction::max_power(4.0, 2.0).unwrap(),
        NFunction::sum_power(2.0, 3.0).unwrap(),
        NFunction::exp_square(),
    ]
}

fn kind() -> impl Strategy<Value = NFunction<f64>> {
    (0..6usize).prop_map(|k| builtins()[k].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn young_inequality(nf in kind(), s in 0.0f64..10.0, t in 0.0f64..10.0) {
        let pair = young_gap(&nf, s, t).unwrap();
        prop_assert!(pair.gap >= -1e-9 * pair.scale(&nf).unwrap());
    }

    #[test]
    fn young_equality_on_the_flux_curve(nf in kind(), t in 0.01f64..5.0) {
        let s = nf.derivative(t).unwrap();
        let pair = young_gap(&nf, s, t).unwrap();
        prop_assert!(pair.gap.abs() <= 1e-7 * pair.scale(&nf).unwrap());
    }

    #[test]
    fn difference_inequality(nf in kind(), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        // Φ(a) − Φ(b) ≤ (φ(a)a + φ(b)b)(a − b) only holds as written for a > b;
        // the symmetric form with absolute values holds for every pair
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let flux = nf.derivative(a).unwrap() + nf.derivative(b).unwrap();
        let lhs = nf.eval(hi).unwrap() - nf.eval(lo).unwrap();
        prop_assert!(lhs <= flux * (hi - lo) + 1e-10);
        let diff = (nf.eval(a).unwrap() - nf.eval(b).unwrap()).abs();
        prop_assert!(diff <= flux * (a - b).abs() + 1e-10);
    }

    #[test]
    fn difference_inequality_fails_literally_below_the_diagonal(b in 0.5f64..4.0) {
        let nf = NFunction::power(2.0).unwrap();
        let lhs = nf.eval(0.0).unwrap() - nf.eval(b).unwrap();
        let rhs = nf.derivative(b).unwrap() * (0.0 - b);
        prop_assert!(lhs > rhs);
    }

    #[test]
    fn flux_of_convex_combination(nf in kind(), a in 0.0f64..4.0, b in 0.0f64..4.0, t in 0.0f64..1.0) {
        let c = (1.0 - t) * a + t * b;
        let lhs = nf.derivative(c).unwrap();
        let rhs = nf.derivative(a).unwrap() + nf.derivative(b).unwrap();
        prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs));
    }

    #[test]
    fn phi_is_even_and_convex(nf in kind(), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        prop_assert_eq!(nf.eval(-a).unwrap(), nf.eval(a).unwrap());
        let mid = nf.eval(0.5 * (a + b)).unwrap();
        let avg = 0.5 * (nf.eval(a).unwrap() + nf.eval(b).unwrap());
        prop_assert!(mid <= avg + 1e-12 * (1.0 + avg));
    }

    #[test]
    fn luxemburg_is_homogeneous(nf in kind(), vals in prop::collection::vec(-1.5f64..1.5, 1..24)) {
        prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
        let cell = 1.0 / vals.len() as f64;
        let u = SampledFunction::uniform(vals, cell).unwrap();
        let base = luxemburg_norm(&nf, &u).unwrap();
        for c in [-2.0, 0.5, 3.0] {
            let scaled = luxemburg_norm(&nf, &u.scaled(c)).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-9 * c.abs() * base);
        }
        let at_norm = modular_rho(&nf, &u.scaled(1.0 / base)).unwrap();
        prop_assert!((at_norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn power_modular_is_norm_to_the_p(p in 1.2f64..5.0, vals in prop::collection::vec(-3.0f64..3.0, 1..24)) {
        prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
        let nf = NFunction::power(p).unwrap();
        let u = SampledFunction::uniform(vals.clone(), 1.0 / vals.len() as f64).unwrap();
        let norm = luxemburg_norm(&nf, &u).unwrap();
        let rho = modular_rho(&nf, &u).unwrap();
        // homogeneity of t^p/p turns ρ(u/‖u‖) = 1 into ρ(u) = ‖u‖^p
        prop_assert!((rho - norm.powf(p)).abs() <= 1e-8 * rho);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn holder_inequality_cubic(seed_u in prop::collection::vec(-1.0f64..1.0, 512), seed_v in prop::collection::vec(-1.0f64..1.0, 512)) {
        let nf = NFunction::power(3.0).unwrap();
        let cell = 1.0 / 512.0;
        let u = SampledFunction::uniform(seed_u, cell).unwrap();
        let v = SampledFunction::uniform(seed_v, cell).unwrap();
        prop_assert!(holder_check(&nf, &u, &v).unwrap() >= -1e-8);
    }
}

#[test]
fn biconjugation_on_log_grid() {
    let ts: Vec<f64> = (0..41).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 40.0)).collect();
    for nf in builtins() {
        // (e^{t²} − 1)/2 is not representable far beyond t ≈ 26
        let usable: Vec<f64> = ts.iter().copied().filter(|&t| nf.eval(t).map(|v| v < 1e300).unwrap_or(false) && nf.derivative(t).is_ok()).collect();
        let err = biconjugate_check(&nf, &usable).unwrap();
        assert!(err <= 1e-6, "{}: {err}", nf.name());
    }
}

#[test]
fn conjugate_of_conjugate_derivative_inverts_flux() {
    let nf = NFunction::sum_power(2.0, 3.0).unwrap();
    let conj = Conjugate::new(&nf);
    for &t in &[0.1f64, 1.0, 7.0] {
        let s = nf.derivative(t).unwrap();
        assert!((conj.young_derivative(s).unwrap() - t).abs() < 1e-10 * t);
    }
}

#[test]
fn conjugate_of_power_has_conjugate_exponent() {
    // Φ = t^p/p has Φ̃ = s^{p'}/p' with 1/p + 1/p' = 1
    let p = 3.0;
    let q = p / (p - 1.0);
    let nf = NFunction::power(p).unwrap();
    for &s in &[0.2f64, 1.0, 4.5] {
        let v = conjugate_eval(&nf, s).unwrap();
        assert!((v - s.powf(q) / q).abs() < 1e-10 * (1.0 + v));
    }
}

#[test]
fn tabulated_density_matches_its_source() {
    let samples: Vec<(f64, f64)> = (0..60).map(|k| {
        let t = 1e-3 * 1.3f64.powi(k);
        (t, t.sqrt())
    }).collect();
    let tab = NFunction::tabulated(&samples).unwrap();
    assert!((tab.phi(4.0).unwrap() - 2.0).abs() < 1e-6);
    let quad = tab.eval_by_quadrature(2.0).unwrap();
    assert!((tab.eval(2.0).unwrap() - quad).abs() < 1e-10 * (1.0 + quad));
}

#[test]
fn max_power_closed_form_matches_density_quadrature() {
    let nf = NFunction::max_power(2.0, 4.0).unwrap();
    let quad = nf.eval_by_quadrature(1.5).unwrap();
    assert!((quad - 1.5f64.powi(4)).abs() < 1e-8);
}
