use orlicz_var::frac::GridDomain;
use orlicz_var::solver::{
    certify, coercivity_probe, grid_distance, minimize, minimize_from, uniqueness_probe, Method, Order, ProblemSpec,
    SingularProblem,
};
use orlicz_var::NFunction;

fn local(nf: NFunction<f64>, gamma: f64, n: usize) -> SingularProblem<f64> {
    SingularProblem::new(nf, gamma, Order::Local, GridDomain::new(1, n, 0).unwrap())
}

#[test]
fn quadratic_local_solution_is_negative_energy_and_positive() {
    let p = local(NFunction::power(2.0).unwrap(), 0.5, 127);
    let r = minimize(&p).unwrap();
    assert!(r.energy < 0.0);
    assert!(r.u.iter().all(|&v| v > 0.0));
    let cert = certify(&r, &p).unwrap();
    assert!(cert.passed(), "{:?}", cert.failures);
}

#[test]
fn symmetric_data_gives_symmetric_solution() {
    let p: SingularProblem<f64> = SingularProblem::new(
        NFunction::sum_power(2.0, 3.0).unwrap(),
        0.25,
        Order::Fractional(0.5),
        GridDomain::new(1, 63, 0).unwrap(),
    );
    let r = minimize(&p).unwrap();
    for i in 0..63 {
        assert!((r.u[i] - r.u[62 - i]).abs() < 1e-8);
    }
}

#[test]
fn newton_and_gradient_descent_agree() {
    let mut p = local(NFunction::power(3.0).unwrap(), 0.5, 31);
    p.method = Method::Newton;
    let a = minimize(&p).unwrap();
    p.method = Method::GradientDescent;
    p.opt_tol = 1e-9;
    let b = minimize(&p).unwrap();
    let d = grid_distance(&p.nf, &p.grid, &a.u, &b.u).unwrap();
    assert!(d < 1e-5, "{d}");
}

#[test]
fn different_starts_reach_one_minimizer() {
    let p = SingularProblem::new(
        NFunction::power(2.0).unwrap(),
        0.75,
        Order::Fractional(0.3),
        GridDomain::new(1, 31, 0).unwrap(),
    );
    let probe = uniqueness_probe(&p, 5, 11).unwrap();
    assert!(probe.max_pairwise_distance <= 1e-8);
    let far = vec![25.0; 31];
    let r = minimize_from(&p, Some(&far)).unwrap();
    assert!(grid_distance(&p.nf, &p.grid, &r.u, &probe.reports[0].u).unwrap() <= 1e-8);
}

#[test]
fn single_precision_solver_runs() {
    let p: SingularProblem<f32> = SingularProblem::new(
        NFunction::power(2.0f32).unwrap(),
        0.5,
        Order::Local,
        GridDomain::new(1, 31, 0).unwrap(),
    );
    let r = minimize(&p).unwrap();
    assert!(r.energy < 0.0 && r.min_value > 0.0);
    assert!(r.weak_residual < 1e-2);
}

#[test]
fn energy_grows_along_a_tent() {
    let p = local(NFunction::power(2.0).unwrap(), 0.5, 63);
    let tent: Vec<f64> = (1..=63).map(|i| 1.0 - (2.0 * i as f64 / 64.0 - 1.0).abs()).collect();
    let ts = [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0];
    let probe = coercivity_probe(&p, &tent, &ts).unwrap();
    assert!(probe.eventually_increasing && probe.positive_at_end);
    // t = 1000: Ψ-energy 10⁶·π… dominates the t^{1/2} singular term
    assert!(probe.energies[5].unwrap() > 0.0);
}

#[test]
fn exponential_coercivity_shows_as_overflow() {
    let p = SingularProblem::new(
        NFunction::exp_square(),
        0.5,
        Order::Fractional(0.5),
        GridDomain::new(1, 31, 0).unwrap(),
    );
    let tent: Vec<f64> = (1..=31).map(|i| 1.0 - (2.0 * i as f64 / 32.0 - 1.0).abs()).collect();
    let probe = coercivity_probe(&p, &tent, &[0.01, 0.1, 1.0, 1e3]).unwrap();
    assert!(probe.energies[3].is_none());
    assert!(probe.positive_at_end);
}

#[test]
fn problem_files_reject_unknown_fields() {
    let ok = r#"{"nfunction":{"kind":"power","p":2},"gamma":0.5,"s":"local","grid":{"dim":1,"n":15}}"#;
    let spec: ProblemSpec = serde_json::from_str(ok).unwrap();
    assert!(spec.build::<f64>().is_ok());
    let bad = r#"{"nfunction":{"kind":"power","p":2},"gamma":0.5,"s":0.5,"grid":{"dim":1,"n":15},"colour":1}"#;
    assert!(serde_json::from_str::<ProblemSpec>(bad).is_err());
    let out_of_range = r#"{"nfunction":{"kind":"power","p":2},"gamma":1.5,"s":0.5,"grid":{"dim":1,"n":15}}"#;
    let spec: ProblemSpec = serde_json::from_str(out_of_range).unwrap();
    assert!(spec.build::<f64>().is_err());
}
