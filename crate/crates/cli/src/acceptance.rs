//! The acceptance suite: ten numbered criteria, each measured against its
//! tolerance and runtime budget.

use std::time::Instant;

use orlicz_var::frac::{build_context, DiscreteEnergy, FracEnergyContext, GridDomain, GridFunction};
use orlicz_var::nfunc::{biconjugate_check, young_gap};
use orlicz_var::psi::{equivalence_band, psi_closed_form, psi_eval, scaled_modular_limit_check, PsiFunction};
use orlicz_var::solver::{certificates, limit_study, minimize, uniqueness_probe, Order, SingularProblem};
use orlicz_var::NFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::oracles::{mat_vec, quadratic_fixed_point, quadratic_matrix, ShootingSolution};

pub const SMOKE_ENV: &str = "ORLICZ_VAR_SMOKE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Full,
    /// Grids reduced 4×, fewer draws, tolerances loosened where they depend on h.
    Smoke,
}

impl Tier {
    pub fn from_env() -> Self {
        match std::env::var(SMOKE_ENV) {
            Ok(v) if v == "1" => Tier::Smoke,
            _ => Tier::Full,
        }
    }

    fn pick<T>(self, full: T, smoke: T) -> T {
        match self {
            Tier::Full => full,
            Tier::Smoke => smoke,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
    pub seconds: f64,
    pub budget_seconds: f64,
    /// Set when the criterion cannot hold for a reason independent of the
    /// implementation; the text explains what was measured instead.
    pub limitation: Option<String>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} criterion {:>2} {}: {} (required {}) [{:.1} s of {:.0} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.tolerance,
            self.seconds,
            self.budget_seconds
        );
        if let Some(l) = &self.limitation {
            s.push_str(" -- ");
            s.push_str(l);
        }
        s
    }
}

pub const TITLES: [&str; 10] = [
    "Young inequality and biconjugation",
    "growth indices",
    "Psi quadrature vs closed forms",
    "scaled limit of the radial modular",
    "gradient vs central differences",
    "quadratic matrix oracle",
    "solver certificates",
    "ODE shooting oracle",
    "s -> 1 limit study",
    "positive part and pairing monotonicity",
];

const BUDGETS: [f64; 10] = [10.0, 1.0, 30.0, 30.0, 20.0, 30.0, 600.0, 120.0, 600.0, 30.0];

struct Outcome {
    passed: bool,
    measured: String,
    tolerance: String,
    limitation: Option<String>,
}

fn outcome(passed: bool, measured: String, tolerance: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        measured,
        tolerance: tolerance.into(),
        limitation: None,
    }
}

fn failed(err: impl std::fmt::Display, tolerance: &str) -> Outcome {
    outcome(false, format!("error: {err}"), tolerance)
}

/// Runs criterion `id` (1..=10).
pub fn run_criterion(id: usize, tier: Tier, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let rng_seed = seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let o = match id {
        1 => young_suite(tier, rng_seed),
        2 => index_classification(),
        3 => psi_oracles(),
        4 => scaled_limit(),
        5 => gradient_check(rng_seed),
        6 => quadratic_oracle(rng_seed),
        7 => solver_certificates(tier, rng_seed),
        8 => ode_oracle(tier),
        9 => limit_monotonicity(tier),
        10 => contraction_and_monotonicity(tier, rng_seed),
        _ => panic!("no criterion {id}"),
    };
    let seconds = start.elapsed().as_secs_f64();
    let budget = BUDGETS[id - 1];
    let in_time = seconds <= budget;
    CriterionResult {
        id,
        title: TITLES[id - 1],
        passed: o.passed && in_time,
        measured: if in_time {
            o.measured
        } else {
            format!("{}; over the runtime budget", o.measured)
        },
        tolerance: o.tolerance,
        seconds,
        budget_seconds: budget,
        limitation: o.limitation,
    }
}

/// Runs the listed criteria one after another; each may parallelize inside.
pub fn run_suite(ids: &[usize], tier: Tier, seed: u64) -> Vec<CriterionResult> {
    ids.iter().map(|&id| run_criterion(id, tier, seed)).collect()
}

pub fn results_csv(results: &[CriterionResult]) -> String {
    let mut out = String::from("criterion,title,status,measured,required,seconds,budget_seconds\n");
    for r in results {
        let q = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        out.push_str(&format!(
            "{},{},{},{},{},{:.3},{}\n",
            r.id,
            q(r.title),
            if r.passed { "pass" } else { "fail" },
            q(&r.measured),
            q(&r.tolerance),
            r.seconds,
            r.budget_seconds
        ));
    }
    out
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn builtin_kinds() -> Vec<NFunction<f64>> {
    vec![
        NFunction::power(3.0).unwrap(),
        NFunction::power_log(2.0).unwrap(),
        NFunction::max_power(2.0, 4.0).unwrap(),
        NFunction::sum_power(2.0, 3.0).unwrap(),
        NFunction::exp_square(),
    ]
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn young_suite(tier: Tier, seed: u64) -> Outcome {
    let tol = "gap >= -1e-9 rel, curve |gap| <= 1e-7 rel, biconjugation <= 1e-6";
    let pairs = tier.pick(10_000, 2_000);
    let kinds = builtin_kinds();
    let per_kind = pairs / kinds.len();
    let run = || -> orlicz_var::Result<(f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_gap = f64::INFINITY;
        let mut worst_curve = 0.0f64;
        let mut worst_bi = 0.0f64;
        for nf in &kinds {
            // t stays where (e^{t²} − 1)/2 and its derivative are representable
            for _ in 0..per_kind {
                let t = log_uniform(&mut rng, 1e-2, 20.0);
                let s = log_uniform(&mut rng, 1e-2, 1e3);
                let pair = young_gap(nf, s, t)?;
                worst_gap = worst_gap.min(pair.gap / pair.scale(nf)?);
            }
            for _ in 0..200 {
                let t = log_uniform(&mut rng, 1e-2, 20.0);
                let pair = young_gap(nf, nf.derivative(t)?, t)?;
                worst_curve = worst_curve.max(pair.gap.abs() / pair.scale(nf)?);
            }
            let samples: Vec<f64> = (0..=40)
                .map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 40.0))
                .filter(|&t| nf.eval(t).map(|v| v < 1e300).unwrap_or(false) && nf.derivative(t).is_ok())
                .collect();
            worst_bi = worst_bi.max(biconjugate_check(nf, &samples)?);
        }
        Ok((worst_gap, worst_curve, worst_bi))
    };
    match run() {
        Ok((g, c, b)) => outcome(
            g >= -1e-9 && c <= 1e-7 && b <= 1e-6,
            format!("{} pairs: min rel gap {g:.2e}, max curve gap {c:.2e}, max biconjugation error {b:.2e}", per_kind * kinds.len()),
            tol,
        ),
        Err(e) => failed(e, tol),
    }
}

fn index_classification() -> Outcome {
    let tol = "ExpSquare ell = 2 +- 1e-3, m = inf; Power(p) ell = m = p +- 1e-9";
    let e = NFunction::<f64>::exp_square().indices();
    let mut ok = (e.ell - 2.0).abs() <= 1e-3 && e.m.is_infinite();
    let mut worst = 0.0f64;
    for p in [1.5f64, 2.0, 3.0, 4.0, 6.5] {
        let i = NFunction::power(p).unwrap().indices();
        worst = worst.max((i.ell - p).abs()).max((i.m - p).abs());
    }
    ok &= worst <= 1e-9;
    outcome(
        ok,
        format!("ExpSquare ell = {:.6}, m = {}; Power max deviation {worst:.1e}", e.ell, e.m),
        tol,
    )
}

fn closed_form_kinds() -> Vec<NFunction<f64>> {
    vec![
        NFunction::power(2.0).unwrap(),
        NFunction::power(3.5).unwrap(),
        NFunction::power_log(2.0).unwrap(),
        NFunction::max_power(2.0, 3.0).unwrap(),
        NFunction::sum_power(2.0, 3.0).unwrap(),
    ]
}

fn psi_oracles() -> Outcome {
    let tol = "rel diff <= 1e-6; 0 < k1 <= k2 < inf";
    let run = || -> orlicz_var::Result<(f64, f64, f64)> {
        let mut worst = 0.0f64;
        let mut k1 = f64::INFINITY;
        let mut k2 = 0.0f64;
        let ts: Vec<f64> = (0..=40).map(|k| 10f64.powf(-2.0 + k as f64 / 10.0)).collect();
        for nf in closed_form_kinds() {
            for dim in 1..=3 {
                let psi = PsiFunction::new(nf.clone(), dim)?;
                for t in [0.25, 1.0, 4.0] {
                    let q = psi_eval(&psi, t)?;
                    let c = psi_closed_form(&nf, dim, t)?;
                    worst = worst.max((q - c).abs() / c);
                }
                let (a, b) = equivalence_band(&psi, &ts)?;
                k1 = k1.min(a);
                k2 = k2.max(b);
            }
        }
        Ok((worst, k1, k2))
    };
    match run() {
        Ok((w, k1, k2)) => outcome(
            w <= 1e-6 && k1 > 0.0 && k2.is_finite() && k1 <= k2,
            format!("max rel diff {w:.2e}; band [{k1:.3e}, {k2:.3e}]"),
            tol,
        ),
        Err(e) => failed(e, tol),
    }
}

fn scaled_limit() -> Outcome {
    let tol = "Power(2): |error| <= 1e-4; ExpSquare: errors strictly decreasing in s";
    let power = NFunction::power(2.0).unwrap();
    let mut worst = 0.0f64;
    for t in [0.25, 1.0, 4.0] {
        match scaled_modular_limit_check(&power, 2, t, &[0.5, 0.9, 0.99, 0.999]) {
            Ok(errs) => worst = errs.into_iter().fold(worst, f64::max),
            Err(e) => return failed(e, tol),
        }
    }
    let exp = match scaled_modular_limit_check(&NFunction::exp_square(), 1, 0.5, &[0.9, 0.99, 0.999]) {
        Ok(e) => e,
        Err(e) => return failed(e, tol),
    };
    let decreasing = exp.windows(2).all(|w| w[1] < w[0]);
    let mut o = outcome(
        worst <= 1e-4 && decreasing,
        format!("Power max error {worst:.1e}; ExpSquare errors {}", sci(&exp)),
        tol,
    );
    if !decreasing && exp.iter().all(|&e| e <= 1e-12) {
        o.limitation = Some(
            "with r = e^(-tau) the scaled integral becomes (1-s) g((1-s) tau) for every N-function, \
             so it equals Psi(t) for all s and the error sequence only holds rounding noise"
                .into(),
        );
    }
    o
}

fn gradient_check(seed: u64) -> Outcome {
    let tol = "|g - central difference| <= 1e-5 (eps = 1e-6)";
    let n = 31;
    let grid = GridDomain::new(1, n, 0).unwrap();
    let cases = [
        (NFunction::power(2.0).unwrap(), 1.0),
        (NFunction::sum_power(2.0, 3.0).unwrap(), 1.0),
        (NFunction::exp_square(), 0.1),
    ];
    let run = || -> orlicz_var::Result<f64> {
        let mut worst = 0.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (nf, amp) in &cases {
            let ctx = build_context(&grid, nf, 0.5)?;
            let draws: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let errs = draws
                .par_iter()
                .map(|u| -> orlicz_var::Result<f64> {
                    let g = ctx.gradient(u)?;
                    let eps = 1e-6;
                    let mut w = 0.0f64;
                    for i in 0..n {
                        let mut up = u.clone();
                        let mut dn = u.clone();
                        up[i] += eps;
                        dn[i] -= eps;
                        let fd = (ctx.modular(&up)? - ctx.modular(&dn)?) / (2.0 * eps);
                        w = w.max((fd - g[i]).abs());
                    }
                    Ok(w)
                })
                .collect::<orlicz_var::Result<Vec<f64>>>()?;
            worst = errs.into_iter().fold(worst, f64::max);
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => outcome(w <= 1e-5, format!("max deviation {w:.2e} over 60 functions"), tol),
        Err(e) => failed(e, tol),
    }
}

fn quadratic_oracle(seed: u64) -> Outcome {
    let tol = "modular/pairing rel <= 1e-9, fixed point rel <= 1e-6";
    let n = 63;
    let grid = GridDomain::new(1, n, 0).unwrap();
    let nf = NFunction::power(2.0).unwrap();
    let run = || -> orlicz_var::Result<(f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut wm, mut wp, mut wu) = (0.0f64, 0.0f64, 0.0f64);
        for s in [0.25, 0.5, 0.75] {
            let ctx = build_context(&grid, &nf, s)?;
            let a = quadratic_matrix(n, s);
            for _ in 0..10 {
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (au, av) = (mat_vec(&a, &u), mat_vec(&a, &v));
                let uau: f64 = u.iter().zip(&au).map(|(x, y)| x * y).sum();
                let vav: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
                let vau: f64 = v.iter().zip(&au).map(|(x, y)| x * y).sum();
                wm = wm.max((ctx.modular(&u)? - 0.5 * uau).abs() / (0.5 * uau));
                // relative to the Cauchy–Schwarz bound of the bilinear form
                wp = wp.max((ctx.weak_pairing(&u, &v)? - 0.5 * vau).abs() / (0.5 * (uau * vav).sqrt()));
            }
            let problem = SingularProblem::new(nf.clone(), 0.5, Order::Fractional(s), grid);
            let report = minimize(&problem)?;
            let reference = quadratic_fixed_point(&a, grid.h(), 0.5)
                .ok_or_else(|| orlicz_var::Error::NonFinite { context: "matrix fixed point".into() })?;
            let top = reference.iter().copied().fold(0.0, f64::max);
            let dev = report.u.iter().zip(&reference).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            wu = wu.max(dev / top);
        }
        Ok((wm, wp, wu))
    };
    match run() {
        Ok((m, p, u)) => outcome(
            m <= 1e-9 && p <= 1e-9 && u <= 1e-6,
            format!("modular {m:.1e}, pairing {p:.1e}, fixed point {u:.1e}"),
            tol,
        ),
        Err(e) => failed(e, tol),
    }
}

fn solver_certificates(tier: Tier, seed: u64) -> Outcome {
    let tol = "I < 0, u > 0, identity gap <= 1e-5 rel, weak residual <= 1e-3, spread <= 1e-4";
    let n = tier.pick(127, 31);
    let grid = GridDomain::new(1, n, 0).unwrap();
    let kinds = [
        NFunction::power(2.0).unwrap(),
        NFunction::power(3.0).unwrap(),
        NFunction::sum_power(2.0, 3.0).unwrap(),
        NFunction::exp_square(),
    ];
    let mut scenarios = Vec::new();
    for nf in &kinds {
        for gamma in [0.25, 0.5, 0.75] {
            for order in [Order::Fractional(0.5), Order::Local] {
                scenarios.push(SingularProblem::new(nf.clone(), gamma, order, grid));
            }
        }
    }
    let results: Vec<Result<(f64, f64, f64, Vec<String>), String>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let label = format!(
                "{} gamma={} {}",
                p.nf.name(),
                p.gamma,
                match p.order {
                    Order::Fractional(s) => format!("s={s}"),
                    Order::Local => "local".into(),
                }
            );
            let report = minimize(p).map_err(|e| format!("{label}: {e}"))?;
            let cert = certificates(&report, p, seed + k as u64).map_err(|e| format!("{label}: {e}"))?;
            let probe = uniqueness_probe(p, 3, seed + 100 + k as u64).map_err(|e| format!("{label}: {e}"))?;
            let mut fails: Vec<String> = cert.failures.iter().map(|f| format!("{label}: {f}")).collect();
            if probe.max_pairwise_distance > 1e-4 {
                fails.push(format!("{label}: spread {:.2e}", probe.max_pairwise_distance));
            }
            Ok((
                cert.weak_residual,
                cert.energy_identity_gap / cert.scale,
                probe.max_pairwise_distance,
                fails,
            ))
        })
        .collect();
    let (mut res, mut gap, mut spread) = (0.0f64, 0.0f64, 0.0f64);
    let mut fails = Vec::new();
    for r in results {
        match r {
            Ok((a, b, c, f)) => {
                res = res.max(a);
                gap = gap.max(b);
                spread = spread.max(c);
                fails.extend(f);
            }
            Err(e) => fails.push(e),
        }
    }
    let mut measured = format!(
        "{} scenarios, n = {n}: max weak residual {res:.1e}, max identity gap {gap:.1e}, max spread {spread:.1e}",
        scenarios.len()
    );
    if !fails.is_empty() {
        measured.push_str(&format!("; failures: {}", fails.join("; ")));
    }
    outcome(fails.is_empty(), measured, tol)
}

fn ode_oracle(tier: Tier) -> Outcome {
    let ns = tier.pick([127usize, 255, 511], [31, 63, 127]);
    let bound = tier.pick(1e-3, 5e-3);
    let tol = format!("max error <= {bound:.0e} at n = {}, decreasing under refinement", ns[2]);
    let sol = ShootingSolution::solve(0.5, tier.pick(200_000, 50_000));
    let errs: Result<Vec<f64>, String> = ns
        .par_iter()
        .map(|&n| {
            let grid = GridDomain::new(1, n, 0).unwrap();
            let p = SingularProblem::new(NFunction::power(2.0).unwrap(), 0.5, Order::Local, grid);
            let r = minimize(&p).map_err(|e| e.to_string())?;
            let xs: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
            let exact = sol.values(&xs);
            Ok(r.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect();
    match errs {
        Ok(e) => outcome(
            e[2] <= bound && e.windows(2).all(|w| w[1] < w[0]),
            format!("errors {} (midpoint {:.6})", sci(&e), sol.midpoint),
            tol,
        ),
        Err(e) => failed(e, &tol),
    }
}

fn limit_monotonicity(tier: Tier) -> Outcome {
    let tol = "last three distances non-increasing, final < 0.5 * first";
    let n = tier.pick(127, 31);
    let grid = GridDomain::new(1, n, 0).unwrap();
    let s_values = [0.5, 0.7, 0.9, 0.95, 0.99];
    let mut parts = Vec::new();
    let mut ok = true;
    for nf in [NFunction::power(2.0).unwrap(), NFunction::sum_power(2.0, 3.0).unwrap()] {
        let template = SingularProblem::new(nf.clone(), 0.5, Order::Local, grid);
        match limit_study(&template, &s_values) {
            Ok(study) => {
                let d = &study.distances;
                let tail_ok = d[d.len() - 3..].windows(2).all(|w| w[1] <= w[0]);
                let ratio = d[d.len() - 1] / d[0];
                ok &= tail_ok && ratio < 0.5;
                parts.push(format!("{}: {}", nf.name(), sci(d)));
            }
            Err(e) => return failed(e, tol),
        }
    }
    outcome(ok, parts.join("; "), tol)
}

fn contraction_and_monotonicity(tier: Tier, seed: u64) -> Outcome {
    let tol = "zero violations beyond 1e-10";
    let draws = tier.pick(200, 50);
    let mut contexts: Vec<(FracEnergyContext<f64>, f64)> = Vec::new();
    let kinds = [
        (NFunction::power(2.0).unwrap(), 1.0),
        (NFunction::power(1.5).unwrap(), 1.0),
        (NFunction::max_power(2.0, 4.0).unwrap(), 1.0),
        (NFunction::sum_power(2.0, 3.0).unwrap(), 1.0),
        (NFunction::power_log(2.0).unwrap(), 1.0),
        (NFunction::exp_square(), 0.2),
    ];
    for (grid, s) in [
        (GridDomain::new(1, 31, 0).unwrap(), 0.3),
        (GridDomain::new(1, 31, 0).unwrap(), 0.8),
        (GridDomain::new(2, 7, 0).unwrap(), 0.5),
    ] {
        for (nf, amp) in &kinds {
            match build_context(&grid, nf, s) {
                Ok(c) => contexts.push((c, *amp)),
                Err(e) => return failed(e, tol),
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(draws);
    for k in 0..draws {
        let (ctx, amp) = &contexts[k % contexts.len()];
        let n = ctx.grid().n_unknowns();
        let u: Vec<f64> = (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        jobs.push((k % contexts.len(), u, v));
    }
    let res: orlicz_var::Result<Vec<(f64, f64)>> = jobs
        .par_iter()
        .map(|(c, u, v)| {
            let ctx = &contexts[*c].0;
            let plus = GridFunction::new(u.clone()).positive_part().values;
            let contraction = ctx.modular(&plus)? - ctx.modular(u)?;
            let (gu, gv) = (ctx.gradient(u)?, ctx.gradient(v)?);
            let mono: f64 = (0..u.len()).map(|i| (gu[i] - gv[i]) * (u[i] - v[i])).sum();
            Ok((contraction, mono))
        })
        .collect();
    match res {
        Ok(r) => {
            let bad_c = r.iter().filter(|x| x.0 > 1e-10).count();
            let bad_m = r.iter().filter(|x| x.1 < -1e-10).count();
            let worst_c = r.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
            let worst_m = r.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            outcome(
                bad_c == 0 && bad_m == 0,
                format!(
                    "{draws} draws each: {bad_c} contraction violations (max I(u+) - I(u) = {worst_c:.1e}), \
                     {bad_m} monotonicity violations (min pairing {worst_m:.1e})"
                ),
                tol,
            )
        }
        Err(e) => failed(e, tol),
    }
}
