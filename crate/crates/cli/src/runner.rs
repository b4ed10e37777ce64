//! Executes validated experiments and writes their output directories.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use orlicz_var::nfunc::{conjugate_eval, delta2_classify, sobolev_indices};
use orlicz_var::psi::{psi_closed_form, psi_eval, PsiFunction};
use orlicz_var::solver::{certificates, limit_study, minimize, uniqueness_probe, Order, SolveReport};
use orlicz_var::{Error, NFunction};
use rayon::prelude::*;
use serde_json::json;

use crate::acceptance::{results_csv, run_suite, Tier};
use crate::config::{AcceptanceParams, Experiment, InspectParams, LimitParams, Params, PsiParams, SolveParams};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CERTIFICATE: u8 = 2;
pub const EXIT_NON_CONVERGENCE: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Numeric(Error::CertificationFailure(_)) => EXIT_CERTIFICATE,
            RunError::Numeric(
                Error::NonConvergence { .. }
                | Error::NonFinite { .. }
                | Error::BracketFailure { .. }
                | Error::SingularEvaluation { .. },
            ) => EXIT_NON_CONVERGENCE,
            RunError::Numeric(
                Error::InvalidParameter(_) | Error::UnsupportedKind(_) | Error::CapacityExceeded { .. },
            ) => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_CONFIG,
        }
    }
}

/// What one experiment produced besides its files.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub summary: String,
}

struct Output {
    summary: String,
    files: Vec<(&'static str, String)>,
    exit_code: u8,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Runs one experiment and writes `manifest.json`, `summary.txt` and the
/// command's CSV files into its output directory.
pub fn run(exp: &Experiment, jobs: usize) -> RunOutcome {
    let start = Instant::now();
    let result = execute(exp);
    let seconds = start.elapsed().as_secs_f64();
    let (exit_code, summary, files, error) = match result {
        Ok(o) => (o.exit_code, o.summary, o.files, None),
        Err(e) => (e.exit_code(), format!("error: {e}\n"), Vec::new(), Some(e.to_string())),
    };
    let manifest = json!({
        "config": exp.config,
        "command": exp.config.command.name(),
        "seed": exp.seed,
        "jobs": jobs,
        "library_version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": seconds,
        "exit_code": exit_code,
        "error": error,
        "files": files.iter().map(|f| f.0).collect::<Vec<_>>(),
    });
    let written = fs::create_dir_all(&exp.out_dir)
        .map_err(|source| RunError::Io {
            path: exp.out_dir.display().to_string(),
            source,
        })
        .and_then(|_| {
            for (name, contents) in &files {
                write(&exp.out_dir, name, contents)?;
            }
            write(&exp.out_dir, "summary.txt", &summary)?;
            write(
                &exp.out_dir,
                "manifest.json",
                &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
            )
        });
    match written {
        Ok(()) => RunOutcome { exit_code, summary },
        Err(e) => RunOutcome {
            exit_code: e.exit_code(),
            summary: format!("error: {e}\n"),
        },
    }
}

/// Runs the experiments concurrently on a pool of `jobs` threads and
/// returns the outcomes in input order.
pub fn run_all(experiments: &[Experiment], jobs: usize) -> Vec<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(|| experiments.par_iter().map(|e| run(e, jobs)).collect())
}

fn execute(exp: &Experiment) -> Result<Output, RunError> {
    match &exp.params {
        Params::NfuncInspect(p) => inspect(p),
        Params::Psi(p) => psi(p),
        Params::Solve(p) => solve(p, exp.seed),
        Params::LimitStudy(p) => limit(p),
        Params::Acceptance(p) => acceptance(p, exp.seed),
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

fn default_t_grid() -> Vec<f64> {
    (0..=40).map(|k| 10f64.powf(-2.0 + k as f64 / 10.0)).collect()
}

fn inspect(p: &InspectParams) -> Result<Output, RunError> {
    let nf: NFunction<f64> = p.nfunction.build()?;
    let ts = p.t_grid.clone().unwrap_or_else(default_t_grid);
    let analytic = nf.indices();
    let d2 = delta2_classify(&analytic);
    let positive: Vec<f64> = ts.iter().copied().filter(|&t| t > 0.0).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    let sampled = if positive.len() >= 2 && hi > lo {
        sobolev_indices(&nf, lo, hi, 64).ok()
    } else {
        None
    };

    let mut csv = String::from("t,phi,phi_derivative,conjugate\n");
    for &t in &ts {
        // ExpSquare leaves the representable range around t = 26
        let phi = nf.eval(t).unwrap_or(f64::INFINITY);
        let d = nf.derivative(t).unwrap_or(f64::INFINITY);
        let c = conjugate_eval(&nf, t).unwrap_or(f64::INFINITY);
        let _ = writeln!(csv, "{t:e},{},{},{}", num(phi), num(d), num(c));
    }

    let mut s = String::new();
    let _ = writeln!(s, "n-function: {}", nf.name());
    let _ = writeln!(s, "ell = {:.6}", analytic.ell);
    if analytic.m.is_infinite() {
        let _ = writeln!(s, "m = inf");
    } else {
        let _ = writeln!(s, "m = {:.6}", analytic.m);
    }
    let _ = writeln!(s, "m_infinite = {}", analytic.m.is_infinite());
    if let Some(g) = sampled {
        let _ = writeln!(s, "sampled on [{lo:e}, {hi:e}]: ell = {:.6}, m = {:.6}", g.ell, g.m);
    }
    let _ = writeln!(s, "delta2 (phi) = {}", d2.phi_delta2);
    let _ = writeln!(s, "delta2 (conjugate) = {}", d2.conj_delta2);
    Ok(Output {
        summary: s,
        files: vec![("nfunction.csv", csv)],
        exit_code: EXIT_OK,
    })
}

fn psi(p: &PsiParams) -> Result<Output, RunError> {
    let nf: NFunction<f64> = p.nfunction.build()?;
    let psi = PsiFunction::new(nf.clone(), p.dim)?;
    let mut csv = String::from("t,psi_quadrature,psi_closed_form,ratio_to_phi\n");
    let mut worst: Option<f64> = None;
    for &t in &p.t_grid {
        let q = psi_eval(&psi, t)?;
        let closed = match psi_closed_form(&nf, p.dim, t) {
            Ok(c) => {
                if c > 0.0 {
                    worst = Some(worst.unwrap_or(0.0).max((q - c).abs() / c));
                }
                num(c)
            }
            Err(Error::UnsupportedKind(_)) => String::new(),
            Err(e) => return Err(e.into()),
        };
        let phi = nf.eval(t)?;
        let ratio = if phi > 0.0 { num(q / phi) } else { String::new() };
        let _ = writeln!(csv, "{t:e},{},{closed},{ratio}", num(q));
    }
    let mut s = format!("psi for {} in dimension {}\n{} t values\n", nf.name(), p.dim, p.t_grid.len());
    match worst {
        Some(w) => {
            let _ = writeln!(s, "max relative difference to the closed form = {w:.3e}");
        }
        None => s.push_str("no closed form for this kind\n"),
    }
    Ok(Output {
        summary: s,
        files: vec![("psi.csv", csv)],
        exit_code: EXIT_OK,
    })
}

fn trace_csv(r: &SolveReport<f64>) -> String {
    let mut out = String::from("stage,eps,iteration,energy,residual\n");
    for e in &r.trace {
        let _ = writeln!(out, "{},{:e},{},{:e},{:e}", e.stage, e.eps, e.iteration, e.energy, e.residual);
    }
    out
}

fn order_label(o: Order<f64>) -> String {
    match o {
        Order::Fractional(s) => format!("s = {s}"),
        Order::Local => "local".into(),
    }
}

fn solve(p: &SolveParams, seed: u64) -> Result<Output, RunError> {
    let problem = p.problem.build::<f64>()?;
    let report = minimize(&problem)?;
    let cert = certificates(&report, &problem, seed)?;
    let mut failures = cert.failures.clone();

    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} gamma = {} {} grid {}-D n = {}",
        problem.nf.name(),
        problem.gamma,
        order_label(problem.order),
        problem.grid.dim,
        problem.grid.n_interior
    );
    let _ = writeln!(s, "iterations = {} (stalled: {})", report.iterations, report.stalled);
    let _ = writeln!(s, "energy = {:.12e}", cert.energy);
    let _ = writeln!(s, "min_value = {:.6e}", cert.min_value);
    let _ = writeln!(s, "weak_residual = {:.3e}", cert.weak_residual);
    let _ = writeln!(s, "energy_identity_gap = {:.3e} (scale {:.6e})", cert.energy_identity_gap, cert.scale);
    for (label, slack) in &cert.inequality_slacks {
        let _ = writeln!(s, "inequality slack [{label}] = {slack:.3e}");
    }

    let mut certificate = json!({
        "energy": cert.energy,
        "min_value": cert.min_value,
        "weak_residual": cert.weak_residual,
        "energy_identity_gap": cert.energy_identity_gap,
        "scale": cert.scale,
        "inequality_slacks": cert.inequality_slacks,
        "iterations": report.iterations,
        "eps_final": report.eps_final,
        "stalled": report.stalled,
    });
    if p.uniqueness_starts > 0 {
        let probe = uniqueness_probe(&problem, p.uniqueness_starts.max(3), seed)?;
        let d = probe.max_pairwise_distance;
        let _ = writeln!(s, "uniqueness spread over {} starts = {d:.3e}", probe.reports.len());
        certificate["uniqueness_spread"] = json!(d);
        if d > 1e-4 {
            failures.push(format!("uniqueness spread {d:.3e} > 1e-4"));
        }
    }
    certificate["failures"] = json!(failures);
    let exit_code = if failures.is_empty() {
        s.push_str("certificates: pass\n");
        EXIT_OK
    } else {
        let _ = writeln!(s, "certificates: FAIL\n  {}", failures.join("\n  "));
        EXIT_CERTIFICATE
    };
    Ok(Output {
        summary: s,
        files: vec![
            ("solution.csv", problem.grid.to_csv(&report.u)),
            ("trace.csv", trace_csv(&report)),
            (
                "certificates.json",
                serde_json::to_string_pretty(&certificate).expect("certificate serializes"),
            ),
        ],
        exit_code,
    })
}

fn limit(p: &LimitParams) -> Result<Output, RunError> {
    let template = p.problem.build::<f64>()?;
    let study = limit_study(&template, &p.s_values)?;
    let mut csv = String::from("s,distance\n");
    for (s, d) in study.s_values.iter().zip(&study.distances) {
        let _ = writeln!(csv, "{s},{d:e}");
    }
    let mut local = String::new();
    local.push_str(&template.grid.to_csv(&study.local_report.u));
    let mut s = format!(
        "limit study for {} gamma = {} on a {}-D grid with n = {}\n",
        template.nf.name(),
        template.gamma,
        template.grid.dim,
        template.grid.n_interior
    );
    for (sv, d) in study.s_values.iter().zip(&study.distances) {
        let _ = writeln!(s, "s = {sv}: distance = {d:.4e}");
    }
    match &study.warning {
        Some(w) => {
            let _ = writeln!(s, "warning: {}", w.message);
        }
        None => s.push_str("distance tail non-increasing\n"),
    }
    Ok(Output {
        summary: s,
        files: vec![("limit_study.csv", csv), ("local_solution.csv", local)],
        exit_code: EXIT_OK,
    })
}

fn acceptance(p: &AcceptanceParams, seed: u64) -> Result<Output, RunError> {
    let tier = if p.smoke { Tier::Smoke } else { Tier::from_env() };
    let ids: Vec<usize> = p.criteria.clone().unwrap_or_else(|| (1..=10).collect());
    let results = run_suite(&ids, tier, seed);
    let mut s = format!("acceptance suite ({tier:?} tier, seed {seed})\n");
    for r in &results {
        s.push_str(&r.line());
        s.push('\n');
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(s, "{} of {} criteria passed", results.len() - failed, results.len());
    Ok(Output {
        summary: s,
        files: vec![("acceptance.csv", results_csv(&results))],
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_CERTIFICATE },
    })
}
