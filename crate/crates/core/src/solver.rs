//! Minimization of I(u) = I₁(u) − (1−γ)⁻¹ ∫|u|^{1−γ} over grid functions and
//! the certificates a minimizer has to satisfy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{build_context, DiscreteEnergy, GridDomain, LocalEnergy};
use crate::linalg::solve_spd;
use crate::nfunc::{luxemburg_norm, NFunction, NFunctionSpec};
use crate::psi::PsiFunction;
use crate::scalar::{pairwise_sum, Scalar};

/// Fractional order s ∈ (0,1), or the local limit problem driven by Ψ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order<T> {
    Fractional(T),
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Newton for up to [`NEWTON_MAX_UNKNOWNS`] unknowns, gradient descent beyond.
    #[default]
    Auto,
    Newton,
    GradientDescent,
}

pub const NEWTON_MAX_UNKNOWNS: usize = 1500;
const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Iterations without progress before a stage counts as stalled.
const STALL_WINDOW: usize = 50;

#[derive(Clone, Debug)]
pub struct SingularProblem<T> {
    pub nf: NFunction<T>,
    pub gamma: T,
    pub order: Order<T>,
    pub grid: GridDomain,
    pub eps_schedule: Vec<T>,
    pub opt_tol: T,
    pub method: Method,
    pub max_iterations: usize,
    /// With `false` the singular term is dropped and the minimizer is 0.
    pub forcing: bool,
}

pub fn default_eps_schedule<T: Scalar>() -> Vec<T> {
    (1..=10).map(|k| T::lit(10f64.powi(-k))).collect()
}

impl<T: Scalar> SingularProblem<T> {
    pub fn new(nf: NFunction<T>, gamma: T, order: Order<T>, grid: GridDomain) -> Self {
        SingularProblem {
            nf,
            gamma,
            order,
            grid,
            eps_schedule: default_eps_schedule(),
            opt_tol: T::tol(1e-10),
            method: Method::Auto,
            max_iterations: 100_000,
            forcing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::invalid(format!("γ = {} outside (0, 1)", self.gamma)));
        }
        if let Order::Fractional(s) = self.order {
            if !(s > T::zero() && s < T::one()) {
                return Err(Error::invalid(format!("s = {s} outside (0, 1)")));
            }
        }
        if self.eps_schedule.is_empty()
            || self.eps_schedule.iter().any(|&e| !(e > T::zero()))
            || self.eps_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::invalid("eps_schedule must be positive and strictly decreasing"));
        }
        if !(self.opt_tol > T::zero()) {
            return Err(Error::invalid("opt_tol must be positive"));
        }
        Ok(())
    }

    /// The modular part I₁ (fractional) or Σ|E|Ψ(|∇u|) (local).
    pub fn energy_model(&self) -> Result<Box<dyn DiscreteEnergy<T>>> {
        Ok(match self.order {
            Order::Fractional(s) => Box::new(build_context(&self.grid, &self.nf, s)?),
            Order::Local => Box::new(LocalEnergy::new(
                &self.grid,
                PsiFunction::new(self.nf.clone(), self.grid.dim)?,
            )?),
        })
    }

    fn weights(&self) -> Vec<T> {
        vec![self.grid.cell_measure(); self.grid.n_unknowns()]
    }

    fn use_newton(&self) -> bool {
        match self.method {
            Method::Newton => true,
            Method::GradientDescent => false,
            Method::Auto => self.grid.n_unknowns() <= NEWTON_MAX_UNKNOWNS,
        }
    }
}

/// I₂(u) = −(1−γ)⁻¹ Σ m_i [(|u_i|+ε)^{1−γ} − ε^{1−γ}] and its gradient.
pub fn singular_term<T: Scalar>(u: &[T], weights: &[T], gamma: T, eps: T) -> Result<(T, Vec<T>)> {
    if u.len() != weights.len() {
        return Err(Error::invalid("singular term: values and weights differ in length"));
    }
    if eps < T::zero() {
        return Err(Error::invalid("singular term: eps must be nonnegative"));
    }
    if eps == T::zero() {
        if let Some(index) = u.iter().position(|&v| !(v > T::zero())) {
            return Err(Error::SingularEvaluation { index });
        }
    }
    let one = T::one();
    let expo = one - gamma;
    let base = eps.powf(expo);
    let mut terms = Vec::with_capacity(u.len());
    let mut grad = Vec::with_capacity(u.len());
    for (&v, &m) in u.iter().zip(weights) {
        let a = v.abs() + eps;
        terms.push(m * (a.powf(expo) - base));
        let d = m * a.powf(-gamma);
        grad.push(if v < T::zero() { d } else { -d });
    }
    Ok((-pairwise_sum(&terms) / expo, grad))
}

fn singular_hessian_diag<T: Scalar>(u: &[T], weights: &[T], gamma: T, eps: T) -> Vec<T> {
    u.iter()
        .zip(weights)
        .map(|(&v, &m)| gamma * m * (v.abs() + eps).powf(-gamma - T::one()))
        .collect()
}

/// One entry of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry<T> {
    pub stage: usize,
    pub eps: T,
    pub iteration: usize,
    pub energy: T,
    pub residual: T,
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub u: Vec<T>,
    /// I(u) with the unregularized singular term.
    pub energy: T,
    pub min_value: T,
    /// max_i |g_i(u) − m_i u_i^{−γ}| / (m_i u_i^{−γ}).
    pub weak_residual: T,
    /// |g(u)·u − Σ m_i u_i^{1−γ}|.
    pub energy_identity_gap: T,
    /// Σ m_i u_i^{1−γ}.
    pub singular_mass: T,
    pub iterations: usize,
    pub eps_final: T,
    /// True when some stage stopped because no further decrease was
    /// representable in floating point.
    pub stalled: bool,
    pub trace: Vec<TraceEntry<T>>,
}

struct Objective<'a, T: Scalar> {
    model: &'a dyn DiscreteEnergy<T>,
    weights: Vec<T>,
    gamma: T,
    eps: T,
    forcing: bool,
}

impl<T: Scalar> Objective<'_, T> {
    fn value(&self, u: &[T]) -> Result<T> {
        let e1 = self.model.value(u)?;
        if !self.forcing {
            return Ok(e1);
        }
        Ok(e1 + singular_term(u, &self.weights, self.gamma, self.eps)?.0)
    }

    fn gradient(&self, u: &[T]) -> Result<Vec<T>> {
        let mut g = self.model.gradient(u)?;
        if self.forcing {
            let (_, g2) = singular_term(u, &self.weights, self.gamma, self.eps)?;
            for (a, b) in g.iter_mut().zip(g2) {
                *a += b;
            }
        }
        Ok(g)
    }

    fn hessian(&self, u: &[T]) -> Result<Vec<T>> {
        let mut hess = self.model.hessian(u)?;
        if self.forcing {
            let n = u.len();
            for (i, d) in singular_hessian_diag(u, &self.weights, self.gamma, self.eps).into_iter().enumerate() {
                hess[i * n + i] += d;
            }
        }
        Ok(hess)
    }
}

/// Gradient with components pushing against the bound u ≥ 0 removed.
fn projected<T: Scalar>(u: &[T], g: &[T]) -> Vec<T> {
    u.iter()
        .zip(g)
        .map(|(&x, &gi)| if x <= T::zero() && gi > T::zero() { T::zero() } else { gi })
        .collect()
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    let sq: Vec<T> = v.iter().map(|&x| x * x).collect();
    pairwise_sum(&sq).sqrt()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let terms: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&terms)
}

enum StageEnd {
    Converged,
    Stalled,
}

/// Projected Newton (or gradient) descent on one regularized stage.
fn descend<T: Scalar>(
    obj: &Objective<'_, T>,
    u: &mut Vec<T>,
    tol: T,
    newton: bool,
    stage: usize,
    iterations: &mut usize,
    max_iterations: usize,
    trace: &mut Vec<TraceEntry<T>>,
) -> Result<StageEnd> {
    let n = u.len();
    let mut energy = obj.value(u)?;
    let mut grad = obj.gradient(u)?;
    let mut gd_step = T::one();
    let mut best = (T::infinity(), T::infinity());
    let mut since_best = 0;
    loop {
        let pg = projected(u, &grad);
        let residual = norm2(&pg);
        // progress is a new best residual or an energy drop clear of rounding
        let noise = T::lit(10.0) * T::epsilon() * (T::one() + energy.abs());
        if residual < best.0 || energy < best.1 - noise {
            best = (best.0.min(residual), best.1.min(energy));
            since_best = 0;
        } else {
            since_best += 1;
        }
        trace.push(TraceEntry {
            stage,
            eps: obj.eps,
            iteration: *iterations,
            energy,
            residual,
        });
        if residual < tol * (T::one() + energy.abs()) {
            return Ok(StageEnd::Converged);
        }
        if since_best >= STALL_WINDOW {
            return Ok(StageEnd::Stalled);
        }
        if *iterations >= max_iterations {
            return Err(Error::NonConvergence {
                iterations: *iterations,
                residual: residual.to_f64_lossy(),
            });
        }
        *iterations += 1;

        let mut directions: Vec<(Vec<T>, T)> = Vec::with_capacity(2);
        if newton {
            let free: Vec<usize> = (0..n).filter(|&i| !(u[i] <= T::zero() && grad[i] > T::zero())).collect();
            let hess = obj.hessian(u)?;
            let m = free.len();
            let mut sub = vec![T::zero(); m * m];
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    sub[a * m + b] = hess[i * n + j];
                }
            }
            let rhs: Vec<T> = free.iter().map(|&i| -grad[i]).collect();
            if let Some(step) = solve_spd(&sub, m, &rhs) {
                let mut d = vec![T::zero(); n];
                for (a, &i) in free.iter().enumerate() {
                    d[i] = step[a];
                }
                if dot(&d, &grad) < T::zero() {
                    directions.push((d, T::one()));
                }
            }
        }
        let steepest: Vec<T> = pg.iter().map(|&x| -x).collect();
        directions.push((steepest, gd_step));

        let mut accepted = false;
        for (d, first) in &directions {
            let is_gradient = std::ptr::eq(d, &directions.last().expect("nonempty").0);
            let mut alpha = *first;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<T> = u.iter().zip(d).map(|(&x, &di)| (x + alpha * di).max(T::zero())).collect();
                let Ok(e_trial) = obj.value(&trial) else {
                    alpha *= T::lit(BACKTRACK);
                    continue;
                };
                let step: Vec<T> = trial.iter().zip(u.iter()).map(|(&a, &b)| a - b).collect();
                let predicted = dot(&grad, &step);
                if step.iter().all(|&x| x == T::zero()) || !(predicted < T::zero()) {
                    // rounded back onto u, or not a descent step after projection
                    alpha *= T::lit(BACKTRACK);
                    continue;
                }
                let armijo = e_trial - energy <= T::lit(ARMIJO) * predicted;
                // Near the minimum the energy decrease drops below rounding;
                // accept a step that still reduces the residual.
                let flat = e_trial <= energy + T::lit(1e3) * T::epsilon() * (T::one() + energy.abs());
                let mut new_grad = None;
                let ok = armijo || {
                    if flat {
                        if let Ok(g) = obj.gradient(&trial) {
                            let better = norm2(&projected(&trial, &g)) < residual;
                            new_grad = Some(g);
                            better
                        } else {
                            false
                        }
                    } else {
                        false
                    }
                };
                if ok {
                    let g = match new_grad {
                        Some(g) => g,
                        None => obj.gradient(&trial)?,
                    };
                    *u = trial;
                    energy = e_trial;
                    grad = g;
                    accepted = true;
                    if is_gradient {
                        gd_step = (alpha * T::lit(2.0)).min(T::lit(1e6));
                    }
                    break;
                }
                alpha *= T::lit(BACKTRACK);
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Ok(StageEnd::Stalled);
        }
    }
}

/// Minimizes from the constant 0.1.
pub fn minimize<T: Scalar>(problem: &SingularProblem<T>) -> Result<SolveReport<T>> {
    minimize_from(problem, None)
}

/// Minimizes by continuation over the eps schedule, starting from `start`
/// (default: the constant 0.1). The start is halved until its energy is finite.
pub fn minimize_from<T: Scalar>(problem: &SingularProblem<T>, start: Option<&[T]>) -> Result<SolveReport<T>> {
    problem.validate()?;
    let model = problem.energy_model()?;
    let n = problem.grid.n_unknowns();
    let mut u: Vec<T> = match start {
        Some(s) => {
            if s.len() != n {
                return Err(Error::invalid("start vector length does not match the grid"));
            }
            s.iter().map(|&v| v.max(T::zero())).collect()
        }
        None => vec![T::lit(0.1); n],
    };
    let weights = problem.weights();
    let newton = problem.use_newton();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut stalled = false;

    let first = Objective {
        model: model.as_ref(),
        weights: weights.clone(),
        gamma: problem.gamma,
        eps: problem.eps_schedule[0],
        forcing: problem.forcing,
    };
    let mut halvings = 0;
    while first.value(&u).is_err() {
        halvings += 1;
        if halvings > 200 {
            return Err(Error::non_finite("energy at every rescaled start"));
        }
        for v in u.iter_mut() {
            *v = *v * T::lit(0.5);
        }
    }

    for (stage, &eps) in problem.eps_schedule.iter().enumerate() {
        let obj = Objective {
            model: model.as_ref(),
            weights: weights.clone(),
            gamma: problem.gamma,
            eps,
            forcing: problem.forcing,
        };
        let tol = problem.opt_tol.max(eps);
        match descend(&obj, &mut u, tol, newton, stage, &mut iterations, problem.max_iterations, &mut trace)? {
            StageEnd::Converged => {}
            StageEnd::Stalled => stalled = true,
        }
    }
    let eps_final = *problem.eps_schedule.last().expect("validated");
    finish_report(problem, model.as_ref(), u, iterations, eps_final, stalled, trace)
}

fn finish_report<T: Scalar>(
    problem: &SingularProblem<T>,
    model: &dyn DiscreteEnergy<T>,
    u: Vec<T>,
    iterations: usize,
    eps_final: T,
    stalled: bool,
    trace: Vec<TraceEntry<T>>,
) -> Result<SolveReport<T>> {
    let weights = problem.weights();
    let min_value = u.iter().copied().fold(T::infinity(), T::min);
    let e1 = model.value(&u)?;
    let g1 = model.gradient(&u)?;
    let one = T::one();
    let expo = one - problem.gamma;
    let (energy, weak_residual, gap, mass) = if !problem.forcing {
        (e1, T::zero(), dot(&g1, &u).abs(), T::zero())
    } else if min_value > T::zero() {
        let (e2, _) = singular_term(&u, &weights, problem.gamma, T::zero())?;
        let mass_terms: Vec<T> = u.iter().zip(&weights).map(|(&v, &m)| m * v.powf(expo)).collect();
        let mass = pairwise_sum(&mass_terms);
        let mut worst = T::zero();
        for i in 0..u.len() {
            let rhs = weights[i] * u[i].powf(-problem.gamma);
            worst = worst.max((g1[i] - rhs).abs() / rhs);
        }
        (e1 + e2, worst, (dot(&g1, &u) - mass).abs(), mass)
    } else {
        (e1 + singular_term(&u, &weights, problem.gamma, eps_final)?.0, T::infinity(), T::infinity(), T::zero())
    };
    Ok(SolveReport {
        u,
        energy,
        min_value,
        weak_residual,
        energy_identity_gap: gap,
        singular_mass: mass,
        iterations,
        eps_final,
        stalled,
        trace,
    })
}

/// Thresholds the certificates are judged against.
pub const WEAK_RESIDUAL_TOL: f64 = 1e-3;
pub const IDENTITY_TOL: f64 = 1e-5;
pub const INEQUALITY_TOL: f64 = 1e-6;

/// Measured certificates of a converged report.
#[derive(Clone, Debug)]
pub struct CertificateSummary<T> {
    pub energy: T,
    pub min_value: T,
    pub weak_residual: T,
    pub energy_identity_gap: T,
    /// 1 + ∫u^{1−γ}, the scale of the identity and inequality tolerances.
    pub scale: T,
    /// (test function label, g(u)·w − ∫u^{−γ}w) with w = −2u + (v−u)⁺.
    pub inequality_slacks: Vec<(String, T)>,
    pub failures: Vec<String>,
}

impl<T: Scalar> CertificateSummary<T> {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Recomputes the certificates at eps = 0.
pub fn certificates<T: Scalar>(
    report: &SolveReport<T>,
    problem: &SingularProblem<T>,
    seed: u64,
) -> Result<CertificateSummary<T>> {
    let model = problem.energy_model()?;
    let u = &report.u;
    let weights = problem.weights();
    let mut failures = Vec::new();
    if !(report.min_value > T::zero()) {
        failures.push(format!("positivity: min u = {}", report.min_value));
        return Ok(CertificateSummary {
            energy: report.energy,
            min_value: report.min_value,
            weak_residual: T::infinity(),
            energy_identity_gap: T::infinity(),
            scale: T::one(),
            inequality_slacks: Vec::new(),
            failures,
        });
    }
    let g1 = model.gradient(u)?;
    let gamma = problem.gamma;
    let mut worst = T::zero();
    for i in 0..u.len() {
        let rhs = weights[i] * u[i].powf(-gamma);
        worst = worst.max((g1[i] - rhs).abs() / rhs);
    }
    let mass_terms: Vec<T> = u.iter().zip(&weights).map(|(&v, &m)| m * v.powf(T::one() - gamma)).collect();
    let mass = pairwise_sum(&mass_terms);
    let gap = (dot(&g1, u) - mass).abs();
    let scale = T::one() + mass;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random: Vec<T> = u.iter().map(|_| T::lit(rng.gen_range(0.0..2.0))).collect();
    let tests: Vec<(String, Vec<T>)> = vec![
        ("v=0".to_string(), vec![T::zero(); u.len()]),
        ("v=4u".to_string(), u.iter().map(|&x| T::lit(4.0) * x).collect()),
        ("v=random".to_string(), random),
    ];
    let mut slacks = Vec::new();
    for (label, v) in tests {
        let w: Vec<T> = u
            .iter()
            .zip(&v)
            .map(|(&x, &y)| -T::lit(2.0) * x + (y - x).max(T::zero()))
            .collect();
        let lhs = dot(&g1, &w);
        let rhs_terms: Vec<T> = (0..u.len()).map(|i| weights[i] * u[i].powf(-gamma) * w[i]).collect();
        let slack = lhs - pairwise_sum(&rhs_terms);
        if slack < -T::lit(INEQUALITY_TOL) * scale {
            failures.push(format!("inequality ({label}): slack {slack}"));
        }
        slacks.push((label, slack));
    }
    if !(report.energy < T::zero()) {
        failures.push(format!("negative energy: I(u) = {}", report.energy));
    }
    if worst > T::lit(WEAK_RESIDUAL_TOL) {
        failures.push(format!("weak residual {worst} > {WEAK_RESIDUAL_TOL}"));
    }
    if gap > T::lit(IDENTITY_TOL) * scale {
        failures.push(format!("energy identity gap {gap} > {IDENTITY_TOL}·{scale}"));
    }
    Ok(CertificateSummary {
        energy: report.energy,
        min_value: report.min_value,
        weak_residual: worst,
        energy_identity_gap: gap,
        scale,
        inequality_slacks: slacks,
        failures,
    })
}

/// Like [`certificates`], but any failed certificate becomes an error.
pub fn certify<T: Scalar>(report: &SolveReport<T>, problem: &SingularProblem<T>) -> Result<CertificateSummary<T>> {
    let summary = certificates(report, problem, 0)?;
    if summary.passed() {
        Ok(summary)
    } else {
        Err(Error::CertificationFailure(summary.failures.join("; ")))
    }
}

/// Luxemburg distance ‖u − v‖_Φ on the grid.
pub fn grid_distance<T: Scalar>(nf: &NFunction<T>, grid: &GridDomain, u: &[T], v: &[T]) -> Result<T> {
    let diff: Vec<T> = u.iter().zip(v).map(|(&a, &b)| a - b).collect();
    luxemburg_norm(nf, &grid.sampled(&diff)?)
}

/// Result of running the solver from several starting points.
#[derive(Clone, Debug)]
pub struct UniquenessProbe<T> {
    pub max_pairwise_distance: T,
    pub reports: Vec<SolveReport<T>>,
}

/// Solves from the constants 0.01, 1, 10 and then random positive starts.
pub fn uniqueness_probe<T: Scalar>(problem: &SingularProblem<T>, n_starts: usize, seed: u64) -> Result<UniquenessProbe<T>> {
    let n = problem.grid.n_unknowns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<T>> = (0..n_starts)
        .map(|k| match k {
            0 => vec![T::lit(0.01); n],
            1 => vec![T::one(); n],
            2 => vec![T::lit(10.0); n],
            _ => (0..n).map(|_| T::lit(rng.gen_range(0.01..2.0))).collect(),
        })
        .collect();
    let reports = starts
        .par_iter()
        .map(|s| minimize_from(problem, Some(s)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = T::zero();
    for a in 0..reports.len() {
        for b in (a + 1)..reports.len() {
            worst = worst.max(grid_distance(&problem.nf, &problem.grid, &reports[a].u, &reports[b].u)?);
        }
    }
    Ok(UniquenessProbe {
        max_pairwise_distance: worst,
        reports,
    })
}

/// Non-fatal note that the distance tail is not monotone.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityWarning {
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct LimitStudy<T> {
    pub s_values: Vec<T>,
    pub distances: Vec<T>,
    pub reports: Vec<SolveReport<T>>,
    pub local_report: SolveReport<T>,
    pub warning: Option<MonotonicityWarning>,
}

/// Solves the fractional problems for each s and the local Ψ-problem, and
/// measures ‖u_s − u_local‖_Φ.
pub fn limit_study<T: Scalar>(template: &SingularProblem<T>, s_values: &[T]) -> Result<LimitStudy<T>> {
    if s_values.is_empty() || s_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("s values must be strictly increasing"));
    }
    let mut local = template.clone();
    local.order = Order::Local;
    let mut problems: Vec<SingularProblem<T>> = s_values
        .iter()
        .map(|&s| {
            let mut p = template.clone();
            p.order = Order::Fractional(s);
            p
        })
        .collect();
    problems.push(local);
    for p in &problems {
        p.validate()?;
    }
    let mut reports = problems.par_iter().map(minimize).collect::<Result<Vec<_>>>()?;
    let local_report = reports.pop().expect("local problem");
    let distances = reports
        .iter()
        .map(|r| grid_distance(&template.nf, &template.grid, &r.u, &local_report.u))
        .collect::<Result<Vec<_>>>()?;
    let tail = &distances[distances.len().saturating_sub(3)..];
    let warning = if tail.windows(2).any(|w| w[1] > w[0]) {
        Some(MonotonicityWarning {
            message: format!(
                "distance tail {:?} is not non-increasing on a {}-D grid with n = {} (h = {}); \
                 the grid may be too coarse for s this close to 1",
                tail.iter().map(|d| d.to_f64_lossy()).collect::<Vec<_>>(),
                template.grid.dim,
                template.grid.n_interior,
                template.grid.h::<f64>()
            ),
        })
    } else {
        None
    };
    Ok(LimitStudy {
        s_values: s_values.to_vec(),
        distances,
        reports,
        local_report,
        warning,
    })
}

#[derive(Clone, Debug)]
pub struct CoercivityProbe<T> {
    pub t_values: Vec<T>,
    /// `None` where the modular overflowed, which itself shows coercivity.
    pub energies: Vec<Option<T>>,
    pub eventually_increasing: bool,
    pub positive_at_end: bool,
}

/// Energies I(t·ray) along a ray (with eps = 0 outside the support of ray).
pub fn coercivity_probe<T: Scalar>(problem: &SingularProblem<T>, ray: &[T], t_values: &[T]) -> Result<CoercivityProbe<T>> {
    problem.validate()?;
    if ray.len() != problem.grid.n_unknowns() || ray.iter().all(|&v| v == T::zero()) {
        return Err(Error::invalid("coercivity ray must be a nonzero grid function"));
    }
    let model = problem.energy_model()?;
    let obj = Objective {
        model: model.as_ref(),
        weights: problem.weights(),
        gamma: problem.gamma,
        eps: T::zero(),
        forcing: problem.forcing,
    };
    let mut energies = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let u: Vec<T> = ray.iter().map(|&v| (t * v).abs()).collect();
        // I₂ only sees |u|; nodes where the ray vanishes are regularized away
        let e = if t == T::zero() {
            Some(T::zero())
        } else {
            let e1 = model.value(&u);
            match e1 {
                Ok(e1) => {
                    let (e2, _) = singular_term(&u, &obj.weights, obj.gamma, T::min_positive_value())?;
                    Some(e1 + e2)
                }
                Err(Error::NonFinite { .. }) => None,
                Err(e) => return Err(e),
            }
        };
        energies.push(e);
    }
    let finite: Vec<T> = energies.iter().flatten().copied().collect();
    let tail = &finite[finite.len().saturating_sub(3)..];
    let eventually_increasing = tail.windows(2).all(|w| w[1] > w[0]);
    let positive_at_end = match energies.last() {
        Some(Some(e)) => *e > T::zero(),
        Some(None) => true,
        None => false,
    };
    Ok(CoercivityProbe {
        t_values: t_values.to_vec(),
        energies,
        eventually_increasing,
        positive_at_end,
    })
}

/// `"s": 0.5` or `"s": "local"` in problem files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSpec {
    Fractional(f64),
    Named(LocalToken),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalToken {
    Local,
}

/// JSON form of a [`SingularProblem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub nfunction: NFunctionSpec,
    pub gamma: f64,
    pub s: OrderSpec,
    pub grid: GridDomain,
    #[serde(default)]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub opt_tol: Option<f64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl ProblemSpec {
    pub fn build<T: Scalar>(&self) -> Result<SingularProblem<T>> {
        let order = match self.s {
            OrderSpec::Fractional(s) => Order::Fractional(T::lit(s)),
            OrderSpec::Named(LocalToken::Local) => Order::Local,
        };
        let mut p = SingularProblem::new(self.nfunction.build()?, T::lit(self.gamma), order, self.grid);
        if let Some(e) = &self.eps_schedule {
            p.eps_schedule = e.iter().map(|&x| T::lit(x)).collect();
        }
        if let Some(t) = self.opt_tol {
            p.opt_tol = T::lit(t);
        }
        if let Some(m) = self.max_iterations {
            p.max_iterations = m;
        }
        p.method = self.method;
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(nf: NFunction<f64>, gamma: f64, order: Order<f64>, n: usize) -> SingularProblem<f64> {
        SingularProblem::new(nf, gamma, order, GridDomain::new(1, n, n).unwrap())
    }

    #[test]
    fn singular_term_examples() {
        let (v, _) = singular_term(&[0.0, 0.0], &[0.5, 0.5], 0.5, 1.0).unwrap();
        assert_eq!(v, 0.0);
        let (v, _) = singular_term(&[1.0f64], &[1.0], 0.5, 0.0).unwrap();
        assert!((v + 2.0).abs() < 1e-15);
        assert!(matches!(
            singular_term(&[1.0, 0.0], &[1.0, 1.0], 0.5, 0.0),
            Err(Error::SingularEvaluation { index: 1 })
        ));
        let u = [0.3f64, 0.7, 1.1];
        let w = [0.25; 3];
        let (_, g) = singular_term(&u, &w, 0.3, 1e-3).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut a = u;
            let mut b = u;
            a[i] += h;
            b[i] -= h;
            let fd = (singular_term(&a, &w, 0.3, 1e-3).unwrap().0 - singular_term(&b, &w, 0.3, 1e-3).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn local_quadratic_problem_is_certified() {
        let p = problem(NFunction::power(2.0).unwrap(), 0.5, Order::Local, 63);
        let r = minimize(&p).unwrap();
        assert!(r.energy < 0.0 && r.min_value > 0.0);
        let c = certify(&r, &p).unwrap();
        assert!(c.weak_residual < 1e-6, "{c:?}");
    }

    #[test]
    fn fractional_problem_is_certified() {
        for nf in [NFunction::power(2.0).unwrap(), NFunction::exp_square()] {
            let p = problem(nf, 0.5, Order::Fractional(0.5), 31);
            let r = minimize(&p).unwrap();
            let c = certify(&r, &p).unwrap();
            assert!(c.passed());
        }
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let mut p = problem(NFunction::power(2.0).unwrap(), 0.5, Order::Fractional(0.5), 15);
        p.forcing = false;
        let r = minimize(&p).unwrap();
        assert!(r.u.iter().all(|&v| v.abs() < 1e-8), "{:?}", r.u);
    }

    #[test]
    fn energy_descends_within_stages() {
        let p = problem(NFunction::sum_power(2.0, 3.0).unwrap(), 0.25, Order::Fractional(0.7), 31);
        let r = minimize(&p).unwrap();
        for w in r.trace.windows(2) {
            if w[0].stage == w[1].stage {
                assert!(w[1].energy <= w[0].energy + 1e-12 * (1.0 + w[0].energy.abs()));
            }
        }
    }

    #[test]
    fn coercivity_along_a_tent() {
        let p = problem(NFunction::power(2.0).unwrap(), 0.5, Order::Fractional(0.5), 31);
        let tent: Vec<f64> = (0..31).map(|k| {
            let x = (k + 1) as f64 / 32.0;
            x.min(1.0 - x)
        }).collect();
        let probe = coercivity_probe(&p, &tent, &[0.0, 1e-3, 1.0, 10.0, 100.0, 1000.0]).unwrap();
        assert_eq!(probe.energies[0], Some(0.0));
        assert!(probe.energies[1].unwrap() < 0.0);
        assert!(probe.eventually_increasing && probe.positive_at_end);
    }

    #[test]
    fn problem_json_round_trip() {
        let text = r#"{"nfunction":{"kind":"power","p":2},"gamma":0.5,"s":"local",
            "grid":{"dim":1,"n":15,"halo":15},"eps_schedule":[1e-1,1e-5,1e-10],"opt_tol":1e-9}"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        let p = spec.build::<f64>().unwrap();
        assert_eq!(p.order, Order::Local);
        let spec2: ProblemSpec = serde_json::from_str(&text.replace("\"local\"", "0.5")).unwrap();
        assert_eq!(spec2.build::<f64>().unwrap().order, Order::Fractional(0.5));
        assert!(serde_json::from_str::<ProblemSpec>(&text.replace("\"local\"", "\"nonlocal\"")).is_err());
        let bad: ProblemSpec = serde_json::from_str(&text.replace("0.5", "1.5")).unwrap();
        assert!(bad.build::<f64>().is_err());
    }
}
