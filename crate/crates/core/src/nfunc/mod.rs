//! N-functions Φ(t) = ∫₀^|t| φ(τ)τ dτ, their conjugates, growth indices and
//! the Orlicz modular / Luxemburg norm toolkit.

mod conjugate;
mod indices;
mod kernel;
mod norm;
mod spec;
mod tabulated;

pub use conjugate::{biconjugate_check, conjugate_eval, young_gap, Conjugate, YoungPair};
pub use indices::{delta2_classify, sobolev_indices, Delta2, GrowthIndices};
pub use norm::{holder_check, luxemburg_norm, modular_rho, SampledFunction};
pub use spec::NFunctionSpec;
pub use tabulated::TabulatedDensity;

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadTol};
use crate::scalar::Scalar;

/// The built-in families.
#[derive(Clone, Debug, PartialEq)]
pub enum NFunctionKind<T> {
    /// Φ(t) = t^p / p.
    Power { p: T },
    /// Φ(t) = t^p (|ln t| + 2/(p-1)); the shift makes t^p|ln t| convex.
    PowerLog { p: T },
    /// Φ(t) = max{t^p, t^q}.
    MaxPower { p: T, q: T },
    /// Φ(t) = t^p + t^q.
    SumPower { p: T, q: T },
    /// Φ(t) = (e^{t²} - 1) / 2.
    ExpSquare,
    Tabulated(TabulatedDensity<T>),
}

/// Anything that behaves like a Young function: even, convex, zero at zero.
///
/// Values may be `+∞` when the evaluation overflows.
pub trait YoungFunction<T: Scalar> {
    /// Φ(|t|).
    fn young_value(&self, t: T) -> Result<T>;
    /// Right derivative Φ'(t) on t >= 0.
    fn young_derivative(&self, t: T) -> Result<T>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct NFunction<T> {
    kind: NFunctionKind<T>,
}

fn check_exponent<T: Scalar>(name: &str, x: T) -> Result<()> {
    if x > T::one() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("exponent {name} = {x} must be finite and > 1")))
    }
}

impl<T: Scalar> NFunction<T> {
    pub fn power(p: T) -> Result<Self> {
        check_exponent("p", p)?;
        Ok(NFunction {
            kind: NFunctionKind::Power { p },
        })
    }

    pub fn power_log(p: T) -> Result<Self> {
        check_exponent("p", p)?;
        Ok(NFunction {
            kind: NFunctionKind::PowerLog { p },
        })
    }

    pub fn max_power(p: T, q: T) -> Result<Self> {
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        Ok(NFunction {
            kind: NFunctionKind::MaxPower { p, q },
        })
    }

    pub fn sum_power(p: T, q: T) -> Result<Self> {
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        Ok(NFunction {
            kind: NFunctionKind::SumPower { p, q },
        })
    }

    pub fn exp_square() -> Self {
        NFunction {
            kind: NFunctionKind::ExpSquare,
        }
    }

    pub fn tabulated(samples: &[(T, T)]) -> Result<Self> {
        Ok(NFunction {
            kind: NFunctionKind::Tabulated(TabulatedDensity::new(samples)?),
        })
    }

    pub fn kind(&self) -> &NFunctionKind<T> {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            NFunctionKind::Power { p } => format!("power(p={p})"),
            NFunctionKind::PowerLog { p } => format!("powerlog(p={p})"),
            NFunctionKind::MaxPower { p, q } => format!("maxpower(p={p},q={q})"),
            NFunctionKind::SumPower { p, q } => format!("sumpower(p={p},q={q})"),
            NFunctionKind::ExpSquare => "expsquare".to_string(),
            NFunctionKind::Tabulated(tab) => format!("tabulated({} knots)", tab.knots().len()),
        }
    }

    /// Additive shift used by the power-log family.
    pub(crate) fn log_shift(p: T) -> T {
        T::lit(2.0) / (p - T::one())
    }

    /// Largest admissible argument of `exp` before we call the value non-finite.
    pub(crate) fn exp_arg_limit() -> T {
        (T::max_value().ln() - T::lit(9.78)).min(T::lit(700.0))
    }

    // ---- raw evaluations on t >= 0 (may return +∞) ----

    pub(crate) fn raw_value(&self, t: T) -> T {
        let t = t.abs();
        if t == T::zero() {
            return T::zero();
        }
        match &self.kind {
            NFunctionKind::Power { p } => t.powf(*p) / *p,
            NFunctionKind::PowerLog { p } => t.powf(*p) * (t.ln().abs() + Self::log_shift(*p)),
            NFunctionKind::MaxPower { p, q } => t.powf(*p).max(t.powf(*q)),
            NFunctionKind::SumPower { p, q } => t.powf(*p) + t.powf(*q),
            NFunctionKind::ExpSquare => {
                let x = t * t;
                if x > Self::exp_arg_limit() {
                    T::infinity()
                } else {
                    x.exp_m1() / T::lit(2.0)
                }
            }
            NFunctionKind::Tabulated(tab) => tab.primitive(t),
        }
    }

    /// Φ'(t) = tφ(t), right-continuous at kinks.
    pub(crate) fn raw_derivative(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let one = T::one();
        match &self.kind {
            NFunctionKind::Power { p } => t.powf(*p - one),
            NFunctionKind::PowerLog { p } => {
                let l = t.ln();
                let sign = if l >= T::zero() { one } else { -one };
                t.powf(*p - one) * (*p * l.abs() + *p * Self::log_shift(*p) + sign)
            }
            NFunctionKind::MaxPower { p, q } => {
                let (lo, hi) = (p.min(*q), p.max(*q));
                if t < one {
                    lo * t.powf(lo - one)
                } else {
                    hi * t.powf(hi - one)
                }
            }
            NFunctionKind::SumPower { p, q } => *p * t.powf(*p - one) + *q * t.powf(*q - one),
            NFunctionKind::ExpSquare => {
                let x = t * t;
                if x > Self::exp_arg_limit() {
                    T::infinity()
                } else {
                    t * x.exp()
                }
            }
            NFunctionKind::Tabulated(tab) => tab.flux(t),
        }
    }

    /// Φ''(t) on t >= 0 (away from kinks); the value at 0 is the right limit.
    pub(crate) fn raw_second_derivative(&self, t: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let pow_limit = |e: T, coef: T| -> T {
            // right limit of coef * t^e at t = 0
            if e > T::zero() {
                T::zero()
            } else if e == T::zero() {
                coef
            } else {
                T::infinity()
            }
        };
        match &self.kind {
            NFunctionKind::Power { p } => {
                if t <= T::zero() {
                    pow_limit(*p - two, *p - one)
                } else {
                    (*p - one) * t.powf(*p - two)
                }
            }
            NFunctionKind::PowerLog { p } => {
                if t <= T::zero() {
                    // t^{p-2}(p-1)p|ln t| dominates
                    return if *p > two { T::zero() } else { T::infinity() };
                }
                let l = t.ln();
                let sign = if l >= T::zero() { one } else { -one };
                let a = Self::log_shift(*p);
                t.powf(*p - two) * ((*p - one) * (*p * l.abs() + *p * a + sign) + *p * sign)
            }
            NFunctionKind::MaxPower { p, q } => {
                let (lo, hi) = (p.min(*q), p.max(*q));
                if t <= T::zero() {
                    pow_limit(lo - two, lo * (lo - one))
                } else if t < one {
                    lo * (lo - one) * t.powf(lo - two)
                } else {
                    hi * (hi - one) * t.powf(hi - two)
                }
            }
            NFunctionKind::SumPower { p, q } => {
                if t <= T::zero() {
                    pow_limit(*p - two, *p * (*p - one)) + pow_limit(*q - two, *q * (*q - one))
                } else {
                    *p * (*p - one) * t.powf(*p - two) + *q * (*q - one) * t.powf(*q - two)
                }
            }
            NFunctionKind::ExpSquare => {
                let x = t * t;
                if x > Self::exp_arg_limit() {
                    T::infinity()
                } else {
                    x.exp() * (one + two * x)
                }
            }
            NFunctionKind::Tabulated(tab) => tab.flux_derivative(t),
        }
    }

    /// φ(t) = Φ'(t)/t with the right limit at t = 0.
    pub(crate) fn raw_density(&self, t: T) -> T {
        if t > T::zero() {
            return self.raw_derivative(t) / t;
        }
        // tφ(t) is differentiable at 0⁺ for every kind, so φ(0⁺) = Φ''(0⁺).
        self.raw_second_derivative(T::zero())
    }

    /// F(a) = ∫₀^a Φ(σ)/σ dσ on a >= 0.
    pub(crate) fn raw_log_primitive(&self, a: T) -> T {
        let a = a.abs();
        if a == T::zero() {
            return T::zero();
        }
        let one = T::one();
        match &self.kind {
            NFunctionKind::Power { p } => a.powf(*p) / (*p * *p),
            NFunctionKind::SumPower { p, q } => a.powf(*p) / *p + a.powf(*q) / *q,
            NFunctionKind::MaxPower { p, q } => {
                let (lo, hi) = (p.min(*q), p.max(*q));
                if a <= one {
                    a.powf(lo) / lo
                } else {
                    one / lo + (a.powf(hi) - one) / hi
                }
            }
            NFunctionKind::PowerLog { p } => {
                let shift = Self::log_shift(*p);
                shift * a.powf(*p) / *p + power_log_primitive(*p, a)
            }
            NFunctionKind::ExpSquare => {
                let x = a * a;
                if x > Self::exp_arg_limit() {
                    return T::infinity();
                }
                // Σ_{m>=1} x^m / (4 m · m!)
                let mut term = one;
                let mut sum = T::zero();
                let mut m = 1usize;
                loop {
                    let mf = T::from_usize_lossy(m);
                    term = term * x / mf;
                    let piece = term / (T::lit(4.0) * mf);
                    sum += piece;
                    if (mf > x && piece <= sum * T::epsilon()) || m > 100_000 {
                        break;
                    }
                    m += 1;
                }
                sum
            }
            NFunctionKind::Tabulated(_) => integrate(
                |s: T| {
                    if s <= T::zero() {
                        T::zero()
                    } else {
                        self.raw_value(s) / s
                    }
                },
                T::zero(),
                a,
                QuadTol::new(1e-14, 1e-12),
            )
            .map(|r| r.value)
            .unwrap_or(T::infinity()),
        }
    }

    // ---- checked public evaluations ----

    /// φ(t) for t >= 0.
    pub fn phi(&self, t: T) -> Result<T> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::invalid(format!("φ evaluated at {t}; need finite t >= 0")));
        }
        finite(self.raw_density(t), "φ")
    }

    /// Φ(|t|).
    pub fn eval(&self, t: T) -> Result<T> {
        finite(self.raw_value(t), "Φ")
    }

    /// Φ'(t) = tφ(t) for t >= 0.
    pub fn derivative(&self, t: T) -> Result<T> {
        finite(self.raw_derivative(t.abs()), "Φ'")
    }

    pub fn second_derivative(&self, t: T) -> Result<T> {
        finite(self.raw_second_derivative(t.abs()), "Φ''")
    }

    /// ∫₀^a Φ(σ)/σ dσ.
    pub fn log_primitive(&self, a: T) -> Result<T> {
        finite(self.raw_log_primitive(a), "∫Φ(σ)/σ dσ")
    }

    /// Φ(t) recomputed by adaptive quadrature of the density φ(τ)τ.
    pub fn eval_by_quadrature(&self, t: T) -> Result<T> {
        let t = t.abs();
        let r = integrate(|x: T| self.raw_derivative(x), T::zero(), t, QuadTol::new(1e-13, 1e-12))?;
        finite(r.value, "Φ by quadrature")
    }

    /// Growth indices ℓ = inf t²φ/Φ and m = sup t²φ/Φ (m may be +∞).
    ///
    /// Closed form for the built-in families, sampled for tabulated densities.
    pub fn indices(&self) -> GrowthIndices<T> {
        let one = T::one();
        let two = T::lit(2.0);
        match &self.kind {
            NFunctionKind::Power { p } => GrowthIndices { ell: *p, m: *p },
            NFunctionKind::PowerLog { p } => {
                let a = Self::log_shift(*p);
                GrowthIndices {
                    ell: *p - one / a,
                    m: *p + one / a,
                }
            }
            NFunctionKind::MaxPower { p, q } | NFunctionKind::SumPower { p, q } => GrowthIndices {
                ell: p.min(*q),
                m: p.max(*q),
            },
            NFunctionKind::ExpSquare => GrowthIndices {
                ell: two,
                m: T::infinity(),
            },
            NFunctionKind::Tabulated(tab) => {
                let knots = tab.knots();
                let lo = knots[0] * T::lit(1e-2);
                let hi = knots[knots.len() - 1] * T::lit(1e2);
                sobolev_indices(self, lo, hi, 512).unwrap_or(GrowthIndices {
                    ell: one,
                    m: T::infinity(),
                })
            }
        }
    }
}

/// G(x) = ∫₀^x σ^{p-1}|ln σ| dσ.
fn power_log_primitive<T: Scalar>(p: T, x: T) -> T {
    let one = T::one();
    if x <= one {
        x.powf(p) / p * (-x.ln() + one / p)
    } else {
        T::lit(2.0) / (p * p) + x.powf(p) / p * (x.ln() - one / p)
    }
}

pub(crate) fn finite<T: Scalar>(x: T, what: &str) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::non_finite(what))
    }
}

impl<T: Scalar> YoungFunction<T> for NFunction<T> {
    fn young_value(&self, t: T) -> Result<T> {
        self.eval(t)
    }

    fn young_derivative(&self, t: T) -> Result<T> {
        self.derivative(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<NFunction<f64>> {
        vec![
            NFunction::power(2.0).unwrap(),
            NFunction::power(3.0).unwrap(),
            NFunction::power(1.5).unwrap(),
            NFunction::power_log(2.0).unwrap(),
            NFunction::max_power(4.0, 2.0).unwrap(),
            NFunction::sum_power(2.0, 3.0).unwrap(),
            NFunction::exp_square(),
        ]
    }

    #[test]
    fn density_examples() {
        let p2 = NFunction::<f64>::power(2.0).unwrap();
        assert_eq!(p2.phi(3.0).unwrap(), 1.0);
        let e = NFunction::exp_square();
        assert!((e.phi(1.0).unwrap() * 1.0 - std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn value_examples() {
        let p3 = NFunction::<f64>::power(3.0).unwrap();
        assert!((p3.eval(2.0).unwrap() - 8.0 / 3.0).abs() < 1e-14);
        assert_eq!(NFunction::<f64>::exp_square().eval(0.0).unwrap(), 0.0);
        assert_eq!(p3.eval(-2.0).unwrap(), p3.eval(2.0).unwrap());
    }

    #[test]
    fn tabulated_reproduces_power_law_density() {
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let t = 0.01 * 1.6f64.powi(k);
                (t, t.sqrt())
            })
            .collect();
        let tab = NFunction::tabulated(&samples).unwrap();
        assert!((tab.phi(4.0).unwrap() - 2.0).abs() < 1e-6);
        // Φ(t) = ∫ τ^{1.5} = t^{2.5}/2.5
        let t = 3.3;
        assert!((tab.eval(t).unwrap() - t.powf(2.5) / 2.5).abs() < 1e-9);
    }

    #[test]
    fn tabulated_rejects_non_monotone_flux() {
        let r = NFunction::tabulated(&[(1.0, 1.0), (2.0, 0.4)]);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
        assert!(NFunction::<f64>::tabulated(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn exp_square_overflow_is_reported() {
        let e = NFunction::<f64>::exp_square();
        assert!(e.eval(26.0).is_ok());
        assert!(matches!(e.eval(27.0), Err(Error::NonFinite { .. })));
        assert!(matches!(e.derivative(30.0), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn closed_forms_match_density_quadrature() {
        for nf in builtins() {
            for &t in &[0.3, 1.0, 1.5, 2.7] {
                let closed = nf.eval(t).unwrap();
                let quad = nf.eval_by_quadrature(t).unwrap();
                assert!(
                    (closed - quad).abs() <= 1e-8 * (1.0 + closed),
                    "{}: t={t} {closed} vs {quad}",
                    nf.name()
                );
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        for nf in builtins() {
            for &t in &[0.2, 0.7, 1.9] {
                let h = 1e-6;
                let fd = (nf.derivative(t + h).unwrap() - nf.derivative(t - h).unwrap()) / (2.0 * h);
                let an = nf.second_derivative(t).unwrap();
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{}: t={t}", nf.name());
            }
        }
    }

    #[test]
    fn log_primitive_matches_quadrature() {
        for nf in builtins() {
            for &a in &[0.4, 1.0, 2.5] {
                let closed = nf.log_primitive(a).unwrap();
                let quad = integrate(|s: f64| if s > 0.0 { nf.raw_value(s) / s } else { 0.0 }, 0.0, a, QuadTol::new(1e-14, 1e-12))
                    .unwrap()
                    .value;
                assert!((closed - quad).abs() <= 1e-9 * (1.0 + closed), "{}: a={a}", nf.name());
            }
        }
    }

    #[test]
    fn density_hypotheses_hold_on_log_grid() {
        for nf in builtins() {
            let ts: Vec<f64> = (0..400).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 399.0)).collect();
            let mut prev = 0.0;
            for &t in &ts {
                if nf.eval(t).is_err() {
                    break;
                }
                let flux = nf.derivative(t).unwrap();
                assert!(nf.phi(t).unwrap() > 0.0);
                assert!(flux > prev, "{} not increasing at {t}", nf.name());
                prev = flux;
            }
            assert!(nf.derivative(1e-8).unwrap() < 1e-3, "{}", nf.name());
        }
    }

    #[test]
    fn indices_are_ordered() {
        for nf in builtins() {
            let g = nf.indices();
            assert!(g.ell >= 1.0 && g.ell <= g.m, "{}", nf.name());
        }
        let g = NFunction::power(4.0f64).unwrap().indices();
        assert_eq!((g.ell, g.m), (4.0, 4.0));
    }

    #[test]
    fn invalid_exponents_rejected() {
        assert!(NFunction::power(1.0f64).is_err());
        assert!(NFunction::sum_power(2.0f64, f64::NAN).is_err());
        assert!(NFunction::max_power(0.5f64, 2.0).is_err());
    }

    #[test]
    fn single_precision_evaluates() {
        let nf = NFunction::<f32>::sum_power(2.0, 3.0).unwrap();
        assert!((nf.eval(2.0).unwrap() - 12.0).abs() < 1e-5);
    }
}
