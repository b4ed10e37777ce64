use super::conjugate::Conjugate;
use super::YoungFunction;
use crate::error::{Error, Result};
use crate::quad::solve_increasing;
use crate::scalar::{pairwise_sum, Scalar};

const LUX_REL_TOL: f64 = 1e-10;

/// Values on a discrete measure space: one value and one cell measure per point.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction<T> {
    pub values: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> SampledFunction<T> {
    pub fn new(values: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sampled values must be finite"));
        }
        Ok(SampledFunction { values, weights })
    }

    /// Every point carries the same cell measure.
    pub fn uniform(values: Vec<T>, cell: T) -> Result<Self> {
        let weights = vec![cell; values.len()];
        Self::new(values, weights)
    }

    pub fn measure(&self) -> T {
        pairwise_sum(&self.weights)
    }

    pub fn scaled(&self, c: T) -> Self {
        SampledFunction {
            values: self.values.iter().map(|&v| c * v).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Σ weights·u·v.
    pub fn pairing(&self, other: &Self) -> T {
        let terms: Vec<T> = self
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.weights)
            .map(|((&a, &b), &w)| w * a * b)
            .collect();
        pairwise_sum(&terms)
    }
}

/// ρ(u) = Σ weights·Φ(|u|).
pub fn modular_rho<T: Scalar, F: YoungFunction<T>>(f: &F, u: &SampledFunction<T>) -> Result<T> {
    let terms = u
        .values
        .iter()
        .zip(&u.weights)
        .map(|(&v, &w)| Ok(w * f.young_value(v.abs())?))
        .collect::<Result<Vec<T>>>()?;
    super::finite(pairwise_sum(&terms), "modular")
}

/// inf{λ > 0 : ρ(u/λ) ≤ 1}, solved as ρ(x·u) = 1 in x = 1/λ.
pub fn luxemburg_norm<T: Scalar, F: YoungFunction<T>>(f: &F, u: &SampledFunction<T>) -> Result<T> {
    let support = u
        .values
        .iter()
        .zip(&u.weights)
        .any(|(&v, &w)| v != T::zero() && w > T::zero());
    if !support {
        return Ok(T::zero());
    }
    let x = solve_increasing(
        |x| modular_rho(f, &u.scaled(x)).ok(),
        T::one(),
        LUX_REL_TOL,
        2000,
        "Luxemburg scaling",
    )?;
    Ok(T::one() / x)
}

/// 2‖u‖_Φ‖v‖_Φ̃ − |Σ weights·u·v|, nonnegative by Hölder's inequality.
pub fn holder_check<T: Scalar, F: YoungFunction<T>>(
    f: &F,
    u: &SampledFunction<T>,
    v: &SampledFunction<T>,
) -> Result<T> {
    if u.values.len() != v.values.len() || u.weights != v.weights {
        return Err(Error::invalid("Hölder check needs both functions on one carrier"));
    }
    let nu = luxemburg_norm(f, u)?;
    let nv = luxemburg_norm(&Conjugate::new(f), v)?;
    Ok(T::lit(2.0) * nu * nv - u.pairing(v).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfunc::NFunction;

    #[test]
    fn modular_examples() {
        let p2 = NFunction::power(2.0f64).unwrap();
        let zero = SampledFunction::uniform(vec![0.0; 4], 0.25).unwrap();
        assert_eq!(modular_rho(&p2, &zero).unwrap(), 0.0);
        let one = SampledFunction::uniform(vec![1.0; 4], 0.5).unwrap();
        assert!((modular_rho(&p2, &one).unwrap() - 1.0).abs() < 1e-15);
        let n = 10_000;
        let h = 1.0 / n as f64;
        let xs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * h).collect();
        let u = SampledFunction::uniform(xs, h).unwrap();
        let p3 = NFunction::power(3.0f64).unwrap();
        assert!((modular_rho(&p3, &u).unwrap() - 1.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn luxemburg_closed_forms() {
        let p2 = NFunction::power(2.0f64).unwrap();
        let c = 3.0;
        let u = SampledFunction::uniform(vec![c], 1.0).unwrap();
        assert!((luxemburg_norm(&p2, &u).unwrap() - c / 2f64.sqrt()).abs() < 1e-9);
        let e = NFunction::exp_square();
        let one = SampledFunction::uniform(vec![1.0], 1.0).unwrap();
        let expected = 1.0 / 3f64.ln().sqrt();
        assert!((luxemburg_norm(&e, &one).unwrap() - expected).abs() < 1e-9);
        let zero = SampledFunction::uniform(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(luxemburg_norm(&e, &zero).unwrap(), 0.0);
    }

    #[test]
    fn holder_quadratic_is_tight() {
        let p2 = NFunction::power(2.0f64).unwrap();
        let u = SampledFunction::uniform(vec![1.0], 1.0).unwrap();
        assert!(holder_check(&p2, &u, &u).unwrap().abs() < 1e-8);
        let z = SampledFunction::uniform(vec![0.0], 1.0).unwrap();
        assert_eq!(holder_check(&p2, &z, &u).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(SampledFunction::new(vec![1.0f64, 2.0], vec![1.0]).is_err());
        assert!(SampledFunction::new(vec![1.0f64], vec![-1.0]).is_err());
    }
}
