use super::{finite, YoungFunction};
use crate::error::Result;
use crate::quad::solve_increasing;
use crate::scalar::Scalar;

const CONJ_REL_TOL: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 1000;

/// The complementary function Φ̃(s) = sup_{t>0} (st − Φ(t)) of any Young function.
#[derive(Clone, Copy, Debug)]
pub struct Conjugate<'a, F> {
    inner: &'a F,
}

impl<'a, F> Conjugate<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        Conjugate { inner }
    }
}

/// t* with Φ'(t*) = s.
fn maximizer<T: Scalar, F: YoungFunction<T>>(f: &F, s: T) -> Result<T> {
    solve_increasing(
        |t| f.young_derivative(t).ok(),
        s,
        CONJ_REL_TOL,
        MAX_DOUBLINGS,
        "conjugate maximizer",
    )
}

/// Φ̃(s) by solving Φ'(t) = s and taking s·t* − Φ(t*).
pub fn conjugate_eval<T: Scalar, F: YoungFunction<T>>(f: &F, s: T) -> Result<T> {
    let s = s.abs();
    if s == T::zero() {
        return Ok(T::zero());
    }
    let t = maximizer(f, s)?;
    let v = s * t - f.young_value(t)?;
    finite(v.max(T::zero()), "Φ̃")
}

impl<T: Scalar, F: YoungFunction<T>> YoungFunction<T> for Conjugate<'_, F> {
    fn young_value(&self, s: T) -> Result<T> {
        conjugate_eval(self.inner, s)
    }

    /// (Φ̃)'(s) is the inverse of Φ'.
    fn young_derivative(&self, s: T) -> Result<T> {
        if s <= T::zero() {
            return Ok(T::zero());
        }
        maximizer(self.inner, s)
    }
}

/// Max over samples of |Φ̃̃(t) − Φ(t)| / (1 + Φ(t)).
pub fn biconjugate_check<T: Scalar, F: YoungFunction<T>>(f: &F, t_samples: &[T]) -> Result<T> {
    let conj = Conjugate::new(f);
    let mut worst = T::zero();
    for &t in t_samples {
        let direct = f.young_value(t)?;
        let twice = conjugate_eval(&conj, t)?;
        let err = (twice - direct).abs() / (T::one() + direct);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// The Young gap Φ(t) + Φ̃(s) − st at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YoungPair<T> {
    pub s_val: T,
    pub t_val: T,
    pub gap: T,
}

impl<T: Scalar> YoungPair<T> {
    /// The scale the gap is compared against: 1 + Φ(t) + Φ̃(s).
    pub fn scale<F: YoungFunction<T>>(&self, f: &F) -> Result<T> {
        Ok(T::one() + f.young_value(self.t_val)? + conjugate_eval(f, self.s_val)?)
    }
}

pub fn young_gap<T: Scalar, F: YoungFunction<T>>(f: &F, s: T, t: T) -> Result<YoungPair<T>> {
    let gap = f.young_value(t)? + conjugate_eval(f, s)? - s * t;
    Ok(YoungPair {
        s_val: s,
        t_val: t,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfunc::NFunction;

    #[test]
    fn quadratic_is_self_conjugate() {
        let nf = NFunction::power(2.0f64).unwrap();
        assert!((conjugate_eval(&nf, 5.0).unwrap() - 12.5).abs() < 1e-9);
        assert_eq!(conjugate_eval(&nf, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cubic_conjugate_matches_grid_sup() {
        let nf = NFunction::power(3.0f64).unwrap();
        let brute = (0..200_001)
            .map(|k| {
                let t = k as f64 * 1e-5;
                t - t.powi(3) / 3.0
            })
            .fold(f64::MIN, f64::max);
        let v = conjugate_eval(&nf, 1.0).unwrap();
        assert!((v - brute).abs() < 1e-9);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn biconjugate_examples() {
        let nf = NFunction::power(2.0f64).unwrap();
        assert!(biconjugate_check(&nf, &[0.5, 1.0, 2.0]).unwrap() <= 1e-8);
        assert_eq!(biconjugate_check(&nf, &[0.0]).unwrap(), 0.0);
        let sp = NFunction::sum_power(2.0f64, 3.0).unwrap();
        let ts: Vec<f64> = (0..25).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 24.0)).collect();
        assert!(biconjugate_check(&sp, &ts).unwrap() <= 1e-6);
    }

    #[test]
    fn young_equality_on_the_curve() {
        let nf = NFunction::exp_square();
        for &t in &[0.1f64, 0.8, 2.0] {
            let s = nf.derivative(t).unwrap();
            let pair = young_gap(&nf, s, t).unwrap();
            assert!(pair.gap.abs() <= 1e-7 * pair.scale(&nf).unwrap());
        }
    }
}
