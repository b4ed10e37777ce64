use super::NFunction;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower and upper growth indices of an N-function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthIndices<T> {
    pub ell: T,
    /// `+∞` when the ratio is unbounded.
    pub m: T,
}

/// Whether Φ and its conjugate satisfy the Δ₂-condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delta2 {
    pub phi_delta2: bool,
    pub conj_delta2: bool,
}

const INFINITE_RATIO: f64 = 1e6;
/// Minimal log–log slope of the ratio over the last sampled decade for m = ∞.
const INFINITE_SLOPE: f64 = 0.5;

/// Inf and sup of t²φ(t)/Φ(t) = tΦ'(t)/Φ(t) over `n` log-spaced samples.
///
/// Samples where Φ overflows end the scan. The supremum is reported as `+∞`
/// when the ratio passes 1e6, or when it is still growing like a power of t
/// (log–log slope ≥ 1/2) over the last sampled decade.
pub fn sobolev_indices<T: Scalar>(
    nf: &NFunction<T>,
    t_lo: T,
    t_hi: T,
    n: usize,
) -> Result<GrowthIndices<T>> {
    if !(t_lo > T::zero() && t_hi > t_lo && t_hi.is_finite()) || n < 16 {
        return Err(Error::invalid("sobolev_indices needs 0 < t_lo < t_hi and n >= 16"));
    }
    let (l0, l1) = (t_lo.ln(), t_hi.ln());
    let mut samples: Vec<(T, T)> = Vec::with_capacity(n);
    for k in 0..n {
        let lt = l0 + (l1 - l0) * T::from_usize_lossy(k) / T::from_usize_lossy(n - 1);
        let t = lt.exp();
        let (phi, flux) = match (nf.eval(t), nf.derivative(t)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => break,
        };
        if phi <= T::zero() {
            continue;
        }
        samples.push((lt, t * flux / phi));
    }
    if samples.len() < 2 {
        return Err(Error::non_finite("growth ratio (no finite samples)"));
    }
    let ell = samples.iter().map(|s| s.1).fold(T::infinity(), T::min);
    let sup = samples.iter().map(|s| s.1).fold(T::zero(), T::max);

    let (lt_end, r_end) = *samples.last().expect("nonempty");
    let decade = T::lit(10.0).ln();
    let start = samples
        .iter()
        .rev()
        .find(|s| lt_end - s.0 >= decade)
        .copied()
        .unwrap_or(samples[0]);
    let slope = if lt_end > start.0 {
        (r_end.ln() - start.1.ln()) / (lt_end - start.0)
    } else {
        T::zero()
    };
    let unbounded = sup > T::lit(INFINITE_RATIO) || slope >= T::lit(INFINITE_SLOPE);
    Ok(GrowthIndices {
        ell,
        m: if unbounded { T::infinity() } else { sup },
    })
}

/// Φ ∈ Δ₂ iff m < ∞; Φ̃ ∈ Δ₂ iff ℓ > 1.
pub fn delta2_classify<T: Scalar>(indices: &GrowthIndices<T>) -> Delta2 {
    Delta2 {
        phi_delta2: indices.m.is_finite(),
        conj_delta2: indices.ell > T::one() + T::tol(1e-9),
    }
}
