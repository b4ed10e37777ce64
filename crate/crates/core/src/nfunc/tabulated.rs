use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A density φ given by samples, interpolated as a power law between knots
/// (piecewise linear in log–log coordinates for `t ↦ tφ(t)`).
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedDensity<T> {
    knots: Vec<T>,
    /// tφ(t) at the knots.
    flux: Vec<T>,
    /// Log–log slope of tφ(t) on each segment, plus the two extrapolation slopes.
    slopes: Vec<T>,
    /// Φ at the knots.
    primitive: Vec<T>,
}

impl<T: Scalar> TabulatedDensity<T> {
    /// Builds the table from `(t, φ(t))` pairs. Knots must be positive, and
    /// `tφ(t)` must be strictly increasing in `t`.
    pub fn new(samples: &[(T, T)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("tabulated density needs at least two samples"));
        }
        let mut pts: Vec<(T, T)> = samples.to_vec();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite knots"));
        let mut knots = Vec::with_capacity(pts.len());
        let mut flux = Vec::with_capacity(pts.len());
        for &(t, phi) in &pts {
            if !(t > T::zero() && t.is_finite() && phi > T::zero() && phi.is_finite()) {
                return Err(Error::invalid("tabulated samples need t > 0 and φ(t) > 0"));
            }
            knots.push(t);
            flux.push(t * phi);
        }
        for k in 1..knots.len() {
            if !(knots[k] > knots[k - 1] && flux[k] > flux[k - 1]) {
                return Err(Error::invalid(
                    "tabulated tφ(t) must be strictly increasing on distinct knots",
                ));
            }
        }
        let mut slopes: Vec<T> = (0..knots.len() - 1)
            .map(|k| (flux[k + 1] / flux[k]).ln() / (knots[k + 1] / knots[k]).ln())
            .collect();
        let first = slopes[0];
        let last = *slopes.last().expect("one segment");
        slopes.insert(0, first);
        slopes.push(last);

        let one = T::one();
        let mut primitive = Vec::with_capacity(knots.len());
        primitive.push(flux[0] * knots[0] / (first + one));
        for k in 0..knots.len() - 1 {
            let b = slopes[k + 1];
            let seg = flux[k] * knots[k] / (b + one)
                * ((knots[k + 1] / knots[k]).powf(b + one) - one);
            primitive.push(primitive[k] + seg);
        }
        Ok(TabulatedDensity {
            knots,
            flux,
            slopes,
            primitive,
        })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Segment anchor index and slope for `t > 0`.
    fn segment(&self, t: T) -> (usize, T) {
        let n = self.knots.len();
        if t < self.knots[0] {
            return (0, self.slopes[0]);
        }
        if t >= self.knots[n - 1] {
            return (n - 1, self.slopes[n]);
        }
        // last knot <= t
        let k = self.knots.partition_point(|&x| x <= t) - 1;
        (k, self.slopes[k + 1])
    }

    /// tφ(t) on t >= 0.
    pub(crate) fn flux(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let (k, b) = self.segment(t);
        self.flux[k] * (t / self.knots[k]).powf(b)
    }

    /// d/dt [tφ(t)].
    pub(crate) fn flux_derivative(&self, t: T) -> T {
        if t <= T::zero() {
            let b = self.slopes[0];
            return if b > T::one() {
                T::zero()
            } else if b == T::one() {
                self.flux[0] / self.knots[0]
            } else {
                T::infinity()
            };
        }
        let (k, b) = self.segment(t);
        b * self.flux[k] * (t / self.knots[k]).powf(b) / t
    }

    /// Φ(t) on t >= 0, integrated exactly segment by segment.
    pub(crate) fn primitive(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        let one = T::one();
        if t < self.knots[0] {
            let b = self.slopes[0];
            return self.flux[0] * self.knots[0] / (b + one) * (t / self.knots[0]).powf(b + one);
        }
        let (k, b) = self.segment(t);
        self.primitive[k]
            + self.flux[k] * self.knots[k] / (b + one) * ((t / self.knots[k]).powf(b + one) - one)
    }
}
