//! Quadrature rules and scalar root bracketing shared by the numerical modules.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 400,
        }
    }
}

impl QuadTol {
    pub fn new(abs: f64, rel: f64) -> Self {
        QuadTol {
            abs,
            rel,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

fn gk15<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let s = f(center - dx) + f(center + dx);
        kronrod += T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * s;
        }
    }
    let value = kronrod * half_len;
    let err = ((kronrod - gauss) * half_len).abs();
    (value, err)
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
///
/// Returns `NonFinite` as soon as any panel sum is not finite.
pub fn integrate<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    tol: QuadTol,
) -> Result<QuadResult<T>> {
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: T::zero(),
            intervals: 0,
        });
    }
    let (v0, e0) = gk15(&mut f, a, b);
    if !v0.is_finite() {
        return Err(Error::non_finite("quadrature integrand"));
    }
    // (a, b, value, error)
    let mut panels = vec![(a, b, v0, e0)];
    let abs_tol = T::tol(tol.abs);
    let rel_tol = T::tol(tol.rel);
    loop {
        let total: T = panels.iter().map(|p| p.2).sum();
        let err: T = panels.iter().map(|p| p.3).sum();
        let target = abs_tol.max(rel_tol * total.abs());
        if err <= target || panels.len() >= tol.max_intervals {
            return Ok(QuadResult {
                value: total,
                error: err,
                intervals: panels.len(),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, p)| {
                if p.3 > acc.1 {
                    (i, p.3)
                } else {
                    acc
                }
            });
        let (pa, pb, pv, _) = panels.swap_remove(worst);
        let mid = T::lit(0.5) * (pa + pb);
        if mid <= pa || mid >= pb {
            // Panel below floating resolution; nothing more to gain from it.
            panels.push((pa, pb, pv, T::zero()));
            continue;
        }
        let (vl, el) = gk15(&mut f, pa, mid);
        let (vr, er) = gk15(&mut f, mid, pb);
        if !(vl.is_finite() && vr.is_finite()) {
            return Err(Error::non_finite("quadrature integrand"));
        }
        panels.push((pa, mid, vl, el));
        panels.push((mid, pb, vr, er));
    }
}

/// Integral over `[a, ∞)` through the map `x = a + (1 - t)/t`.
pub fn integrate_to_infinity<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    tol: QuadTol,
) -> Result<QuadResult<T>> {
    let one = T::one();
    integrate(
        |t: T| {
            if t <= T::zero() {
                return T::zero();
            }
            let x = a + (one - t) / t;
            let y = f(x);
            if y == T::zero() {
                T::zero()
            } else {
                y / (t * t)
            }
        },
        T::zero(),
        one,
        tol,
    )
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        // Nodes are computed in f64 then converted.
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pnm1 = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * pn - pnm1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = T::lit(0.5) * (b - a);
        let mid = T::lit(0.5) * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// Root of a non-decreasing function `g(x) = target` on `x >= 0`.
///
/// The bracket grows geometrically from `[0, 1]`; `None` from `g` means the
/// evaluation overflowed and is treated as lying above the target.
pub fn solve_increasing<T: Scalar, G: FnMut(T) -> Option<T>>(
    mut g: G,
    target: T,
    rel_tol: f64,
    max_doublings: usize,
    context: &str,
) -> Result<T> {
    let two = T::lit(2.0);
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut doublings = 0;
    loop {
        match g(hi) {
            Some(v) if v < target => {
                lo = hi;
                hi = hi * two;
                doublings += 1;
                if doublings > max_doublings || !hi.is_finite() {
                    return Err(Error::BracketFailure {
                        context: context.to_string(),
                        doublings,
                    });
                }
            }
            _ => break,
        }
    }
    let tol = T::tol(rel_tol);
    for _ in 0..4000 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol * hi {
            break;
        }
        match g(mid) {
            Some(v) if v < target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_and_smooth() {
        let r = integrate(|x: f64| x.powi(5), 0.0, 2.0, QuadTol::default()).unwrap();
        assert!((r.value - 64.0 / 6.0).abs() < 1e-12);
        let r = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, QuadTol::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // ∫₀¹ x^{-1/2} dx = 2
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadTol::new(1e-10, 1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, QuadTol::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = integrate(|_x: f64| f64::INFINITY, 0.0, 1.0, QuadTol::default());
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn gauss_legendre_exactness() {
        let gl = GaussLegendre::<f64>::new(10);
        let sum: f64 = gl.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        // exact for degree 19
        let v: f64 = gl.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(19)).sum();
        assert!((v - 1.0 / 20.0).abs() < 1e-14);
        let odd = GaussLegendre::<f64>::new(7);
        let v: f64 = odd.mapped(-1.0, 1.0).map(|(x, w)| w * x * x).sum();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_solver_finds_sqrt() {
        let x = solve_increasing(|x: f64| Some(x * x), 10.0, 1e-14, 1000, "sqrt").unwrap();
        assert!((x - 10f64.sqrt()).abs() < 1e-12);
        let e = solve_increasing(|_x: f64| Some(0.0), 1.0, 1e-12, 20, "flat");
        assert!(matches!(e, Err(Error::BracketFailure { .. })));
    }
}
