//! Radial integrals of Φ that appear in the element self-interaction and in
//! the exterior tail of the fractional modular.

use super::{NFunction, NFunctionKind};
use crate::quad::{integrate, integrate_to_infinity, QuadTol};
use crate::scalar::Scalar;

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// ∫_a^b (1 − e^{−v/μ})^N e^{−βv} dv, with `b = ∞` allowed.
fn weighted_exp_integral<T: Scalar>(beta: T, mu: T, dim: usize, a: T, b: T) -> T {
    let mut sum = T::zero();
    for j in 0..=dim {
        let rate = beta + T::from_usize_lossy(j) / mu;
        let c = T::lit(binomial(dim, j)) * if j % 2 == 0 { T::one() } else { -T::one() };
        let ea = (-rate * a).exp();
        let eb = if b.is_finite() { (-rate * b).exp() } else { T::zero() };
        sum += c * (ea - eb) / rate;
    }
    sum
}

impl<T: Scalar> NFunction<T> {
    /// K(κ) = ∫₀^∞ (1 − e^{−v/μ})^N Φ(κe^{−v}) dv with its first two
    /// κ-derivatives. As μ → 0 this tends to ∫₀^κ Φ(σ)/σ dσ.
    pub(crate) fn self_kernel(&self, kappa: T, mu: T, dim: usize) -> [T; 3] {
        let kappa = kappa.abs();
        let zero = T::zero();
        let one = T::one();
        let inf = T::infinity();
        let m = |beta: T| weighted_exp_integral(beta, mu, dim, zero, inf);
        match &self.kind {
            NFunctionKind::Power { p } => {
                let mp = m(*p);
                [
                    kappa.powf(*p) / *p * mp,
                    kappa.powf(*p - one) * mp,
                    second_power(*p - one, kappa) * mp,
                ]
            }
            NFunctionKind::SumPower { p, q } => {
                let (mp, mq) = (m(*p), m(*q));
                [
                    kappa.powf(*p) * mp + kappa.powf(*q) * mq,
                    *p * kappa.powf(*p - one) * mp + *q * kappa.powf(*q - one) * mq,
                    *p * second_power(*p - one, kappa) * mp + *q * second_power(*q - one, kappa) * mq,
                ]
            }
            NFunctionKind::MaxPower { p, q } => {
                let (lo, hi) = (p.min(*q), p.max(*q));
                if kappa <= one {
                    let ml = m(lo);
                    return [
                        kappa.powf(lo) * ml,
                        lo * kappa.powf(lo - one) * ml,
                        lo * second_power(lo - one, kappa) * ml,
                    ];
                }
                let v0 = kappa.ln();
                let a_hi = weighted_exp_integral(hi, mu, dim, zero, v0);
                let a_lo = weighted_exp_integral(lo, mu, dim, v0, inf);
                let w0 = (one - (-v0 / mu).exp()).powi(dim as i32);
                [
                    kappa.powf(hi) * a_hi + kappa.powf(lo) * a_lo,
                    hi * kappa.powf(hi - one) * a_hi + lo * kappa.powf(lo - one) * a_lo,
                    hi * (hi - one) * kappa.powf(hi - T::lit(2.0)) * a_hi
                        + lo * (lo - one) * kappa.powf(lo - T::lit(2.0)) * a_lo
                        + (hi - lo) * w0 / (kappa * kappa),
                ]
            }
            NFunctionKind::ExpSquare => {
                let x = kappa * kappa;
                if x > Self::exp_arg_limit() {
                    return [inf, inf, inf];
                }
                // Φ(t) = Σ_{j>=1} t^{2j} / (2·j!)
                let mut out = [zero; 3];
                let mut coef = one; // x^j / j!
                let mut j = 1usize;
                loop {
                    let jf = T::from_usize_lossy(j);
                    coef = coef * x / jf;
                    let mj = m(T::lit(2.0) * jf);
                    let term = coef / T::lit(2.0) * mj;
                    out[0] += term;
                    if kappa > zero {
                        out[1] += T::lit(2.0) * jf * term / kappa;
                        out[2] += T::lit(2.0) * jf * (T::lit(2.0) * jf - one) * term / x;
                    } else if j == 1 {
                        out[2] += mj;
                    }
                    if (jf > x && term <= out[0] * T::epsilon()) || j > 100_000 {
                        break;
                    }
                    j += 1;
                }
                out
            }
            NFunctionKind::PowerLog { .. } | NFunctionKind::Tabulated(_) => {
                self.self_kernel_quadrature(kappa, mu, dim)
            }
        }
    }

    fn self_kernel_quadrature(&self, kappa: T, mu: T, dim: usize) -> [T; 3] {
        if kappa == T::zero() {
            return [T::zero(), T::zero(), self.raw_second_derivative(T::zero()) * m_two(mu, dim)];
        }
        let one = T::one();
        let weight = |v: T| (one - (-v / mu).exp()).powi(dim as i32);
        let mut breaks = vec![T::zero(), mu, T::lit(30.0) * mu];
        if kappa > one {
            breaks.push(kappa.ln());
        }
        if let NFunctionKind::Tabulated(tab) = &self.kind {
            for &k in tab.knots() {
                if k < kappa {
                    breaks.push((kappa / k).ln());
                }
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        breaks.dedup();
        let tol = QuadTol::new(0.0, 1e-12);
        let mut out = [T::zero(); 3];
        for (slot, acc) in out.iter_mut().enumerate() {
            let g = |v: T| {
                let x = kappa * (-v).exp();
                let w = weight(v);
                match slot {
                    0 => w * self.raw_value(x),
                    1 => w * self.raw_derivative(x) * (-v).exp(),
                    _ => w * self.raw_second_derivative(x) * (-T::lit(2.0) * v).exp(),
                }
            };
            let mut total = T::zero();
            for pair in breaks.windows(2) {
                total += integrate(g, pair[0], pair[1], tol).map(|r| r.value).unwrap_or(T::infinity());
            }
            let last = *breaks.last().expect("breakpoints");
            total += integrate_to_infinity(g, last, tol).map(|r| r.value).unwrap_or(T::infinity());
            *acc = total;
        }
        out
    }

    /// [F, F', F''] for F(a) = ∫₀^a Φ(σ)/σ dσ on a >= 0.
    pub(crate) fn log_primitive_derivs(&self, a: T) -> [T; 3] {
        let a = a.abs();
        if a == T::zero() {
            // F''(0⁺) = lim (aΦ'(a) − Φ(a))/a², taken at a tiny argument.
            let tiny = T::epsilon().sqrt() * T::lit(1e-4);
            let v = self.raw_value(tiny);
            let d = self.raw_derivative(tiny);
            return [T::zero(), T::zero(), (tiny * d - v) / (tiny * tiny)];
        }
        let v = self.raw_value(a);
        let d = self.raw_derivative(a);
        [self.raw_log_primitive(a), v / a, (a * d - v) / (a * a)]
    }
}

/// d²/dκ² of κ^{e+1}/(e+1), i.e. e·κ^{e−1}, with the right limit at 0.
fn second_power<T: Scalar>(e: T, kappa: T) -> T {
    if kappa > T::zero() {
        e * kappa.powf(e - T::one())
    } else if e > T::one() {
        T::zero()
    } else if e == T::one() {
        T::one()
    } else {
        T::infinity()
    }
}

fn m_two<T: Scalar>(mu: T, dim: usize) -> T {
    weighted_exp_integral(T::lit(2.0), mu, dim, T::zero(), T::infinity())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel_by_quadrature(nf: &NFunction<f64>, kappa: f64, mu: f64, dim: usize) -> [f64; 3] {
        nf.self_kernel_quadrature(kappa, mu, dim)
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let kinds = [
            NFunction::power(2.0).unwrap(),
            NFunction::power(3.0).unwrap(),
            NFunction::sum_power(2.0, 3.0).unwrap(),
            NFunction::max_power(4.0, 2.0).unwrap(),
            NFunction::exp_square(),
        ];
        for nf in &kinds {
            for &mu in &[0.5, 0.1, 0.01] {
                for &dim in &[1usize, 2] {
                    for &kappa in &[0.3, 1.3, 2.2] {
                        let closed = nf.self_kernel(kappa, mu, dim);
                        let quad = kernel_by_quadrature(nf, kappa, mu, dim);
                        // Φ' jumps for maxpower, so K'' is checked by differencing K'.
                        let h = 1e-6;
                        let fd = (nf.self_kernel(kappa + h, mu, dim)[1]
                            - nf.self_kernel(kappa - h, mu, dim)[1])
                            / (2.0 * h);
                        assert!((closed[2] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{} K''", nf.name());
                        for k in 0..2 {
                            assert!(
                                (closed[k] - quad[k]).abs() <= 1e-9 * (1.0 + quad[k].abs()),
                                "{} mu={mu} N={dim} κ={kappa} k={k}: {} vs {}",
                                nf.name(),
                                closed[k],
                                quad[k]
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_tends_to_log_primitive() {
        let nf = NFunction::<f64>::power_log(2.0).unwrap();
        let k = nf.self_kernel(1.7, 1e-6, 2)[0];
        let f = nf.log_primitive(1.7).unwrap();
        assert!((k - f).abs() < 1e-4 * f, "{k} vs {f}");
    }

    #[test]
    fn log_primitive_derivatives_match_differences() {
        let nf = NFunction::<f64>::sum_power(2.0, 3.0).unwrap();
        let a = 0.8;
        let h = 1e-5;
        let d = nf.log_primitive_derivs(a);
        let fd1 = (nf.raw_log_primitive(a + h) - nf.raw_log_primitive(a - h)) / (2.0 * h);
        assert!((d[1] - fd1).abs() < 1e-8);
        let p2 = NFunction::<f64>::power(2.0).unwrap();
        assert!((p2.log_primitive_derivs(0.0)[2] - 0.5).abs() < 1e-6);
    }
}
