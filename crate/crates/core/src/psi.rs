//! The limit N-function Ψ(t) = ∫₀ᵗ ∫_{S^{N−1}} Φ(ρ|z_N|) dS_z dρ/ρ, sphere
//! moments, and closed forms for the power-type families.

use crate::error::{Error, Result};
use crate::nfunc::{finite, NFunction, NFunctionKind};
use crate::quad::{integrate, integrate_to_infinity, GaussLegendre, QuadTol};
use crate::scalar::Scalar;

/// Surface measure |S^k| of the unit k-sphere in ℝ^{k+1}.
pub fn sphere_area<T: Scalar>(k: usize) -> T {
    let two = T::lit(2.0);
    let pi = T::PI();
    match k {
        0 => two,
        1 => two * pi,
        _ => two * pi / T::from_usize_lossy(k - 1) * sphere_area::<T>(k - 2),
    }
}

/// ∫ over {z ∈ S^{N−1} : lo ≤ |z_N| ≤ hi} of f(|z_N|) dS, by adaptive quadrature
/// in the polar angle. `kinks` lists |z_N| values where f is not smooth.
pub fn polar_integral<T: Scalar, F: FnMut(T) -> T>(
    dim: usize,
    mut f: F,
    lo: T,
    hi: T,
    kinks: &[T],
    rel_tol: f64,
) -> Result<T> {
    let one = T::one();
    let (lo, hi) = (lo.max(T::zero()), hi.min(one));
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if dim == 1 {
        return Ok(if lo <= one && one <= hi { T::lit(2.0) * f(one) } else { T::zero() });
    }
    if lo >= hi {
        return Ok(T::zero());
    }
    let weight = T::lit(2.0) * sphere_area::<T>(dim - 2);
    let power = (dim - 2) as i32;
    let mut cuts = vec![hi.acos(), lo.acos()];
    for &k in kinks {
        if k > lo && k < hi {
            cuts.push(k.acos());
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    let tol = QuadTol {
        abs: 0.0,
        rel: rel_tol,
        max_intervals: 2000,
    };
    let mut total = T::zero();
    for w in cuts.windows(2) {
        let r = integrate(|th: T| f(th.cos()) * th.sin().powi(power), w[0], w[1], tol)?;
        total += r.value;
    }
    Ok(weight * total)
}

/// k_{N,p} = ∫ |z_N|^p dS and k_{log,N,p} = ∫ |z_N|^p |ln|z_N|| dS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereMoment<T> {
    pub dim: usize,
    pub exponent: T,
    pub value: T,
    pub log_value: T,
}

pub fn sphere_moment<T: Scalar>(dim: usize, p: T) -> Result<SphereMoment<T>> {
    if !(p > T::zero()) {
        return Err(Error::invalid("sphere moment exponent must be positive"));
    }
    let (value, log_value) = partial_moments(dim, p, T::zero(), T::one())?;
    Ok(SphereMoment {
        dim,
        exponent: p,
        value,
        log_value,
    })
}

/// (∫ |z|^p dS, ∫ |z|^p |ln|z|| dS) over lo ≤ |z_N| ≤ hi.
fn partial_moments<T: Scalar>(dim: usize, p: T, lo: T, hi: T) -> Result<(T, T)> {
    let v = polar_integral(dim, |z: T| z.powf(p), lo, hi, &[], 1e-13)?;
    let l = polar_integral(
        dim,
        |z: T| if z > T::zero() { -z.powf(p) * z.ln() } else { T::zero() },
        lo,
        hi,
        &[],
        1e-13,
    )?;
    Ok((v, l.abs()))
}

fn area_between<T: Scalar>(dim: usize, lo: T, hi: T) -> Result<T> {
    polar_integral(dim, |_z: T| T::one(), lo, hi, &[], 1e-13)
}

/// Ψ(t) from the explicit formulas for the power, power-log, max-power and
/// sum-power families (t ≥ 0).
pub fn psi_closed_form<T: Scalar>(nf: &NFunction<T>, dim: usize, t: T) -> Result<T> {
    let t = t.abs();
    if t == T::zero() {
        return Ok(T::zero());
    }
    let one = T::one();
    let zero = T::zero();
    match nf.kind() {
        NFunctionKind::Power { p } => Ok(sphere_moment(dim, *p)?.value * t.powf(*p) / (*p * *p)),
        NFunctionKind::SumPower { p, q } => Ok(sphere_moment(dim, *p)?.value * t.powf(*p) / *p
            + sphere_moment(dim, *q)?.value * t.powf(*q) / *q),
        NFunctionKind::MaxPower { p, q } => {
            let (lo, hi) = (p.min(*q), p.max(*q));
            if t <= one {
                return Ok(sphere_moment(dim, lo)?.value * t.powf(lo) / lo);
            }
            let c = one / t;
            let inner = partial_moments(dim, lo, zero, c)?.0;
            let outer = partial_moments(dim, hi, c, one)?.0;
            let cap = area_between(dim, c, one)?;
            Ok(t.powf(lo) / lo * inner + (one / lo - one / hi) * cap + t.powf(hi) / hi * outer)
        }
        NFunctionKind::PowerLog { p } => {
            let shift = NFunction::<T>::log_shift(*p);
            let m = sphere_moment(dim, *p)?;
            let base = shift * m.value * t.powf(*p) / *p;
            let lt = t.ln();
            if t <= one {
                return Ok(base + t.powf(*p) / *p * (m.value * (one / *p - lt) + m.log_value));
            }
            let c = one / t;
            let (k_in, kl_in) = partial_moments(dim, *p, zero, c)?;
            let (k_out, kl_out) = partial_moments(dim, *p, c, one)?;
            let cap = area_between(dim, c, one)?;
            let inner = t.powf(*p) / *p * (k_in * (one / *p - lt) + kl_in);
            let outer = T::lit(2.0) / (*p * *p) * cap + t.powf(*p) / *p * ((lt - one / *p) * k_out - kl_out);
            Ok(base + inner + outer)
        }
        NFunctionKind::ExpSquare | NFunctionKind::Tabulated(_) => Err(Error::UnsupportedKind(nf.name())),
    }
}

/// Ψ built from a base N-function in dimension `dim`.
#[derive(Clone, Debug)]
pub struct PsiFunction<T> {
    base: NFunction<T>,
    dim: usize,
    /// (|z_N|, weight) pairs over the whole quarter circle; the weights sum to |S^{N−1}|.
    quad_nodes: Vec<(T, T)>,
    radial_tol: f64,
    /// reference rule on [0, 1], used to split the angle at a kink
    reference: Vec<(T, T)>,
}

const ANGULAR_NODES: usize = 64;

impl<T: Scalar> PsiFunction<T> {
    pub fn new(base: NFunction<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let gl = GaussLegendre::<T>::new(ANGULAR_NODES);
        let reference: Vec<(T, T)> = gl.mapped(T::zero(), T::one()).collect();
        let mut psi = PsiFunction {
            base,
            dim,
            quad_nodes: Vec::new(),
            radial_tol: 1e-8,
            reference,
        };
        psi.quad_nodes = if dim == 1 {
            vec![(T::one(), T::lit(2.0))]
        } else {
            psi.angular_nodes(T::zero(), T::FRAC_PI_2()).collect()
        };
        Ok(psi)
    }

    fn angular_nodes(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let w0 = T::lit(2.0) * sphere_area::<T>(self.dim - 2);
        let len = b - a;
        let pow = self.dim as i32 - 2;
        self.reference.iter().map(move |&(x, w)| {
            let th = a + len * x;
            (th.cos(), w0 * w * len * th.sin().powi(pow))
        })
    }

    /// Angle at which t|z_N| = 1 when Φ' jumps there.
    fn kink_angle(&self, t: T) -> Option<T> {
        let kinked = matches!(self.base.kind(), NFunctionKind::MaxPower { .. } | NFunctionKind::PowerLog { .. });
        (kinked && self.dim > 1 && t > T::one()).then(|| (T::one() / t).acos())
    }

    pub fn with_radial_tol(mut self, tol: f64) -> Self {
        self.radial_tol = tol;
        self
    }

    pub fn base(&self) -> &NFunction<T> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radial_tol(&self) -> f64 {
        self.radial_tol
    }

    /// [Ψ, Ψ', Ψ''] at t ≥ 0 via the fixed angular rule and the exact radial
    /// primitive F(a) = ∫₀^a Φ(σ)/σ dσ. Entries may be +∞ on overflow.
    pub(crate) fn raw_derivs(&self, t: T) -> [T; 3] {
        let t = t.abs();
        let mut out = [T::zero(); 3];
        let mut add = |z: T, w: T| {
            let f = self.base.log_primitive_derivs(t * z);
            out[0] += w * f[0];
            out[1] += w * z * f[1];
            out[2] += w * z * z * f[2];
        };
        match self.kink_angle(t) {
            Some(th) => {
                for (z, w) in self.angular_nodes(T::zero(), th).chain(self.angular_nodes(th, T::FRAC_PI_2())) {
                    add(z, w);
                }
            }
            None => {
                for &(z, w) in &self.quad_nodes {
                    add(z, w);
                }
            }
        }
        out
    }

    pub fn value(&self, t: T) -> Result<T> {
        finite(self.raw_derivs(t)[0], "Ψ")
    }

    pub fn derivative(&self, t: T) -> Result<T> {
        finite(self.raw_derivs(t)[1], "Ψ'")
    }

    pub fn second_derivative(&self, t: T) -> Result<T> {
        finite(self.raw_derivs(t)[2], "Ψ''")
    }

    /// |z_N| values where the angular integrand of Ψ(t) has a kink.
    fn kinks(&self, t: T) -> Vec<T> {
        let mut k = Vec::new();
        if t <= T::zero() {
            return k;
        }
        match self.base.kind() {
            NFunctionKind::MaxPower { .. } | NFunctionKind::PowerLog { .. } => k.push(T::one() / t),
            NFunctionKind::Tabulated(tab) => k.extend(tab.knots().iter().map(|&x| x / t)),
            _ => {}
        }
        k
    }
}

/// Ψ(t) by nested quadrature: polar angle outside, and inside the radial
/// integral ∫₀ᵗ Φ(ρ|z_N|) dρ/ρ after the substitution ρ = t·e^{−τ}.
pub fn psi_eval<T: Scalar>(psi: &PsiFunction<T>, t: T) -> Result<T> {
    scaled_radial_integral(psi, t, T::one())
}

/// μ ∫₀^∞ ∫_S Φ(t|z_N|e^{−μτ}) dS dτ, which is the (1−s)-scaled modular
/// (1−s)∫₀¹∫_S Φ(t|z_N| r^{1−s}) dS dr/r with r = e^{−τ}, μ = 1 − s.
fn scaled_radial_integral<T: Scalar>(psi: &PsiFunction<T>, t: T, mu: T) -> Result<T> {
    let t = t.abs();
    if t == T::zero() {
        return Ok(T::zero());
    }
    let base = &psi.base;
    let tol = QuadTol {
        abs: 0.0,
        rel: psi.radial_tol * 1e-2,
        max_intervals: 2000,
    };
    let mut failure = None;
    let value = polar_integral(
        psi.dim,
        |z: T| {
            if z <= T::zero() {
                return T::zero();
            }
            let a = t * z;
            let mut g = |tau: T| base.raw_value(a * (-mu * tau).exp());
            // split where the radial argument crosses 1 for the kinked families
            let kink = if a > T::one() { a.ln() / mu } else { T::zero() };
            let head = if kink > T::zero() {
                integrate(&mut g, T::zero(), kink, tol)
            } else {
                Ok(crate::quad::QuadResult {
                    value: T::zero(),
                    error: T::zero(),
                    intervals: 0,
                })
            };
            let tail = integrate_to_infinity(&mut g, kink, tol);
            match (head, tail) {
                (Ok(h), Ok(r)) => mu * (h.value + r.value),
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    T::zero()
                }
            }
        },
        T::zero(),
        T::one(),
        &psi.kinks(t),
        psi.radial_tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    finite(value, "Ψ by quadrature")
}

/// |(1−s)-scaled modular − Ψ(t)| for each s.
pub fn scaled_modular_limit_check<T: Scalar>(
    base: &NFunction<T>,
    dim: usize,
    t: T,
    s_list: &[T],
) -> Result<Vec<T>> {
    if s_list.windows(2).any(|w| w[1] <= w[0]) || s_list.iter().any(|&s| !(s > T::zero() && s < T::one())) {
        return Err(Error::invalid("s values must increase strictly inside (0, 1)"));
    }
    let psi = PsiFunction::new(base.clone(), dim)?.with_radial_tol(1e-10);
    let reference = psi_eval(&psi, t)?;
    s_list
        .iter()
        .map(|&s| Ok((scaled_radial_integral(&psi, t, T::one() - s)? - reference).abs()))
        .collect()
}

/// min and max of Ψ/Φ over the given t samples (skipping overflow).
pub fn equivalence_band<T: Scalar>(psi: &PsiFunction<T>, ts: &[T]) -> Result<(T, T)> {
    let mut k1 = T::infinity();
    let mut k2 = T::zero();
    for &t in ts {
        let (Ok(phi), Ok(v)) = (psi.base.eval(t), psi.value(t)) else {
            continue;
        };
        if phi > T::zero() {
            k1 = k1.min(v / phi);
            k2 = k2.max(v / phi);
        }
    }
    if k1 > k2 {
        return Err(Error::non_finite("Ψ/Φ ratio (no finite samples)"));
    }
    Ok((k1, k2))
}

/// |S^{N−1}|·∫₀ᵗ Φ(ρ)/ρ dρ, the a-priori upper bound for Ψ(t).
pub fn psi_upper_bound<T: Scalar>(base: &NFunction<T>, dim: usize, t: T) -> Result<T> {
    Ok(sphere_area::<T>(dim - 1) * base.log_primitive(t)?)
}
