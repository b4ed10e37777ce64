//! Reference computations that share no code path with the library numerics.

/// Dense matrix A with I₁(u) = ½uᵀAu for Φ(t) = t²/2 on the 1-D grid with
/// `n` unknowns, assembled element by element from the closed-form pair,
/// self and exterior integrals.
pub fn quadratic_matrix(n: usize, s: f64) -> Vec<f64> {
    let cells = n + 1;
    let h = 1.0 / cells as f64;
    let mu = 1.0 - s;
    let mut a = vec![0.0; n * n];
    // vertex k of the mesh is unknown k−1; vertices 0 and n+1 are pinned to 0
    let node = |k: usize| (1..=n).contains(&k).then(|| k - 1);
    let add_diff = |a: &mut Vec<f64>, i: Option<usize>, j: Option<usize>, c: f64| {
        // ½c(u_i − u_j)²
        if let Some(i) = i {
            a[i * n + i] += c;
        }
        if let Some(j) = j {
            a[j * n + j] += c;
        }
        if let (Some(i), Some(j)) = (i, j) {
            a[i * n + j] -= c;
            a[j * n + i] -= c;
        }
    };
    for ea in 0..cells {
        for eb in 0..cells {
            if ea == eb {
                continue;
            }
            let d = (ea as f64 - eb as f64).abs() * h;
            // (1−s)|E|²/d · ¼ Σ_{x,y} ½(x−y)²/d^{2s}
            let c = mu * h * h / d / 4.0 / d.powf(2.0 * s);
            for x in [ea, ea + 1] {
                for y in [eb, eb + 1] {
                    add_diff(&mut a, node(x), node(y), c);
                }
            }
        }
        // (1−s)∫_E∫_E g²|x−y|^{1−2s}/2 = ½ g² h^{1+2μ}/(2μ+1), g = (u_{e+1} − u_e)/h
        let c = h.powf(2.0 * mu - 1.0) / (2.0 * mu + 1.0);
        add_diff(&mut a, node(ea), node(ea + 1), c);
        // 2(1−s)∫_{ρ}^∞ (u²/2) r^{−2s−1} dr on both sides, u² averaged over the vertices
        let centroid = (ea as f64 + 0.5) * h;
        let tail = mu * h / (2.0 * s) * (centroid.powf(-2.0 * s) + (1.0 - centroid).powf(-2.0 * s));
        for k in [ea, ea + 1] {
            if let Some(i) = node(k) {
                a[i * n + i] += tail;
            }
        }
    }
    a
}

pub fn mat_vec(a: &[f64], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * u[j]).sum()).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for k in r + 1..n {
            acc -= m[r * n + k] * x[k];
        }
        x[r] = acc / m[r * n + r];
    }
    Some(x)
}

/// Positive solution of A u = h u^{−γ} by damped Newton iteration.
pub fn quadratic_fixed_point(a: &[f64], h: f64, gamma: f64) -> Option<Vec<f64>> {
    let n = (a.len() as f64).sqrt() as usize;
    let mut u = solve_dense(a, &vec![h; n])?;
    for _ in 0..200 {
        let au = mat_vec(a, &u);
        let f: Vec<f64> = (0..n).map(|i| au[i] - h * u[i].powf(-gamma)).collect();
        let fnorm = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if fnorm < 1e-15 * h {
            return Some(u);
        }
        let mut jac = a.to_vec();
        for i in 0..n {
            jac[i * n + i] += gamma * h * u[i].powf(-gamma - 1.0);
        }
        let step = solve_dense(&jac, &f)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(x, d)| x - t * d).collect();
            if trial.iter().all(|&x| x > 0.0) {
                u = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
    }
    Some(u)
}

/// Symmetric solution of −u'' = u^{−γ}, u(0) = u(1) = 0, by shooting from the
/// midpoint: u(½) = M, u'(½) = 0, with M chosen so that u reaches 0 at x = 0.
pub struct ShootingSolution {
    pub midpoint: f64,
    gamma: f64,
    steps: usize,
}

impl ShootingSolution {
    pub fn solve(gamma: f64, steps: usize) -> Self {
        // u(0) is increasing in M; bracket then bisect
        let mut lo = 1e-3;
        let mut hi = 1.0;
        while Self::end_value(lo, gamma, steps) > 0.0 {
            lo *= 0.5;
        }
        while Self::end_value(hi, gamma, steps) <= 0.0 {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if Self::end_value(mid, gamma, steps) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        ShootingSolution {
            midpoint: 0.5 * (lo + hi),
            gamma,
            steps,
        }
    }

    fn rhs(gamma: f64, y: [f64; 2]) -> [f64; 2] {
        // integrating towards x = 0, so the derivative flips sign
        [-y[1], y[0].max(1e-300).powf(-gamma)]
    }

    fn rk4(gamma: f64, y: [f64; 2], dx: f64) -> [f64; 2] {
        let add = |a: [f64; 2], b: [f64; 2], c: f64| [a[0] + c * b[0], a[1] + c * b[1]];
        let k1 = Self::rhs(gamma, y);
        let k2 = Self::rhs(gamma, add(y, k1, dx / 2.0));
        let k3 = Self::rhs(gamma, add(y, k2, dx / 2.0));
        let k4 = Self::rhs(gamma, add(y, k3, dx));
        [
            y[0] + dx / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dx / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// u at x = 0 (negative once the trajectory has crossed zero earlier).
    fn end_value(m: f64, gamma: f64, steps: usize) -> f64 {
        let dx = 0.5 / steps as f64;
        let mut y = [m, 0.0];
        for _ in 0..steps {
            if y[0] <= 0.0 {
                return y[0] - 1.0;
            }
            y = Self::rk4(gamma, y, dx);
        }
        y[0]
    }

    /// u at the given points of [0, 1].
    pub fn values(&self, xs: &[f64]) -> Vec<f64> {
        let dx = 0.5 / self.steps as f64;
        let mut profile = Vec::with_capacity(self.steps + 1);
        let mut y = [self.midpoint, 0.0];
        profile.push(y[0]);
        for _ in 0..self.steps {
            y = Self::rk4(self.gamma, y, dx);
            profile.push(y[0].max(0.0));
        }
        // profile[k] = u(½ − k·dx)
        xs.iter()
            .map(|&x| {
                let d = (0.5 - x).abs() / dx;
                let k = (d.floor() as usize).min(self.steps - 1);
                let f = d - k as f64;
                profile[k] * (1.0 - f) + profile[k + 1] * f
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shooting_midpoint_matches_first_integral() {
        // u'²/2 + 2√u = 2√M gives ½ = (4/3)M^{3/4}
        let sol = ShootingSolution::solve(0.5, 200_000);
        let exact = (3.0f64 / 8.0).powf(4.0 / 3.0);
        assert!((sol.midpoint - exact).abs() < 1e-6, "{} vs {exact}", sol.midpoint);
        let xs = [0.0, 0.1, 0.5, 0.9, 1.0];
        let u = sol.values(&xs);
        assert!(u[0].abs() < 1e-6 && u[4].abs() < 1e-6);
        assert!((u[1] - u[3]).abs() < 1e-14);
    }

    #[test]
    fn shooting_profile_matches_implicit_solution() {
        // x(u) = ½ − ∫_u^M dv / (2√(√M − √v)) in closed form with w = √v:
        // ∫ w/√(√M − w) dw = −(2/3)(√M − w)^{1/2}(2√M + w)
        let sol = ShootingSolution::solve(0.5, 200_000);
        let m = sol.midpoint;
        let r = m.sqrt();
        for &u in &[0.05 * m, 0.3 * m, 0.8 * m] {
            let w = u.sqrt();
            let x = 0.5 - (2.0 / 3.0) * (r - w).sqrt() * (2.0 * r + w);
            let got = sol.values(&[x])[0];
            assert!((got - u).abs() < 1e-6, "u({x}) = {got} vs {u}");
        }
    }

    #[test]
    fn dense_solver_inverts() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let x = solve_dense(&a, &[1.0, 2.0, 3.0]).unwrap();
        let back = mat_vec(&a, &x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_matrix_is_symmetric_positive() {
        let a = quadratic_matrix(15, 0.4);
        for i in 0..15 {
            assert!(a[i * 15 + i] > 0.0);
            for j in 0..15 {
                assert_eq!(a[i * 15 + j], a[j * 15 + i]);
            }
        }
    }
}
