use crate::scalar::Scalar;

/// In-place Cholesky factorization of a dense symmetric matrix (row-major,
/// lower triangle used). Returns `false` if a pivot is not positive.
pub fn cholesky<T: Scalar>(a: &mut [T], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves L Lᵀ x = b with the factor produced by [`cholesky`].
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves A x = b for symmetric positive definite A, adding a growing
/// diagonal shift when the factorization breaks down.
pub fn solve_spd<T: Scalar>(a: &[T], n: usize, b: &[T]) -> Option<Vec<T>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max).max(T::min_positive_value());
    let mut shift = T::zero();
    for _ in 0..30 {
        let mut l = a.to_vec();
        for i in 0..n {
            l[i * n + i] += shift;
        }
        if cholesky(&mut l, n) {
            let mut x = b.to_vec();
            cholesky_solve(&l, n, &mut x);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        shift = if shift == T::zero() { scale * T::tol(1e-12) } else { shift * T::lit(10.0) };
    }
    None
}
