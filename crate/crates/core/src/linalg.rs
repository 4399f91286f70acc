//! Tiny fixed-size dense matrices for the tracking filters.

#![allow(clippy::needless_range_loop)]

use crate::scalar::Scalar;

pub type Mat<T, const R: usize, const C: usize> = [[T; C]; R];
pub type Vector<T, const N: usize> = [T; N];

pub fn zeros<T: Scalar, const R: usize, const C: usize>() -> Mat<T, R, C> {
    [[T::zero(); C]; R]
}

pub fn identity<T: Scalar, const N: usize>() -> Mat<T, N, N> {
    let mut m = zeros::<T, N, N>();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn diag<T: Scalar, const N: usize>(d: [T; N]) -> Mat<T, N, N> {
    let mut m = zeros::<T, N, N>();
    for i in 0..N {
        m[i][i] = d[i];
    }
    m
}

pub fn mul<T: Scalar, const R: usize, const K: usize, const C: usize>(a: &Mat<T, R, K>, b: &Mat<T, K, C>) -> Mat<T, R, C> {
    let mut m = zeros::<T, R, C>();
    for i in 0..R {
        for j in 0..C {
            let mut s = T::zero();
            for k in 0..K {
                s = s + a[i][k] * b[k][j];
            }
            m[i][j] = s;
        }
    }
    m
}

pub fn mul_vec<T: Scalar, const R: usize, const C: usize>(a: &Mat<T, R, C>, x: &Vector<T, C>) -> Vector<T, R> {
    let mut y = [T::zero(); R];
    for i in 0..R {
        for k in 0..C {
            y[i] = y[i] + a[i][k] * x[k];
        }
    }
    y
}

pub fn transpose<T: Scalar, const R: usize, const C: usize>(a: &Mat<T, R, C>) -> Mat<T, C, R> {
    let mut m = zeros::<T, C, R>();
    for i in 0..R {
        for j in 0..C {
            m[j][i] = a[i][j];
        }
    }
    m
}

pub fn add<T: Scalar, const R: usize, const C: usize>(a: &Mat<T, R, C>, b: &Mat<T, R, C>) -> Mat<T, R, C> {
    let mut m = *a;
    for i in 0..R {
        for j in 0..C {
            m[i][j] = m[i][j] + b[i][j];
        }
    }
    m
}

pub fn sub<T: Scalar, const R: usize, const C: usize>(a: &Mat<T, R, C>, b: &Mat<T, R, C>) -> Mat<T, R, C> {
    let mut m = *a;
    for i in 0..R {
        for j in 0..C {
            m[i][j] = m[i][j] - b[i][j];
        }
    }
    m
}

pub fn scale<T: Scalar, const R: usize, const C: usize>(a: &Mat<T, R, C>, s: T) -> Mat<T, R, C> {
    let mut m = *a;
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            *x = *x * s;
        }
    }
    m
}

pub fn symmetrize<T: Scalar, const N: usize>(a: &Mat<T, N, N>) -> Mat<T, N, N> {
    let mut m = *a;
    for i in 0..N {
        for j in (i + 1)..N {
            let v = (a[i][j] + a[j][i]) * T::half();
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

pub fn trace<T: Scalar, const N: usize>(a: &Mat<T, N, N>) -> T {
    (0..N).fold(T::zero(), |s, i| s + a[i][i])
}

/// Lower Cholesky factor, or `None` when `a` is not positive-definite.
pub fn cholesky<T: Scalar, const N: usize>(a: &Mat<T, N, N>) -> Option<Mat<T, N, N>> {
    let mut l = zeros::<T, N, N>();
    for i in 0..N {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse<T: Scalar, const N: usize>(a: &Mat<T, N, N>) -> Option<Mat<T, N, N>> {
    let l = cholesky(a)?;
    // invert L by forward substitution, then A^-1 = L^-T L^-1
    let mut linv = zeros::<T, N, N>();
    for col in 0..N {
        for i in 0..N {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in 0..i {
                s = s - l[i][k] * linv[k][col];
            }
            linv[i][col] = s / l[i][i];
        }
    }
    Some(mul(&transpose(&linv), &linv))
}

pub fn is_symmetric<T: Scalar, const N: usize>(a: &Mat<T, N, N>, tol: T) -> bool {
    (0..N).all(|i| (0..N).all(|j| (a[i][j] - a[j][i]).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd() {
        let a: Mat<f64, 3, 3> = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = spd_inverse(&a).unwrap();
        let p = mul(&a, &inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - e).abs() < 1e-12);
            }
        }
        assert!(cholesky(&[[1.0, 2.0], [2.0, 1.0]]).is_none());
        assert!(cholesky(&[[0.0]]).is_none());
    }

    #[test]
    fn products() {
        let a: Mat<f64, 2, 3> = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let at = transpose(&a);
        let g = mul(&a, &at);
        assert_eq!(g, [[14.0, 32.0], [32.0, 77.0]]);
        assert_eq!(mul_vec(&a, &[1.0, 0.0, -1.0]), [-2.0, -2.0]);
        assert_eq!(trace(&g), 91.0);
        assert!(is_symmetric(&g, 0.0));
    }
}
