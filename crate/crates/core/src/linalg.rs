//! Small dense complex linear algebra: matrix helpers and a Hermitian
//! eigensolver (cyclic complex Jacobi) that works for any [`Real`] scalar.

use ndarray::Array2;
use num_traits::{One, Zero};

use crate::scalar::{C, Real};

/// Dense complex matrix.
pub type CMatrix<R> = Array2<C<R>>;

pub fn identity<R: Real>(dim: usize) -> CMatrix<R> {
    Array2::from_shape_fn((dim, dim), |(i, j)| if i == j { C::one() } else { C::zero() })
}

pub fn dagger<R: Real>(m: &CMatrix<R>) -> CMatrix<R> {
    m.t().mapv(|z| z.conj())
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> R {
    a.iter()
        .zip(b.iter())
        .fold(R::zero(), |acc, (x, y)| acc.max((*x - *y).norm()))
}

/// `‖U†U − I‖_max`.
pub fn unitarity_error<R: Real>(u: &CMatrix<R>) -> R {
    let prod = dagger(u).dot(u);
    max_abs_diff(&prod, &identity(u.nrows()))
}

/// Kronecker product.
pub fn kron<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> CMatrix<R> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<R: Real> {
    /// Eigenvalues in ascending order.
    pub values: Vec<R>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix<R>,
}

/// Diagonalizes a Hermitian matrix with cyclic Jacobi rotations.
///
/// Only the Hermitian part of `m` is used. Convergence is quadratic once the
/// off-diagonal mass is small; the sweep cap is generous for the matrix sizes
/// the simulator produces (dimension ≤ 256).
pub fn hermitian_eigen<R: Real>(m: &CMatrix<R>) -> HermitianEigen<R> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eigen needs a square matrix");
    let half = R::lit(0.5);
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| (m[[i, j]] + m[[j, i]].conj()) * half);
    let mut v = identity::<R>(n);

    let total: R = a.iter().map(|z| z.norm_sqr()).sum();
    let tol = R::epsilon() * R::epsilon() * total.max(R::min_positive_value());

    for _sweep in 0..100 {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[[p, q]].norm_sqr();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                let b = apq.norm();
                if b <= R::min_positive_value() {
                    continue;
                }
                // Phase that makes the (p, q) entry real and positive. Divide
                // componentwise: complex division squares `b` and underflows
                // for tiny entries.
                let phase = C::new(apq.re / b, apq.im / b);
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let theta = (aqq - app) / (R::lit(2.0) * b);
                let t = theta.signum() / (theta.abs() + (theta * theta + R::one()).sqrt());
                let cth = R::one() / (t * t + R::one()).sqrt();
                let sth = t * cth;
                // J = diag(1, conj(phase)) · [[c, s], [-s, c]]
                let jpp = C::new(cth, R::zero());
                let jpq = C::new(sth, R::zero());
                let jqp = phase.conj() * C::new(-sth, R::zero());
                let jqq = phase.conj() * C::new(cth, R::zero());

                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * jpp + akq * jqp;
                    a[[k, q]] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[[q, k]] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[[p, q]] = C::zero();
                a[[q, p]] = C::zero();
                a[[p, p]] = C::new(a[[p, p]].re, R::zero());
                a[[q, q]] = C::new(a[[q, q]].re, R::zero());
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * jpp + vkq * jqp;
                    v[[k, q]] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].re.partial_cmp(&a[[j, j]].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[[i, i]].re).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, k)| v[[r, order[k]]]);
    HermitianEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    fn sample_hermitian() -> CMatrix<f64> {
        let raw = [
            [c(2.0, 0.0), c(0.5, 0.3), c(-0.1, 0.7)],
            [c(0.0, 0.0), c(-1.0, 0.0), c(0.25, -0.4)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)],
        ];
        Array2::from_shape_fn((3, 3), |(i, j)| if i <= j { raw[i][j] } else { raw[j][i].conj() })
    }

    #[test]
    fn reconstructs_hermitian_matrix() {
        let m = sample_hermitian();
        let eig = hermitian_eigen(&m);
        let d = Array2::from_shape_fn((3, 3), |(i, j)| if i == j { c(eig.values[i], 0.0) } else { C::zero() });
        let rebuilt = eig.vectors.dot(&d).dot(&dagger(&eig.vectors));
        assert!(max_abs_diff(&rebuilt, &m) < 1e-12);
        assert!(unitarity_error(&eig.vectors) < 1e-12);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_matches_eigenvalue_sum() {
        let m = sample_hermitian();
        let eig = hermitian_eigen(&m);
        let tr: f64 = (0..3).map(|i| m[[i, i]].re).sum();
        assert!((eig.values.iter().sum::<f64>() - tr).abs() < 1e-12);
    }

    #[test]
    fn diagonal_input_is_returned_sorted() {
        let m: CMatrix<f64> = Array2::from_shape_fn((3, 3), |(i, j)| {
            if i == j { c([3.0, 1.0, 2.0][i], 0.0) } else { C::zero() }
        });
        assert_eq!(hermitian_eigen(&m).values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn works_in_single_precision() {
        let m: CMatrix<f32> = sample_hermitian().mapv(|z| C::new(z.re as f32, z.im as f32));
        let eig = hermitian_eigen(&m);
        let tr: f32 = (0..3).map(|i| m[[i, i]].re).sum();
        assert!((eig.values.iter().sum::<f32>() - tr).abs() < 1e-5);
    }

    #[test]
    fn eigen_survives_tiny_off_diagonal_entries() {
        let mut m = identity::<f64>(3);
        m[[0, 0]] = c(0.2, 0.0);
        m[[0, 1]] = c(1e-200, 3e-201);
        m[[1, 0]] = c(1e-200, -3e-201);
        let eig = hermitian_eigen(&m);
        assert!(eig.values.iter().all(|v| v.is_finite()));
        assert!(eig.vectors.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!((eig.values[0] - 0.2).abs() < 1e-15);
    }
}
