//! Dense eigen- and singular-value solvers. Thin wrappers over `faer` that
//! accept and return `ndarray` containers.

use faer::Mat;
use ndarray::Array2;
use num_complex::Complex64 as C64;

fn to_faer(a: &Array2<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// `A A^dagger`.
pub fn gram(a: &Array2<C64>) -> Array2<C64> {
    let f = to_faer(a);
    let g: Mat<C64> = &f * f.adjoint();
    from_faer(g.as_ref())
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvalsh(a: &Array2<C64>) -> Vec<f64> {
    to_faer(a)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("Hermitian eigenvalue iteration failed")
}

/// Eigenvalues and right eigenvectors (columns) of a general complex matrix.
pub fn eig(a: &Array2<C64>) -> (Vec<C64>, Array2<C64>) {
    let e = to_faer(a).eigen().expect("eigendecomposition failed to converge");
    let vals = e.S().column_vector().iter().copied().collect();
    (vals, from_faer(e.U()))
}

pub fn eigvals(a: &Array2<C64>) -> Vec<C64> {
    to_faer(a)
        .eigenvalues()
        .expect("eigenvalue iteration failed to converge")
}

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
pub fn eigh(a: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let e = to_faer(a)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("Hermitian eigendecomposition failed");
    let vals = e.S().column_vector().iter().map(|z| z.re).collect();
    (vals, from_faer(e.U()))
}

/// Eigenvalues of a real symmetric matrix, ascending, with eigenvectors.
pub fn eigh_real(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let m = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]]);
    let e = m
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition failed");
    let vals = e.S().column_vector().iter().copied().collect();
    let u = e.U();
    (
        vals,
        Array2::from_shape_fn((u.nrows(), u.ncols()), |(i, j)| u[(i, j)]),
    )
}

/// Singular values, descending.
pub fn singular_values(a: &Array2<C64>) -> Vec<f64> {
    to_faer(a)
        .singular_values()
        .expect("SVD failed to converge")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_reconstructs() {
        let a = Array2::from_shape_fn((4, 4), |(i, j)| C64::new((i * 3 + j) as f64 % 5.0, (i + 2 * j) as f64 % 3.0));
        let (w, v) = eig(&a);
        for k in 0..4 {
            let col = v.column(k);
            let av = a.dot(&col);
            for i in 0..4 {
                assert!((av[i] - w[k] * col[i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigh_is_ascending() {
        let a = Array2::from_shape_fn((3, 3), |(i, j)| {
            if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.1, 0.0) }
        });
        let (w, _) = eigh(&a);
        assert!(w[0] <= w[1] && w[1] <= w[2]);
    }
}
