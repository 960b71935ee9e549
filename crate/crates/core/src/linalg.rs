//! Dense Hermitian eigensolver that is safe for row-major input.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
///
/// The input is copied into column-major storage first: for row-major complex input the
/// LAPACK wrapper returns eigenvectors of the conjugate matrix.
pub fn eigh_hermitian(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let mut f = Array2::<C64>::zeros(a.raw_dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Lower)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigenvectors_satisfy_the_eigen_equation() {
        let a = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.5), C64::new(0.0, -0.3)],
            [C64::new(1.0, -0.5), C64::new(0.3, 0.0), C64::new(0.2, 0.1)],
            [C64::new(0.0, 0.3), C64::new(0.2, -0.1), C64::new(-0.4, 0.0)]
        ];
        let (l, v) = eigh_hermitian(&a).unwrap();
        let r = a.dot(&v) - &v * &l.mapv(|x| C64::new(x, 0.0));
        assert!(r.iter().all(|c| c.norm() < 1e-14));
        assert!(l[0] <= l[1] && l[1] <= l[2]);
    }
}
