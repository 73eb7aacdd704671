use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{QnsError, Result};
use crate::linalg::SparseSymMatrix;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending; column `j`
/// of `vectors` belongs to `values[j]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Largest eigenvalue magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Dense symmetric eigensolve. Sizes in this crate stay at a few hundred.
pub fn sym_eigen_dense(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(QnsError::Contract("eigendecomposition needs a square matrix".into()));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    for r in 0..n {
        for c in r + 1..n {
            if (a[(r, c)] - a[(c, r)]).abs() > 1e-12 * scale {
                return Err(QnsError::Contract(format!("matrix is not symmetric at ({r}, {c})")));
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { values, vectors })
}

pub fn sym_eigendecomposition(a: &SparseSymMatrix) -> Result<EigenDecomposition> {
    sym_eigen_dense(&a.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Axis, StretchConfig};
    use crate::linalg::{assemble_laplacian, assemble_laplacian_1d, BoundaryKind, LaplacianForm};
    use approx::assert_abs_diff_eq;

    fn check_invariants(a: &DMatrix<f64>, e: &EigenDecomposition) {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        let r = a * &e.vectors - &e.vectors * lam;
        assert!(r.amax() < 1e-9 * a.amax());
        let o = e.vectors.transpose() * &e.vectors - DMatrix::identity(a.nrows(), a.nrows());
        assert!(o.amax() < 1e-10);
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = sym_eigen_dense(&a).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 3.0, epsilon = 1e-14);
        check_invariants(&a, &e);
    }

    #[test]
    fn diagonal_gives_permuted_identity() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let e = sym_eigen_dense(&a).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        for c in 0..3 {
            let col = e.vectors.column(c);
            assert_eq!(col.iter().filter(|v| v.abs() > 1e-14).count(), 1);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eigen_dense(&a), Err(QnsError::Contract(_))));
    }

    #[test]
    fn one_d_laplacian_spectrum_is_analytic() {
        let axis = Axis::walled(16, &StretchConfig::uniform(1.0)).unwrap();
        let a = assemble_laplacian_1d(&axis, BoundaryKind::Dirichlet, LaplacianForm::Conservative).unwrap();
        let e = sym_eigendecomposition(&a).unwrap();
        let dx = 1.0 / 17.0;
        let mut exact: Vec<f64> =
            (1..=16).map(|j| -(2.0 / (dx * dx)) * (1.0 - (j as f64 * std::f64::consts::PI * dx).cos())).collect();
        exact.sort_by(f64::total_cmp);
        for (got, want) in e.values.iter().zip(&exact) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        check_invariants(&a.to_dense(), &e);
    }

    #[test]
    fn stretched_dirichlet_is_negative_definite() {
        let g = build_grid(8, 8, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let a = assemble_laplacian(&g, BoundaryKind::Dirichlet, LaplacianForm::Conservative).unwrap();
        let e = sym_eigendecomposition(&a).unwrap();
        assert!(e.values.iter().all(|&v| v < 0.0));
        check_invariants(&a.to_dense(), &e);
    }
}
