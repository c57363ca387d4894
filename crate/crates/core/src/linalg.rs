//! Dense symmetric linear algebra shared by every module.
//!
//! All spectral functions (square roots, inverse square roots, operator norms)
//! go through one symmetric eigendecomposition routine so that the scaler and
//! the estimator follow a single numerical pathway.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`op_norm_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalue floor, relative to the largest eigenvalue, used by matrix
/// (inverse) square roots.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Largest dimension handled by a full eigendecomposition in
/// [`op_norm_symmetric`]; larger inputs use power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 512;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Columns are unit eigenvectors matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let sym = symmetrize(m);
        let eig = SymmetricEigen::new(sym);
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Rebuild `Q f(Λ) Qᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DVector::from_iterator(self.values.len(), self.values.iter().map(|&v| f(v)));
        let mut left = self.vectors.clone();
        for (j, mut col) in left.column_iter_mut().enumerate() {
            col *= scaled[j];
        }
        symmetrize(&(left * self.vectors.transpose()))
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `M - Mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn ensure_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Reject matrices whose asymmetry exceeds `rel_tol · ‖M‖_F`.
pub fn ensure_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    ensure_square(m)?;
    let tolerance = rel_tol * m.norm();
    let asym = asymmetry(m);
    if asym > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance,
        });
    }
    Ok(())
}

/// Spectral norm of a symmetric matrix: the largest absolute eigenvalue.
///
/// Uses a full eigendecomposition up to [`DENSE_EIGEN_LIMIT`] and power
/// iteration beyond it.
pub fn op_norm_symmetric(m: &DMatrix<f64>) -> Result<f64> {
    ensure_symmetric(m, SYMMETRY_TOL)?;
    Ok(op_norm_symmetric_unchecked(m))
}

pub(crate) fn op_norm_symmetric_unchecked(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() <= DENSE_EIGEN_LIMIT {
        let eig = SortedEigen::new(m);
        eig.min().abs().max(eig.max().abs())
    } else {
        power_iteration_norm(m)
    }
}

fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    // Deterministic start with no special alignment to coordinate axes.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        // Iterate with M² so that a ±λ pair does not stall the sign.
        let y = m * &x;
        let z = m * &y;
        let z_norm = z.norm();
        if z_norm == 0.0 {
            return 0.0;
        }
        let next = z_norm.sqrt();
        x = z / z_norm;
        if (next - estimate).abs() <= POWER_TOL * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `M^{-1/2}` for symmetric positive definite `M`, flooring eigenvalues at
/// `EIGEN_FLOOR · λ_max`.
pub fn inv_sqrt_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SortedEigen::new(m);
    let top = eig.max();
    if top <= 0.0 || !top.is_finite() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig.min(),
        });
    }
    let floor = EIGEN_FLOOR * top;
    Ok(eig.map(|v| 1.0 / v.max(floor).sqrt()))
}

/// `M^{1/2}` for symmetric positive semidefinite `M` (negative rounding noise clipped).
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    SortedEigen::new(m).map(|v| v.max(0.0).sqrt())
}

/// Inverse of a symmetric positive definite matrix through its eigendecomposition.
pub fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SortedEigen::new(m);
    if eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(eig.map(|v| 1.0 / v))
}

/// Condition number `λ_max / λ_min` of a symmetric PSD matrix (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SortedEigen::new(m);
    if eig.min() <= 0.0 {
        f64::INFINITY
    } else {
        eig.max() / eig.min()
    }
}

/// Positive definite factor `P = (LᵀL)^{1/2}` of the polar decomposition `L = Q P`.
pub fn polar_pd_factor(l: &DMatrix<f64>) -> DMatrix<f64> {
    sqrt_psd(&(l.transpose() * l))
}

/// Left Gram matrix `V Vᵀ`.
pub fn gram(v: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(v * v.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm_symmetric(&dmatrix![1.0, 0.0; 0.0, -3.0]).unwrap(), 3.0);
        assert_eq!(op_norm_symmetric(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        let m = dmatrix![2.0, 1.0; 1.0, 2.0];
        assert!((op_norm_symmetric(&m).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn op_norm_rejects_asymmetric() {
        let m = dmatrix![1.0, 2.0; 0.0, 1.0];
        assert!(matches!(
            op_norm_symmetric(&m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn power_iteration_matches_dense_above_limit() {
        let n = DENSE_EIGEN_LIMIT + 10;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = if i == 17 { -5.0 } else { (i % 7) as f64 * 0.5 };
        }
        m[(0, 1)] = 0.25;
        m[(1, 0)] = 0.25;
        let norm = op_norm_symmetric(&m).unwrap();
        assert!((norm - 5.0).abs() < 1e-9, "{norm}");
    }

    #[test]
    fn inverse_sqrt_round_trip() {
        let m = dmatrix![4.0, 1.0; 1.0, 3.0];
        let r = inv_sqrt_pd(&m).unwrap();
        let id = &r * &m * &r;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn sorted_eigen_is_ascending() {
        let m = dmatrix![3.0, 0.0, 0.0; 0.0, -1.0, 0.0; 0.0, 0.0, 2.0];
        let e = SortedEigen::new(&m);
        assert_eq!(e.values.as_slice(), &[-1.0, 2.0, 3.0]);
    }
}
