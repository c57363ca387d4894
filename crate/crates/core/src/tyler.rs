//! Tyler's M-estimator of shape.
//!
//! The estimator `Σ̂` solves `(d/n)·Σ_j x_j x_jᵀ / (x_jᵀ Σ̂⁻¹ x_j) = Σ̂` with
//! `tr Σ̂ = d`. It is computed by the fixed-point iteration
//! `Σ_{t+1} ∝ Σ_j x_j x_jᵀ / (x_jᵀ Σ_t⁻¹ x_j)` started at `I_d`, which is two
//! Flip-Flop half-steps with the right scaling left implicit. Every iterate is
//! renormalized to trace `d`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, inv_sqrt_pd, inverse_pd, sqrt_psd, symmetrize, SortedEigen};
use crate::sampler::normalize_columns_matrix;
use crate::scaler::{ScalingPair, SolverConfig};

const SHAPE_SYMMETRY_TOL: f64 = 1e-12;
const SHAPE_TRACE_TOL: f64 = 1e-10;

/// Symmetric positive definite `d × d` matrix with trace `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePD {
    m: DMatrix<f64>,
}

impl ShapePD {
    /// Validate symmetry, positive definiteness and `tr = d`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_square(&m)?;
        linalg::ensure_finite(&m)?;
        if m.nrows() == 0 {
            return Err(Error::Dimension("empty shape matrix".into()));
        }
        linalg::ensure_symmetric(&m, SHAPE_SYMMETRY_TOL)?;
        let m = symmetrize(&m);
        let min_eigenvalue = SortedEigen::new(&m).min();
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        let d = m.nrows();
        let trace = m.trace();
        if (trace - d as f64).abs() > SHAPE_TRACE_TOL * d as f64 {
            return Err(Error::TraceMismatch { trace, d });
        }
        Ok(Self { m })
    }

    /// Rescale a symmetric PD matrix to trace `d`, then validate.
    pub fn normalized(m: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_square(&m)?;
        let d = m.nrows() as f64;
        let trace = m.trace();
        if !(trace > 0.0 && trace.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: f64::NAN,
            });
        }
        Self::new(symmetrize(&(m * (d / trace))))
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    /// Diagonal shape, trace-normalized.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::normalized(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn d(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn log_det(&self) -> f64 {
        log_det_pd(&self.m).unwrap_or(f64::NAN)
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.d();
        (0..d * d).map(|k| self.m[(k / d, k % d)]).collect()
    }
}

impl Serialize for ShapePD {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

fn log_det_pd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    Some(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Outcome of [`tyler_iterate`].
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorResult {
    pub d: usize,
    pub sigma_hat: ShapePD,
    /// Frobenius norm of the fixed-point defect at `sigma_hat`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Capacity `f_X(Σ_t⁻¹)` for `t = 0, 1, ..., iterations`.
    pub capacity_trace: Vec<f64>,
    /// Fixed-point residual for `t = 0, 1, ..., iterations`.
    pub residual_trace: Vec<f64>,
    /// Every iterate, when requested through [`tyler_iterate_traced`].
    #[serde(skip)]
    pub iterates: Vec<DMatrix<f64>>,
}

fn ensure_nonzero_columns(x: &DMatrix<f64>) -> Result<()> {
    linalg::ensure_finite(x)?;
    for (j, col) in x.column_iter().enumerate() {
        if col.amax() == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
    }
    Ok(())
}

/// Weighted scatter `W = Σ_j x_j x_jᵀ / q_j` with `q_j = x_jᵀ Σ⁻¹ x_j`, and `Σ_j log q_j`.
fn weighted_scatter(x: &DMatrix<f64>, sigma_inv: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let y = sigma_inv * x;
    let mut scaled = x.clone();
    let mut log_sum = 0.0;
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let q = x.column(j).dot(&y.column(j));
        log_sum += q.ln();
        col /= q;
    }
    (symmetrize(&(scaled * x.transpose())), log_sum)
}

fn check_data(x: &DMatrix<f64>, sigma: &ShapePD) -> Result<()> {
    if x.nrows() != sigma.d() {
        return Err(Error::Dimension(format!(
            "data has {} rows but shape is {}x{}",
            x.nrows(),
            sigma.d(),
            sigma.d()
        )));
    }
    ensure_nonzero_columns(x)
}

/// `‖(d/n)·Σ_j x_j x_jᵀ / (x_jᵀ Σ⁻¹ x_j) − Σ‖_F`.
pub fn tyler_fixed_point_residual(x: &DMatrix<f64>, sigma: &ShapePD) -> Result<f64> {
    check_data(x, sigma)?;
    let (d, n) = x.shape();
    let (w, _) = weighted_scatter(x, &inverse_pd(sigma.matrix())?);
    Ok((w * (d as f64 / n as f64) - sigma.matrix()).norm())
}

/// Capacity `f_X(Z) = (d/n)·Σ_j log⟨x_j, Z x_j⟩ − log det Z`; invariant under `Z → cZ`.
pub fn capacity(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<f64> {
    linalg::ensure_square(z)?;
    if z.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "data has {} rows but Z is {}x{}",
            x.nrows(),
            z.nrows(),
            z.ncols()
        )));
    }
    ensure_nonzero_columns(x)?;
    linalg::ensure_symmetric(z, linalg::SYMMETRY_TOL)?;
    let z = symmetrize(z);
    let log_det = log_det_pd(&z).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: SortedEigen::new(&z).min(),
    })?;
    let (d, n) = x.shape();
    let zx = &z * x;
    let sum: f64 = (0..n).map(|j| x.column(j).dot(&zx.column(j)).ln()).sum();
    Ok(d as f64 / n as f64 * sum - log_det)
}

/// Run the fixed-point iteration from `Σ_0 = I_d`.
///
/// Columns are normalized first (the estimator only sees directions). The
/// loop stops once the residual of the current iterate is at most
/// `config.tol`; failure to get there, or a degenerate iterate, yields
/// `converged = false` with the lowest-residual iterate.
pub fn tyler_iterate(x: &DMatrix<f64>, config: &SolverConfig) -> Result<EstimatorResult> {
    run_tyler(x, config, false)
}

/// [`tyler_iterate`] that also keeps every iterate.
pub fn tyler_iterate_traced(x: &DMatrix<f64>, config: &SolverConfig) -> Result<EstimatorResult> {
    run_tyler(x, config, true)
}

fn run_tyler(x: &DMatrix<f64>, config: &SolverConfig, keep_iterates: bool) -> Result<EstimatorResult> {
    let config = config.validated()?;
    let (d, n) = x.shape();
    if d == 0 || n == 0 {
        return Err(Error::Dimension(format!("empty data matrix {d}x{n}")));
    }
    let v = normalize_columns_matrix(x)?;
    // Capacity of the raw data differs from that of the directions by a constant.
    let offset: f64 = x.column_iter().map(|c| c.norm_squared().ln()).sum::<f64>() * d as f64 / n as f64;
    let ratio = d as f64 / n as f64;

    let mut sigma = DMatrix::<f64>::identity(d, d);
    let (mut w, mut log_q) = weighted_scatter(&v, &sigma);
    let mut residual = (&w * ratio - &sigma).norm();
    let mut capacity_trace = vec![ratio * log_q + offset];
    let mut residual_trace = vec![residual];
    let mut iterates = if keep_iterates { vec![sigma.clone()] } else { Vec::new() };
    let mut best = (residual, sigma.clone());
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let budget = if config.adaptive_budget {
            let log_det = log_det_pd(&sigma).unwrap_or(0.0).abs();
            config.max_iters.max((10.0 * (d as f64 + log_det + 60.0)) as usize)
        } else {
            config.max_iters
        };
        if iterations >= budget {
            break;
        }
        let trace = w.trace();
        if !(trace > 0.0 && trace.is_finite()) {
            break;
        }
        let next = symmetrize(&(&w * (d as f64 / trace)));
        let Ok(next_inv) = inverse_pd(&next) else {
            break;
        };
        let Some(log_det) = log_det_pd(&next) else {
            break;
        };
        let (next_w, next_log_q) = weighted_scatter(&v, &next_inv);
        let next_residual = (&next_w * ratio - &next).norm();
        if !next_residual.is_finite() {
            break;
        }
        iterations += 1;
        sigma = next;
        w = next_w;
        log_q = next_log_q;
        residual = next_residual;
        capacity_trace.push(ratio * log_q + log_det + offset);
        residual_trace.push(residual);
        if keep_iterates {
            iterates.push(sigma.clone());
        }
        if residual < best.0 {
            best = (residual, sigma.clone());
        }
        if residual <= config.tol {
            converged = true;
            break;
        }
    }
    let (residual, sigma) = if converged { (residual, sigma) } else { best };
    // A degenerate best iterate of a failed run is replaced by the start point.
    let (residual, sigma_hat) = match ShapePD::normalized(sigma) {
        Ok(s) => (residual, s),
        Err(_) if !converged => (residual_trace[0], ShapePD::identity(d)),
        Err(e) => return Err(e),
    };
    Ok(EstimatorResult {
        d,
        sigma_hat,
        residual,
        iterations,
        converged,
        capacity_trace,
        residual_trace,
        iterates,
    })
}

fn ensure_invertible(l: &DMatrix<f64>) -> Result<()> {
    linalg::ensure_square(l)?;
    linalg::ensure_finite(l)?;
    let sv = l.singular_values();
    if !(sv.min() > 1e-14 * sv.max()) {
        return Err(Error::Singular);
    }
    Ok(())
}

/// `Σ̂ = d·(LᵀL)⁻¹ / tr[(LᵀL)⁻¹]`.
pub fn estimator_from_scaling(left: &DMatrix<f64>) -> Result<ShapePD> {
    ensure_invertible(left)?;
    let inv = inverse_pd(&symmetrize(&(left.transpose() * left)))?;
    ShapePD::normalized(inv)
}

/// Scaling induced by an estimate, with the constant `c` such that
/// `op_error/s ≤ c · residual` for the scaled frame.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorScaling {
    pub scaling: ScalingPair,
    /// `1 / λ_min(Σ̂)`.
    pub balance_constant: f64,
}

/// `L = Σ̂^{-1/2}`, `R_jj = (x_jᵀ Σ̂⁻¹ x_j)^{-1/2}`.
pub fn scaling_from_estimator(x: &DMatrix<f64>, sigma_hat: &ShapePD) -> Result<EstimatorScaling> {
    check_data(x, sigma_hat)?;
    let left = inv_sqrt_pd(sigma_hat.matrix())?;
    let whitened = &left * x;
    let right = DVector::from_iterator(x.ncols(), whitened.column_iter().map(|c| 1.0 / c.norm()));
    let min_eigenvalue = SortedEigen::new(sigma_hat.matrix()).min();
    Ok(EstimatorScaling {
        scaling: ScalingPair::new(left, right)?,
        balance_constant: 1.0 / min_eigenvalue,
    })
}

/// Relative operator error `‖I − Σ^{1/2} Σ̂⁻¹ Σ^{1/2}‖_op`.
pub fn relative_op_error(sigma: &ShapePD, sigma_hat: &ShapePD) -> Result<f64> {
    if sigma.d() != sigma_hat.d() {
        return Err(Error::Dimension("shape matrices differ in size".into()));
    }
    let root = sqrt_psd(sigma.matrix());
    let inner = &root * inverse_pd(sigma_hat.matrix())? * &root;
    let d = sigma.d();
    Ok(linalg::op_norm_symmetric_unchecked(&symmetrize(
        &(DMatrix::identity(d, d) - inner),
    )))
}

/// Relative Frobenius gap `‖I − Σ̂^{1/2} Σ_t⁻¹ Σ̂^{1/2}‖_F` of an iterate to the limit.
pub fn relative_frobenius_gap(limit: &DMatrix<f64>, iterate: &DMatrix<f64>) -> Result<f64> {
    let root = sqrt_psd(limit);
    let inner = &root * inverse_pd(iterate)? * &root;
    let d = limit.nrows();
    Ok((DMatrix::identity(d, d) - symmetrize(&inner)).norm())
}
