//! Frames and their balancing error functionals.
//!
//! A frame is a spanning set of `n` column vectors in `R^d`. Its size is the
//! squared Frobenius norm `s`, and the two error matrices measure distance from
//! isotropy (`E = d·VVᵀ − s·I_d`) and from equal column norms
//! (`F = diag(n·VᵀV − s·I_n)`). `F` is stored as a vector and the `n × n`
//! Gram matrix is never formed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, gram, op_norm_symmetric_unchecked};

/// Relative cutoff for the spanning check: `σ_min(V) > SPAN_TOL · ‖V‖_op`.
pub const SPAN_TOL: f64 = 1e-12;

/// An immutable `d × n` real frame whose columns span `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    m: DMatrix<f64>,
}

impl Frame {
    /// Validate finiteness, `n ≥ d ≥ 1` and the spanning condition.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (d, n) = m.shape();
        if d == 0 || n == 0 {
            return Err(Error::Dimension(format!("empty frame {d}x{n}")));
        }
        if n < d {
            return Err(Error::Dimension(format!(
                "frame needs n >= d, got d = {d}, n = {n}"
            )));
        }
        linalg::ensure_finite(&m)?;
        let sv = m.singular_values();
        let sigma_max = sv.max();
        let sigma_min = sv.min();
        let threshold = SPAN_TOL * sigma_max;
        if !(sigma_min > threshold) {
            return Err(Error::NotSpanning {
                d,
                sigma_min,
                threshold,
            });
        }
        Ok(Self { m })
    }

    /// Build from column vectors of equal length.
    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::Dimension("no columns".into()));
        };
        if columns.iter().any(|c| c.len() != first.len()) {
            return Err(Error::Dimension("columns have unequal length".into()));
        }
        Self::new(DMatrix::from_columns(columns))
    }

    /// Wrap a matrix that is spanning by construction (an invertible
    /// transformation of a valid frame).
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::identity(d, d))
    }

    pub fn d(&self) -> usize {
        self.m.nrows()
    }

    pub fn n(&self) -> usize {
        self.m.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.m.column(j).into_owned()
    }

    /// `c · V`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::from_matrix_unchecked(&self.m * c)
    }

    /// `L · V · diag(r)`; `L` invertible and `r` positive keep the frame spanning.
    pub fn transformed(&self, left: &DMatrix<f64>, right: &DVector<f64>) -> Self {
        let mut out = left * &self.m;
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= right[j];
        }
        Self::from_matrix_unchecked(out)
    }

    /// Columns reordered as `perm[0], perm[1], ...`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let cols: Vec<_> = perm.iter().map(|&j| self.m.column(j).into_owned()).collect();
        Self::from_matrix_unchecked(DMatrix::from_columns(&cols))
    }

    /// Squared column norms `‖v_j‖²`.
    pub fn column_norms_sq(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.m.column_iter().map(|c| c.norm_squared()))
    }

    /// `V Vᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        gram(&self.m)
    }
}

/// Size `s(V) = ‖V‖_F²`.
pub fn size(frame: &Frame) -> f64 {
    frame.m.norm_squared()
}

/// Isotropy error, norm error, size and the derived scalar measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub size: f64,
    /// `E = d·VVᵀ − s·I_d`.
    pub e: DMatrix<f64>,
    /// Diagonal of `F = diag(n·VᵀV − s·I_n)`.
    pub f: DVector<f64>,
    /// `Δ = ‖E‖_F²/d + ‖F‖_F²/n`.
    pub delta: f64,
    /// `max(‖E‖_op, ‖F‖_op)`.
    pub op_error: f64,
    pub e_op: f64,
    pub f_op: f64,
}

impl ErrorReport {
    /// `op_error / size`, the smallest ε for which the frame is ε-doubly balanced.
    pub fn balance_ratio(&self) -> f64 {
        self.op_error / self.size
    }
}

pub fn error_report(frame: &Frame) -> ErrorReport {
    let d = frame.d() as f64;
    let n = frame.n() as f64;
    let norms = frame.column_norms_sq();
    let s: f64 = norms.sum();
    let mut e = frame.gram() * d;
    for i in 0..frame.d() {
        e[(i, i)] -= s;
    }
    let f = norms.map(|x| n * x - s);
    let e_op = op_norm_symmetric_unchecked(&e);
    let f_op = f.amax();
    let delta = e.norm_squared() / d + f.norm_squared() / n;
    ErrorReport {
        size: s,
        e,
        f,
        delta,
        op_error: e_op.max(f_op),
        e_op,
        f_op,
    }
}

/// True iff `‖(E, F)‖_op ≤ s(V) · eps`.
pub fn is_eps_doubly_balanced(frame: &Frame, eps: f64) -> bool {
    let report = error_report(frame);
    report.op_error <= report.size * eps
}
