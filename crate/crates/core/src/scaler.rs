//! Frame scaling by Flip-Flop and by the continuous balancing flow.
//!
//! Both methods return left/right scalings `(L, R)` with `L·V·diag(R)` doubly
//! balanced. The flow integrates `−∂V = E·V + V·F` with first-order steps
//! `V ← (I − hE)·V·(I − hF)` and accumulates `L ← (I − hE)·L`,
//! `R_j ← R_j·(1 − h·F_jj)` along the way.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{error_report, size, ErrorReport, Frame};
use crate::linalg::{condition_number, inv_sqrt_pd, SortedEigen};

/// Gram condition number above which a Flip-Flop step refuses to proceed.
pub const MAX_GRAM_CONDITION: f64 = 1e14;
/// Smallest gradient-flow step before the solve is declared stagnated.
pub const MIN_FLOW_STEP: f64 = 1e-18;
/// Per-step size increase tolerated along the flow.
pub const SIZE_SLACK: f64 = 1e-12;

/// Left scaling `L` (invertible) and diagonal right scaling `R` (positive).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPair {
    pub left: DMatrix<f64>,
    pub right: DVector<f64>,
}

impl ScalingPair {
    pub fn new(left: DMatrix<f64>, right: DVector<f64>) -> Result<Self> {
        crate::linalg::ensure_square(&left)?;
        crate::linalg::ensure_finite(&left)?;
        if let Some(j) = right.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!(
                "right scaling entry {j} is not positive: {}",
                right[j]
            )));
        }
        let sv = left.singular_values();
        if !(sv.min() > 0.0) {
            return Err(Error::Singular);
        }
        Ok(Self { left, right })
    }

    pub fn identity(d: usize, n: usize) -> Self {
        Self {
            left: DMatrix::identity(d, d),
            right: DVector::from_element(n, 1.0),
        }
    }

    /// `L · V · diag(R)`.
    pub fn apply(&self, frame: &Frame) -> Frame {
        frame.transformed(&self.left, &self.right)
    }
}

/// Tolerances and budgets shared by the scaler and the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Target `op_error / s` for scaling, fixed-point residual for estimation.
    pub tol: f64,
    pub max_iters: usize,
    /// Multiplier in `(0, 1]` on the gradient-flow step rule.
    pub step_safety: f64,
    /// Trajectory checkpoint period, in iterations.
    pub checkpoint_every: usize,
    /// Let the estimator extend its budget to `10·(d + |log det Σ_t| + 60)`.
    pub adaptive_budget: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10_000,
            step_safety: 1.0,
            checkpoint_every: 100,
            adaptive_budget: false,
        }
    }
}

impl SolverConfig {
    pub fn new(tol: f64, max_iters: usize) -> Result<Self> {
        Self {
            tol,
            max_iters,
            ..Self::default()
        }
        .validated()
    }

    /// Estimator defaults: `tol = 1e-10` and an iteration budget of
    /// `10·(d + |log det Σ_t| + 60)` re-evaluated at every iterate.
    pub fn tyler_default(d: usize) -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10 * (d + 60),
            adaptive_budget: true,
            ..Self::default()
        }
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.step_safety > 0.0 && self.step_safety <= 1.0) {
            return Err(Error::Config(format!(
                "step_safety must lie in (0, 1], got {}",
                self.step_safety
            )));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be positive".into()));
        }
        Ok(self)
    }
}

/// One Flip-Flop round: exact isotropy correction, then exact norm correction.
///
/// Returns the new frame and the pair `(L, R)` with `new = L · V · diag(R)`.
pub fn flip_flop_step(frame: &Frame) -> Result<(Frame, ScalingPair)> {
    let g = frame.gram();
    let condition = condition_number(&g);
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let left = inv_sqrt_pd(&g)?;
    let isotropic = &left * frame.matrix();
    let mut right = DVector::zeros(frame.n());
    for (j, col) in isotropic.column_iter().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
        right[j] = 1.0 / norm;
    }
    let pair = ScalingPair { left, right };
    Ok((pair.apply(frame), pair))
}

/// Position on a gradient-flow trajectory.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub frame: Frame,
    pub scaling: ScalingPair,
    pub time: f64,
    /// Accumulated `∫‖E_t‖_op dt`.
    pub int_e_op: f64,
    /// Accumulated `∫‖F_t‖_op dt`.
    pub int_f_op: f64,
    initial: Arc<Frame>,
}

impl FlowState {
    pub fn new(frame: Frame) -> Self {
        let scaling = ScalingPair::identity(frame.d(), frame.n());
        Self {
            initial: Arc::new(frame.clone()),
            frame,
            scaling,
            time: 0.0,
            int_e_op: 0.0,
            int_f_op: 0.0,
        }
    }

    pub fn initial(&self) -> &Frame {
        &self.initial
    }

    /// `‖V_t − L_t·V_0·diag(R_t)‖_F / ‖V_t‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let rebuilt = self.scaling.apply(&self.initial);
        (self.frame.matrix() - rebuilt.matrix()).norm() / self.frame.matrix().norm()
    }
}

/// Step length `h = safety · min(0.1 / (‖E‖_op + ‖F‖_op + 1e-30), 0.1 / s)`.
pub fn flow_step_size(report: &ErrorReport, step_safety: f64) -> f64 {
    let by_error = 0.1 / (report.e_op + report.f_op + 1e-30);
    let by_size = 0.1 / report.size;
    step_safety * by_error.min(by_size)
}

/// Velocity `−(E·V + V·F)` of the balancing flow.
pub fn flow_velocity(frame: &Frame, report: &ErrorReport) -> DMatrix<f64> {
    let v = frame.matrix();
    let mut vf = v.clone();
    for (j, mut col) in vf.column_iter_mut().enumerate() {
        col *= report.f[j];
    }
    -(&report.e * v + vf)
}

/// First-order step of fixed length `h`.
pub fn euler_step(state: &FlowState, h: f64) -> FlowState {
    let report = error_report(&state.frame);
    euler_step_with(state, &report, h)
}

fn euler_step_with(state: &FlowState, report: &ErrorReport, h: f64) -> FlowState {
    let d = state.frame.d();
    let left_step = DMatrix::identity(d, d) - &report.e * h;
    let right_step = report.f.map(|f| 1.0 - h * f);
    // V − h(EV + VF) + h²·EVF, so the frame stays exactly L·V₀·diag(R).
    let mut next = &left_step * state.frame.matrix();
    for (j, mut col) in next.column_iter_mut().enumerate() {
        col *= right_step[j];
    }
    let left = left_step * &state.scaling.left;
    let right = state
        .scaling
        .right
        .component_mul(&right_step);
    FlowState {
        frame: Frame::from_matrix_unchecked(next),
        scaling: ScalingPair { left, right },
        time: state.time + h,
        int_e_op: state.int_e_op + h * report.e_op,
        int_f_op: state.int_f_op + h * report.f_op,
        initial: Arc::clone(&state.initial),
    }
}

/// One accepted gradient-flow step.
///
/// The step follows [`flow_step_size`]; it is halved until the size does not
/// grow by more than [`SIZE_SLACK`].
pub fn gradient_flow_step(state: &FlowState, config: &SolverConfig) -> Result<FlowState> {
    let report = error_report(&state.frame);
    if report.op_error == 0.0 {
        return Ok(FlowState {
            time: state.time + flow_step_size(&report, config.step_safety),
            ..state.clone()
        });
    }
    let mut h = flow_step_size(&report, config.step_safety);
    loop {
        if !(h >= MIN_FLOW_STEP) {
            return Err(Error::Stagnation { step: h });
        }
        let next = euler_step_with(state, &report, h);
        if size(&next.frame) <= report.size + SIZE_SLACK {
            return Ok(next);
        }
        h *= 0.5;
    }
}

/// Scaling algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    FlipFlop,
    Flow,
}

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    IllConditioned,
    Stagnated,
}

/// Trajectory sample written as one CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub time: f64,
    pub size: f64,
    pub op_error_e: f64,
    pub op_error_f: f64,
    pub delta: f64,
    pub int_e_op: f64,
    pub int_f_op: f64,
}

pub const CHECKPOINT_HEADER: &str = "time,size,op_error_E,op_error_F,delta,int_E_op,int_F_op";

impl Checkpoint {
    fn record(iteration: usize, time: f64, report: &ErrorReport, int_e: f64, int_f: f64) -> Self {
        Self {
            iteration,
            time,
            size: report.size,
            op_error_e: report.e_op,
            op_error_f: report.f_op,
            delta: report.delta,
            int_e_op: int_e,
            int_f_op: int_f,
        }
    }

    pub fn csv_row(&self) -> String {
        [
            self.time,
            self.size,
            self.op_error_e,
            self.op_error_f,
            self.delta,
            self.int_e_op,
            self.int_f_op,
        ]
        .iter()
        .map(|v| crate::io::format_f64(*v))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// `‖L_T − I‖_op ≤ exp(∫‖E_t‖_op) − 1` and the matching bound for `R_T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingBoundCheck {
    pub left_deviation: f64,
    pub left_bound: f64,
    pub right_deviation: f64,
    pub right_bound: f64,
    pub holds: bool,
}

/// Outcome of [`solve_scaling`]; non-convergence is reported, not raised.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingSolution {
    pub method: Method,
    pub scaling: ScalingPair,
    #[serde(skip)]
    pub frame: Frame,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    /// `op_error / s` of the returned frame.
    pub final_ratio: f64,
    /// Per-round `op_error / s` (Flip-Flop) or per-step (flow).
    pub ratio_history: Vec<f64>,
    pub int_e_op: f64,
    pub int_f_op: f64,
    pub flow_time: f64,
    /// Present for flow solves started from a frame of unit size.
    pub bound_check: Option<ScalingBoundCheck>,
    /// Largest single-step size increase observed along the flow.
    pub max_size_increase: f64,
    pub trajectory: Vec<Checkpoint>,
}

/// Find `(L, R)` with `L·V·diag(R)` balanced to `op_error/s ≤ config.tol`.
pub fn solve_scaling(frame: &Frame, config: &SolverConfig, method: Method) -> Result<ScalingSolution> {
    let config = config.validated()?;
    match method {
        Method::FlipFlop => solve_flip_flop(frame, &config),
        Method::Flow => solve_flow(frame, &config),
    }
}

fn solve_flip_flop(frame: &Frame, config: &SolverConfig) -> Result<ScalingSolution> {
    let report = error_report(frame);
    let mut best = (report.balance_ratio(), frame.clone(), ScalingPair::identity(frame.d(), frame.n()));
    let mut trajectory = vec![Checkpoint::record(0, 0.0, &report, 0.0, 0.0)];
    let mut history = vec![report.balance_ratio()];
    let mut current = frame.clone();
    let mut pair = best.2.clone();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    if report.balance_ratio() <= config.tol {
        stop = StopReason::Converged;
    } else {
        for it in 1..=config.max_iters {
            let (next, step) = match flip_flop_step(&current) {
                Ok(x) => x,
                Err(Error::IllConditioned { .. }) | Err(Error::NotPositiveDefinite { .. }) => {
                    stop = StopReason::IllConditioned;
                    break;
                }
                Err(e) => return Err(e),
            };
            iterations = it;
            // Fold the size normalization s = 1 into L.
            let c = 1.0 / size(&next).sqrt();
            current = next.scaled(c);
            pair = ScalingPair {
                left: step.left * &pair.left * c,
                right: pair.right.component_mul(&step.right),
            };
            let report = error_report(&current);
            let ratio = report.balance_ratio();
            history.push(ratio);
            if it % config.checkpoint_every == 0 {
                trajectory.push(Checkpoint::record(it, it as f64, &report, 0.0, 0.0));
            }
            if ratio < best.0 {
                best = (ratio, current.clone(), pair.clone());
            }
            if ratio <= config.tol {
                stop = StopReason::Converged;
                break;
            }
        }
    }
    let (final_ratio, frame_out, scaling) = if stop == StopReason::Converged {
        (error_report(&current).balance_ratio(), current, pair)
    } else {
        best
    };
    if trajectory.last().map(|c| c.iteration) != Some(iterations) {
        let report = error_report(&frame_out);
        trajectory.push(Checkpoint::record(iterations, iterations as f64, &report, 0.0, 0.0));
    }
    Ok(ScalingSolution {
        method: Method::FlipFlop,
        scaling,
        frame: frame_out,
        converged: stop == StopReason::Converged,
        stop,
        iterations,
        final_ratio,
        ratio_history: history,
        int_e_op: 0.0,
        int_f_op: 0.0,
        flow_time: 0.0,
        bound_check: None,
        max_size_increase: 0.0,
        trajectory,
    })
}

fn solve_flow(frame: &Frame, config: &SolverConfig) -> Result<ScalingSolution> {
    let mut state = FlowState::new(frame.clone());
    let report = error_report(frame);
    let mut trajectory = vec![Checkpoint::record(0, 0.0, &report, 0.0, 0.0)];
    let mut history = vec![report.balance_ratio()];
    let mut best = (report.balance_ratio(), state.clone());
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut max_size_increase = f64::NEG_INFINITY;
    let mut last_size = report.size;

    if report.balance_ratio() <= config.tol {
        stop = StopReason::Converged;
    } else {
        for it in 1..=config.max_iters {
            state = match gradient_flow_step(&state, config) {
                Ok(s) => s,
                Err(Error::Stagnation { .. }) => {
                    stop = StopReason::Stagnated;
                    break;
                }
                Err(e) => return Err(e),
            };
            iterations = it;
            let report = error_report(&state.frame);
            max_size_increase = max_size_increase.max(report.size - last_size);
            last_size = report.size;
            let ratio = report.balance_ratio();
            history.push(ratio);
            if it % config.checkpoint_every == 0 {
                trajectory.push(Checkpoint::record(it, state.time, &report, state.int_e_op, state.int_f_op));
            }
            if ratio < best.0 {
                best = (ratio, state.clone());
            }
            if ratio <= config.tol {
                stop = StopReason::Converged;
                break;
            }
        }
    }
    let (final_ratio, state) = if stop == StopReason::Converged {
        (error_report(&state.frame).balance_ratio(), state)
    } else {
        best
    };
    if trajectory.last().map(|c| c.iteration) != Some(iterations) {
        let report = error_report(&state.frame);
        trajectory.push(Checkpoint::record(iterations, state.time, &report, state.int_e_op, state.int_f_op));
    }
    let bound_check = ((size(frame) - 1.0).abs() <= 1e-12).then(|| scaling_bound_check(&state));
    Ok(ScalingSolution {
        method: Method::Flow,
        scaling: state.scaling.clone(),
        frame: state.frame.clone(),
        converged: stop == StopReason::Converged,
        stop,
        iterations,
        final_ratio,
        ratio_history: history,
        int_e_op: state.int_e_op,
        int_f_op: state.int_f_op,
        flow_time: state.time,
        bound_check,
        max_size_increase: if iterations == 0 { 0.0 } else { max_size_increase },
        trajectory,
    })
}

/// Evaluate the exponential-integral bounds on the accumulated scalings.
pub fn scaling_bound_check(state: &FlowState) -> ScalingBoundCheck {
    let d = state.frame.d();
    let left_deviation = (&state.scaling.left - DMatrix::<f64>::identity(d, d))
        .singular_values()
        .max();
    let right_deviation = state.scaling.right.map(|r| (r - 1.0).abs()).max();
    let left_bound = state.int_e_op.exp_m1();
    let right_bound = state.int_f_op.exp_m1();
    let slack = 1e-12;
    ScalingBoundCheck {
        left_deviation,
        left_bound,
        right_deviation,
        right_bound,
        holds: left_deviation <= left_bound + slack && right_deviation <= right_bound + slack,
    }
}

/// Analytic vs finite-difference derivative of one quantity along the flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
    /// `abs_error / max(|analytic|, REL_FLOOR · s²)`.
    pub rel_error: f64,
}

/// Relative-error floor, in units of `s²`, for derivatives that vanish.
pub const REL_FLOOR: f64 = 1e-5;

impl DerivativeCheck {
    fn new(analytic: f64, finite_difference: f64, size: f64) -> Self {
        let abs_error = (finite_difference - analytic).abs();
        let scale = analytic.abs().max(REL_FLOOR * size * size);
        Self {
            analytic,
            finite_difference,
            abs_error,
            rel_error: abs_error / scale,
        }
    }
}

/// Derivative identities at `t = 0` checked by central differences.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub h: f64,
    pub size: f64,
    /// `d/dt ⟨xxᵀ, VVᵀ⟩ = −2⟨xxᵀ, EVVᵀ + VFVᵀ⟩`, `x` the top eigenvector of `E`.
    pub quadratic_form: DerivativeCheck,
    /// `d/dt ‖v_j‖² = −2(F_jj‖v_j‖² + ⟨E, v_j v_jᵀ⟩)` for the longest column `j`.
    pub column_norm: DerivativeCheck,
    pub column: usize,
    /// `ds/dt = −2Δ`.
    pub size_rate: DerivativeCheck,
}

impl DerivativeReport {
    pub fn max_rel_error(&self) -> f64 {
        self.quadratic_form
            .rel_error
            .max(self.column_norm.rel_error)
            .max(self.size_rate.rel_error)
    }
}

pub fn derivative_diagnostics(frame: &Frame, h: f64) -> Result<DerivativeReport> {
    if !(1e-9..=1e-3).contains(&h) {
        return Err(Error::Config(format!("finite-difference step {h} outside [1e-9, 1e-3]")));
    }
    let report = error_report(frame);
    let v = frame.matrix();
    let velocity = flow_velocity(frame, &report);
    let forward = v + &velocity * h;
    let backward = v - &velocity * h;
    let s = report.size;

    // Top eigenvector of E by absolute eigenvalue.
    let eig = SortedEigen::new(&report.e);
    let top = if eig.min().abs() > eig.max().abs() { 0 } else { frame.d() - 1 };
    let x = eig.vectors.column(top).into_owned();

    let quad = |m: &DMatrix<f64>| (m.transpose() * &x).norm_squared();
    let fd_quad = (quad(&forward) - quad(&backward)) / (2.0 * h);
    let vtx = v.transpose() * &x;
    let vvtx = v * &vtx;
    let ex = &report.e * &x;
    let f_term: f64 = (0..frame.n()).map(|j| report.f[j] * vtx[j] * vtx[j]).sum();
    let analytic_quad = -2.0 * (ex.dot(&vvtx) + f_term);

    let norms = frame.column_norms_sq();
    let column = norms.imax();
    let fd_col = (forward.column(column).norm_squared() - backward.column(column).norm_squared()) / (2.0 * h);
    let vj = v.column(column);
    let analytic_col = -2.0 * (report.f[column] * norms[column] + vj.dot(&(&report.e * vj)));

    let fd_size = (forward.norm_squared() - backward.norm_squared()) / (2.0 * h);
    let analytic_size = -2.0 * report.delta;

    Ok(DerivativeReport {
        h,
        size: s,
        quadratic_form: DerivativeCheck::new(analytic_quad, fd_quad, s),
        column_norm: DerivativeCheck::new(analytic_col, fd_col, s),
        column,
        size_rate: DerivativeCheck::new(analytic_size, fd_size, s),
    })
}
