//! The four experiments. Trials run in parallel on independent seed streams and
//! rows are emitted in `(n, trial)` order, so output depends only on the config.

use nalgebra::{dmatrix, DMatrix};
use rayon::prelude::*;
use serde::Serialize;
use tyler_core::expansion::{
    infty_expansion_exact, infty_expansion_sampled, pseudorandom_check, Beta, Mode,
};
use tyler_core::io::format_f64;
use tyler_core::sampler::{sample_elliptical, sample_gaussian_frame, sample_sphere_frame};
use tyler_core::scaler::derivative_diagnostics;
use tyler_core::tyler::{relative_frobenius_gap, relative_op_error, tyler_iterate, tyler_iterate_traced};
use tyler_core::{error_report, is_eps_doubly_balanced, EllipticalModel, Frame, SeedSpec, SolverConfig};

use crate::config::ExperimentConfig;
use crate::stats::{log_log_slope, median};
use crate::BenchError;

/// CSV body plus trailing `#` summary lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<String>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for line in &self.summary {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

fn num(x: f64) -> String {
    format_f64(x)
}

fn model(cfg: &ExperimentConfig) -> Result<EllipticalModel, BenchError> {
    Ok(EllipticalModel::new(cfg.shape.build(cfg.d)?, cfg.radial.0)?)
}

fn estimator_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        tol: cfg.tol,
        ..SolverConfig::tyler_default(cfg.d)
    }
}

// ---------------------------------------------------------------------------
// Sample complexity

#[derive(Debug, Clone, Serialize)]
pub struct SampleComplexityRow {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub rel_op_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleComplexityReport {
    pub rows: Vec<SampleComplexityRow>,
    pub n_grid: Vec<usize>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub failed_trials: usize,
}

impl SampleComplexityReport {
    /// Per-trial errors at one `n`, in trial order.
    pub fn errors_at(&self, n: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.rel_op_error).collect()
    }

    pub fn table(&self) -> Table {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.d.to_string(),
                    r.n.to_string(),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    num(r.rel_op_error),
                    r.iterations.to_string(),
                    r.converged.to_string(),
                ]
            })
            .collect();
        let mut summary = vec!["n,median_rel_op_error".to_string()];
        for (n, m) in self.n_grid.iter().zip(&self.medians) {
            summary.push(format!("{n},{}", num(*m)));
        }
        summary.push(format!("log_log_slope,{}", num(self.slope)));
        summary.push(format!("failed_trials,{}", self.failed_trials));
        Table {
            header: vec!["d", "n", "trial", "seed", "rel_op_error", "iterations", "converged"],
            rows,
            summary,
        }
    }
}

pub fn run_sample_complexity(cfg: &ExperimentConfig) -> Result<SampleComplexityReport, BenchError> {
    cfg.validate()?;
    let model = model(cfg)?;
    let solver = estimator_config(cfg);
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let rows: Vec<SampleComplexityRow> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let seed = SeedSpec::new(cfg.master_seed, trial as u64);
            let outcome = sample_elliptical(&model, n, seed)
                .and_then(|x| tyler_iterate(&x, &solver))
                .and_then(|r| Ok((relative_op_error(model.sigma(), &r.sigma_hat)?, r.iterations, r.converged)));
            let (rel_op_error, iterations, converged) = outcome.unwrap_or((f64::NAN, 0, false));
            SampleComplexityRow {
                d: cfg.d,
                n,
                trial,
                seed: cfg.master_seed,
                rel_op_error,
                iterations,
                converged,
            }
        })
        .collect();
    let medians: Vec<f64> = cfg
        .n_grid
        .iter()
        .map(|&n| median(&rows.iter().filter(|r| r.n == n).map(|r| r.rel_op_error).collect::<Vec<_>>()))
        .collect();
    let xs: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&xs, &medians);
    let failed_trials = rows.iter().filter(|r| !r.converged).count();
    Ok(SampleComplexityReport {
        rows,
        n_grid: cfg.n_grid.clone(),
        medians,
        slope,
        failed_trials,
    })
}

// ---------------------------------------------------------------------------
// Convergence

/// Per-step ratio below which the gap is considered to contract linearly.
pub const CONTRACTION: f64 = 0.95;
/// Iterations in the tail window.
pub const TAIL_WINDOW: usize = 20;
/// Residual of the reference solve that stands in for the exact limit.
pub const REFERENCE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub trial: usize,
    pub iter: usize,
    pub frobenius_gap_to_limit: f64,
    pub capacity: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub iterations: usize,
    pub converged: bool,
    pub reference_converged: bool,
    /// First iteration after which every per-step gap ratio is at most [`CONTRACTION`].
    pub burn_in: usize,
    /// Geometric-mean gap ratio over the last [`TAIL_WINDOW`] iterations (or all, if fewer).
    pub tail_ratio: f64,
    /// Largest single-step capacity increase.
    pub max_capacity_increase: f64,
    pub error: Option<String>,
}

impl TrialSummary {
    pub fn capacity_monotone(&self, slack: f64) -> bool {
        self.error.is_none() && self.max_capacity_increase <= slack
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub d: usize,
    pub n: usize,
    pub rows: Vec<ConvergenceRow>,
    pub trials: Vec<TrialSummary>,
}

impl ConvergenceReport {
    pub fn table(&self) -> Table {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    r.iter.to_string(),
                    num(r.frobenius_gap_to_limit),
                    num(r.capacity),
                    num(r.residual),
                ]
            })
            .collect();
        let mut summary = vec![
            "trial,iterations,converged,burn_in,tail_contraction_ratio,max_capacity_increase".to_string(),
        ];
        for t in &self.trials {
            summary.push(format!(
                "{},{},{},{},{},{}",
                t.trial,
                t.iterations,
                t.converged,
                t.burn_in,
                num(t.tail_ratio),
                num(t.max_capacity_increase)
            ));
        }
        Table {
            header: vec!["trial", "iter", "frobenius_gap_to_limit", "capacity", "residual"],
            rows,
            summary,
        }
    }
}

/// Burn-in and tail ratio of a gap sequence.
pub fn contraction_summary(gaps: &[f64]) -> (usize, f64) {
    let last = gaps.len().saturating_sub(1);
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    let mut burn_in = ratios.len();
    while burn_in > 0 && ratios[burn_in - 1] <= CONTRACTION {
        burn_in -= 1;
    }
    let tail_ratio = if last == 0 {
        f64::NAN
    } else {
        let window = TAIL_WINDOW.min(last);
        (gaps[last] / gaps[last - window]).powf(1.0 / window as f64)
    };
    (burn_in, tail_ratio)
}

fn convergence_trial(
    model: &EllipticalModel,
    n: usize,
    solver: &SolverConfig,
    seed: SeedSpec,
    trial: usize,
) -> Result<(Vec<ConvergenceRow>, TrialSummary), tyler_core::Error> {
    let x = sample_elliptical(model, n, seed)?;
    let reference = tyler_iterate(&x, &SolverConfig::new(REFERENCE_TOL, 100_000)?)?;
    let run = tyler_iterate_traced(&x, solver)?;
    let limit = reference.sigma_hat.matrix();
    let gaps = run
        .iterates
        .iter()
        .map(|s| relative_frobenius_gap(limit, s))
        .collect::<Result<Vec<f64>, _>>()?;
    let rows = (0..gaps.len())
        .map(|i| ConvergenceRow {
            trial,
            iter: i,
            frobenius_gap_to_limit: gaps[i],
            capacity: run.capacity_trace[i],
            residual: run.residual_trace[i],
        })
        .collect();
    let (burn_in, tail_ratio) = contraction_summary(&gaps);
    let max_capacity_increase = run
        .capacity_trace
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        rows,
        TrialSummary {
            trial,
            iterations: run.iterations,
            converged: run.converged,
            reference_converged: reference.converged,
            burn_in,
            tail_ratio,
            max_capacity_increase,
            error: None,
        },
    ))
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport, BenchError> {
    cfg.validate()?;
    let model = model(cfg)?;
    let solver = estimator_config(cfg);
    let n = cfg.n_grid[0];
    let results: Vec<(Vec<ConvergenceRow>, TrialSummary)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = SeedSpec::new(cfg.master_seed, trial as u64);
            convergence_trial(&model, n, &solver, seed, trial).unwrap_or_else(|e| {
                (
                    Vec::new(),
                    TrialSummary {
                        trial,
                        iterations: 0,
                        converged: false,
                        reference_converged: false,
                        burn_in: 0,
                        tail_ratio: f64::NAN,
                        max_capacity_increase: f64::NAN,
                        error: Some(e.to_string()),
                    },
                )
            })
        })
        .collect();
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (r, t) in results {
        rows.extend(r);
        trials.push(t);
    }
    Ok(ConvergenceReport {
        d: cfg.d,
        n,
        rows,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Expansion survey

const INFTY_STREAM: u64 = 1 << 40;
const QUARTER_STREAM: u64 = 2 << 40;
const HALF_STREAM: u64 = 3 << 40;

#[derive(Debug, Clone, Serialize)]
pub struct SurveyRow {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    /// `random` for sphere-uniform frames, `control` for `I_d`.
    pub kind: &'static str,
    pub mode: Mode,
    /// Exact λ, or an upper bound on it in sampled mode.
    pub lambda_infty: f64,
    pub alpha_min_quarter: f64,
    pub alpha_max_quarter: f64,
    pub alpha_min_half: f64,
    pub alpha_max_half: f64,
    pub balance_ratio: f64,
    pub eps_balanced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurveyReport {
    pub rows: Vec<SurveyRow>,
    /// Random rows with `lambda_infty > 0`, per `n`.
    pub positive_lambda: Vec<(usize, usize)>,
}

impl SurveyReport {
    pub fn random_rows(&self, n: usize) -> impl Iterator<Item = &SurveyRow> {
        self.rows.iter().filter(move |r| r.kind == "random" && r.n == n)
    }

    pub fn control(&self) -> Option<&SurveyRow> {
        self.rows.iter().find(|r| r.kind == "control")
    }

    pub fn table(&self) -> Table {
        let mode = |m: Mode| match m {
            Mode::Exact => "exact",
            Mode::Sampled => "sampled",
        };
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.d.to_string(),
                    r.n.to_string(),
                    r.trial.to_string(),
                    r.kind.to_string(),
                    mode(r.mode).to_string(),
                    num(r.lambda_infty),
                    num(r.alpha_min_quarter),
                    num(r.alpha_max_quarter),
                    num(r.alpha_min_half),
                    num(r.alpha_max_half),
                    num(r.balance_ratio),
                    r.eps_balanced.to_string(),
                ]
            })
            .collect();
        let mut summary = vec!["n,trials_with_positive_lambda_infty".to_string()];
        for (n, k) in &self.positive_lambda {
            summary.push(format!("{n},{k}"));
        }
        Table {
            header: vec![
                "d",
                "n",
                "trial",
                "kind",
                "mode",
                "lambda_infty",
                "alpha_min_beta_1_4",
                "alpha_max_beta_1_4",
                "alpha_min_beta_1_2",
                "alpha_max_beta_1_2",
                "op_error_ratio",
                "eps_balanced",
            ],
            rows,
            summary,
        }
    }
}

fn survey_row(cfg: &ExperimentConfig, frame: &Frame, trial: usize, kind: &'static str) -> SurveyRow {
    let (d, n) = (frame.d(), frame.n());
    let t = trial as u64;
    let mut exact = true;
    let infty = match cfg.mode {
        Mode::Exact => infty_expansion_exact(frame),
        Mode::Sampled => infty_expansion_sampled(
            frame,
            cfg.subsets,
            SeedSpec::new(cfg.master_seed, INFTY_STREAM + t),
        ),
    };
    let lambda_infty = match infty {
        Ok(r) => {
            exact &= r.mode == Mode::Exact;
            r.lambda
        }
        Err(_) => f64::NAN,
    };
    let mut alphas = |beta: Beta, stream: u64| match pseudorandom_check(
        frame,
        beta,
        cfg.mode,
        cfg.subsets,
        SeedSpec::new(cfg.master_seed, stream + t),
    ) {
        Ok(p) => {
            exact &= p.mode == Mode::Exact;
            (p.alpha_min, p.alpha_max)
        }
        Err(_) => (f64::NAN, f64::NAN),
    };
    let quarter = alphas(Beta::QUARTER, QUARTER_STREAM);
    let half = alphas(Beta::HALF, HALF_STREAM);
    let eps = 5.0 * (d as f64 / n as f64).sqrt();
    SurveyRow {
        d,
        n,
        trial,
        kind,
        mode: if exact { Mode::Exact } else { Mode::Sampled },
        lambda_infty,
        alpha_min_quarter: quarter.0,
        alpha_max_quarter: quarter.1,
        alpha_min_half: half.0,
        alpha_max_half: half.1,
        balance_ratio: error_report(frame).balance_ratio(),
        eps_balanced: is_eps_doubly_balanced(frame, eps),
    }
}

pub fn run_expansion_survey(cfg: &ExperimentConfig) -> Result<SurveyReport, BenchError> {
    cfg.validate()?;
    let mut rows = vec![survey_row(cfg, &Frame::identity(cfg.d), 0, "control")];
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let random: Vec<SurveyRow> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let seed = SeedSpec::new(cfg.master_seed, trial as u64);
            match sample_sphere_frame(cfg.d, n, seed) {
                Ok(frame) => survey_row(cfg, &frame, trial, "random"),
                Err(_) => SurveyRow {
                    d: cfg.d,
                    n,
                    trial,
                    kind: "random",
                    mode: cfg.mode,
                    lambda_infty: f64::NAN,
                    alpha_min_quarter: f64::NAN,
                    alpha_max_quarter: f64::NAN,
                    alpha_min_half: f64::NAN,
                    alpha_max_half: f64::NAN,
                    balance_ratio: f64::NAN,
                    eps_balanced: false,
                },
            }
        })
        .collect();
    rows.extend(random);
    let positive_lambda = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let k = rows
                .iter()
                .filter(|r| r.kind == "random" && r.n == n && r.lambda_infty > 0.0)
                .count();
            (n, k)
        })
        .collect();
    Ok(SurveyReport { rows, positive_lambda })
}

// ---------------------------------------------------------------------------
// Derivative diagnostics

/// Step and tolerance of the diagnostic run.
pub const DIAGNOSTIC_STEP: f64 = 1e-6;
pub const DIAGNOSTIC_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub frame: String,
    pub quantity: &'static str,
    pub analytic: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub h: f64,
    pub tolerance: f64,
    pub rows: Vec<DiagnosticRow>,
    pub passed: bool,
}

impl DiagnosticReport {
    pub fn table(&self) -> Table {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.frame.clone(),
                    r.quantity.to_string(),
                    num(r.analytic),
                    num(r.finite_difference),
                    num(r.abs_error),
                    num(r.rel_error),
                    r.pass.to_string(),
                ]
            })
            .collect();
        Table {
            header: vec!["frame", "quantity", "analytic", "finite_difference", "abs_error", "rel_error", "pass"],
            rows,
            summary: vec![format!("passed,{}", self.passed)],
        }
    }
}

/// Degenerate, balanced, scaled and seeded random frames.
pub fn diagnostic_battery(cfg: &ExperimentConfig) -> Result<Vec<(String, Frame)>, BenchError> {
    let e1e1e2 = Frame::new(dmatrix![1.0, 1.0, 0.0; 0.0, 0.0, 1.0])?;
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let mercedes = Frame::new(DMatrix::from_fn(2, 3, |i, j| {
        let a = std::f64::consts::FRAC_PI_2 + third * j as f64;
        if i == 0 {
            a.cos()
        } else {
            a.sin()
        }
    }))?;
    let mut out = vec![
        ("e1e1e2".to_string(), e1e1e2.clone()),
        ("e1e1e2_scaled_10".to_string(), e1e1e2.scaled(10.0)),
        ("mercedes_benz".to_string(), mercedes),
        (format!("identity_{}", cfg.d), Frame::identity(cfg.d)),
    ];
    let n = cfg.n_grid[0].max(cfg.d);
    for t in 0..cfg.trials {
        let seed = SeedSpec::new(cfg.master_seed, t as u64);
        out.push((format!("sphere_{t}"), sample_sphere_frame(cfg.d, n, seed)?));
        out.push((format!("gaussian_{t}"), sample_gaussian_frame(cfg.d, n, 1.0, seed)?));
    }
    Ok(out)
}

pub fn run_diagnostics(cfg: &ExperimentConfig) -> Result<DiagnosticReport, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (name, frame) in diagnostic_battery(cfg)? {
        let report = derivative_diagnostics(&frame, DIAGNOSTIC_STEP)?;
        for (quantity, check) in [
            ("quadratic_form", report.quadratic_form),
            ("column_norm", report.column_norm),
            ("size", report.size_rate),
        ] {
            rows.push(DiagnosticRow {
                frame: name.clone(),
                quantity,
                analytic: check.analytic,
                finite_difference: check.finite_difference,
                abs_error: check.abs_error,
                rel_error: check.rel_error,
                pass: check.rel_error <= DIAGNOSTIC_TOL,
            });
        }
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(DiagnosticReport {
        h: DIAGNOSTIC_STEP,
        tolerance: DIAGNOSTIC_TOL,
        rows,
        passed,
    })
}
