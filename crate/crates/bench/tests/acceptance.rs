//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use tyler_bench::config::{ExperimentConfig, ExperimentKind, RadialSpec, ShapeSpec};
use tyler_bench::experiments::{
    diagnostic_battery, run_convergence, run_diagnostics, run_expansion_survey, run_sample_complexity,
};
use tyler_core::expansion::{infty_expansion_exact, infty_implies_quantum_check, pseudorandom_check, Beta, Mode};
use tyler_core::sampler::{normalize_columns, sample_sphere_frame, sample_sphere_matrix};
use tyler_core::tyler::{estimator_from_scaling, scaling_from_estimator};
use tyler_core::{error_report, size, solve_scaling, tyler_iterate, Frame, Method, SeedSpec, SolverConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(start: Instant, limit: Duration, detail: String) -> Outcome {
    let elapsed = start.elapsed();
    check(elapsed < limit, format!("{detail}; {:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

fn tight() -> SolverConfig {
    SolverConfig::new(1e-12, 100_000).unwrap()
}

/// 50 seeded sphere-uniform inputs, d in {2, 3, 4}, n = 4d.
fn battery() -> Vec<DMatrix<f64>> {
    (0..50u64)
        .map(|t| {
            let d = 2 + (t % 3) as usize;
            sample_sphere_matrix(d, 4 * d, SeedSpec::new(2718, t)).unwrap()
        })
        .collect()
}

/// Damped fixed-point iteration written against nalgebra only.
fn damped_oracle(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (d, n) = x.shape();
    let mut sigma = DMatrix::<f64>::identity(d, d);
    for _ in 0..200_000 {
        let inv = sigma.clone().try_inverse().unwrap();
        let mut w = DMatrix::<f64>::zeros(d, d);
        for j in 0..n {
            let c = x.column(j);
            let q = (c.transpose() * &inv * c)[(0, 0)];
            w += c * c.transpose() / q;
        }
        w *= d as f64 / n as f64;
        if (&w - &sigma).norm() <= tol {
            return sigma;
        }
        let next = (&sigma + &w) * 0.5;
        let next = (&next + next.transpose()) * 0.5;
        sigma = &next * (d as f64 / next.trace());
    }
    panic!("oracle did not converge");
}

/// 20 exactly balanced frames with d <= 3 and even n <= 12.
fn balanced_battery() -> Vec<Frame> {
    let shapes = [(2, 4), (2, 6), (3, 6), (2, 8), (3, 8), (2, 10), (3, 10), (2, 12), (3, 12), (3, 4)];
    shapes
        .iter()
        .cycle()
        .take(20)
        .enumerate()
        .map(|(i, &(d, n))| {
            let raw = sample_sphere_frame(d, n, SeedSpec::new(900, i as u64)).unwrap();
            solve_scaling(&raw, &SolverConfig::new(1e-13, 100_000).unwrap(), Method::FlipFlop)
                .unwrap()
                .frame
        })
        .collect()
}

fn diagnostics_config() -> ExperimentConfig {
    ExperimentConfig {
        trials: 3,
        master_seed: 4,
        ..ExperimentConfig::new(ExperimentKind::Diagnostics, 3, vec![9])
    }
}

fn c1_fixed_point() -> Outcome {
    let start = Instant::now();
    let mut worst = (0usize, 0.0f64);
    for d in 1..=8 {
        let r = tyler_iterate(&DMatrix::identity(d, d), &tight()).map_err(|e| e.to_string())?;
        if !(r.converged && r.iterations <= 2 && r.residual <= 1e-12) {
            return Err(format!("d={d}: {} iterations, residual {:e}", r.iterations, r.residual));
        }
        worst = (worst.0.max(r.iterations), worst.1.max(r.residual));
    }
    within(start, Duration::from_secs(1), format!("max iterations {}, max residual {:e}", worst.0, worst.1))
}

fn c2_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, x) in battery().iter().enumerate() {
        let r = tyler_iterate(x, &tight()).map_err(|e| e.to_string())?;
        let oracle = damped_oracle(&normalize_columns(x).unwrap().into_matrix(), 1e-12);
        let gap = (r.sigma_hat.matrix() - oracle).norm();
        if !(gap <= 1e-8) {
            return Err(format!("input {i}: gap {gap:e}"));
        }
        worst = worst.max(gap);
    }
    within(start, Duration::from_secs(30), format!("max Frobenius gap {worst:e}"))
}

fn c3_correspondence() -> Outcome {
    let start = Instant::now();
    let (mut gap_max, mut ratio_max) = (0.0f64, 0.0f64);
    for (i, x) in battery().iter().enumerate() {
        let r = tyler_iterate(x, &tight()).map_err(|e| e.to_string())?;
        let frame = normalize_columns(x).map_err(|e| e.to_string())?;
        let sol = solve_scaling(&frame, &tight(), Method::FlipFlop).map_err(|e| e.to_string())?;
        let est = estimator_from_scaling(&sol.scaling.left).map_err(|e| e.to_string())?;
        let gap = (est.matrix() - r.sigma_hat.matrix()).norm();
        let induced = scaling_from_estimator(x, &r.sigma_hat).map_err(|e| e.to_string())?;
        let ratio = error_report(&induced.scaling.apply(&Frame::new(x.clone()).unwrap())).balance_ratio();
        if !(gap <= 1e-6 && ratio <= 1e-6) {
            return Err(format!("input {i}: gap {gap:e}, op_error/s {ratio:e}"));
        }
        gap_max = gap_max.max(gap);
        ratio_max = ratio_max.max(ratio);
    }
    within(
        start,
        Duration::from_secs(60),
        format!("max gap {gap_max:e}, max op_error/s {ratio_max:e}"),
    )
}

fn c4_derivatives() -> Outcome {
    let start = Instant::now();
    let cfg = diagnostics_config();
    let frames = diagnostic_battery(&cfg).map_err(|e| e.to_string())?.len();
    let report = run_diagnostics(&cfg).map_err(|e| e.to_string())?;
    let worst = report.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    if frames != 10 || !report.passed {
        return Err(format!("{frames} frames, worst relative error {worst:e}"));
    }
    within(start, Duration::from_secs(5), format!("{frames} frames, worst relative error {worst:e}"))
}

fn c5_size_monotone() -> Outcome {
    let cfg = diagnostics_config();
    let mut worst = f64::NEG_INFINITY;
    for (name, frame) in diagnostic_battery(&cfg).map_err(|e| e.to_string())? {
        let unit = frame.scaled(1.0 / size(&frame).sqrt());
        for f in [frame, unit] {
            let sol = solve_scaling(&f, &SolverConfig::new(1e-10, 5000).unwrap(), Method::Flow)
                .map_err(|e| e.to_string())?;
            if !(sol.max_size_increase <= 1e-12) {
                return Err(format!("{name}: size grew by {:e}", sol.max_size_increase));
            }
            worst = worst.max(sol.max_size_increase);
        }
    }
    Ok(format!("largest per-step size change {worst:e}"))
}

fn c6_sample_complexity() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: 50,
        master_seed: 2024,
        tol: 1e-10,
        ..ExperimentConfig::new(ExperimentKind::SampleComplexity, 16, vec![256, 512, 1024, 2048, 4096])
    };
    let report = run_sample_complexity(&cfg).map_err(|e| e.to_string())?;
    let ratio = report.medians[0] / report.medians[4];
    let ok = (-0.70..=-0.30).contains(&report.slope) && ratio >= 2.5;
    let detail = format!("slope {:.4}, median ratio 256/4096 {:.3}", report.slope, ratio);
    if !ok {
        return Err(detail);
    }
    within(start, Duration::from_secs(600), detail)
}

fn c7_distribution_free() -> Outcome {
    let columns: Vec<Vec<u64>> = ["constant", "gaussian", "t:2"]
        .iter()
        .map(|radial| {
            let cfg = ExperimentConfig {
                trials: 20,
                master_seed: 77,
                radial: radial.parse::<RadialSpec>().unwrap(),
                shape: ShapeSpec::Condition(10.0),
                ..ExperimentConfig::new(ExperimentKind::SampleComplexity, 8, vec![32, 128, 512])
            };
            run_sample_complexity(&cfg)
                .unwrap()
                .rows
                .iter()
                .map(|r| r.rel_op_error.to_bits())
                .collect()
        })
        .collect();
    check(
        columns[1] == columns[0] && columns[2] == columns[0],
        format!("{} per-trial errors compared bitwise across 3 radial laws", columns[0].len()),
    )
}

fn c8_linear_convergence() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: 20,
        master_seed: 7,
        tol: 1e-8,
        ..ExperimentConfig::new(ExperimentKind::Convergence, 16, vec![64])
    };
    let report = run_convergence(&cfg).map_err(|e| e.to_string())?;
    let contracting = report.trials.iter().filter(|t| t.tail_ratio <= 0.95).count();
    let monotone = report.trials.iter().filter(|t| t.capacity_monotone(1e-10)).count();
    let worst = report.trials.iter().map(|t| t.tail_ratio).fold(0.0, f64::max);
    let detail = format!("tail ratio <= 0.95 on {contracting}/20 (worst {worst:.4}), capacity monotone on {monotone}/20");
    if !(contracting >= 18 && monotone == 20) {
        return Err(detail);
    }
    within(start, Duration::from_secs(120), detail)
}

fn c9_expansion_chain() -> Outcome {
    let start = Instant::now();
    let frames = balanced_battery();
    let mut min_margin = f64::INFINITY;
    for (i, f) in frames.iter().enumerate() {
        let r = infty_implies_quantum_check(f).map_err(|e| format!("frame {i}: {e}"))?;
        if !r.holds() {
            return Err(format!("frame {i}: {r:?}"));
        }
        min_margin = min_margin
            .min(r.cheeger - r.lambda_infty / 6.0)
            .min(r.lambda_quantum - r.cheeger * r.cheeger);
    }
    within(
        start,
        Duration::from_secs(120),
        format!("{} frames, smallest margin {min_margin:e}", frames.len()),
    )
}

fn c10_pseudo_infty() -> Outcome {
    let start = Instant::now();
    for (i, f) in balanced_battery().iter().enumerate() {
        let s = size(f);
        let eps = error_report(f).balance_ratio();
        let lam = infty_expansion_exact(f).map_err(|e| e.to_string())?.lambda;
        let p = pseudorandom_check(f, Beta::HALF, Mode::Exact, 0, SeedSpec::new(0, 0)).map_err(|e| e.to_string())?;
        let slack = 1e-9 * s;
        let forward = s * (1.0 - lam) <= (s * (1.0 + eps) - p.alpha_min).min(p.alpha_max - s * (1.0 - eps)) + slack;
        let converse = s * (lam - eps) <= p.alpha_min + slack
            && p.alpha_min <= p.alpha_max
            && p.alpha_max <= s * (2.0 - (lam - eps)) + slack;
        if !(forward && converse) {
            return Err(format!("frame {i}: forward {forward}, converse {converse}"));
        }
    }
    within(start, Duration::from_secs(120), "20 frames, both directions".to_string())
}

fn c11_random_expansion() -> Outcome {
    let cfg = ExperimentConfig {
        trials: 100,
        master_seed: 42,
        mode: Mode::Exact,
        ..ExperimentConfig::new(ExperimentKind::ExpansionSurvey, 4, vec![16])
    };
    let report = run_expansion_survey(&cfg).map_err(|e| e.to_string())?;
    let control = report.control().ok_or("missing control row")?;
    let lambdas: Vec<f64> = report.random_rows(16).map(|r| r.lambda_infty).collect();
    let positive = lambdas.iter().filter(|&&l| l > 0.0).count();
    let best = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let median = tyler_bench::stats::median(&lambdas);
    let detail = format!(
        "lambda_infty > 0 on {positive}/100 (median {median:.4}, max {best:.4}); control lambda_infty = {}",
        control.lambda_infty
    );
    check(positive >= 95 && control.lambda_infty == 0.0 && control.mode == Mode::Exact, detail)
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_tyler");
    let runs: [&[&str]; 4] = [
        &["experiment", "sample-complexity", "--d", "4", "--n-grid", "16,32", "--trials", "6", "--radial", "t:3", "--shape", "random:5"],
        &["experiment", "convergence", "--d", "4", "--n", "16", "--trials", "4"],
        &["experiment", "expansion-survey", "--d", "3", "--n-grid", "12,40", "--trials", "5", "--subsets", "200"],
        &["diagnose", "derivatives", "--d", "3", "--n", "7", "--trials", "2"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let path = dir.path().join(format!("run{i}_{rep}.csv"));
            let status = std::process::Command::new(bin)
                .args(*args)
                .arg("--seed")
                .arg("11")
                .arg("--csv")
                .arg(&path)
                .output()
                .map_err(|e| e.to_string())?
                .status;
            if !status.success() {
                return Err(format!("{} exited with {status}", args[..2].join(" ")));
            }
            outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        if outputs[0] != outputs[1] {
            return Err(format!("{} produced different CSV bytes", args[..2].join(" ")));
        }
    }
    Ok(format!("{} experiments rerun with byte-identical CSV", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("fixed-point exactness", c1_fixed_point),
        ("oracle equivalence", c2_oracle),
        ("scaling/estimator correspondence", c3_correspondence),
        ("derivative identities", c4_derivatives),
        ("size monotonicity", c5_size_monotone),
        ("sample-complexity scaling", c6_sample_complexity),
        ("distribution-freeness", c7_distribution_free),
        ("linear convergence", c8_linear_convergence),
        ("expansion chain", c9_expansion_chain),
        ("pseudorandomness vs infinity-expansion", c10_pseudo_infty),
        ("random-frame expansion", c11_random_expansion),
        ("determinism", c12_determinism),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if filter.is_some_and(|f| f != number) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {number:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
