use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tyler_bench::config::{parse_grid, ExperimentConfig, ExperimentKind, RadialSpec, ShapeSpec};
use tyler_bench::experiments::{run_convergence, run_diagnostics, run_expansion_survey, run_sample_complexity, Table};
use tyler_bench::{write_json, write_text, BenchError};
use tyler_core::expansion::{expansion_report, Beta, Mode, ReportOptions};
use tyler_core::io::{format_matrix, read_data, read_frame, MatrixKind};
use tyler_core::sampler::{sample_elliptical, sample_sphere_frame};
use tyler_core::scaler::CHECKPOINT_HEADER;
use tyler_core::tyler::relative_op_error;
use tyler_core::{error_report, solve_scaling, tyler_iterate, EllipticalModel, Frame, Method, SeedSpec, SolverConfig};

/// Exit status of a diagnostic run whose checks failed.
const DIAGNOSTIC_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "tyler", version, about = "Tyler's M-estimator via frame scaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the shape matrix of a data file or of a seeded sample.
    Estimate(EstimateArgs),
    /// Scale a frame to doubly balanced.
    Scale(ScaleArgs),
    /// Expansion certificates of a frame.
    Expansion(ExpansionArgs),
    #[command(subcommand)]
    Experiment(Experiment),
    #[command(subcommand)]
    Diagnose(Diagnose),
}

#[derive(Subcommand)]
enum Experiment {
    /// Relative operator error against n.
    SampleComplexity(SweepArgs),
    /// Per-iteration gap to the limit for one n.
    Convergence(SweepArgs),
    /// Expansion and pseudorandomness of sphere-uniform frames.
    ExpansionSurvey(SweepArgs),
}

#[derive(Subcommand)]
enum Diagnose {
    /// Finite-difference check of the flow derivative identities.
    Derivatives(SweepArgs),
}

#[derive(Args, Clone)]
struct SampleArgs {
    /// Matrix file; when absent a seeded sample is drawn.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "constant")]
    radial: String,
    #[arg(long, default_value = "identity")]
    shape: String,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value = "flipflop")]
    method: String,
    /// Trajectory checkpoints.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExpansionArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, default_value = "1/2")]
    beta: String,
    #[arg(long, default_value = "exact")]
    mode: String,
    #[arg(long, default_value_t = 2000)]
    subsets: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Single column count (convergence, diagnostics).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "constant")]
    radial: String,
    #[arg(long, default_value = "identity")]
    shape: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value = "sampled")]
    mode: String,
    #[arg(long, default_value_t = 2000)]
    subsets: usize,
    #[arg(long, default_value = "1/2")]
    beta: String,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

impl SweepArgs {
    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig, BenchError> {
        let n_grid = match (&self.n_grid, self.n) {
            (Some(_), Some(_)) => return Err(BenchError::Config("give either --n or --n-grid".into())),
            (Some(g), None) => parse_grid(g)?,
            (None, Some(n)) => vec![n],
            (None, None) => vec![4 * self.d],
        };
        let cfg = ExperimentConfig {
            trials: self.trials,
            radial: self.radial.parse()?,
            shape: self.shape.parse()?,
            master_seed: self.seed,
            tol: self.tol,
            subsets: self.subsets,
            mode: self.mode.parse::<Mode>()?,
            beta: self.beta.parse::<Beta>()?,
            csv: self.csv.clone(),
            json: self.json.clone(),
            ..ExperimentConfig::new(kind, self.d, n_grid)
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit<T: Serialize>(cfg: &ExperimentConfig, table: &Table, report: &T) -> Result<(), BenchError> {
    let csv = table.to_csv();
    match &cfg.csv {
        Some(path) => {
            write_text(path, &csv)?;
            for line in &table.summary {
                println!("{line}");
            }
        }
        None => print!("{csv}"),
    }
    if let Some(path) = &cfg.json {
        write_json(path, report)?;
    }
    Ok(())
}

fn parse_method(s: &str) -> Result<Method, BenchError> {
    match s {
        "flipflop" => Ok(Method::FlipFlop),
        "flow" => Ok(Method::Flow),
        _ => Err(BenchError::Config(format!("unknown method {s:?}; expected flipflop or flow"))),
    }
}

fn sample_model(args: &SampleArgs) -> Result<EllipticalModel, BenchError> {
    let shape: ShapeSpec = args.shape.parse()?;
    let radial: RadialSpec = args.radial.parse()?;
    Ok(EllipticalModel::new(shape.build(args.d)?, radial.0)?)
}

fn load_frame(args: &SampleArgs) -> Result<Frame, BenchError> {
    match &args.input {
        Some(path) => Ok(read_frame(path)?),
        None => Ok(sample_sphere_frame(args.d, args.n, SeedSpec::new(args.seed, 0))?),
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    #[serde(flatten)]
    result: tyler_core::EstimatorResult,
    /// Error against the sampling shape, for seeded samples.
    rel_op_error: Option<f64>,
}

fn estimate(args: &EstimateArgs) -> Result<(), BenchError> {
    let (x, model) = match &args.sample.input {
        Some(path) => (read_data(path)?, None),
        None => {
            let model = sample_model(&args.sample)?;
            let x = sample_elliptical(&model, args.sample.n, SeedSpec::new(args.sample.seed, 0))?;
            (x, Some(model))
        }
    };
    let config = SolverConfig {
        tol: args.tol,
        ..SolverConfig::tyler_default(x.nrows())
    };
    let result = tyler_iterate(&x, &config)?;
    let rel_op_error = match &model {
        Some(m) => Some(relative_op_error(m.sigma(), &result.sigma_hat)?),
        None => None,
    };
    println!(
        "# iterations {} converged {} residual {:.3e}",
        result.iterations, result.converged, result.residual
    );
    if let Some(e) = rel_op_error {
        println!("# rel_op_error {e:.6e}");
    }
    print!("{}", format_matrix(result.sigma_hat.matrix(), MatrixKind::Frame));
    if let Some(path) = &args.json {
        write_json(path, &EstimateOutput { result, rel_op_error })?;
    }
    Ok(())
}

fn scale(args: &ScaleArgs) -> Result<(), BenchError> {
    let frame = load_frame(&args.sample)?;
    let method = parse_method(&args.method)?;
    let config = SolverConfig::new(args.tol, 100_000)?;
    let sol = solve_scaling(&frame, &config, method)?;
    let report = error_report(&sol.frame);
    println!(
        "# method {:?} converged {} iterations {} op_error/s {:.3e}",
        sol.method, sol.converged, sol.iterations, sol.final_ratio
    );
    print!("{}", format_matrix(sol.frame.matrix(), MatrixKind::Frame));
    if let Some(path) = &args.csv {
        let mut text = String::from(CHECKPOINT_HEADER);
        text.push('\n');
        for c in &sol.trajectory {
            text.push_str(&c.csv_row());
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    if let Some(path) = &args.json {
        #[derive(Serialize)]
        struct Out<'a> {
            solution: &'a tyler_core::ScalingSolution,
            balanced: &'a tyler_core::ErrorReport,
        }
        write_json(path, &Out { solution: &sol, balanced: &report })?;
    }
    Ok(())
}

fn expansion(args: &ExpansionArgs) -> Result<(), BenchError> {
    let frame = load_frame(&args.sample)?;
    let opts = ReportOptions {
        beta: args.beta.parse()?,
        mode: args.mode.parse()?,
        trials: args.subsets,
        seed: SeedSpec::new(args.sample.seed, 1),
    };
    let report = expansion_report(&frame, &opts)?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.command {
        Command::Estimate(args) => estimate(&args)?,
        Command::Scale(args) => scale(&args)?,
        Command::Expansion(args) => expansion(&args)?,
        Command::Experiment(Experiment::SampleComplexity(args)) => {
            let cfg = args.config(ExperimentKind::SampleComplexity)?;
            let report = run_sample_complexity(&cfg)?;
            emit(&cfg, &report.table(), &report)?;
        }
        Command::Experiment(Experiment::Convergence(args)) => {
            let cfg = args.config(ExperimentKind::Convergence)?;
            let report = run_convergence(&cfg)?;
            emit(&cfg, &report.table(), &report)?;
        }
        Command::Experiment(Experiment::ExpansionSurvey(args)) => {
            let cfg = args.config(ExperimentKind::ExpansionSurvey)?;
            let report = run_expansion_survey(&cfg)?;
            emit(&cfg, &report.table(), &report)?;
        }
        Command::Diagnose(Diagnose::Derivatives(args)) => {
            let cfg = args.config(ExperimentKind::Diagnostics)?;
            let report = run_diagnostics(&cfg)?;
            emit(&cfg, &report.table(), &report)?;
            if !report.passed {
                eprintln!("derivative check failed");
                return Ok(ExitCode::from(DIAGNOSTIC_FAILURE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
