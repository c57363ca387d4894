//! Experiment configuration and the string forms accepted on the command line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;
use tyler_core::expansion::{Beta, Mode};
use tyler_core::sampler::Gaussian;
use tyler_core::{RadialLaw, SeedSpec, ShapePD};

use crate::BenchError;

/// Shape matrix of the sampling model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSpec {
    Identity,
    /// Diagonal with eigenvalues log-spaced from `κ` down to 1.
    Condition(f64),
    /// `GGᵀ + I` for a seeded Gaussian `G`.
    Random(u64),
}

impl ShapeSpec {
    pub fn build(&self, d: usize) -> Result<ShapePD, BenchError> {
        let shape = match *self {
            ShapeSpec::Identity => ShapePD::identity(d),
            ShapeSpec::Condition(kappa) => {
                let diag: Vec<f64> = (0..d)
                    .map(|i| {
                        let t = if d == 1 { 0.0 } else { i as f64 / (d - 1) as f64 };
                        kappa.powf(1.0 - t)
                    })
                    .collect();
                ShapePD::from_diagonal(&diag)?
            }
            ShapeSpec::Random(seed) => {
                let mut g = Gaussian::new(SeedSpec::new(seed, u64::MAX).rng());
                let a = DMatrix::from_fn(d, d, |_, _| g.next());
                ShapePD::normalized(&a * a.transpose() / d as f64 + DMatrix::identity(d, d))?
            }
        };
        Ok(shape)
    }
}

impl FromStr for ShapeSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        if s == "identity" {
            return Ok(ShapeSpec::Identity);
        }
        if let Some(k) = s.strip_prefix("cond:") {
            let kappa: f64 = k.parse().map_err(|_| BenchError::Config(format!("bad condition number {k:?}")))?;
            if !(kappa > 1.0 && kappa.is_finite()) {
                return Err(BenchError::Config(format!("condition number must exceed 1, got {kappa}")));
            }
            return Ok(ShapeSpec::Condition(kappa));
        }
        if let Some(seed) = s.strip_prefix("random:") {
            let seed = seed.parse().map_err(|_| BenchError::Config(format!("bad shape seed {seed:?}")))?;
            return Ok(ShapeSpec::Random(seed));
        }
        Err(BenchError::Config(format!(
            "unknown shape {s:?}; expected identity, cond:K or random:SEED"
        )))
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeSpec::Identity => write!(f, "identity"),
            ShapeSpec::Condition(k) => write!(f, "cond:{k}"),
            ShapeSpec::Random(s) => write!(f, "random:{s}"),
        }
    }
}

/// Radial law tag: `constant`, `gaussian` or `t:NU`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSpec(pub RadialLaw);

impl FromStr for RadialSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let law = match s {
            "constant" => RadialLaw::Constant,
            "gaussian" => RadialLaw::GaussianNorm,
            _ => match s.strip_prefix("t:") {
                Some(nu) => {
                    let nu: f64 = nu.parse().map_err(|_| BenchError::Config(format!("bad degrees of freedom {nu:?}")))?;
                    RadialLaw::StudentT { nu }
                }
                None => {
                    return Err(BenchError::Config(format!(
                        "unknown radial law {s:?}; expected constant, gaussian or t:NU"
                    )))
                }
            },
        };
        Ok(RadialSpec(law))
    }
}

impl fmt::Display for RadialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            RadialLaw::Constant => write!(f, "constant"),
            RadialLaw::GaussianNorm => write!(f, "gaussian"),
            RadialLaw::StudentT { nu } => write!(f, "t:{nu}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SampleComplexity,
    Convergence,
    ExpansionSurvey,
    Diagnostics,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub radial: RadialSpec,
    pub shape: ShapeSpec,
    pub master_seed: u64,
    pub tol: f64,
    /// Subset samples per trial in sampled expansion mode.
    pub subsets: usize,
    pub mode: Mode,
    pub beta: Beta,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, d: usize, n_grid: Vec<usize>) -> Self {
        Self {
            kind,
            d,
            n_grid,
            trials: 1,
            radial: RadialSpec(RadialLaw::Constant),
            shape: ShapeSpec::Identity,
            master_seed: 0,
            tol: 1e-8,
            subsets: 2000,
            mode: Mode::Sampled,
            beta: Beta::HALF,
            csv: None,
            json: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.d == 0 {
            return Err(BenchError::Config("d must be positive".into()));
        }
        if self.n_grid.is_empty() {
            return Err(BenchError::Config("n grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::Config(format!("n grid must be strictly increasing: {:?}", self.n_grid)));
        }
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(BenchError::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if let RadialLaw::StudentT { nu } = self.radial.0 {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(BenchError::Config(format!("degrees of freedom must be positive, got {nu}")));
            }
        }
        if let ShapeSpec::Condition(k) = self.shape {
            if !(k > 1.0) {
                return Err(BenchError::Config(format!("condition number must exceed 1, got {k}")));
            }
        }
        match self.kind {
            ExperimentKind::SampleComplexity => {
                if let Some(&n) = self.n_grid.iter().find(|&&n| n < self.d) {
                    return Err(BenchError::Config(format!("n = {n} is below d = {}", self.d)));
                }
            }
            ExperimentKind::Convergence => {
                if self.n_grid.len() != 1 {
                    return Err(BenchError::Config("convergence runs take a single n".into()));
                }
                if self.n_grid[0] < 2 * self.d {
                    return Err(BenchError::Config(format!(
                        "convergence runs need n >= 2d, got n = {} with d = {}",
                        self.n_grid[0], self.d
                    )));
                }
            }
            ExperimentKind::ExpansionSurvey => {
                if self.subsets == 0 {
                    return Err(BenchError::Config("subset samples must be positive".into()));
                }
                if let Some(&n) = self.n_grid.iter().find(|&&n| n < self.d) {
                    return Err(BenchError::Config(format!("n = {n} is below d = {}", self.d)));
                }
            }
            ExperimentKind::Diagnostics => {}
        }
        Ok(())
    }
}

/// Parse `a,b,c` into a list of counts.
pub fn parse_grid(s: &str) -> Result<Vec<usize>, BenchError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| BenchError::Config(format!("bad grid entry {t:?}")))
        })
        .collect()
}
