//! Tyler's M-estimator computed through frame scaling.
//!
//! A data matrix `X` is normalized to unit columns, and the estimator is read
//! off the left factor of a doubly balanced scaling of that frame. The crate
//! also provides seeded samplers, frame error measures, the Flip-Flop and
//! gradient-flow solvers, and expansion certificates.

pub mod error;
pub mod expansion;
pub mod frame;
pub mod io;
pub mod linalg;
pub mod sampler;
pub mod scaler;
pub mod subsets;
pub mod tyler;

pub use error::{Error, Result};
pub use expansion::{Beta, ExpansionReport, Mode, SubsetProbe};
pub use frame::{error_report, is_eps_doubly_balanced, size, ErrorReport, Frame};
pub use sampler::{EllipticalModel, RadialLaw, SeedSpec};
pub use scaler::{solve_scaling, Method, ScalingPair, ScalingSolution, SolverConfig};
pub use tyler::{tyler_iterate, EstimatorResult, ShapePD};
