//! Seeded generation of elliptical data, sphere-uniform frames and Gaussian frames.
//!
//! Every draw comes from a ChaCha8 stream keyed by `(master_seed, stream_index)`,
//! so each trial is reproducible on its own and trials can run in any order.
//! Standard normals are produced with the Box–Muller transform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::linalg::{inv_sqrt_pd, sqrt_psd};
use crate::tyler::ShapePD;

/// Salt separating the radial stream from the direction stream of one trial.
const RADIAL_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Mantissa bits kept for directions and radii of elliptical samples. The sum
/// stays within the 53-bit f64 significand, so `radius · direction` is exact
/// and column normalization removes the radius bit-for-bit.
const DIRECTION_BITS: u32 = 32;
const RADIUS_BITS: u32 = 21;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.salted_rng(0)
    }

    fn salted_rng(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed ^ salt);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Standard normal variates via Box–Muller over a uniform stream.
pub struct Gaussian<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> Gaussian<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn vector(&mut self, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| self.next())
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// Radial law of an elliptical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialLaw {
    /// `u = 1`.
    Constant,
    /// `u = ‖g‖₂` with `g ~ N(0, I_d)`, which makes the model Gaussian.
    GaussianNorm,
    /// Multivariate t: `u = ‖g‖₂ / √(w/ν)` with `w ~ χ²(ν)`.
    StudentT { nu: f64 },
}

/// Elliptical model `E(Σ, u)`: `x = Σ^{1/2} · (sphere draw) · (radial draw)`.
#[derive(Debug, Clone)]
pub struct EllipticalModel {
    sigma: ShapePD,
    sigma_sqrt: DMatrix<f64>,
    radial: RadialLaw,
}

impl EllipticalModel {
    pub fn new(sigma: ShapePD, radial: RadialLaw) -> Result<Self> {
        if let RadialLaw::StudentT { nu } = radial {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::Config(format!(
                    "student-t degrees of freedom must be positive, got {nu}"
                )));
            }
        }
        let sigma_sqrt = sqrt_psd(sigma.matrix());
        Ok(Self {
            sigma,
            sigma_sqrt,
            radial,
        })
    }

    pub fn sigma(&self) -> &ShapePD {
        &self.sigma
    }

    pub fn radial(&self) -> RadialLaw {
        self.radial
    }

    pub fn d(&self) -> usize {
        self.sigma.d()
    }
}

fn unit_gaussian_direction<R: Rng>(gauss: &mut Gaussian<R>, d: usize) -> DVector<f64> {
    loop {
        let g = gauss.vector(d);
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Uniform draw from the unit sphere `S^{d-1}`.
pub fn sample_sphere(d: usize, seed: SeedSpec) -> Result<DVector<f64>> {
    if d == 0 {
        return Err(Error::Dimension("sphere dimension must be positive".into()));
    }
    let mut gauss = Gaussian::new(seed.rng());
    Ok(unit_gaussian_direction(&mut gauss, d))
}

/// `n` i.i.d. sphere-uniform columns as a `d × n` matrix.
pub fn sample_sphere_matrix(d: usize, n: usize, seed: SeedSpec) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::Dimension("sphere dimension must be positive".into()));
    }
    let mut gauss = Gaussian::new(seed.rng());
    let cols: Vec<_> = (0..n)
        .map(|_| unit_gaussian_direction(&mut gauss, d))
        .collect();
    Ok(DMatrix::from_columns(&cols))
}

/// Sphere-uniform frame; fails only in the measure-zero event of a non-spanning draw.
pub fn sample_sphere_frame(d: usize, n: usize, seed: SeedSpec) -> Result<Frame> {
    Frame::new(sample_sphere_matrix(d, n, seed)?)
}

/// Round `x` to `bits` significant mantissa bits (round half away from zero).
fn round_mantissa(x: f64, bits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let drop = 52 - (bits - 1);
    let raw = x.to_bits();
    let half = 1u64 << (drop - 1);
    let mask = !((1u64 << drop) - 1);
    f64::from_bits((raw + half) & mask)
}

fn radial_draw<R: Rng>(law: RadialLaw, gauss: &mut Gaussian<R>, d: usize) -> f64 {
    match law {
        RadialLaw::Constant => 1.0,
        RadialLaw::GaussianNorm => gauss.vector(d).norm(),
        RadialLaw::StudentT { nu } => {
            let g = gauss.vector(d).norm();
            let chi = ChiSquared::new(nu).expect("validated at model construction");
            let w: f64 = chi.sample(gauss.rng_mut());
            g / (w / nu).sqrt()
        }
    }
}

/// Draw `n` columns from the elliptical model.
///
/// Directions and radii come from separate streams of the same seed, so models
/// that differ only in their radial law share the exact same directions.
pub fn sample_elliptical(model: &EllipticalModel, n: usize, seed: SeedSpec) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Dimension("sample count must be positive".into()));
    }
    let d = model.d();
    let mut directions = Gaussian::new(seed.rng());
    let mut radii = Gaussian::new(seed.salted_rng(RADIAL_SALT));
    let mut out = DMatrix::zeros(d, n);
    for j in 0..n {
        let u = unit_gaussian_direction(&mut directions, d);
        let w = (&model.sigma_sqrt * u).map(|x| round_mantissa(x, DIRECTION_BITS));
        let r = round_mantissa(radial_draw(model.radial, &mut radii, d), RADIUS_BITS);
        out.set_column(j, &(w * r));
    }
    Ok(out)
}

/// Gaussian frame with i.i.d. `N(0, variance)` entries.
pub fn sample_gaussian_frame(d: usize, n: usize, variance: f64, seed: SeedSpec) -> Result<Frame> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Config(format!("variance must be positive, got {variance}")));
    }
    let sd = variance.sqrt();
    let mut gauss = Gaussian::new(seed.rng());
    let m = DMatrix::from_fn(d, n, |_, _| sd * gauss.next());
    Frame::new(m)
}

/// Scale each column to unit Euclidean norm.
///
/// Columns are first divided by their largest absolute entry. IEEE division is
/// correctly rounded, so for any exactly representable positive rescaling
/// `x → c·x` that first step, and therefore the whole result, is bit-identical.
pub fn normalize_columns_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    crate::linalg::ensure_finite(x)?;
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let peak = col.amax();
        if peak == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
        col.iter_mut().for_each(|v| *v /= peak);
        let norm = col.norm();
        col.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(out)
}

/// Unit-column frame from raw data. Fails on zero columns or non-spanning data.
pub fn normalize_columns(x: &DMatrix<f64>) -> Result<Frame> {
    Frame::new(normalize_columns_matrix(x)?)
}

/// Whitened unit columns `Σ^{-1/2}x_j / ‖Σ^{-1/2}x_j‖₂` for a known shape `Σ`.
pub fn whiten(x: &DMatrix<f64>, sigma: &ShapePD) -> Result<Frame> {
    if x.nrows() != sigma.d() {
        return Err(Error::Dimension(format!(
            "data has {} rows but shape is {}x{}",
            x.nrows(),
            sigma.d(),
            sigma.d()
        )));
    }
    for (j, col) in x.column_iter().enumerate() {
        if col.amax() == 0.0 {
            return Err(Error::ZeroColumn { index: j });
        }
    }
    let w = inv_sqrt_pd(sigma.matrix())? * x;
    normalize_columns(&w)
}
