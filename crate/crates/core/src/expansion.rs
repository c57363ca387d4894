//! Expansion certificates for frames.
//!
//! * quantum expansion: `sup_{y ⊥ 1, ‖y‖₂ ≤ 1} ‖Σ_j y_j v_j v_jᵀ‖_F ≤ s(1−λ)/√(dn)`;
//! * ∞-expansion: `sup_{y ⊥ 1, ‖y‖_∞ ≤ 1} ‖Σ_j y_j v_j v_jᵀ‖_op ≤ s(1−λ)/d`;
//! * `(α_min, α_max, β)`-pseudorandomness: `β·α_min/d·I ⪯ V_B V_Bᵀ ⪯ β·α_max/d·I`
//!   for every `|B| = βn`;
//! * the Cheeger quantity `ch(V)` of a doubly balanced frame.
//!
//! Exact routines enumerate subsets and report `Mode::Exact`; sampled routines
//! give one-sided bounds and report `Mode::Sampled`. Every λ is the value that
//! makes the defining inequality tight; it can be negative for frames far from
//! balanced.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frame::{error_report, size, Frame};
use crate::linalg::{self, SortedEigen};
use crate::sampler::SeedSpec;
use crate::subsets::{binomial, par_fold_subsets, random_subset};

/// Largest `n` for exact ∞-expansion.
pub const EXACT_INFTY_MAX_N: usize = 20;
/// Largest subset count for exact pseudorandomness.
pub const EXACT_PSEUDO_MAX_SUBSETS: u64 = 2_000_000;
/// Largest `n` for the exact Cheeger quantity.
pub const EXACT_CHEEGER_MAX_N: usize = 16;
/// Largest `n` for exact quantum expansion.
pub const EXACT_QUANTUM_MAX_N: usize = 2000;
/// Balance required by the Cheeger computation.
pub const CHEEGER_BALANCE_TOL: f64 = 1e-8;
/// Numerical slack on the inequalities of [`infty_implies_quantum_check`].
pub const CHAIN_SLACK: f64 = 1e-9;

/// Whether a value came from full enumeration or from sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Subset fraction `β = num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Beta {
    pub num: usize,
    pub den: usize,
}

impl Beta {
    pub const HALF: Beta = Beta { num: 1, den: 2 };
    pub const QUARTER: Beta = Beta { num: 1, den: 4 };

    /// Accepts `0 < num/den ≤ 1/2`.
    pub fn new(num: usize, den: usize) -> Result<Self> {
        if num == 0 || den == 0 || 2 * num > den {
            return Err(Error::Config(format!("beta must lie in (0, 1/2], got {num}/{den}")));
        }
        Ok(Self { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `βn`, which must be an integer.
    pub fn subset_size(&self, n: usize) -> Result<usize> {
        if !(n * self.num).is_multiple_of(self.den) {
            return Err(Error::Config(format!(
                "beta * n = {}*{}/{} is not an integer",
                n, self.num, self.den
            )));
        }
        Ok(n * self.num / self.den)
    }

    /// `2β`.
    pub fn doubled(&self) -> Beta {
        if self.den.is_multiple_of(2) {
            Beta {
                num: self.num,
                den: self.den / 2,
            }
        } else {
            Beta {
                num: 2 * self.num,
                den: self.den,
            }
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, q) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("beta must look like P/Q, got {s:?}")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad beta component {t:?}")))
        };
        Beta::new(parse(p)?, parse(q)?)
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn one_based<S: Serializer>(subset: &[usize], serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(subset.iter().map(|i| i + 1))
}

/// Test direction, column subset and subspace attaining an extremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetProbe {
    /// Test vector (zero-sum).
    pub y: Vec<f64>,
    /// Column subset, serialized with 1-based indices.
    #[serde(serialize_with = "one_based")]
    pub subset: Vec<usize>,
    /// Subspace dimension (Cheeger probes).
    pub a_dim: usize,
    /// Row-major `d × a_dim` orthonormal basis of the subspace (Cheeger probes).
    pub a_basis: Option<Vec<f64>>,
}

impl SubsetProbe {
    fn from_subset(n: usize, subset: Vec<usize>) -> Self {
        let mut y = vec![1.0; n];
        for &j in &subset {
            y[j] = -1.0;
        }
        Self {
            y,
            subset,
            a_dim: 0,
            a_basis: None,
        }
    }
}

/// Extremum over subsets with deterministic tie-breaking by the
/// lexicographically smallest subset.
#[derive(Debug, Clone)]
struct Best {
    value: f64,
    subset: Vec<usize>,
}

impl Best {
    fn empty(sign: f64) -> Self {
        Self {
            value: sign * f64::INFINITY,
            subset: Vec::new(),
        }
    }

    /// `better` returns Ordering::Less when `a` beats `b`.
    fn pick(a: Best, b: Best, better: impl Fn(f64, f64) -> Ordering) -> Best {
        if a.subset.is_empty() {
            return b;
        }
        if b.subset.is_empty() {
            return a;
        }
        match better(a.value, b.value) {
            Ordering::Less => a,
            Ordering::Greater => b,
            Ordering::Equal => {
                if a.subset <= b.subset {
                    a
                } else {
                    b
                }
            }
        }
    }
}

fn max_first(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

fn min_first(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

fn subset_gram(v: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    let d = v.nrows();
    let mut g = DMatrix::zeros(d, d);
    for &j in subset {
        let c = v.column(j);
        g.ger(1.0, &c, &c, 1.0);
    }
    g
}

/// `‖Σ_j y_j v_j v_jᵀ‖_op` for an arbitrary weight vector.
pub fn weighted_op_norm(frame: &Frame, y: &[f64]) -> Result<f64> {
    if y.len() != frame.n() {
        return Err(Error::Dimension(format!("expected {} weights, got {}", frame.n(), y.len())));
    }
    let v = frame.matrix();
    let d = frame.d();
    let mut m = DMatrix::zeros(d, d);
    for (j, &w) in y.iter().enumerate() {
        let c = v.column(j);
        m.ger(w, &c, &c, 1.0);
    }
    Ok(linalg::op_norm_symmetric_unchecked(&m))
}

/// Result of a quantum-expansion computation.
#[derive(Debug, Clone, Serialize)]
pub struct QuantumExpansion {
    pub lambda: f64,
    /// `sup ‖Σ_j y_j v_j v_jᵀ‖_F` over unit zero-sum `y`.
    pub sup: f64,
    pub witness: SubsetProbe,
}

/// Exact quantum expansion: top singular value of `y ↦ vec(Σ_j y_j v_j v_jᵀ)`
/// restricted to `y ⊥ 1_n`.
pub fn quantum_expansion_exact(frame: &Frame) -> Result<QuantumExpansion> {
    let (d, n) = (frame.d(), frame.n());
    if n > EXACT_QUANTUM_MAX_N {
        return Err(Error::Config(format!(
            "exact quantum expansion supports n <= {EXACT_QUANTUM_MAX_N}, got {n}"
        )));
    }
    let v = frame.matrix();
    // Columns vec(v_j v_jᵀ), centered so the map acts on 1_n^⊥.
    let mut a = DMatrix::zeros(d * d, n);
    for j in 0..n {
        let c = v.column(j);
        for q in 0..d {
            for p in 0..d {
                a[(q * d + p, j)] = c[p] * c[q];
            }
        }
    }
    let mean = a.column_mean();
    for mut col in a.column_iter_mut() {
        col -= &mean;
    }
    let gram = &a * a.transpose();
    let eig = SortedEigen::new(&gram);
    let top = eig.max().max(0.0);
    let sup = top.sqrt();
    let y = if sup > 1e-300 {
        let u = eig.vectors.column(d * d - 1);
        let mut y = a.transpose() * u / sup;
        let mean = y.mean();
        y.add_scalar_mut(-mean);
        let norm = y.norm();
        y / norm
    } else {
        let mut y = DVector::zeros(n);
        if n >= 2 {
            y[0] = std::f64::consts::FRAC_1_SQRT_2;
            y[1] = -std::f64::consts::FRAC_1_SQRT_2;
        }
        y
    };
    let s = size(frame);
    Ok(QuantumExpansion {
        lambda: 1.0 - sup * ((d * n) as f64).sqrt() / s,
        sup,
        witness: SubsetProbe {
            y: y.iter().copied().collect(),
            subset: Vec::new(),
            a_dim: 0,
            a_basis: None,
        },
    })
}

/// Result of an ∞-expansion computation.
#[derive(Debug, Clone, Serialize)]
pub struct InftyExpansion {
    /// Exact λ, or an upper bound on it when sampled.
    pub lambda: f64,
    /// Largest `‖V diag(y) Vᵀ‖_op` over the examined vertices.
    pub sup: f64,
    pub mode: Mode,
    pub vertices_examined: u64,
    pub witness: SubsetProbe,
    pub seed: Option<SeedSpec>,
}

fn ensure_even(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddColumnCount { n });
    }
    Ok(())
}

fn vertex_value(v: &DMatrix<f64>, gram: &DMatrix<f64>, subset: &[usize]) -> f64 {
    let m = gram - subset_gram(v, subset) * 2.0;
    linalg::op_norm_symmetric_unchecked(&m)
}

fn infty_from_best(frame: &Frame, best: Best, mode: Mode, examined: u64, seed: Option<SeedSpec>) -> InftyExpansion {
    let s = size(frame);
    InftyExpansion {
        lambda: 1.0 - best.value * frame.d() as f64 / s,
        sup: best.value,
        mode,
        vertices_examined: examined,
        witness: SubsetProbe::from_subset(frame.n(), best.subset),
        seed,
    }
}

/// Exact ∞-expansion over the balanced sign vertices `y = 1 − 2·1_B`, `|B| = n/2`.
///
/// The objective is convex in `y`, so its maximum over the polytope
/// `{y ⊥ 1, ‖y‖_∞ ≤ 1}` sits at a vertex. `B` and its complement give the same
/// value, so only subsets containing column 0 are visited.
pub fn infty_expansion_exact(frame: &Frame) -> Result<InftyExpansion> {
    let n = frame.n();
    ensure_even(n)?;
    if n > EXACT_INFTY_MAX_N {
        return Err(Error::Config(format!(
            "exact infinity-expansion supports n <= {EXACT_INFTY_MAX_N}, got {n}"
        )));
    }
    let v = frame.matrix();
    let gram = frame.gram();
    let half = n / 2;
    let best = par_fold_subsets(
        n - 1,
        half - 1,
        || Best::empty(-1.0),
        |acc, rest| {
            let mut subset = Vec::with_capacity(half);
            subset.push(0);
            subset.extend(rest.iter().map(|j| j + 1));
            let value = vertex_value(v, &gram, &subset);
            Best::pick(acc, Best { value, subset }, max_first)
        },
        |a, b| Best::pick(a, b, max_first),
    );
    Ok(infty_from_best(frame, best, Mode::Exact, binomial(n - 1, half - 1), None))
}

/// Sampled ∞-expansion: the max over `trials` random balanced vertices, a
/// certified upper bound on λ. Falls back to exact enumeration when `trials`
/// covers every vertex.
pub fn infty_expansion_sampled(frame: &Frame, trials: usize, seed: SeedSpec) -> Result<InftyExpansion> {
    let n = frame.n();
    ensure_even(n)?;
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    if n <= EXACT_INFTY_MAX_N && trials as u64 >= binomial(n, n / 2) {
        return infty_expansion_exact(frame);
    }
    let mut rng = seed.rng();
    let subsets: Vec<Vec<usize>> = (0..trials).map(|_| random_subset(&mut rng, n, n / 2)).collect();
    let v = frame.matrix();
    let gram = frame.gram();
    let best = subsets
        .into_par_iter()
        .map(|subset| Best {
            value: vertex_value(v, &gram, &subset),
            subset,
        })
        .reduce(|| Best::empty(-1.0), |a, b| Best::pick(a, b, max_first));
    Ok(infty_from_best(frame, best, Mode::Sampled, trials as u64, Some(seed)))
}

/// Result of a pseudorandomness computation.
#[derive(Debug, Clone, Serialize)]
pub struct Pseudorandom {
    /// Exact, or an upper bound when sampled.
    pub alpha_min: f64,
    /// Exact, or a lower bound when sampled.
    pub alpha_max: f64,
    pub beta: Beta,
    pub mode: Mode,
    pub subsets_examined: u64,
    pub min_witness: SubsetProbe,
    pub max_witness: SubsetProbe,
    pub seed: Option<SeedSpec>,
}

#[derive(Debug, Clone)]
struct Extremes {
    low: Best,
    high: Best,
}

impl Extremes {
    fn empty() -> Self {
        Self {
            low: Best::empty(1.0),
            high: Best::empty(-1.0),
        }
    }

    fn merge(a: Extremes, b: Extremes) -> Extremes {
        Extremes {
            low: Best::pick(a.low, b.low, min_first),
            high: Best::pick(a.high, b.high, max_first),
        }
    }

    fn of(v: &DMatrix<f64>, subset: &[usize]) -> Extremes {
        let eig = SortedEigen::new(&subset_gram(v, subset));
        Extremes {
            low: Best {
                value: eig.min(),
                subset: subset.to_vec(),
            },
            high: Best {
                value: eig.max(),
                subset: subset.to_vec(),
            },
        }
    }
}

/// `α_min = (d/β)·min_B λ_min(V_B V_Bᵀ)` and `α_max = (d/β)·max_B λ_max(V_B V_Bᵀ)`
/// over `|B| = βn`.
pub fn pseudorandom_check(frame: &Frame, beta: Beta, mode: Mode, trials: usize, seed: SeedSpec) -> Result<Pseudorandom> {
    let (d, n) = (frame.d(), frame.n());
    let k = beta.subset_size(n)?;
    let total = binomial(n, k);
    let v = frame.matrix();
    let exhaustive = match mode {
        Mode::Exact => {
            if total > EXACT_PSEUDO_MAX_SUBSETS {
                return Err(Error::Config(format!(
                    "exact pseudorandomness needs C({n}, {k}) <= {EXACT_PSEUDO_MAX_SUBSETS}, got {total}"
                )));
            }
            true
        }
        Mode::Sampled => {
            if trials == 0 {
                return Err(Error::Config("trials must be positive".into()));
            }
            trials as u64 >= total
        }
    };
    let (ext, examined, used_seed) = if exhaustive {
        let ext = par_fold_subsets(
            n,
            k,
            Extremes::empty,
            |acc, subset| Extremes::merge(acc, Extremes::of(v, subset)),
            Extremes::merge,
        );
        (ext, total, None)
    } else {
        let mut rng = seed.rng();
        let subsets: Vec<Vec<usize>> = (0..trials).map(|_| random_subset(&mut rng, n, k)).collect();
        let ext = subsets
            .par_iter()
            .map(|s| Extremes::of(v, s))
            .reduce(Extremes::empty, Extremes::merge);
        (ext, trials as u64, Some(seed))
    };
    let scale = d as f64 / beta.value();
    Ok(Pseudorandom {
        alpha_min: scale * ext.low.value,
        alpha_max: scale * ext.high.value,
        beta,
        mode: if exhaustive { Mode::Exact } else { Mode::Sampled },
        subsets_examined: examined,
        min_witness: SubsetProbe::from_subset(n, ext.low.subset),
        max_witness: SubsetProbe::from_subset(n, ext.high.subset),
        seed: used_seed,
    })
}

/// Lower bound on λ for ∞-expansion from `β = 1/2` pseudorandomness of an
/// ε-doubly balanced frame of size `s`:
/// `λ ≥ 1 − min{s(1+ε) − α_min, α_max − s(1−ε)} / s`, clamped to `[0, 1]`.
pub fn pseudo_to_infty_bounds(alpha_min: f64, alpha_max: f64, s: f64, eps: f64) -> f64 {
    let slack = (s * (1.0 + eps) - alpha_min).min(alpha_max - s * (1.0 - eps));
    (1.0 - slack / s).clamp(0.0, 1.0)
}

/// Pseudorandom constants implied by ∞-expansion:
/// `α_min ≥ s(λ − ε)` and `α_max ≤ s(2 − (λ − ε))`.
pub fn infty_to_pseudo_bounds(lambda: f64, s: f64, eps: f64) -> (f64, f64) {
    (s * (lambda - eps), s * (2.0 - (lambda - eps)))
}

/// Pseudorandomness retained by column normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalvingBound {
    /// Lower bound on `α_min` of the normalized frame.
    pub alpha_min_bound: f64,
    /// Subset fraction `2β` at which the bound applies.
    pub beta: Beta,
}

/// For `G` with constants `(α_min, α_max, β)`, the column-normalized frame
/// (size `n`) has `α_min ≥ n·α_min / (2·α_max)` at fraction `2β`.
pub fn infty_to_pseudo_halving(alpha_min_g: f64, alpha_max_g: f64, beta: Beta, n: usize) -> HalvingBound {
    HalvingBound {
        alpha_min_bound: n as f64 * alpha_min_g / (2.0 * alpha_max_g),
        beta: beta.doubled(),
    }
}

/// Cheeger quantity with the minimizing probe.
#[derive(Debug, Clone, Serialize)]
pub struct Cheeger {
    pub ch: f64,
    pub witness: SubsetProbe,
}

#[derive(Debug, Clone)]
struct CheegerBest {
    ratio: f64,
    subset: Vec<usize>,
    k: usize,
}

impl CheegerBest {
    fn pick(a: CheegerBest, b: CheegerBest) -> CheegerBest {
        match a.ratio.total_cmp(&b.ratio) {
            Ordering::Less => a,
            Ordering::Greater => b,
            Ordering::Equal => {
                if (&a.subset, a.k) <= (&b.subset, b.k) {
                    a
                } else {
                    b
                }
            }
        }
    }
}

fn ensure_balanced(frame: &Frame) -> Result<()> {
    let ratio = error_report(frame).balance_ratio();
    if !(ratio <= CHEEGER_BALANCE_TOL) {
        return Err(Error::NotDoublyBalanced { ratio });
    }
    Ok(())
}

/// Exact `ch(V)` for a doubly balanced frame.
///
/// For each subset `B` and dimension `k` with `k/d + |B|/n ≤ 1`, the best
/// rank-`k` projector minimizes `tr[P(V_B̄V_B̄ᵀ − V_BV_Bᵀ)]`: the span of the `k`
/// lowest eigenvectors. Balance makes the denominator `(s/d)·k + ‖V_B‖_F²`.
pub fn cheeger_constant(frame: &Frame) -> Result<Cheeger> {
    ensure_balanced(frame)?;
    let (d, n) = (frame.d(), frame.n());
    if n > EXACT_CHEEGER_MAX_N {
        return Err(Error::Config(format!(
            "exact Cheeger quantity supports n <= {EXACT_CHEEGER_MAX_N}, got {n}"
        )));
    }
    let v = frame.matrix();
    let gram = frame.gram();
    let s = size(frame);
    let norms = frame.column_norms_sq();

    let evaluate = |subset: &[usize]| -> Option<CheegerBest> {
        let vb = subset_gram(v, subset);
        let eig = SortedEigen::new(&(&gram - &vb * 2.0));
        let vb_norm: f64 = subset.iter().map(|&j| norms[j]).sum();
        let mut best: Option<CheegerBest> = None;
        let mut partial = 0.0;
        for k in 0..=d {
            if k > 0 {
                partial += eig.values[k - 1];
            }
            if (k == 0 && subset.is_empty()) || k * n + subset.len() * d > d * n {
                continue;
            }
            let ratio = (vb_norm + partial) / (s / d as f64 * k as f64 + vb_norm);
            let cand = CheegerBest {
                ratio,
                subset: subset.to_vec(),
                k,
            };
            best = Some(match best {
                None => cand,
                Some(b) => CheegerBest::pick(b, cand),
            });
        }
        best
    };

    let merge = |a: Option<CheegerBest>, b: Option<CheegerBest>| match (a, b) {
        (Some(a), Some(b)) => Some(CheegerBest::pick(a, b)),
        (a, None) => a,
        (None, b) => b,
    };
    let best = (0..=n)
        .into_par_iter()
        .map(|k| {
            par_fold_subsets(n, k, || None, |acc, subset| merge(acc, evaluate(subset)), merge)
        })
        .reduce(|| None, merge)
        .expect("at least one feasible probe");

    let eig = SortedEigen::new(&(&gram - subset_gram(v, &best.subset) * 2.0));
    let basis: Vec<f64> = (0..d)
        .flat_map(|row| (0..best.k).map(move |col| (row, col)))
        .map(|(row, col)| eig.vectors[(row, col)])
        .collect();
    let mut y = vec![0.0; n];
    for &j in &best.subset {
        y[j] = 1.0;
    }
    Ok(Cheeger {
        ch: best.ratio.max(0.0),
        witness: SubsetProbe {
            y,
            subset: best.subset,
            a_dim: best.k,
            a_basis: Some(basis),
        },
    })
}

/// The two links `ch ≥ λ_∞/6` and `λ_quantum ≥ ch²` on one balanced frame.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub lambda_infty: f64,
    pub cheeger: f64,
    pub lambda_quantum: f64,
    pub cheeger_link: bool,
    pub quantum_link: bool,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.cheeger_link && self.quantum_link
    }
}

pub fn infty_implies_quantum_check(frame: &Frame) -> Result<ChainReport> {
    ensure_balanced(frame)?;
    let n = frame.n();
    ensure_even(n)?;
    if n > EXACT_CHEEGER_MAX_N {
        return Err(Error::Config(format!(
            "expansion chain check supports n <= {EXACT_CHEEGER_MAX_N}, got {n}"
        )));
    }
    let lambda_infty = infty_expansion_exact(frame)?.lambda;
    let cheeger = cheeger_constant(frame)?.ch;
    let lambda_quantum = quantum_expansion_exact(frame)?.lambda;
    Ok(ChainReport {
        lambda_infty,
        cheeger,
        lambda_quantum,
        cheeger_link: cheeger >= lambda_infty / 6.0 - CHAIN_SLACK,
        quantum_link: lambda_quantum >= cheeger * cheeger - CHAIN_SLACK,
    })
}

/// Options for [`expansion_report`].
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub beta: Beta,
    pub mode: Mode,
    pub trials: usize,
    pub seed: SeedSpec,
}

/// Everything computable for one frame under the given mode. Both λ values
/// are clamped to `[0, 1]`; a note records the solved value when it falls outside.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub d: usize,
    pub n: usize,
    pub size: f64,
    pub balance_ratio: f64,
    pub lambda_quantum: Option<f64>,
    pub lambda_infty: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub beta: Beta,
    pub cheeger: Option<f64>,
    pub mode: Mode,
    pub witness: Option<SubsetProbe>,
    pub seed: Option<SeedSpec>,
    pub notes: Vec<String>,
}

/// Compose the individual certificates; parts that do not apply are left empty
/// with a note.
pub fn expansion_report(frame: &Frame, opts: &ReportOptions) -> Result<ExpansionReport> {
    let (d, n) = (frame.d(), frame.n());
    let mut notes = Vec::new();
    let mut all_exact = true;

    let lambda_quantum = match quantum_expansion_exact(frame) {
        Ok(q) => Some(q.lambda),
        Err(e) => {
            notes.push(format!("quantum expansion skipped: {e}"));
            None
        }
    };

    let infty = match opts.mode {
        Mode::Exact => infty_expansion_exact(frame),
        Mode::Sampled => infty_expansion_sampled(frame, opts.trials, opts.seed),
    };
    let (lambda_infty, witness) = match infty {
        Ok(r) => {
            all_exact &= r.mode == Mode::Exact;
            (Some(r.lambda), Some(r.witness))
        }
        Err(e) => {
            notes.push(format!("infinity-expansion skipped: {e}"));
            (None, None)
        }
    };

    let (alpha_min, alpha_max) = match pseudorandom_check(frame, opts.beta, opts.mode, opts.trials, opts.seed) {
        Ok(p) => {
            all_exact &= p.mode == Mode::Exact;
            (Some(p.alpha_min), Some(p.alpha_max))
        }
        Err(e) => {
            notes.push(format!("pseudorandomness skipped: {e}"));
            (None, None)
        }
    };

    let cheeger = match cheeger_constant(frame) {
        Ok(c) => Some(c.ch),
        Err(e) => {
            notes.push(format!("cheeger quantity skipped: {e}"));
            None
        }
    };

    let mut clamp = |name: &str, value: Option<f64>| {
        value.map(|v| {
            if !(0.0..=1.0).contains(&v) {
                notes.push(format!("{name} solved as {v:e}, reported clamped to [0, 1]"));
            }
            v.clamp(0.0, 1.0)
        })
    };
    let lambda_quantum = clamp("lambda_quantum", lambda_quantum);
    let lambda_infty = clamp("lambda_infty", lambda_infty);

    let report = error_report(frame);
    Ok(ExpansionReport {
        d,
        n,
        size: report.size,
        balance_ratio: report.balance_ratio(),
        lambda_quantum,
        lambda_infty,
        alpha_min,
        alpha_max,
        beta: opts.beta,
        cheeger,
        mode: if all_exact { Mode::Exact } else { Mode::Sampled },
        witness,
        seed: (!all_exact).then_some(opts.seed),
        notes,
    })
}
