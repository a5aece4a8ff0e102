//! Finite-sample distance estimators and closed-form Gaussian oracles.
//!
//! Kernels with a variogram form `k(x, y) = (v(x) + v(y) - v(x - y)) / 2` are
//! summed as `-v(x - y) / 2`. Every estimator here combines kernel values with
//! zero net mass, so the one-point terms cancel exactly and dropping them
//! keeps shift invariance free of rounding drift. The biased estimator is the
//! exception: its weights do not balance, so it always uses the full kernel.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fields::{gff_truncation_tail, EmpiricalPairing, FieldSampler, FieldSpec};
use crate::kernels::KernelSpec;
use crate::measures::{empirical_cdf_diff_l2, validate_pmf, EmpiricalMeasure};
use crate::rng::SeedSpec;
use crate::stats::Summary;

pub use crate::fourier::{fourier_distance_1d, QuadratureConfig};
pub use crate::spectral::c_h_constant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    UnbiasedPaper,
    UnbiasedCorrected,
    BiasedPaper,
    VStatistic,
    FieldMc,
    Fourier,
    Cvm,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::UnbiasedPaper => "unbiased_paper",
            EstimatorKind::UnbiasedCorrected => "unbiased_corrected",
            EstimatorKind::BiasedPaper => "biased_paper",
            EstimatorKind::VStatistic => "v_statistic",
            EstimatorKind::FieldMc => "field_mc",
            EstimatorKind::Fourier => "fourier",
            EstimatorKind::Cvm => "cvm",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalization of the unbiased estimator.
///
/// `Paper` averages the within-sample sums with `1 / (2 N (N - 1))` and has
/// expectation `D^2 / 2`. `Corrected` doubles both terms and is unbiased for
/// `D^2`. The two differ by exactly a factor of 2 on every input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    Paper,
    #[default]
    Corrected,
}

impl Convention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convention::Paper => "paper",
            Convention::Corrected => "corrected",
        }
    }

    fn kind(&self) -> EstimatorKind {
        match self {
            Convention::Paper => EstimatorKind::UnbiasedPaper,
            Convention::Corrected => EstimatorKind::UnbiasedCorrected,
        }
    }
}

/// Cross term of the unbiased estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossTerm {
    /// `(1/N) sum_n k(X_n, Y_n)`; needs equal sample sizes.
    #[default]
    Paired,
    /// `(1/(N_x N_y)) sum_{n,m} k(X_n, Y_m)`.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub n_x: usize,
    pub n_y: usize,
    /// Field realizations averaged (field Monte Carlo only).
    pub replications: Option<usize>,
    pub std_error: Option<f64>,
    /// Multiplier folded into the kernel (Riesz log-space scaling), 1 otherwise.
    pub scale_factor: f64,
    /// Free-form `key=value` annotations, in insertion order.
    pub metadata: Vec<(String, String)>,
}

impl DistanceEstimate {
    fn new(
        value: f64,
        estimator: EstimatorKind,
        x: &EmpiricalMeasure,
        y: &EmpiricalMeasure,
    ) -> Self {
        DistanceEstimate {
            value,
            estimator,
            n_x: x.len(),
            n_y: y.len(),
            replications: None,
            std_error: None,
            scale_factor: 1.0,
            metadata: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Metadata rendered as `k=v` joined by `;`.
    pub fn metadata_string(&self) -> String {
        self.metadata
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn check_pair(x: &EmpiricalMeasure, y: &EmpiricalMeasure, k: &KernelSpec) -> Result<()> {
    k.validate()?;
    if x.dim() != y.dim() {
        return Err(Error::arg(format!(
            "samples have dimensions {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    x.check_dim(k.dim())?;
    if let KernelSpec::Discrete { levels } = *k {
        for v in x.as_flat().iter().chain(y.as_flat()) {
            if !(v.fract() == 0.0 && *v >= 1.0 && *v <= levels as f64) {
                return Err(Error::arg(format!("{v} is not a level in 1..={levels}")));
            }
        }
    }
    Ok(())
}

/// Kernel value with one-point terms dropped when the kernel allows it.
#[inline]
fn reduced(k: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    match k.variogram(a, b) {
        Some(v) => -0.5 * v,
        None => k.eval_unchecked(a, b),
    }
}

/// `sum_{n != m} h(X_n, X_m)` using symmetry.
fn off_diagonal_sum(k: &KernelSpec, x: &EmpiricalMeasure) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = x.point(i);
        for j in (i + 1)..n {
            acc += reduced(k, p, x.point(j));
        }
    }
    2.0 * acc
}

fn full_cross_sum(k: &KernelSpec, x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> f64 {
    let mut acc = 0.0;
    for p in x.points() {
        for q in y.points() {
            acc += reduced(k, p, q);
        }
    }
    acc
}

fn paired_cross_sum(k: &KernelSpec, x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> f64 {
    x.points()
        .zip(y.points())
        .map(|(p, q)| reduced(k, p, q))
        .sum()
}

/// U-statistic with the paired cross term.
pub fn unbiased_kernel_distance(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    k: &KernelSpec,
    convention: Convention,
) -> Result<DistanceEstimate> {
    unbiased_kernel_distance_with(x, y, k, convention, CrossTerm::Paired)
}

pub fn unbiased_kernel_distance_with(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    k: &KernelSpec,
    convention: Convention,
    cross: CrossTerm,
) -> Result<DistanceEstimate> {
    check_pair(x, y, k)?;
    let (nx, ny) = (x.len(), y.len());
    if nx < 2 || ny < 2 {
        return Err(Error::arg(
            "unbiased estimator needs at least 2 points per sample",
        ));
    }
    if cross == CrossTerm::Paired && nx != ny {
        return Err(Error::arg(format!(
            "paired cross term needs equal sample sizes, got {nx} and {ny}; use the full cross term"
        )));
    }
    let wx = off_diagonal_sum(k, x);
    let wy = off_diagonal_sum(k, y);
    let corrected = match cross {
        CrossTerm::Paired => {
            let n = nx as f64;
            let c = paired_cross_sum(k, x, y);
            if k.is_singular_on_diagonal() && !c.is_finite() {
                return Err(Error::Singularity(
                    "a paired cross term has coincident points".into(),
                ));
            }
            (wx + wy) / (n * (n - 1.0)) - 2.0 * c / n
        }
        CrossTerm::Full => {
            let (fx, fy) = (nx as f64, ny as f64);
            wx / (fx * (fx - 1.0)) + wy / (fy * (fy - 1.0))
                - 2.0 * full_cross_sum(k, x, y) / (fx * fy)
        }
    };
    let value = match convention {
        Convention::Corrected => corrected,
        Convention::Paper => corrected / 2.0,
    };
    let mut est = DistanceEstimate::new(value, convention.kind(), x, y)
        .with_meta("convention", convention.as_str());
    if cross == CrossTerm::Full {
        est = est.with_meta("cross", "full");
    }
    est.scale_factor = k.scale_factor();
    Ok(est)
}

/// Corrected unbiased estimates for several Hurst indices at once. Each
/// pairwise log-distance is computed once and exponentiated per `H`.
pub fn unbiased_fractional_multi(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    hursts: &[f64],
    convention: Convention,
) -> Result<Vec<f64>> {
    let (n, d) = (x.len(), x.dim());
    if y.len() != n || y.dim() != d {
        return Err(Error::arg(
            "multi-H estimator needs equal sizes and dimensions",
        ));
    }
    if n < 2 {
        return Err(Error::arg(
            "unbiased estimator needs at least 2 points per sample",
        ));
    }
    for &h in hursts {
        KernelSpec::Fractional { hurst: h, dim: d }.validate()?;
    }
    let mut acc = vec![0.0; hursts.len()];
    let mut add = |sq: f64, weight: f64| {
        if sq > 0.0 {
            let l = sq.ln();
            for (a, h) in acc.iter_mut().zip(hursts) {
                *a += weight * (h * l).exp();
            }
        }
    };
    let nf = n as f64;
    // corrected = -(1/2)[2 S_xx/(n(n-1)) + 2 S_yy/(n(n-1))] + S_xy / n
    let within = -1.0 / (nf * (nf - 1.0));
    for m in [x, y] {
        for i in 0..n {
            for j in (i + 1)..n {
                add(crate::kernels::sq_dist(m.point(i), m.point(j)), within);
            }
        }
    }
    for i in 0..n {
        add(crate::kernels::sq_dist(x.point(i), y.point(i)), 1.0 / nf);
    }
    if convention == Convention::Paper {
        acc.iter_mut().for_each(|v| *v /= 2.0);
    }
    Ok(acc)
}

/// Biased estimator with `1/(2N^2)` normalization over all within pairs
/// (diagonals included) and the paired cross term.
pub fn biased_kernel_distance(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    k: &KernelSpec,
) -> Result<DistanceEstimate> {
    check_pair(x, y, k)?;
    if k.is_singular_on_diagonal() {
        return Err(Error::UnsupportedKernel(format!(
            "{k} is singular on the diagonal"
        )));
    }
    let n = x.len();
    if y.len() != n {
        return Err(Error::arg(format!(
            "biased estimator needs equal sample sizes, got {n} and {}",
            y.len()
        )));
    }
    let full_within = |m: &EmpiricalMeasure| {
        let mut acc = 0.0;
        for p in m.points() {
            for q in m.points() {
                acc += k.eval_unchecked(p, q);
            }
        }
        acc
    };
    let cross: f64 = x
        .points()
        .zip(y.points())
        .map(|(p, q)| k.eval_unchecked(p, q))
        .sum();
    let nf = n as f64;
    let value = (full_within(x) + full_within(y)) / (2.0 * nf * nf) - cross / nf;
    let mut est = DistanceEstimate::new(value, EstimatorKind::BiasedPaper, x, y)
        .with_meta("convention", "paper");
    est.scale_factor = k.scale_factor();
    Ok(est)
}

/// Exact `E_U <U, mu_x - mu_y>^2` for the empirical measures: the full
/// double sum with diagonals.
pub fn v_statistic_distance(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    k: &KernelSpec,
) -> Result<DistanceEstimate> {
    check_pair(x, y, k)?;
    if k.is_singular_on_diagonal() {
        return Err(Error::UnsupportedKernel(format!(
            "{k} is singular on the diagonal"
        )));
    }
    let value = v_statistic_value(x, y, k);
    let mut est = DistanceEstimate::new(value, EstimatorKind::VStatistic, x, y);
    est.scale_factor = k.scale_factor();
    Ok(est)
}

fn v_statistic_value(x: &EmpiricalMeasure, y: &EmpiricalMeasure, k: &KernelSpec) -> f64 {
    let diag = |m: &EmpiricalMeasure| m.points().map(|p| reduced(k, p, p)).sum::<f64>();
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let sxx = off_diagonal_sum(k, x) + diag(x);
    let syy = off_diagonal_sum(k, y) + diag(y);
    sxx / (nx * nx) + syy / (ny * ny) - 2.0 * full_cross_sum(k, x, y) / (nx * ny)
}

/// Replications per parallel work item of [`field_mc_distance`].
const MC_BATCH: usize = 1024;

/// Monte Carlo average of `<U, mu_x - mu_y>^2` over `replications` joint
/// field draws at the points of both samples. Batch `b` draws from
/// `seed.child(b)`, so the result does not depend on thread count.
pub fn field_mc_distance(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    spec: FieldSpec,
    replications: usize,
    seed: SeedSpec,
) -> Result<DistanceEstimate> {
    if replications < 2 {
        return Err(Error::arg(
            "field Monte Carlo needs at least 2 replications",
        ));
    }
    spec.validate()?;
    if x.dim() != spec.dim() || y.dim() != spec.dim() {
        return Err(Error::arg(format!(
            "field is {}-dimensional, samples are {} and {}",
            spec.dim(),
            x.dim(),
            y.dim()
        )));
    }

    // The free field lives on [0, 1]; other ranges are mapped onto it and the
    // distance rescaled by the interval length afterwards.
    let mut rescale = None;
    let (x, y) = match spec {
        FieldSpec::GffNeumann1D { .. } => {
            let all = x.as_flat().iter().chain(y.as_flat());
            let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
            let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
            if lo < 0.0 || hi > 1.0 {
                let len = hi - lo;
                let map = |m: &EmpiricalMeasure| {
                    EmpiricalMeasure::from_flat(
                        m.as_flat()
                            .iter()
                            .map(|v| ((v - lo) / len).clamp(0.0, 1.0))
                            .collect(),
                        1,
                    )
                };
                rescale = Some(len);
                (map(x)?, map(y)?)
            } else {
                (x.clone(), y.clone())
            }
        }
        _ => (x.clone(), y.clone()),
    };

    let locations: Vec<Vec<f64>> = x.points().chain(y.points()).map(|p| p.to_vec()).collect();
    let sampler = FieldSampler::new(spec, &locations)?;
    let pairing = EmpiricalPairing::new(&sampler, &x, &y)?;

    let batches = replications.div_ceil(MC_BATCH);
    let squares: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b as u64).rng();
            let count = MC_BATCH.min(replications - b * MC_BATCH);
            let mut values = Vec::new();
            (0..count)
                .map(|_| {
                    sampler.sample_unique(&mut rng, &mut values);
                    let p = pairing.apply(&values);
                    p * p
                })
                .collect()
        })
        .collect();
    let squares: Vec<f64> = squares.into_iter().flatten().collect();
    let summary = Summary::of(&squares);

    let factor = rescale.unwrap_or(1.0);
    let mut est = DistanceEstimate::new(summary.mean * factor, EstimatorKind::FieldMc, &x, &y);
    est.replications = Some(replications);
    est.std_error = Some(summary.stderr * factor);
    est = est
        .with_meta("field", spec.to_string())
        .with_meta("seed", seed.base_seed);
    if let FieldSpec::GffNeumann1D { modes } = spec {
        est = est.with_meta("modes", modes).with_meta(
            "truncation_tail",
            format!("{:e}", gff_truncation_tail(modes)),
        );
    }
    if let Some(len) = rescale {
        est = est.with_meta("domain_rescale", len);
    }
    Ok(est)
}

/// Squared CDF difference wrapped as an estimate.
pub fn cvm_distance(x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> Result<DistanceEstimate> {
    let value = empirical_cdf_diff_l2(x, y)?;
    Ok(DistanceEstimate::new(value, EstimatorKind::Cvm, x, y))
}

/// Sum of per-coordinate Brownian V-statistics.
pub fn additive_distance(x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> Result<DistanceEstimate> {
    if x.dim() != y.dim() {
        return Err(Error::arg(format!(
            "samples have dimensions {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    let brownian = KernelSpec::Fractional { hurst: 0.5, dim: 1 };
    let mut value = 0.0;
    for i in 0..x.dim() {
        value += v_statistic_value(&x.marginal(i)?, &y.marginal(i)?, &brownian);
    }
    Ok(
        DistanceEstimate::new(value, EstimatorKind::VStatistic, x, y)
            .with_meta("kernel", "additive"),
    )
}

/// `sum_k 2^-k (p_k - q_k)^2` for pmfs on `{1, .., K}`.
pub fn discrete_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::arg(format!(
            "pmfs have {} and {} levels",
            p.len(),
            q.len()
        )));
    }
    validate_pmf(p)?;
    validate_pmf(q)?;
    Ok(p.iter()
        .zip(q)
        .enumerate()
        .map(|(i, (a, b))| (-((i + 1) as f64)).exp2() * (a - b) * (a - b))
        .sum())
}

/// Distance between Bernoulli(p) and Bernoulli(q) induced by the two-state
/// field with independent values of variance 1/2 at 0 and 1.
pub fn binary_distance(p: f64, q: f64) -> Result<f64> {
    if !((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q)) {
        return Err(Error::arg("probabilities must lie in [0, 1]"));
    }
    let at_one = p - q;
    // (1 - p) - (1 - q), without the rounding of the two complements
    let at_zero = -at_one;
    Ok(0.5 * at_zero * at_zero + 0.5 * at_one * at_one)
}

/// `E|N(m, s^2)|`.
pub fn folded_normal_mean(m: f64, s: f64) -> f64 {
    s * (2.0 / PI).sqrt() * (-m * m / (2.0 * s * s)).exp() + m * erf(m / (s * 2f64.sqrt()))
}

/// Energy distance (`H = 1/2`) between `N(0, 1)` and `N(delta, sigma^2)`.
pub fn gaussian_energy_oracle(delta: f64, sigma: f64) -> f64 {
    let cross = folded_normal_mean(delta, (1.0 + sigma * sigma).sqrt());
    let within_x = folded_normal_mean(0.0, 2f64.sqrt());
    let within_y = folded_normal_mean(0.0, sigma * 2f64.sqrt());
    cross - 0.5 * within_x - 0.5 * within_y
}

/// `E|N(0, s^2)|^p`.
pub fn centered_normal_abs_moment(s: f64, p: f64) -> f64 {
    s.powf(p) * (0.5 * p * 2f64.ln() + ln_gamma((p + 1.0) / 2.0)).exp() / PI.sqrt()
}

/// Fractional distance of index `H` between `N(0, 1)` and `N(0, sigma^2)`.
pub fn centered_gaussian_fractional_oracle(sigma: f64, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    centered_normal_abs_moment((1.0 + sigma * sigma).sqrt(), p)
        - 0.5 * centered_normal_abs_moment(2f64.sqrt(), p)
        - 0.5 * centered_normal_abs_moment(sigma * 2f64.sqrt(), p)
}

/// Single-precision corrected unbiased estimate with the full kernel.
fn point_f32(m: &[f32], dim: usize, i: usize) -> &[f32] {
    &m[i * dim..(i + 1) * dim]
}

pub(crate) fn unbiased_f32(x: &[f32], y: &[f32], dim: usize, k: &KernelSpec) -> f32 {
    let n = x.len() / dim;
    let mut within = 0f32;
    for m in [x, y] {
        for i in 0..n {
            for j in (i + 1)..n {
                within += 2.0 * k.eval_f32(point_f32(m, dim, i), point_f32(m, dim, j));
            }
        }
    }
    let mut cross = 0f32;
    for i in 0..n {
        cross += k.eval_f32(point_f32(x, dim, i), point_f32(y, dim, i));
    }
    let nf = n as f32;
    within / (nf * (nf - 1.0)) - 2.0 * cross / nf
}
