//! Empirical measures, the sampling distributions used by the experiments,
//! and two exact functionals of empirical measures: the integrated squared
//! CDF difference and the empirical characteristic function.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// Uniform probability measure `(1/N) sum_n delta_{x_n}` on `R^d`.
///
/// Points are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    data: Vec<f64>,
    dim: usize,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::arg("empirical measure needs at least one point"))?;
        if dim == 0 {
            return Err(Error::arg("points must have dimension >= 1"));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::arg(format!(
                    "point {i} has dimension {} but the first point has {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Ok(EmpiricalMeasure { data, dim })
    }

    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::arg(format!(
                "flat buffer of length {} cannot hold points of dimension {dim}",
                data.len()
            )));
        }
        Ok(EmpiricalMeasure { data, dim })
    }

    /// One-dimensional measure from scalar samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false; kept for the `len`/`is_empty` convention.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// The `i`-th coordinate marginal as a 1-D measure.
    pub fn marginal(&self, i: usize) -> Result<Self> {
        if i >= self.dim {
            return Err(Error::arg(format!(
                "marginal {i} of a {}-d measure",
                self.dim
            )));
        }
        Self::from_flat(self.points().map(|p| p[i]).collect(), 1)
    }

    /// Pushforward under `x -> x + delta`.
    pub fn translated(&self, delta: &[f64]) -> Result<Self> {
        self.check_dim(delta.len())?;
        let data = self
            .points()
            .flat_map(|p| p.iter().zip(delta).map(|(a, b)| a + b))
            .collect();
        Ok(EmpiricalMeasure {
            data,
            dim: self.dim,
        })
    }

    /// Pushforward under `x -> factor * x`.
    pub fn scaled(&self, factor: f64) -> Self {
        EmpiricalMeasure {
            data: self.data.iter().map(|v| v * factor).collect(),
            dim: self.dim,
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::arg(format!(
                "dimension mismatch: expected {}, got {dim}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Reads a headerless CSV of finite decimals, one point per row.
    /// Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let point = record
                .iter()
                .map(|field| {
                    field
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            Error::arg(format!(
                                "row {}: `{field}` is not a finite decimal",
                                row + 1
                            ))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(point);
        }
        Self::new(points)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Sampling distributions used as inputs to the estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Gaussian1D {
        mean: f64,
        std: f64,
    },
    /// `N(mean_shift, std_scale^2)`: a standard normal with its mean or scale perturbed.
    PerturbedGaussian1D {
        mean_shift: f64,
        std_scale: f64,
    },
    /// Centered multivariate Student-t, drawn as `Z / sqrt(S / dof)` with
    /// `Z ~ N(0, scale)` and `S ~ chi^2(dof)`.
    MultivariateStudentT {
        dof: f64,
        scale: DMatrix<f64>,
    },
    PointMass {
        x: Vec<f64>,
    },
    /// Probabilities of the levels `1..=K`.
    DiscretePmf {
        probs: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::MultivariateStudentT { scale, .. } => scale.nrows(),
            DistributionSpec::PointMass { x } => x.len(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Gaussian1D { mean, std } => {
                if !mean.is_finite() || !(*std > 0.0 && std.is_finite()) {
                    return Err(Error::invalid(format!(
                        "Gaussian needs finite mean and std > 0, got ({mean}, {std})"
                    )));
                }
            }
            DistributionSpec::PerturbedGaussian1D {
                mean_shift,
                std_scale,
            } => {
                if !mean_shift.is_finite() || !(*std_scale > 0.0 && std_scale.is_finite()) {
                    return Err(Error::invalid(format!(
                        "perturbed Gaussian needs finite shift and scale > 0, got ({mean_shift}, {std_scale})"
                    )));
                }
            }
            DistributionSpec::MultivariateStudentT { dof, scale } => {
                student_cholesky(*dof, scale)?;
            }
            DistributionSpec::PointMass { x } => {
                if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(
                        "point mass needs a finite point of dimension >= 1",
                    ));
                }
            }
            DistributionSpec::DiscretePmf { probs } => {
                validate_pmf(probs)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_pmf(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("pmf needs at least one level"));
    }
    if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid(
            "pmf entries must be finite and non-negative",
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("pmf sums to {total}, not 1")));
    }
    Ok(())
}

fn student_cholesky(dof: f64, scale: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(dof > 0.0 && dof.is_finite()) {
        return Err(Error::invalid(format!(
            "degrees of freedom must be > 0, got {dof}"
        )));
    }
    if scale.nrows() == 0 || !scale.is_square() {
        return Err(Error::invalid("scale matrix must be square and non-empty"));
    }
    let asym = (scale - scale.transpose()).amax();
    if !(asym <= 1e-12 * scale.amax().max(1.0)) {
        return Err(Error::invalid("scale matrix is not symmetric"));
    }
    scale
        .clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::invalid("scale matrix is not positive definite"))
}

/// `n` i.i.d. draws from `spec`, reproducible from `seed`.
pub fn sample_distribution(
    spec: &DistributionSpec,
    n: usize,
    seed: SeedSpec,
) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::arg("sample size must be >= 1"));
    }
    spec.validate()?;
    let mut rng = seed.rng();
    sample_with(spec, n, &mut rng)
}

/// Like [`sample_distribution`] but drawing from a caller-owned generator.
pub fn sample_with<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    n: usize,
    rng: &mut R,
) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::arg("sample size must be >= 1"));
    }
    let data = match spec {
        DistributionSpec::Gaussian1D { mean, std } => (0..n)
            .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        DistributionSpec::PerturbedGaussian1D {
            mean_shift,
            std_scale,
        } => (0..n)
            .map(|_| mean_shift + std_scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        DistributionSpec::MultivariateStudentT { dof, scale } => {
            let chol = student_cholesky(*dof, scale)?;
            let sampler = StudentSampler::new(*dof, chol)?;
            let mut data = Vec::with_capacity(n * sampler.dim());
            for _ in 0..n {
                sampler.push_sample(rng, &mut data);
            }
            data
        }
        DistributionSpec::PointMass { x } => x.iter().copied().cycle().take(n * x.len()).collect(),
        DistributionSpec::DiscretePmf { probs } => {
            validate_pmf(probs)?;
            let index = WeightedIndex::new(probs).map_err(|e| Error::invalid(e.to_string()))?;
            (0..n).map(|_| (index.sample(rng) + 1) as f64).collect()
        }
    };
    EmpiricalMeasure::from_flat(data, spec.dim())
}

/// Pre-factored multivariate Student-t sampler for hot loops.
#[derive(Debug, Clone)]
pub(crate) struct StudentSampler {
    dof: f64,
    chol: DMatrix<f64>,
    chi: ChiSquared<f64>,
}

impl StudentSampler {
    pub(crate) fn new(dof: f64, chol: DMatrix<f64>) -> Result<Self> {
        let chi = ChiSquared::new(dof).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(StudentSampler { dof, chol, chi })
    }

    pub(crate) fn from_scale(dof: f64, scale: &DMatrix<f64>) -> Result<Self> {
        Self::new(dof, student_cholesky(dof, scale)?)
    }

    pub(crate) fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub(crate) fn push_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s: f64 = self.chi.sample(rng);
        let inv = (self.dof / s).sqrt();
        for i in 0..d {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.chol[(i, j)] * zj;
            }
            out.push(acc * inv);
        }
    }
}

/// Scale matrix `G(i,j) = sigma_i sigma_j exp(-(|i-j| / (d tau))^2)`.
pub fn build_student_scale(d: usize, tau: f64, sigma: &[f64]) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!(
            "correlation length must be > 0, got {tau}"
        )));
    }
    if sigma.len() != d {
        return Err(Error::invalid(format!(
            "need {d} scales, got {}",
            sigma.len()
        )));
    }
    if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("scales must be > 0"));
    }
    let width = d as f64 * tau;
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let r = (i as f64 - j as f64).abs() / width;
        sigma[i] * sigma[j] * (-(r * r)).exp()
    }))
}

/// `int (F_x(t) - F_y(t))^2 dt` for the step CDFs of two 1-D empirical measures,
/// integrated exactly over the sorted breakpoints.
pub fn empirical_cdf_diff_l2(x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> Result<f64> {
    if x.dim() != 1 || y.dim() != 1 {
        return Err(Error::arg("CDF distance needs 1-D measures"));
    }
    let mut xs = x.as_flat().to_vec();
    let mut ys = y.as_flat().to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);

    let (mut i, mut j) = (0usize, 0usize);
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    while i < xs.len() || j < ys.len() {
        let t = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            // counts strictly below t
            let diff = i as f64 / nx - j as f64 / ny;
            acc += diff * diff * (t - p);
        }
        while i < xs.len() && xs[i] == t {
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            j += 1;
        }
        prev = Some(t);
    }
    Ok(acc)
}

/// `(1/N) sum_n exp(i omega . x_n)`.
pub fn empirical_char_fn(m: &EmpiricalMeasure, omega: &[f64]) -> Result<Complex64> {
    m.check_dim(omega.len())?;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in m.points() {
        let phase: f64 = p.iter().zip(omega).map(|(a, b)| a * b).sum();
        let (s, c) = phase.sin_cos();
        acc += Complex64::new(c, s);
    }
    Ok(acc / m.len() as f64)
}
