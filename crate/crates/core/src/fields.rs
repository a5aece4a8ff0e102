//! Gaussian random fields sampled at point sets and on grids, and their
//! pairings with empirical measures and densities.
//!
//! Point-set sampling factors the covariance matrix once ([`FieldSampler`])
//! and reuses the factor for every realization. Fractional Brownian motion on
//! a uniform 1-D grid has a faster exact path through circulant embedding of
//! its increments ([`FbmGridSampler`]). The Neumann free field on `[0, 1]` is
//! a truncated cosine series.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::measures::EmpiricalMeasure;
use crate::quadrature::trapezoid;
use crate::rng::SeedSpec;

/// Default truncation of the free-field series.
pub const DEFAULT_GFF_MODES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    /// Fractional Brownian field pinned at the origin.
    Fbm { hurst: f64, dim: usize },
    /// Free field on `[0, 1]` with Neumann boundary, truncated after `modes` terms.
    GffNeumann1D { modes: usize },
    /// Sum of independent Brownian motions, one per coordinate.
    AdditiveBm { dim: usize },
    /// Independent centered Gaussians `D_k` with variance `2^-k` on levels `1..=K`.
    DiscreteField { levels: usize },
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldSpec::Fbm { hurst, dim } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(Error::invalid(format!("fBm needs 0 < H < 1, got {hurst}")));
                }
                if dim == 0 {
                    return Err(Error::invalid("fBm dimension must be >= 1"));
                }
            }
            FieldSpec::GffNeumann1D { modes } => {
                if modes == 0 {
                    return Err(Error::invalid("free field needs at least one mode"));
                }
            }
            FieldSpec::AdditiveBm { dim } => {
                if dim == 0 {
                    return Err(Error::invalid("additive motion dimension must be >= 1"));
                }
            }
            FieldSpec::DiscreteField { levels } => {
                if levels == 0 {
                    return Err(Error::invalid("discrete field needs K >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            FieldSpec::Fbm { dim, .. } | FieldSpec::AdditiveBm { dim } => dim,
            FieldSpec::GffNeumann1D { .. } | FieldSpec::DiscreteField { .. } => 1,
        }
    }

    /// Covariance kernel of the field, where it has a closed form on `R^d`.
    /// The Neumann free field has none here; against mass-zero measures it
    /// pairs like `GreenGff { dim: 1 }`.
    pub fn kernel(&self) -> Option<KernelSpec> {
        match *self {
            FieldSpec::Fbm { hurst, dim } => Some(KernelSpec::Fractional { hurst, dim }),
            FieldSpec::AdditiveBm { dim } => Some(KernelSpec::AdditiveL1 { dim }),
            FieldSpec::DiscreteField { levels } => Some(KernelSpec::Discrete { levels }),
            FieldSpec::GffNeumann1D { .. } => None,
        }
    }

    /// The field whose pairings reproduce `kernel`, if there is one.
    pub fn for_kernel(kernel: &KernelSpec) -> Result<FieldSpec> {
        match *kernel {
            KernelSpec::Fractional { hurst, dim } if hurst < 1.0 => {
                Ok(FieldSpec::Fbm { hurst, dim })
            }
            KernelSpec::GreenGff { dim: 1 } => Ok(FieldSpec::Fbm { hurst: 0.5, dim: 1 }),
            KernelSpec::AdditiveL1 { dim } => Ok(FieldSpec::AdditiveBm { dim }),
            KernelSpec::Discrete { levels } => Ok(FieldSpec::DiscreteField { levels }),
            other => Err(Error::UnsupportedKernel(format!(
                "no field sampler for {other}"
            ))),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FieldSpec::Fbm { hurst, dim } => write!(f, "fbm:H={hurst};d={dim}"),
            FieldSpec::GffNeumann1D { modes } => write!(f, "gff:K={modes}"),
            FieldSpec::AdditiveBm { dim } => write!(f, "additive:d={dim}"),
            FieldSpec::DiscreteField { levels } => write!(f, "discrete:K={levels}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMethod {
    /// Covariance factorization; `jitter` is the diagonal shift that was needed.
    Cholesky {
        jitter: f64,
    },
    CirculantEmbedding,
    /// Circulant embedding had a significantly negative eigenvalue and the
    /// grid was sampled by factorization instead.
    CirculantFallback,
    Series,
}

/// One sampled path, restricted to `locations`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub spec: FieldSpec,
    pub seed: SeedSpec,
    pub method: SamplingMethod,
    pub locations: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl FieldRealization {
    /// Location -> index map keyed on exact bit patterns.
    fn index(&self) -> HashMap<Vec<u64>, usize> {
        let mut map = HashMap::with_capacity(self.locations.len());
        for (i, p) in self.locations.iter().enumerate() {
            map.entry(point_key(p)).or_insert(i);
        }
        map
    }
}

fn point_key(p: &[f64]) -> Vec<u64> {
    // + 0.0 folds -0.0 onto 0.0
    p.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Repeated sampling at a fixed set of locations.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    spec: FieldSpec,
    locations: Vec<Vec<f64>>,
    /// original location -> unique location
    slot: Vec<usize>,
    n_unique: usize,
    factor: Factor,
}

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(CholeskyFactor),
    /// One Brownian factor per coordinate, summed.
    Additive(Vec<CholeskyFactor>),
    /// `basis[u * modes + k] = sqrt(2) cos((k+1) pi x_u) / ((k+1) pi)`
    Series {
        basis: Vec<f64>,
        modes: usize,
    },
}

/// Lower Cholesky factor over the non-anchored unique points. Anchored points
/// (zero variance) are pinned to exactly 0.
#[derive(Debug, Clone)]
struct CholeskyFactor {
    lower: DMatrix<f64>,
    active: Vec<usize>,
    /// unique slot -> slot of the values this factor produces (Additive only)
    map: Vec<usize>,
    n_out: usize,
    jitter: f64,
}

impl CholeskyFactor {
    fn build(kernel: &KernelSpec, points: &[Vec<f64>]) -> Result<Self> {
        let active: Vec<usize> = (0..points.len())
            .filter(|&i| kernel.eval_unchecked(&points[i], &points[i]) != 0.0)
            .collect();
        let n = active.len();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            kernel.eval_unchecked(&points[active[i]], &points[active[j]])
        });
        let (lower, jitter) = cholesky_with_jitter(cov)?;
        Ok(CholeskyFactor {
            lower,
            active,
            map: (0..points.len()).collect(),
            n_out: points.len(),
            jitter,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.active.len();
        z.clear();
        z.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let mut own = vec![0.0; self.n_out];
        for (i, &slot) in self.active.iter().enumerate() {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.lower[(i, j)] * zj;
            }
            own[slot] = acc;
        }
        for (u, o) in out.iter_mut().enumerate() {
            *o += own[self.map[u]];
        }
    }
}

/// Cholesky with a diagonal jitter ladder: `1e-12 * trace / n` escalating by
/// 10x up to `1e-6 * trace / n`.
pub(crate) fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = cov.nrows();
    if n == 0 {
        return Ok((cov, 0.0));
    }
    if let Some(c) = cov.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    let base = cov.trace() / n as f64;
    for step in 0..=6 {
        let jitter = base * 1e-12 * 10f64.powi(step);
        let mut shifted = cov.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = shifted.cholesky() {
            return Ok((c.unpack(), jitter));
        }
    }
    let min_eigenvalue = cov
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Err(Error::Numerical {
        message: format!(
            "covariance of {n} points is not positive definite after jitter up to {:e}",
            base * 1e-6
        ),
        min_eigenvalue: Some(min_eigenvalue),
    })
}

impl FieldSampler {
    pub fn new(spec: FieldSpec, locations: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        if locations.is_empty() {
            return Err(Error::arg("field needs at least one location"));
        }
        let d = spec.dim();
        if let Some(p) = locations.iter().find(|p| p.len() != d) {
            return Err(Error::arg(format!("location {p:?} is not {d}-dimensional")));
        }
        if locations.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("locations must be finite"));
        }

        let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut unique: Vec<Vec<f64>> = Vec::new();
        let mut slot = Vec::with_capacity(locations.len());
        for p in locations {
            let next = unique.len();
            let s = *keys.entry(point_key(p)).or_insert(next);
            if s == next {
                unique.push(p.clone());
            }
            slot.push(s);
        }

        let factor = match spec {
            FieldSpec::Fbm { .. } => {
                Factor::Cholesky(CholeskyFactor::build(&spec.kernel().unwrap(), &unique)?)
            }
            FieldSpec::DiscreteField { levels } => {
                if let Some(p) = unique
                    .iter()
                    .find(|p| !(p[0].fract() == 0.0 && p[0] >= 1.0 && p[0] <= levels as f64))
                {
                    return Err(Error::arg(format!(
                        "{} is not a level in 1..={levels}",
                        p[0]
                    )));
                }
                Factor::Cholesky(CholeskyFactor::build(&spec.kernel().unwrap(), &unique)?)
            }
            FieldSpec::AdditiveBm { dim } => {
                let brownian = KernelSpec::Fractional { hurst: 0.5, dim: 1 };
                let mut parts = Vec::with_capacity(dim);
                for c in 0..dim {
                    let mut coord_keys: HashMap<u64, usize> = HashMap::new();
                    let mut coords: Vec<Vec<f64>> = Vec::new();
                    let mut map = Vec::with_capacity(unique.len());
                    for p in &unique {
                        let next = coords.len();
                        let s = *coord_keys.entry((p[c] + 0.0).to_bits()).or_insert(next);
                        if s == next {
                            coords.push(vec![p[c]]);
                        }
                        map.push(s);
                    }
                    let mut f = CholeskyFactor::build(&brownian, &coords)?;
                    f.map = map;
                    f.n_out = coords.len();
                    parts.push(f);
                }
                Factor::Additive(parts)
            }
            FieldSpec::GffNeumann1D { modes } => {
                if let Some(p) = unique.iter().find(|p| !(0.0..=1.0).contains(&p[0])) {
                    return Err(Error::arg(format!(
                        "free-field location {} is outside [0, 1]",
                        p[0]
                    )));
                }
                Factor::Series {
                    basis: neumann_basis(&unique, modes),
                    modes,
                }
            }
        };

        Ok(FieldSampler {
            spec,
            locations: locations.to_vec(),
            slot,
            n_unique: unique.len(),
            factor,
        })
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn method(&self) -> SamplingMethod {
        match &self.factor {
            Factor::Cholesky(f) => SamplingMethod::Cholesky { jitter: f.jitter },
            Factor::Additive(parts) => SamplingMethod::Cholesky {
                jitter: parts.iter().map(|f| f.jitter).fold(0.0, f64::max),
            },
            Factor::Series { .. } => SamplingMethod::Series,
        }
    }

    /// Field values at the deduplicated locations.
    pub(crate) fn sample_unique<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.n_unique, 0.0);
        let mut z = Vec::new();
        match &self.factor {
            Factor::Cholesky(f) => f.sample(rng, &mut z, out),
            Factor::Additive(parts) => {
                for f in parts {
                    f.sample(rng, &mut z, out);
                }
            }
            Factor::Series { basis, modes } => {
                z.extend((0..*modes).map(|_| rng.sample::<f64, _>(StandardNormal)));
                for (u, o) in out.iter_mut().enumerate() {
                    let row = &basis[u * modes..(u + 1) * modes];
                    *o = row.iter().zip(&z).map(|(b, x)| b * x).sum();
                }
            }
        }
    }

    /// Field values at every location, in the order given at construction.
    pub fn sample_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut unique = Vec::new();
        self.sample_unique(rng, &mut unique);
        self.slot.iter().map(|&s| unique[s]).collect()
    }

    pub fn realize(&self, seed: SeedSpec) -> FieldRealization {
        let mut rng = seed.rng();
        FieldRealization {
            spec: self.spec,
            seed,
            method: self.method(),
            locations: self.locations.clone(),
            values: self.sample_values(&mut rng),
        }
    }

    /// Slot of an exact location, if present.
    fn slot_of(&self, keys: &HashMap<Vec<u64>, usize>, p: &[f64]) -> Option<usize> {
        keys.get(&point_key(p)).map(|&i| self.slot[i])
    }
}

fn neumann_basis(points: &[Vec<f64>], modes: usize) -> Vec<f64> {
    let mut basis = Vec::with_capacity(points.len() * modes);
    for p in points {
        for k in 1..=modes {
            let freq = k as f64 * PI;
            basis.push(SQRT_2 * (freq * p[0]).cos() / freq);
        }
    }
    basis
}

/// Tail bound `sum_{k > K} 2 / (k pi)^2` on the pairing variance dropped by truncation.
pub fn gff_truncation_tail(modes: usize) -> f64 {
    // integral comparison: sum_{k>K} 1/k^2 < 1/K
    2.0 / (PI * PI * modes as f64)
}

/// One joint draw of the field at `locations`.
pub fn sample_field_at(
    spec: FieldSpec,
    locations: &[Vec<f64>],
    seed: SeedSpec,
) -> Result<FieldRealization> {
    Ok(FieldSampler::new(spec, locations)?.realize(seed))
}

/// Free field on `[0, 1]` from the first `modes` Neumann eigenfunctions.
pub fn sample_gff_series(modes: usize, grid: &[f64], seed: SeedSpec) -> Result<FieldRealization> {
    let locations: Vec<Vec<f64>> = grid.iter().map(|t| vec![*t]).collect();
    sample_field_at(FieldSpec::GffNeumann1D { modes }, &locations, seed)
}

/// Exact fBm on the grid `0, step, .., (n_points - 1) step`, via circulant
/// embedding of the fractional Gaussian noise increments.
#[derive(Clone)]
pub struct FbmGridSampler {
    hurst: f64,
    step: f64,
    n_points: usize,
    engine: GridEngine,
}

#[derive(Clone)]
enum GridEngine {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Fallback(FieldSampler),
}

/// Eigenvalues at or above `-CLIP * max` are clipped to zero.
const CIRCULANT_CLIP: f64 = 1e-9;

impl FbmGridSampler {
    pub fn new(hurst: f64, step: f64, n_points: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::arg(format!("fBm needs 0 < H < 1, got {hurst}")));
        }
        if n_points < 2 {
            return Err(Error::arg("grid needs at least 2 points"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::arg(format!("grid step must be > 0, got {step}")));
        }
        let m = n_points - 1;
        let size = 2 * m;
        let scale = step.powf(2.0 * hurst);
        let gamma = |k: usize| {
            let k = k as f64;
            let p = 2.0 * hurst;
            0.5 * scale * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
        };
        let mut row: Vec<Complex64> = (0..size)
            .map(|j| Complex64::new(gamma(if j <= m { j } else { size - j }), 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        let engine = if min < -CIRCULANT_CLIP * max {
            let locations: Vec<Vec<f64>> = (0..n_points).map(|i| vec![i as f64 * step]).collect();
            GridEngine::Fallback(FieldSampler::new(
                FieldSpec::Fbm { hurst, dim: 1 },
                &locations,
            )?)
        } else {
            let sqrt_eig = row
                .iter()
                .map(|c| (c.re.max(0.0) / size as f64).sqrt())
                .collect();
            GridEngine::Circulant { sqrt_eig, fft }
        };
        Ok(FbmGridSampler {
            hurst,
            step,
            n_points,
            engine,
        })
    }

    pub fn method(&self) -> SamplingMethod {
        match self.engine {
            GridEngine::Circulant { .. } => SamplingMethod::CirculantEmbedding,
            GridEngine::Fallback(_) => SamplingMethod::CirculantFallback,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| i as f64 * self.step).collect()
    }

    /// Path values on the grid; the first is exactly 0.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.engine {
            GridEngine::Fallback(sampler) => sampler.sample_values(rng),
            GridEngine::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut buf);
                let mut path = Vec::with_capacity(self.n_points);
                let mut acc = 0.0;
                path.push(0.0);
                for c in &buf[..self.n_points - 1] {
                    acc += c.re;
                    path.push(acc);
                }
                path
            }
        }
    }

    pub fn realize(&self, seed: SeedSpec) -> FieldRealization {
        let mut rng = seed.rng();
        FieldRealization {
            spec: FieldSpec::Fbm {
                hurst: self.hurst,
                dim: 1,
            },
            seed,
            method: self.method(),
            locations: self.grid().into_iter().map(|t| vec![t]).collect(),
            values: self.sample_path(&mut rng),
        }
    }
}

/// One fBm trace on `0, step, .., (n_points - 1) step`.
pub fn sample_fbm_grid_1d(
    hurst: f64,
    step: f64,
    n_points: usize,
    seed: SeedSpec,
) -> Result<FieldRealization> {
    Ok(FbmGridSampler::new(hurst, step, n_points)?.realize(seed))
}

/// `<U, mu_x - mu_y> = mean U(x_n) - mean U(y_m)`.
pub fn pair_field_empirical(
    f: &FieldRealization,
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
) -> Result<f64> {
    let index = f.index();
    let mean_over = |m: &EmpiricalMeasure| -> Result<f64> {
        let mut acc = 0.0;
        for p in m.points() {
            let i = index
                .get(&point_key(p))
                .ok_or_else(|| Error::arg(format!("point {p:?} is not a field location")))?;
            acc += f.values[*i];
        }
        Ok(acc / m.len() as f64)
    };
    Ok(mean_over(x)? - mean_over(y)?)
}

/// Trapezoid approximation of `int U(t) q(t) dt` on the realization's
/// uniform 1-D grid.
pub fn pair_field_density(f: &FieldRealization, q: &[f64]) -> Result<f64> {
    if q.len() != f.values.len() {
        return Err(Error::arg(format!(
            "density has {} values for {} grid points",
            q.len(),
            f.values.len()
        )));
    }
    if f.locations.iter().any(|p| p.len() != 1) {
        return Err(Error::arg("density pairing needs a 1-D grid"));
    }
    let step = uniform_step(&f.locations.iter().map(|p| p[0]).collect::<Vec<_>>())?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("density values must be finite"));
    }
    let prod: Vec<f64> = f.values.iter().zip(q).map(|(u, w)| u * w).collect();
    Ok(trapezoid(&prod, step))
}

pub(crate) fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::arg("grid needs at least 2 points"));
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let tol = 1e-9 * step.abs().max(f64::MIN_POSITIVE);
    let uniform = step > 0.0
        && grid
            .iter()
            .enumerate()
            .all(|(i, t)| (t - (grid[0] + i as f64 * step)).abs() <= tol * (i as f64 + 1.0));
    if !uniform {
        return Err(Error::arg("grid is not uniform and increasing"));
    }
    Ok(step)
}

/// Pairing of sampler output with a fixed pair of empirical measures.
#[derive(Debug, Clone)]
pub(crate) struct EmpiricalPairing {
    /// (unique slot, weight) with weights `1/N_x` and `-1/N_y` merged per slot
    terms: Vec<(usize, f64)>,
}

impl EmpiricalPairing {
    pub(crate) fn new(
        sampler: &FieldSampler,
        x: &EmpiricalMeasure,
        y: &EmpiricalMeasure,
    ) -> Result<Self> {
        let mut keys = HashMap::new();
        for (i, p) in sampler.locations.iter().enumerate() {
            keys.entry(point_key(p)).or_insert(i);
        }
        let mut weights = vec![0.0; sampler.n_unique];
        for (m, w) in [(x, 1.0 / x.len() as f64), (y, -1.0 / y.len() as f64)] {
            for p in m.points() {
                let s = sampler
                    .slot_of(&keys, p)
                    .ok_or_else(|| Error::arg(format!("point {p:?} is not a field location")))?;
                weights[s] += w;
            }
        }
        let terms = weights
            .into_iter()
            .enumerate()
            .filter(|(_, w)| *w != 0.0)
            .collect();
        Ok(EmpiricalPairing { terms })
    }

    pub(crate) fn apply(&self, unique_values: &[f64]) -> f64 {
        self.terms.iter().map(|&(s, w)| w * unique_values[s]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Summary;

    #[test]
    fn origin_is_pinned() {
        for h in [0.1, 0.5, 0.9] {
            let r = sample_field_at(
                FieldSpec::Fbm { hurst: h, dim: 1 },
                &[vec![0.0]],
                SeedSpec::from_seed(1),
            )
            .unwrap();
            assert_eq!(r.values, vec![0.0]);
            let r = sample_field_at(
                FieldSpec::Fbm { hurst: h, dim: 2 },
                &[vec![1.0, 1.0], vec![0.0, -0.0]],
                SeedSpec::from_seed(1),
            )
            .unwrap();
            assert_eq!(r.values[1], 0.0);
            assert_ne!(r.values[0], 0.0);
        }
    }

    #[test]
    fn duplicate_locations_share_values() {
        let locs = vec![vec![0.5], vec![1.5], vec![0.5]];
        let r = sample_field_at(
            FieldSpec::Fbm { hurst: 0.3, dim: 1 },
            &locs,
            SeedSpec::from_seed(9),
        )
        .unwrap();
        assert_eq!(r.values[0], r.values[2]);
        assert_eq!(r.method, SamplingMethod::Cholesky { jitter: 0.0 });
    }

    #[test]
    fn realizations_are_deterministic() {
        let locs = vec![vec![0.25], vec![1.0], vec![2.0]];
        let a =
            sample_field_at(FieldSpec::AdditiveBm { dim: 1 }, &locs, SeedSpec::new(3, 4)).unwrap();
        let b =
            sample_field_at(FieldSpec::AdditiveBm { dim: 1 }, &locs, SeedSpec::new(3, 4)).unwrap();
        assert_eq!(a, b);
        let c =
            sample_field_at(FieldSpec::AdditiveBm { dim: 1 }, &locs, SeedSpec::new(3, 5)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn bad_inputs() {
        assert!(FieldSampler::new(FieldSpec::Fbm { hurst: 1.0, dim: 1 }, &[vec![1.0]]).is_err());
        assert!(FieldSampler::new(FieldSpec::Fbm { hurst: 0.5, dim: 1 }, &[]).is_err());
        assert!(FieldSampler::new(FieldSpec::Fbm { hurst: 0.5, dim: 2 }, &[vec![1.0]]).is_err());
        assert!(sample_gff_series(10, &[0.5, 1.2], SeedSpec::default()).is_err());
        assert!(FieldSampler::new(FieldSpec::DiscreteField { levels: 2 }, &[vec![3.0]]).is_err());
    }

    #[test]
    fn jitter_ladder_reports_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_with_jitter(m) {
            Err(Error::Numerical {
                min_eigenvalue: Some(e),
                ..
            }) => assert!((e + 1.0).abs() < 1e-12),
            other => panic!("expected numerical failure, got {other:?}"),
        }
        // rank one: needs jitter but succeeds
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, jitter) = cholesky_with_jitter(m).unwrap();
        assert!(jitter > 0.0 && jitter <= 1e-6);
    }

    #[test]
    fn gff_single_mode_variance() {
        let sampler = FieldSampler::new(
            FieldSpec::GffNeumann1D { modes: 1 },
            &[vec![0.0], vec![0.5]],
        )
        .unwrap();
        let mut rng = SeedSpec::from_seed(5).rng();
        let draws: Vec<Vec<f64>> = (0..40_000)
            .map(|_| sampler.sample_values(&mut rng))
            .collect();
        let at0: Vec<f64> = draws.iter().map(|v| v[0]).collect();
        let var = Summary::of(&at0).std.powi(2);
        let expected = 2.0 / (PI * PI);
        assert!(
            (var - expected).abs() < 0.03 * expected,
            "{var} vs {expected}"
        );
        // cos(pi/2) = 0
        assert!(draws.iter().all(|v| v[1].abs() < 1e-15));
    }

    #[test]
    fn gff_integrates_to_zero() {
        let n = 2001;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        for s in 0..3 {
            let f = sample_gff_series(50, &grid, SeedSpec::new(8, s)).unwrap();
            let ones = vec![1.0; n];
            let integral = pair_field_density(&f, &ones).unwrap();
            assert!(integral.abs() < 1e-5, "{integral}");
        }
    }

    #[test]
    fn pairing_examples() {
        let locs = vec![vec![1.0], vec![2.0], vec![5.0]];
        let f = sample_field_at(
            FieldSpec::Fbm { hurst: 0.5, dim: 1 },
            &locs,
            SeedSpec::from_seed(2),
        )
        .unwrap();
        let a = EmpiricalMeasure::from_scalars(&[1.0, 2.0]).unwrap();
        assert_eq!(pair_field_empirical(&f, &a, &a).unwrap(), 0.0);
        let one = EmpiricalMeasure::from_scalars(&[1.0]).unwrap();
        let five = EmpiricalMeasure::from_scalars(&[5.0]).unwrap();
        assert_eq!(
            pair_field_empirical(&f, &one, &five).unwrap(),
            f.values[0] - f.values[2]
        );
        let mut shifted = f.clone();
        shifted.values.iter_mut().for_each(|v| *v += 3.25);
        let p0 = pair_field_empirical(&f, &a, &five).unwrap();
        let p1 = pair_field_empirical(&shifted, &a, &five).unwrap();
        assert!((p0 - p1).abs() < 1e-12);
        let missing = EmpiricalMeasure::from_scalars(&[7.0]).unwrap();
        assert!(pair_field_empirical(&f, &a, &missing).is_err());
    }

    #[test]
    fn density_pairing_examples() {
        let n = 513;
        let grid: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        let realization = |values: Vec<f64>| FieldRealization {
            spec: FieldSpec::Fbm { hurst: 0.5, dim: 1 },
            seed: SeedSpec::default(),
            method: SamplingMethod::Series,
            locations: grid.iter().map(|t| vec![*t]).collect(),
            values,
        };
        let ones = realization(vec![1.0; n]);
        assert_eq!(pair_field_density(&ones, &vec![0.0; n]).unwrap(), 0.0);
        assert!((pair_field_density(&ones, &vec![1.0; n]).unwrap() - 2.0).abs() < 1e-12);
        let linear = realization(grid.clone());
        let v = pair_field_density(&linear, &grid).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-4);
        assert!(pair_field_density(&linear, &grid[1..]).is_err());
        let mut bent = linear.clone();
        bent.locations[3][0] += 0.001;
        assert!(pair_field_density(&bent, &grid).is_err());
    }

    #[test]
    fn circulant_path_starts_at_zero() {
        let s = FbmGridSampler::new(0.3, 1.0 / 1023.0, 1024).unwrap();
        assert_eq!(s.method(), SamplingMethod::CirculantEmbedding);
        let r = s.realize(SeedSpec::from_seed(7));
        assert_eq!(r.values.len(), 1024);
        assert_eq!(r.values[0], 0.0);
        assert!(FbmGridSampler::new(0.3, 1.0, 1).is_err());
    }
}
