//! Monte Carlo studies: moment sensitivity of fractional pairings, SNR of
//! the unbiased estimator across Hurst indices, a heavy-tailed Student-t
//! comparison, and the `H -> 0` / `H -> 1` limits.
//!
//! Every cell and replication draws from its own seed stream
//! (`seed.child(cell).stream(rep)`), work runs on rayon with ordered
//! collection, and all reductions happen afterwards in a fixed order. Output
//! is therefore bit-identical for a fixed configuration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    centered_gaussian_fractional_oracle, unbiased_f32, unbiased_fractional_multi,
    unbiased_kernel_distance, v_statistic_distance, Convention,
};
use crate::fields::{FbmGridSampler, SamplingMethod};
use crate::kernels::KernelSpec;
use crate::measures::{
    build_student_scale, sample_with, DistributionSpec, EmpiricalMeasure, StudentSampler,
};
use crate::quadrature::trapezoid;
use crate::rng::SeedSpec;
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    MomentSweep,
    SnrSweep,
    StudentT,
    LimitChecks,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::MomentSweep => "moment-sweep",
            Experiment::SnrSweep => "snr-sweep",
            Experiment::StudentT => "student-t",
            Experiment::LimitChecks => "limit-checks",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "moment-sweep" | "moments" => Ok(Experiment::MomentSweep),
            "snr-sweep" | "snr" => Ok(Experiment::SnrSweep),
            "student-t" | "student" => Ok(Experiment::StudentT),
            "limit-checks" | "limits" => Ok(Experiment::LimitChecks),
            other => Err(Error::arg(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Perturbation of `N(0, 1)` in the SNR sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    Mean(f64),
    Std(f64),
}

impl Perturbation {
    fn distribution(&self) -> DistributionSpec {
        match *self {
            Perturbation::Mean(d) => DistributionSpec::PerturbedGaussian1D {
                mean_shift: d,
                std_scale: 1.0,
            },
            Perturbation::Std(s) => DistributionSpec::PerturbedGaussian1D {
                mean_shift: 0.0,
                std_scale: s,
            },
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Mean(d) => write!(f, "mean:{d}"),
            Perturbation::Std(s) => write!(f, "std:{s}"),
        }
    }
}

impl FromStr for Perturbation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::arg(format!("perturbation `{s}` is not kind:value")))?;
        let v = parse_f64(value)?;
        match kind {
            "mean" => Ok(Perturbation::Mean(v)),
            "std" if v > 0.0 => Ok(Perturbation::Std(v)),
            "std" => Err(Error::arg("std perturbation must be > 0")),
            other => Err(Error::arg(format!("unknown perturbation kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    /// Kernel sums in single precision with full (not reduced) kernels.
    F32,
}

/// Parameters of every experiment; each run reads the keys it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub h_grid: Vec<f64>,
    pub m_list: Vec<u32>,
    /// Grid points on `[-1, 1]` for the moment sweep (odd, >= 257).
    pub resolution: usize,
    /// Field realizations for the moment sweep.
    pub fields: usize,
    /// Sample size per estimate.
    pub n: usize,
    /// Replications per SNR cell.
    pub r: usize,
    pub seed: u64,
    pub convention: Convention,
    pub perturbations: Vec<Perturbation>,
    pub f_list: Vec<f64>,
    pub tau_list: Vec<f64>,
    pub dim: usize,
    pub alpha: f64,
    pub hurst: f64,
    /// Total Student-t draws per sample, split into blocks of `block`.
    pub student_n: usize,
    pub block: usize,
    pub sigma_range: (f64, f64),
    /// Redraw the scale vector for every block instead of once per sweep.
    pub redraw_sigma: bool,
    pub riesz_scale: f64,
    pub precision: Precision,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            experiment: Experiment::SnrSweep,
            h_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            m_list: vec![0, 1, 2, 3, 4],
            resolution: 1025,
            fields: 10_000,
            n: 32,
            r: 10_000,
            seed: 7,
            convention: Convention::Corrected,
            perturbations: vec![
                Perturbation::Mean(0.1),
                Perturbation::Mean(0.3),
                Perturbation::Mean(0.5),
                Perturbation::Std(1.1),
                Perturbation::Std(1.3),
            ],
            f_list: vec![0.25, 0.5, 1.0, 2.0, 3.0],
            tau_list: vec![0.05, 0.2],
            dim: 16,
            alpha: 5.0,
            hurst: 0.5,
            student_n: 10_000,
            block: 32,
            sigma_range: (0.7, 0.8),
            redraw_sigma: false,
            riesz_scale: 1.0,
            precision: Precision::F64,
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::arg(format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::arg(format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::arg(format!("`{s}` is not a count")))
}

/// `a:b:n` (n evenly spaced values, ends included) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b) = (parse_f64(parts[0])?, parse_f64(parts[1])?);
        let n = parse_count(parts[2])?;
        return match n {
            0 => Err(Error::arg("grid needs at least one point")),
            1 => Ok(vec![a]),
            _ => Ok((0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect()),
        };
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_f64)
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::arg(format!("`{other}` is not a boolean"))),
    }
}

impl SweepConfig {
    /// Defaults for `experiment`.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let mut c = SweepConfig {
            experiment,
            ..SweepConfig::default()
        };
        if experiment == Experiment::MomentSweep {
            c.h_grid = parse_grid("0.05:0.95:19").unwrap();
        }
        c
    }

    /// Reads `key=value` lines; `#` starts a comment. An `experiment` key
    /// anywhere selects that experiment's defaults before the other keys apply.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("line {}: expected key=value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let experiment = match pairs.iter().rev().find(|(k, _)| k == "experiment") {
            Some((_, v)) => v.parse()?,
            None => return Err(Error::arg("config has no `experiment` key")),
        };
        let mut config = SweepConfig::for_experiment(experiment);
        for (k, v) in &pairs {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "h_grid" => self.h_grid = parse_grid(value)?,
            "m_list" => {
                self.m_list = value
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::arg(format!("`{t}` is not a moment order")))
                    })
                    .collect::<Result<_>>()?
            }
            "resolution" => self.resolution = parse_count(value)?,
            "fields" | "m" => self.fields = parse_count(value)?,
            "n" => self.n = parse_count(value)?,
            "r" => self.r = parse_count(value)?,
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::arg(format!("`{value}` is not a seed")))?
            }
            "convention" => {
                self.convention = match value {
                    "paper" => Convention::Paper,
                    "corrected" => Convention::Corrected,
                    other => return Err(Error::arg(format!("unknown convention `{other}`"))),
                }
            }
            "perturbations" => {
                self.perturbations = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "f_list" => self.f_list = parse_grid(value)?,
            "tau_list" => self.tau_list = parse_grid(value)?,
            "d" | "dim" => self.dim = parse_count(value)?,
            "alpha" => self.alpha = parse_f64(value)?,
            "hurst" | "H" => self.hurst = parse_f64(value)?,
            "student_n" => self.student_n = parse_count(value)?,
            "block" => self.block = parse_count(value)?,
            "sigma_range" => {
                let (a, b) = value
                    .split_once(':')
                    .ok_or_else(|| Error::arg("sigma_range must be lo:hi"))?;
                self.sigma_range = (parse_f64(a)?, parse_f64(b)?);
            }
            "redraw_sigma" => self.redraw_sigma = parse_bool(value)?,
            "riesz_scale" => self.riesz_scale = parse_f64(value)?,
            "precision" => {
                self.precision = match value {
                    "f64" | "double" => Precision::F64,
                    "f32" | "single" => Precision::F32,
                    other => return Err(Error::arg(format!("unknown precision `{other}`"))),
                }
            }
            other => return Err(Error::arg(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.fields,
            self.n,
            self.r,
            self.resolution,
            self.student_n,
            self.block,
            self.dim,
        ];
        if counts.contains(&0) {
            return Err(Error::invalid("all counts must be >= 1"));
        }
        if self.h_grid.is_empty() || self.h_grid.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
            return Err(Error::invalid("H grid must be non-empty and inside (0, 1)"));
        }
        match self.experiment {
            Experiment::MomentSweep => {
                if self.resolution < 257 || self.resolution % 2 == 0 {
                    return Err(Error::invalid(
                        "moment sweep resolution must be odd and >= 257",
                    ));
                }
                if self.m_list.is_empty() {
                    return Err(Error::invalid("moment sweep needs at least one m"));
                }
            }
            Experiment::SnrSweep => {
                if self.n < 2 || self.r < 100 {
                    return Err(Error::invalid("SNR sweep needs n >= 2 and r >= 100"));
                }
                if self.perturbations.is_empty() {
                    return Err(Error::invalid("SNR sweep needs at least one perturbation"));
                }
            }
            Experiment::StudentT => {
                if self.dim < 3 {
                    return Err(Error::invalid("Student-t comparison needs d >= 3"));
                }
                if self.block < 2 || self.student_n < self.block {
                    return Err(Error::invalid(
                        "Student-t comparison needs block >= 2 and student_n >= block",
                    ));
                }
                if self.f_list.iter().any(|f| !(*f > 0.0))
                    || self.tau_list.iter().any(|t| !(*t > 0.0))
                {
                    return Err(Error::invalid("f and tau values must be > 0"));
                }
                let (lo, hi) = self.sigma_range;
                if !(lo > 0.0 && hi >= lo) {
                    return Err(Error::invalid("sigma_range must satisfy 0 < lo <= hi"));
                }
                KernelSpec::Riesz {
                    alpha: self.alpha,
                    dim: self.dim,
                    scale: self.riesz_scale,
                }
                .validate()?;
                KernelSpec::Fractional {
                    hurst: self.hurst,
                    dim: self.dim,
                }
                .validate()?;
            }
            Experiment::LimitChecks => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub hurst: f64,
    pub m: u32,
    pub mean: f64,
    pub stderr: f64,
}

/// Summary of one cell of replicated estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub signal_mean: f64,
    pub signal_std: f64,
    /// `mean / std`; absent when the spread is zero or nothing was finite.
    pub snr: Option<f64>,
    pub negative_frac: f64,
    pub nonfinite_frac: f64,
    pub count: usize,
}

impl CellStats {
    pub fn of(values: &[f64]) -> CellStats {
        let s = Summary::of(values);
        let total = values.len().max(1) as f64;
        let negative = values.iter().filter(|v| **v < 0.0).count() as f64;
        let nonfinite = values.iter().filter(|v| !v.is_finite()).count() as f64;
        CellStats {
            signal_mean: s.mean,
            signal_std: s.std,
            snr: (s.count > 1 && s.std > 0.0).then(|| s.mean / s.std),
            negative_frac: negative / total,
            nonfinite_frac: nonfinite / total,
            count: values.len(),
        }
    }

    /// Every outcome was nonfinite.
    pub fn failed(&self) -> bool {
        self.nonfinite_frac == 1.0
    }

    pub fn stderr(&self) -> f64 {
        let finite = ((1.0 - self.nonfinite_frac) * self.count as f64).round();
        self.signal_std / finite.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub perturbation: Perturbation,
    pub hurst: f64,
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentRow {
    pub dof: f64,
    pub tau: f64,
    pub kernel: KernelSpec,
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub check: String,
    pub hurst: f64,
    pub value: f64,
    pub stderr: f64,
    pub reference: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepTable {
    Moments(Vec<MomentRow>),
    Snr(Vec<SnrRow>),
    StudentT(Vec<StudentRow>),
    Limits(Vec<LimitRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: Experiment,
    /// Provenance lines written as `# key=value`.
    pub metadata: Vec<(String, String)>,
    pub table: SweepTable,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl SweepResult {
    pub fn header(&self) -> &'static str {
        match self.table {
            SweepTable::Moments(_) => "H,m,mean,stderr",
            SweepTable::Snr(_) => "perturbation,H,signal_mean,signal_std,snr",
            SweepTable::StudentT(_) => "f,tau,kernel,snr,negative_frac,nonfinite_frac",
            SweepTable::Limits(_) => "check,H,value,stderr,reference,pass",
        }
    }

    /// Metadata comments, then the table. Per-row counters that have no
    /// column in the table are emitted as extra comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        if let SweepTable::Snr(rows) = &self.table {
            for r in rows {
                writeln!(
                    out,
                    "# counters perturbation={} H={} negative_frac={} nonfinite_frac={}",
                    r.perturbation,
                    r.hurst,
                    num(r.stats.negative_frac),
                    num(r.stats.nonfinite_frac)
                )?;
            }
        }
        writeln!(out, "{}", self.header())?;
        match &self.table {
            SweepTable::Moments(rows) => {
                for r in rows {
                    writeln!(out, "{},{},{},{}", r.hurst, r.m, num(r.mean), num(r.stderr))?;
                }
            }
            SweepTable::Snr(rows) => {
                for r in rows {
                    let s = &r.stats;
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        r.perturbation,
                        r.hurst,
                        num(s.signal_mean),
                        num(s.signal_std),
                        opt(s.snr)
                    )?;
                }
            }
            SweepTable::StudentT(rows) => {
                for r in rows {
                    let s = &r.stats;
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.dof,
                        r.tau,
                        r.kernel,
                        opt(s.snr),
                        num(s.negative_frac),
                        num(s.nonfinite_frac)
                    )?;
                }
            }
            SweepTable::Limits(rows) => {
                for r in rows {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.check,
                        r.hurst,
                        num(r.value),
                        num(r.stderr),
                        num(r.reference),
                        r.pass
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn base_metadata(config: &SweepConfig) -> Vec<(String, String)> {
    vec![
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("experiment".into(), config.experiment.as_str().into()),
        ("seed".into(), config.seed.to_string()),
        ("convention".into(), config.convention.as_str().into()),
    ]
}

pub fn run_experiment(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let seed = SeedSpec::from_seed(config.seed);
    match config.experiment {
        Experiment::MomentSweep => moment_sweep(
            &config.h_grid,
            &config.m_list,
            config.resolution,
            config.fields,
            seed,
        ),
        Experiment::SnrSweep => {
            let mut rows = Vec::new();
            for (i, p) in config.perturbations.iter().enumerate() {
                let part = snr_sweep(
                    *p,
                    &config.h_grid,
                    config.n,
                    config.r,
                    seed.child(i as u64),
                    config.convention,
                )?;
                if let SweepTable::Snr(r) = part.table {
                    rows.extend(r);
                }
            }
            let mut metadata = base_metadata(config);
            metadata.push(("n".into(), config.n.to_string()));
            metadata.push(("r".into(), config.r.to_string()));
            Ok(SweepResult {
                experiment: config.experiment,
                metadata,
                table: SweepTable::Snr(rows),
            })
        }
        Experiment::StudentT => student_t_comparison(config),
        Experiment::LimitChecks => limit_checks(config.seed),
    }
}

/// Work items per rayon task in the field loops.
const BATCH: usize = 256;

/// `E (int_{-1}^{1} B^H(t) t^m dt)^2`, the trapezoid pairing of
/// [`crate::fields::pair_field_density`], for each `(H, m)`, estimated from
/// `fields` two-sided fBm paths on `resolution` grid points. The path is
/// `B(t + 1) - B(1)` for an fBm `B` on `[0, 2]`, so it vanishes at `t = 0`.
pub fn moment_sweep(
    h_grid: &[f64],
    m_list: &[u32],
    resolution: usize,
    fields: usize,
    seed: SeedSpec,
) -> Result<SweepResult> {
    if resolution < 257 || resolution % 2 == 0 {
        return Err(Error::arg("resolution must be odd and >= 257"));
    }
    if fields < 2 {
        return Err(Error::arg("moment sweep needs at least 2 fields"));
    }
    let step = 2.0 / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| -1.0 + i as f64 * step).collect();
    let densities: Vec<Vec<f64>> = m_list
        .iter()
        .map(|&m| grid.iter().map(|t| t.powi(m as i32)).collect())
        .collect();
    let centre = (resolution - 1) / 2;
    let mut rows = Vec::new();
    let mut fallback = false;

    for (hi, &h) in h_grid.iter().enumerate() {
        let sampler = FbmGridSampler::new(h, step, resolution)?;
        fallback |= sampler.method() == SamplingMethod::CirculantFallback;
        let cell = seed.child(hi as u64);
        let batches = fields.div_ceil(BATCH);
        let squares: Vec<Vec<Vec<f64>>> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let count = BATCH.min(fields - b * BATCH);
                (0..count)
                    .map(|i| {
                        let mut rng = cell.stream((b * BATCH + i) as u64).rng();
                        let path = sampler.sample_path(&mut rng);
                        let anchor = path[centre];
                        let centred: Vec<f64> = path.iter().map(|v| v - anchor).collect();
                        densities
                            .iter()
                            .map(|q| {
                                let prod: Vec<f64> =
                                    centred.iter().zip(q).map(|(u, w)| u * w).collect();
                                let p = trapezoid(&prod, step);
                                p * p
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let squares: Vec<Vec<f64>> = squares.into_iter().flatten().collect();
        for (mi, &m) in m_list.iter().enumerate() {
            let column: Vec<f64> = squares.iter().map(|s| s[mi]).collect();
            let s = Summary::of(&column);
            rows.push(MomentRow {
                hurst: h,
                m,
                mean: s.mean,
                stderr: s.stderr,
            });
        }
    }

    let metadata = vec![
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("experiment".into(), "moment-sweep".into()),
        ("seed".into(), seed.base_seed.to_string()),
        ("resolution".into(), resolution.to_string()),
        ("fields".into(), fields.to_string()),
        (
            "sampler".into(),
            if fallback {
                "circulant+cholesky-fallback"
            } else {
                "circulant"
            }
            .into(),
        ),
    ];
    Ok(SweepResult {
        experiment: Experiment::MomentSweep,
        metadata,
        table: SweepTable::Moments(rows),
    })
}

/// SNR of `r` unbiased estimates between `N(0, 1)` and the perturbed
/// Gaussian, each from `n` draws per side. All `H` share the same draws.
pub fn snr_sweep(
    perturbation: Perturbation,
    h_grid: &[f64],
    n: usize,
    r: usize,
    seed: SeedSpec,
    convention: Convention,
) -> Result<SweepResult> {
    if n < 2 || r < 2 {
        return Err(Error::arg("SNR sweep needs n >= 2 and r >= 2"));
    }
    let base = DistributionSpec::Gaussian1D {
        mean: 0.0,
        std: 1.0,
    };
    let perturbed = perturbation.distribution();
    perturbed.validate()?;
    let draws: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64).rng();
            let x = sample_with(&perturbed, n, &mut rng)?;
            let y = sample_with(&base, n, &mut rng)?;
            unbiased_fractional_multi(&x, &y, h_grid, convention)
        })
        .collect::<Result<_>>()?;
    let rows = h_grid
        .iter()
        .enumerate()
        .map(|(hi, &h)| {
            let column: Vec<f64> = draws.iter().map(|d| d[hi]).collect();
            SnrRow {
                perturbation,
                hurst: h,
                stats: CellStats::of(&column),
            }
        })
        .collect();
    let metadata = vec![
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("experiment".into(), "snr-sweep".into()),
        (
            "seed".into(),
            format!("{}/{}", seed.base_seed, seed.stream_index),
        ),
        ("convention".into(), convention.as_str().into()),
        ("n".into(), n.to_string()),
        ("r".into(), r.to_string()),
    ];
    Ok(SweepResult {
        experiment: Experiment::SnrSweep,
        metadata,
        table: SweepTable::Snr(rows),
    })
}

fn draw_sigma<R: Rng + ?Sized>(rng: &mut R, d: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    (0..d)
        .map(|_| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect()
}

/// Unbiased fractional and Riesz distances between `t_f(Gamma_{tau,sigma})`
/// and `t_f(I)` in dimension `d`. The `student_n` draws per side are split
/// into blocks of `block`; each block gives one estimate.
pub fn student_t_comparison(config: &SweepConfig) -> Result<SweepResult> {
    let mut probe = config.clone();
    probe.experiment = Experiment::StudentT;
    probe.validate()?;
    let d = config.dim;
    let seed = SeedSpec::from_seed(config.seed);
    let fractional = KernelSpec::Fractional {
        hurst: config.hurst,
        dim: d,
    };
    let riesz = KernelSpec::Riesz {
        alpha: config.alpha,
        dim: d,
        scale: config.riesz_scale,
    };
    let blocks = config.student_n / config.block;
    let identity = nalgebra::DMatrix::<f64>::identity(d, d);

    let sweep_sigma = draw_sigma(&mut seed.child(u64::MAX).rng(), d, config.sigma_range);
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &f in &config.f_list {
        for &tau in &config.tau_list {
            let cell_seed = seed.child(cell);
            cell += 1;
            let fixed = StudentSampler::from_scale(f, &build_student_scale(d, tau, &sweep_sigma)?)?;
            let reference = StudentSampler::from_scale(f, &identity)?;
            let estimates: Vec<(f64, f64)> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = cell_seed.stream(b as u64).rng();
                    let redrawn;
                    let sampler = if config.redraw_sigma {
                        let sigma = draw_sigma(&mut rng, d, config.sigma_range);
                        redrawn =
                            StudentSampler::from_scale(f, &build_student_scale(d, tau, &sigma)?)?;
                        &redrawn
                    } else {
                        &fixed
                    };
                    let mut xs = Vec::with_capacity(config.block * d);
                    let mut ys = Vec::with_capacity(config.block * d);
                    for _ in 0..config.block {
                        sampler.push_sample(&mut rng, &mut xs);
                        reference.push_sample(&mut rng, &mut ys);
                    }
                    Ok(block_estimates(xs, ys, d, &fractional, &riesz, config))
                })
                .collect::<Result<_>>()?;
            let (fr, rz): (Vec<f64>, Vec<f64>) = estimates.into_iter().unzip();
            rows.push(StudentRow {
                dof: f,
                tau,
                kernel: fractional,
                stats: CellStats::of(&fr),
            });
            rows.push(StudentRow {
                dof: f,
                tau,
                kernel: riesz,
                stats: CellStats::of(&rz),
            });
        }
    }

    let mut metadata = base_metadata(config);
    // This study always reports the corrected scale.
    metadata.retain(|(k, _)| k != "convention");
    metadata.extend([
        ("convention".into(), "corrected".into()),
        ("d".into(), d.to_string()),
        ("alpha".into(), config.alpha.to_string()),
        ("H".into(), config.hurst.to_string()),
        ("student_n".into(), config.student_n.to_string()),
        ("block".into(), config.block.to_string()),
        ("blocks".into(), blocks.to_string()),
        ("riesz_scale".into(), config.riesz_scale.to_string()),
        (
            "precision".into(),
            match config.precision {
                Precision::F64 => "f64".into(),
                Precision::F32 => "f32".into(),
            },
        ),
        (
            "sigma_range".into(),
            format!("{}:{}", config.sigma_range.0, config.sigma_range.1),
        ),
    ]);
    if config.redraw_sigma {
        metadata.push(("sigma".into(), "redrawn per block".into()));
    } else {
        let list: Vec<String> = sweep_sigma.iter().map(|s| format!("{s}")).collect();
        metadata.push(("sigma".into(), list.join(" ")));
    }
    Ok(SweepResult {
        experiment: Experiment::StudentT,
        metadata,
        table: SweepTable::StudentT(rows),
    })
}

fn block_estimates(
    xs: Vec<f64>,
    ys: Vec<f64>,
    d: usize,
    fractional: &KernelSpec,
    riesz: &KernelSpec,
    config: &SweepConfig,
) -> (f64, f64) {
    match config.precision {
        Precision::F32 => {
            let x32: Vec<f32> = xs.iter().map(|v| *v as f32).collect();
            let y32: Vec<f32> = ys.iter().map(|v| *v as f32).collect();
            (
                unbiased_f32(&x32, &y32, d, fractional) as f64,
                unbiased_f32(&x32, &y32, d, riesz) as f64,
            )
        }
        Precision::F64 => {
            let estimate = |k: &KernelSpec, x: &EmpiricalMeasure, y: &EmpiricalMeasure| {
                unbiased_kernel_distance(x, y, k, Convention::Corrected)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            };
            // points can be infinite for tiny f; measures reject those, so
            // such blocks are nonfinite outcomes
            match (
                EmpiricalMeasure::from_flat(xs, d),
                EmpiricalMeasure::from_flat(ys, d),
            ) {
                (Ok(x), Ok(y)) => (estimate(fractional, &x, &y), estimate(riesz, &x, &y)),
                _ => (f64::NAN, f64::NAN),
            }
        }
    }
}

/// The `H -> 1` and `H -> 0` limits, checked on Gaussian samples.
///
/// * `h1_mean_gap`: V-statistic at `H = 0.99` between `N(0, 1)` and
///   `N(1, 1)` samples of size 1000, averaged over replications, against
///   the squared mean gap 1 (15%).
/// * `h1_no_gap`: unbiased estimate at `H = 0.99` with no gap, against 0
///   (4 standard errors).
/// * `h0_density_ratio`: unbiased estimates between `N(0, 1)` and
///   `N(0, 1.3^2)` at `H = 0.01` relative to `H = 0.5` must stay below 10%.
///   The closed form is reported alongside.
pub fn limit_checks(seed: u64) -> Result<SweepResult> {
    let seed = SeedSpec::from_seed(seed);
    let n = 1000;
    let base = DistributionSpec::Gaussian1D {
        mean: 0.0,
        std: 1.0,
    };
    let mut rows = Vec::new();

    let near_one = KernelSpec::Fractional {
        hurst: 0.99,
        dim: 1,
    };
    let reps = 20;
    let gap: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(0).stream(i).rng();
            let x = sample_with(&base, n, &mut rng)?;
            let y = sample_with(
                &DistributionSpec::Gaussian1D {
                    mean: 1.0,
                    std: 1.0,
                },
                n,
                &mut rng,
            )?;
            Ok(v_statistic_distance(&x, &y, &near_one)?.value)
        })
        .collect::<Result<_>>()?;
    let s = Summary::of(&gap);
    rows.push(LimitRow {
        check: "h1_mean_gap".into(),
        hurst: 0.99,
        value: s.mean,
        stderr: s.stderr,
        reference: 1.0,
        pass: (s.mean - 1.0).abs() <= 0.15,
    });

    let none: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(1).stream(i).rng();
            let x = sample_with(&base, n, &mut rng)?;
            let y = sample_with(&base, n, &mut rng)?;
            Ok(unbiased_kernel_distance(&x, &y, &near_one, Convention::Corrected)?.value)
        })
        .collect::<Result<_>>()?;
    let s = Summary::of(&none);
    rows.push(LimitRow {
        check: "h1_no_gap".into(),
        hurst: 0.99,
        value: s.mean,
        stderr: s.stderr,
        reference: 0.0,
        pass: s.mean.abs() <= 4.0 * s.stderr,
    });

    let hs = [0.01, 0.5];
    let reps = 200;
    let wide = DistributionSpec::Gaussian1D {
        mean: 0.0,
        std: 1.3,
    };
    let pairs: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(2).stream(i).rng();
            let x = sample_with(&base, n, &mut rng)?;
            let y = sample_with(&wide, n, &mut rng)?;
            unbiased_fractional_multi(&x, &y, &hs, Convention::Corrected)
        })
        .collect::<Result<_>>()?;
    let low = Summary::of(&pairs.iter().map(|p| p[0]).collect::<Vec<_>>());
    let mid = Summary::of(&pairs.iter().map(|p| p[1]).collect::<Vec<_>>());
    let exact = centered_gaussian_fractional_oracle(1.3, 0.01)
        / centered_gaussian_fractional_oracle(1.3, 0.5);
    rows.push(LimitRow {
        check: "h0_density_value".into(),
        hurst: 0.01,
        value: low.mean,
        stderr: low.stderr,
        reference: centered_gaussian_fractional_oracle(1.3, 0.01),
        pass: (low.mean - centered_gaussian_fractional_oracle(1.3, 0.01)).abs() <= 4.0 * low.stderr,
    });
    rows.push(LimitRow {
        check: "h0_density_ratio".into(),
        hurst: 0.01,
        value: low.mean / mid.mean,
        stderr: f64::NAN,
        reference: exact,
        pass: low.mean < 0.1 * mid.mean && exact < 0.1,
    });

    let metadata = vec![
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("experiment".into(), "limit-checks".into()),
        ("seed".into(), seed.base_seed.to_string()),
        ("n".into(), n.to_string()),
    ];
    Ok(SweepResult {
        experiment: Experiment::LimitChecks,
        metadata,
        table: SweepTable::Limits(rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1:0.9:9").unwrap().len(), 9);
        assert!((parse_grid("0.1:0.9:9").unwrap()[4] - 0.5).abs() < 1e-15);
        assert_eq!(parse_grid("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_grid("a:b:3").is_err());
    }

    #[test]
    fn config_parsing() {
        let c = SweepConfig::parse(
            "# sweep\nexperiment=snr-sweep\nh_grid=0.1:0.9:9\nn=32\nr=10000\nseed=7\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::SnrSweep);
        assert_eq!(c.r, 10_000);
        assert!(SweepConfig::parse("experiment=snr-sweep\nbogus=1").is_err());
        assert!(SweepConfig::parse("n=3").is_err());
        assert!(SweepConfig::parse("experiment=snr-sweep\nh_grid=0:1:3").is_err());
        let m = SweepConfig::parse("experiment=moment-sweep").unwrap();
        assert_eq!(m.h_grid.len(), 19);
        let p: Perturbation = "std:1.3".parse().unwrap();
        assert_eq!(p, Perturbation::Std(1.3));
        assert_eq!(p.to_string(), "std:1.3");
    }

    #[test]
    fn cell_stats_counts() {
        let s = CellStats::of(&[1.0, -1.0, f64::NAN, 3.0]);
        assert_eq!(s.negative_frac, 0.25);
        assert_eq!(s.nonfinite_frac, 0.25);
        assert_eq!(s.signal_mean, 1.0);
        assert!(s.snr.is_some());
        assert!(CellStats::of(&[2.0, 2.0]).snr.is_none());
        assert!(CellStats::of(&[f64::NAN]).failed());
    }

    #[test]
    fn snr_sweep_is_deterministic_and_convention_free() {
        let hs = [0.2, 0.8];
        let run = |c| {
            snr_sweep(
                Perturbation::Mean(0.5),
                &hs,
                16,
                200,
                SeedSpec::from_seed(3),
                c,
            )
            .unwrap()
        };
        let a = run(Convention::Corrected);
        assert_eq!(a, run(Convention::Corrected));
        let b = run(Convention::Paper);
        let (SweepTable::Snr(ra), SweepTable::Snr(rb)) = (&a.table, &b.table) else {
            unreachable!()
        };
        for (x, y) in ra.iter().zip(rb) {
            let (sx, sy) = (x.stats.snr.unwrap(), y.stats.snr.unwrap());
            assert!(((sx - sy) / sx).abs() < 1e-9);
        }
        let csv = a.to_csv_string();
        assert!(csv
            .lines()
            .any(|l| l == "perturbation,H,signal_mean,signal_std,snr"));
    }

    #[test]
    fn small_moment_sweep() {
        let r = moment_sweep(&[0.5], &[0, 1], 257, 64, SeedSpec::from_seed(1)).unwrap();
        let SweepTable::Moments(rows) = &r.table else {
            unreachable!()
        };
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.mean > 0.0));
        assert!(r.to_csv_string().contains("H,m,mean,stderr\n0.5,0,"));
        assert!(moment_sweep(&[0.5], &[0], 256, 64, SeedSpec::from_seed(1)).is_err());
    }

    #[test]
    fn small_student_t() {
        let mut c = SweepConfig::for_experiment(Experiment::StudentT);
        c.f_list = vec![3.0];
        c.tau_list = vec![0.05];
        c.student_n = 320;
        let r = student_t_comparison(&c).unwrap();
        let SweepTable::StudentT(rows) = &r.table else {
            unreachable!()
        };
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.stats.count == 10 && r.stats.nonfinite_frac == 0.0));
        assert!(r.to_csv_string().contains(
            "f,tau,kernel,snr,negative_frac,nonfinite_frac\n3,0.05,fractional:H=0.5;d=16,"
        ));
        c.precision = Precision::F32;
        assert!(student_t_comparison(&c).is_ok());
    }
}
