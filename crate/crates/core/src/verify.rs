//! Cross-checks between the three routes to the same distance, on seeded
//! random point sets. Each case produces a table with one pass flag per row.

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::{
    field_mc_distance, fourier_distance_1d, v_statistic_distance, QuadratureConfig,
};
use crate::fields::{FieldSpec, DEFAULT_GFF_MODES};
use crate::kernels::KernelSpec;
use crate::measures::{empirical_cdf_diff_l2, EmpiricalMeasure};
use crate::rng::SeedSpec;

/// `|v - fourier| < FOURIER_TOL * max(v, 1)`
pub const FOURIER_TOL: f64 = 1e-3;
/// `|v - field_mc| < MC_SIGMAS * stderr`
pub const MC_SIGMAS: f64 = 4.0;
/// Relative agreement of the `H = 1/2` V-statistic with the CDF integral.
pub const CVM_REL_TOL: f64 = 1e-12;
/// Free-field pairing variance against the CDF integral: `3% + MC_SIGMAS * stderr`.
pub const GFF_REL_TOL: f64 = 0.03;

pub const EQUIVALENCE_HURSTS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyCase {
    Equivalence,
    Cvm,
    Gff,
}

impl VerifyCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerifyCase::Equivalence => "equivalence",
            VerifyCase::Cvm => "cvm",
            VerifyCase::Gff => "gff",
        }
    }
}

impl FromStr for VerifyCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equivalence" => Ok(VerifyCase::Equivalence),
            "cvm" => Ok(VerifyCase::Cvm),
            "gff" => Ok(VerifyCase::Gff),
            other => Err(Error::arg(format!("unknown verify case `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub sets: usize,
    pub replications: usize,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn for_case(case: VerifyCase, seed: u64) -> Self {
        match case {
            VerifyCase::Equivalence => VerifyOptions {
                sets: 5,
                replications: 100_000,
                seed,
            },
            VerifyCase::Cvm => VerifyOptions {
                sets: 100,
                replications: 0,
                seed,
            },
            VerifyCase::Gff => VerifyOptions {
                sets: 5,
                replications: 100_000,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub case: VerifyCase,
    pub seed: u64,
    pub header: &'static str,
    pub rows: Vec<Vec<String>>,
    pub passes: Vec<bool>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.passes.iter().all(|p| *p)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# version={}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# verify={}", self.case.as_str())?;
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "{}", self.header)?;
        for (row, pass) in self.rows.iter().zip(&self.passes) {
            writeln!(
                out,
                "{},{}",
                row.join(","),
                if *pass { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Random 1-D sample pair with `min..=max` points per side; `y` is shifted
/// and widened so the distance is not tiny.
pub fn random_pair(
    seed: SeedSpec,
    min: usize,
    max: usize,
    unit_interval: bool,
) -> (EmpiricalMeasure, EmpiricalMeasure) {
    let mut rng = seed.rng();
    let nx = rng.random_range(min..=max);
    let ny = rng.random_range(min..=max);
    let mut draw = |n: usize, shift: f64, scale: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                if unit_interval {
                    let u: f64 = rng.random();
                    (u * scale + shift).clamp(0.0, 1.0)
                } else {
                    shift + scale * rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect()
    };
    let (x, y) = if unit_interval {
        (draw(nx, 0.0, 0.8), draw(ny, 0.2, 0.8))
    } else {
        (draw(nx, 0.0, 1.0), draw(ny, 0.5, 1.5))
    };
    (
        EmpiricalMeasure::from_scalars(&x).unwrap(),
        EmpiricalMeasure::from_scalars(&y).unwrap(),
    )
}

pub fn run_verify(case: VerifyCase, options: &VerifyOptions) -> Result<VerifyReport> {
    if options.sets == 0 {
        return Err(Error::arg("need at least one point set"));
    }
    let seed = SeedSpec::from_seed(options.seed);
    let mut rows = Vec::new();
    let mut passes = Vec::new();
    let header;
    match case {
        VerifyCase::Equivalence => {
            header = "set,H,v_statistic,fourier,field_mc,field_mc_stderr,cvm,status";
            let quad = QuadratureConfig::default();
            for set in 0..options.sets {
                let (x, y) = random_pair(seed.child(set as u64).stream(0), 2, 8, false);
                for (hi, &h) in EQUIVALENCE_HURSTS.iter().enumerate() {
                    let v = v_statistic_distance(&x, &y, &KernelSpec::fractional(h, 1))?.value;
                    let f = fourier_distance_1d(&x, &y, h, &quad)?.value;
                    let mc = field_mc_distance(
                        &x,
                        &y,
                        FieldSpec::Fbm { hurst: h, dim: 1 },
                        options.replications,
                        seed.child(set as u64).child(1 + hi as u64),
                    )?;
                    let se = mc.std_error.unwrap_or(f64::NAN);
                    let mut ok = (v - f).abs() < FOURIER_TOL * v.max(1.0)
                        && (v - mc.value).abs() < MC_SIGMAS * se;
                    let cvm = if h == 0.5 {
                        let c = empirical_cdf_diff_l2(&x, &y)?;
                        ok &= (v - c).abs() <= CVM_REL_TOL * c.abs();
                        format!("{c}")
                    } else {
                        String::new()
                    };
                    rows.push(vec![
                        set.to_string(),
                        h.to_string(),
                        v.to_string(),
                        f.to_string(),
                        mc.value.to_string(),
                        se.to_string(),
                        cvm,
                    ]);
                    passes.push(ok);
                }
            }
        }
        VerifyCase::Cvm => {
            header = "set,n_x,n_y,v_statistic,cvm,rel_diff,status";
            let k = KernelSpec::fractional(0.5, 1);
            for set in 0..options.sets {
                let (x, y) = random_pair(seed.child(set as u64).stream(0), 1, 40, false);
                let v = v_statistic_distance(&x, &y, &k)?.value;
                let c = empirical_cdf_diff_l2(&x, &y)?;
                let rel = (v - c).abs() / c.abs();
                rows.push(vec![
                    set.to_string(),
                    x.len().to_string(),
                    y.len().to_string(),
                    v.to_string(),
                    c.to_string(),
                    rel.to_string(),
                ]);
                passes.push(rel <= CVM_REL_TOL);
            }
        }
        VerifyCase::Gff => {
            header = "set,cvm,gff_variance,gff_stderr,status";
            for set in 0..options.sets {
                let (x, y) = random_pair(seed.child(set as u64).stream(0), 2, 8, true);
                let c = empirical_cdf_diff_l2(&x, &y)?;
                let mc = field_mc_distance(
                    &x,
                    &y,
                    FieldSpec::GffNeumann1D {
                        modes: DEFAULT_GFF_MODES,
                    },
                    options.replications,
                    seed.child(set as u64).child(1),
                )?;
                let se = mc.std_error.unwrap_or(f64::NAN);
                rows.push(vec![
                    set.to_string(),
                    c.to_string(),
                    mc.value.to_string(),
                    se.to_string(),
                ]);
                passes.push((mc.value - c).abs() <= GFF_REL_TOL * c + MC_SIGMAS * se);
            }
        }
    }
    Ok(VerifyReport {
        case,
        seed: options.seed,
        header,
        rows,
        passes,
    })
}
