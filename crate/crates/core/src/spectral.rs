//! Spectral densities of the fractional and Riesz families, and the radial
//! moment integrals that decide which measures a fractional kernel separates.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::unit_sphere_area;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralDensitySpec {
    /// `|w|^-(d + 2H) / ((2 pi)^(d/2) C_H)`
    FractionalIncrement { hurst: f64, dim: usize },
    /// `|w|^(-2 alpha)`
    RieszStationary { alpha: f64, dim: usize },
}

impl SpectralDensitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralDensitySpec::FractionalIncrement { hurst, dim } => {
                if !(hurst > 0.0 && hurst < 1.0) || dim == 0 {
                    return Err(Error::invalid(format!(
                        "need 0 < H < 1 and d >= 1, got H={hurst}, d={dim}"
                    )));
                }
            }
            SpectralDensitySpec::RieszStationary { alpha, dim } => {
                if !(alpha > 0.0 && alpha.is_finite()) || dim == 0 {
                    return Err(Error::invalid(format!(
                        "need alpha > 0 and d >= 1, got alpha={alpha}, d={dim}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            SpectralDensitySpec::FractionalIncrement { dim, .. }
            | SpectralDensitySpec::RieszStationary { dim, .. } => dim,
        }
    }

    /// Density as a function of `|w|`.
    pub fn radial(&self, r: f64) -> f64 {
        match *self {
            SpectralDensitySpec::FractionalIncrement { hurst, dim } => {
                let d = dim as f64;
                (-(d + 2.0 * hurst) * r.ln()).exp()
                    / ((2.0 * PI).powf(d / 2.0) * c_h_constant(dim, hurst))
            }
            SpectralDensitySpec::RieszStationary { alpha, .. } => (-2.0 * alpha * r.ln()).exp(),
        }
    }
}

/// Normalizing constant of the fractional spectral density,
/// `sqrt(pi) G(H + 1/2) / (2^(d/2) H G(2H) sin(pi H) G(H + d/2))`.
pub fn c_h_constant(dim: usize, hurst: f64) -> f64 {
    let d = dim as f64;
    let log = 0.5 * PI.ln() + ln_gamma(hurst + 0.5)
        - 0.5 * d * 2f64.ln()
        - hurst.ln()
        - ln_gamma(2.0 * hurst)
        - (PI * hurst).sin().ln()
        - ln_gamma(hurst + 0.5 * d);
    log.exp()
}

pub fn phi_eval(spec: &SpectralDensitySpec, omega: &[f64]) -> Result<f64> {
    spec.validate()?;
    if omega.len() != spec.dim() {
        return Err(Error::arg(format!(
            "frequency has {} components, density is {}-d",
            omega.len(),
            spec.dim()
        )));
    }
    let r = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Singularity(
            "spectral density at zero frequency".into(),
        ));
    }
    Ok(spec.radial(r))
}

/// Radial integrals of the fractional density on the unit ball (weighted by
/// `|w|^(2 kappa)`) and outside it. `None` marks a divergent integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConditionReport {
    pub hurst: f64,
    pub dim: usize,
    pub kappa: f64,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
}

impl MomentConditionReport {
    pub fn holds(&self) -> bool {
        self.inner.is_some() && self.outer.is_some()
    }
}

/// Closed-form check of `int_{|w|<=1} phi |w|^(2 kappa)` and `int_{|w|>1} phi`.
/// The inner integral converges iff `kappa > H`; the boundary is divergent.
pub fn moment_condition_check(
    hurst: f64,
    dim: usize,
    kappa: f64,
) -> Result<MomentConditionReport> {
    let spec = SpectralDensitySpec::FractionalIncrement { hurst, dim };
    spec.validate()?;
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::arg(format!("kappa must lie in [0, 1], got {kappa}")));
    }
    let d = dim as f64;
    // phi(r) r^(d-1) |S^(d-1)| = c r^(-1-2H)
    let c = unit_sphere_area(dim) / ((2.0 * PI).powf(d / 2.0) * c_h_constant(dim, hurst));
    let inner_exp = 2.0 * kappa - 2.0 * hurst;
    let inner = (inner_exp > 0.0).then(|| c / inner_exp);
    let outer = Some(c / (2.0 * hurst));
    Ok(MomentConditionReport {
        hurst,
        dim,
        kappa,
        inner,
        outer,
    })
}
