//! Closed-form covariance kernels.
//!
//! | variant | `k(x, y)` |
//! |---|---|
//! | `Fractional { hurst }` | `(|x|^{2H} + |y|^{2H} - |x-y|^{2H}) / 2`, `x . y` at `H = 1` |
//! | `GreenGff { dim }` | Green function of the Laplacian on `R^d` (Brownian for `d = 1`) |
//! | `Riesz { alpha, dim, scale }` | `scale * |x-y|^{2 alpha - d}`, negated when the exponent is positive |
//! | `AdditiveL1 { dim }` | `(|x|_1 + |y|_1 - |x-y|_1) / 2` |
//! | `Discrete { levels }` | `2^{-x} 1{x = y}` on `{1, .., K}` |

use std::f64::consts::PI;
use std::fmt;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Fractional {
        hurst: f64,
        dim: usize,
    },
    GreenGff {
        dim: usize,
    },
    /// Fractional free field kernel. `scale` multiplies the kernel and is applied
    /// in log space, so large negative exponents do not underflow.
    Riesz {
        alpha: f64,
        dim: usize,
        scale: f64,
    },
    AdditiveL1 {
        dim: usize,
    },
    Discrete {
        levels: usize,
    },
}

impl KernelSpec {
    pub fn fractional(hurst: f64, dim: usize) -> Self {
        KernelSpec::Fractional { hurst, dim }
    }

    pub fn riesz(alpha: f64, dim: usize) -> Self {
        KernelSpec::Riesz {
            alpha,
            dim,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Fractional { hurst, dim } => {
                if !(hurst > 0.0 && hurst <= 1.0) {
                    return Err(Error::invalid(format!(
                        "Hurst index must lie in (0, 1], got {hurst}"
                    )));
                }
                check_dim(dim)
            }
            KernelSpec::GreenGff { dim } | KernelSpec::AdditiveL1 { dim } => check_dim(dim),
            KernelSpec::Riesz { alpha, dim, scale } => {
                check_dim(dim)?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
                }
                if 2.0 * alpha == dim as f64 {
                    return Err(Error::invalid("2 alpha - d must be non-zero"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(format!("scale must be > 0, got {scale}")));
                }
                Ok(())
            }
            KernelSpec::Discrete { levels } => {
                if levels == 0 {
                    return Err(Error::invalid("discrete kernel needs K >= 1"));
                }
                Ok(())
            }
        }
    }

    /// Dimension of the points this kernel accepts.
    pub fn dim(&self) -> usize {
        match *self {
            KernelSpec::Fractional { dim, .. }
            | KernelSpec::GreenGff { dim }
            | KernelSpec::Riesz { dim, .. }
            | KernelSpec::AdditiveL1 { dim } => dim,
            KernelSpec::Discrete { .. } => 1,
        }
    }

    /// True when `k(x, x)` is infinite.
    pub fn is_singular_on_diagonal(&self) -> bool {
        match *self {
            KernelSpec::GreenGff { dim } => dim >= 2,
            KernelSpec::Riesz { alpha, dim, .. } => 2.0 * alpha < dim as f64,
            _ => false,
        }
    }

    /// Log-space multiplier carried by the kernel (1 except for `Riesz`).
    pub fn scale_factor(&self) -> f64 {
        match *self {
            KernelSpec::Riesz { scale, .. } => scale,
            _ => 1.0,
        }
    }

    /// Kernels of the form `(v(x) + v(y) - v(x - y)) / 2`. For these the
    /// one-point terms cancel in any mass-balanced combination, and estimators
    /// work with `v(x - y)` alone.
    pub fn has_variogram_form(&self) -> bool {
        matches!(
            self,
            KernelSpec::Fractional { .. }
                | KernelSpec::AdditiveL1 { .. }
                | KernelSpec::GreenGff { dim: 1 }
        )
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.validate()?;
        let d = self.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::arg(format!(
                "kernel expects {d}-d points, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if let KernelSpec::Discrete { levels } = *self {
            discrete_level(x[0], levels)?;
            discrete_level(y[0], levels)?;
        }
        if self.is_singular_on_diagonal() && x == y {
            return Err(Error::Singularity(format!("{x:?}")));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluation without argument checks. Singular kernels return `+inf` on
    /// the diagonal; discrete points outside the support give 0.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Fractional { hurst, .. } => {
                let origin = sq_norm(x).powf(hurst);
                let other = sq_norm(y).powf(hurst);
                0.5 * (origin + other - sq_dist(x, y).powf(hurst))
            }
            KernelSpec::AdditiveL1 { .. } => 0.5 * (l1_norm(x) + l1_norm(y) - l1_dist(x, y)),
            KernelSpec::GreenGff { dim } => green(dim, sq_dist(x, y).sqrt(), x, y),
            KernelSpec::Riesz { alpha, dim, scale } => riesz(alpha, dim, scale, sq_dist(x, y)),
            KernelSpec::Discrete { .. } => {
                if x[0] == y[0] {
                    (-x[0]).exp2()
                } else {
                    0.0
                }
            }
        }
    }

    /// `v(x - y)` for kernels with a variogram form; `None` otherwise.
    pub(crate) fn variogram(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        match *self {
            KernelSpec::Fractional { hurst, .. } => Some(sq_dist(x, y).powf(hurst)),
            KernelSpec::AdditiveL1 { .. } => Some(l1_dist(x, y)),
            KernelSpec::GreenGff { dim: 1 } => Some((x[0] - y[0]).abs()),
            _ => None,
        }
    }

    /// Single-precision full-kernel evaluation, used to mimic 32-bit pipelines.
    pub(crate) fn eval_f32(&self, x: &[f32], y: &[f32]) -> f32 {
        let sq = |a: &[f32], b: Option<&[f32]>| -> f32 {
            match b {
                Some(b) => a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum(),
                None => a.iter().map(|p| p * p).sum(),
            }
        };
        match *self {
            KernelSpec::Fractional { hurst, .. } => {
                let h = hurst as f32;
                0.5 * (sq(x, None).powf(h) + sq(y, None).powf(h) - sq(x, Some(y)).powf(h))
            }
            KernelSpec::AdditiveL1 { .. } => {
                let n = |a: &[f32]| a.iter().map(|v| v.abs()).sum::<f32>();
                let d: f32 = x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum();
                0.5 * (n(x) + n(y) - d)
            }
            KernelSpec::Riesz { alpha, dim, scale } => {
                let e = (2.0 * alpha - dim as f64) as f32;
                let r2 = sq(x, Some(y));
                let v = (0.5 * e * r2.ln() + (scale as f32).ln()).exp();
                if e > 0.0 {
                    -v
                } else {
                    v
                }
            }
            _ => {
                let xd: Vec<f64> = x.iter().map(|v| *v as f64).collect();
                let yd: Vec<f64> = y.iter().map(|v| *v as f64).collect();
                self.eval_unchecked(&xd, &yd) as f32
            }
        }
    }

    /// Parses the kernel grammar: `fractional:H=0.5`, `green:d=3`,
    /// `riesz:alpha=5,d=16[,scale=s]`, `additive[:d=2]`, `discrete:K=8`.
    /// `default_dim` fills in a missing `d`.
    pub fn parse(text: &str, default_dim: usize) -> Result<Self> {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params: Vec<(String, f64)> = Vec::new();
        for item in rest.split([',', ';']).filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("kernel parameter `{item}` is not key=value")))?;
            let v: f64 = v.trim().parse().map_err(|_| {
                Error::arg(format!("kernel parameter `{item}` has a non-numeric value"))
            })?;
            params.push((k.trim().to_ascii_lowercase(), v));
        }
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        let known: &[&str] = match name.trim() {
            "fractional" => &["h", "d"],
            "green" => &["d"],
            "riesz" => &["alpha", "d", "scale"],
            "additive" => &["d"],
            "discrete" => &["k"],
            other => return Err(Error::arg(format!("unknown kernel `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            return Err(Error::arg(format!(
                "kernel `{name}` has no parameter `{k}`"
            )));
        }
        let dim = match get("d") {
            Some(d) => as_count(d, "d")?,
            None => default_dim,
        };
        let spec = match name.trim() {
            "fractional" => KernelSpec::Fractional {
                hurst: get("h").ok_or_else(|| Error::arg("fractional kernel needs H"))?,
                dim,
            },
            "green" => KernelSpec::GreenGff { dim },
            "riesz" => KernelSpec::Riesz {
                alpha: get("alpha").ok_or_else(|| Error::arg("riesz kernel needs alpha"))?,
                dim,
                scale: get("scale").unwrap_or(1.0),
            },
            "additive" => KernelSpec::AdditiveL1 { dim },
            _ => KernelSpec::Discrete {
                levels: as_count(
                    get("k").ok_or_else(|| Error::arg("discrete kernel needs K"))?,
                    "K",
                )?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Fractional { hurst, dim } => write!(f, "fractional:H={hurst};d={dim}"),
            KernelSpec::GreenGff { dim } => write!(f, "green:d={dim}"),
            KernelSpec::Riesz { alpha, dim, scale } if scale == 1.0 => {
                write!(f, "riesz:alpha={alpha};d={dim}")
            }
            KernelSpec::Riesz { alpha, dim, scale } => {
                write!(f, "riesz:alpha={alpha};d={dim};scale={scale}")
            }
            KernelSpec::AdditiveL1 { dim } => write!(f, "additive:d={dim}"),
            KernelSpec::Discrete { levels } => write!(f, "discrete:K={levels}"),
        }
    }
}

/// `sum_{i,j} beta_i beta_j k(x_i, x_j)`.
pub fn kernel_psd_check(k: &KernelSpec, points: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::arg(format!(
            "need matching non-empty points and weights, got {} and {}",
            points.len(),
            weights.len()
        )));
    }
    let mut acc = 0.0;
    for (xi, bi) in points.iter().zip(weights) {
        for (xj, bj) in points.iter().zip(weights) {
            if bi * bj != 0.0 {
                acc += bi * bj * k.eval(xi, xj)?;
            }
        }
    }
    Ok(acc)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("kernel dimension must be >= 1"));
    }
    Ok(())
}

fn as_count(v: f64, name: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::arg(format!(
            "{name} must be a positive integer, got {v}"
        )))
    }
}

fn discrete_level(v: f64, levels: usize) -> Result<()> {
    if v.fract() == 0.0 && v >= 1.0 && v <= levels as f64 {
        Ok(())
    } else {
        Err(Error::arg(format!("{v} is not a level in 1..={levels}")))
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum()
}

#[inline]
fn l1_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

#[inline]
fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a.abs()).sum()
}

/// Surface area of the unit sphere in `R^d`.
pub(crate) fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

fn green(dim: usize, r: f64, x: &[f64], y: &[f64]) -> f64 {
    match dim {
        1 => 0.5 * (x[0].abs() + y[0].abs() - r),
        2 => -r.ln() / (2.0 * PI),
        d => {
            let c = (d - 2) as f64 * unit_sphere_area(d);
            r.powi(2 - d as i32) / c
        }
    }
}

#[inline]
pub(crate) fn riesz(alpha: f64, dim: usize, scale: f64, sq: f64) -> f64 {
    let e = 2.0 * alpha - dim as f64;
    let v = (0.5 * e * sq.ln() + scale.ln()).exp();
    if e > 0.0 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_brownian_is_min() {
        let k = KernelSpec::fractional(0.5, 1);
        assert_eq!(k.eval(&[2.0], &[3.0]).unwrap(), 2.0);
        let k = KernelSpec::fractional(0.3, 2);
        let z = [0.6, 0.8];
        assert!((k.eval(&z, &z).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_hurst_is_dot_product() {
        let k = KernelSpec::fractional(1.0, 2);
        let v = k.eval(&[1.0, 2.0], &[3.0, -1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn green_values() {
        let k2 = KernelSpec::GreenGff { dim: 2 };
        assert_eq!(k2.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        let k3 = KernelSpec::GreenGff { dim: 3 };
        let v = k3.eval(&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() < 1e-14);
        assert!((v - 0.07958).abs() < 1e-5);
        assert!(matches!(
            k3.eval(&[1.0; 3], &[1.0; 3]),
            Err(Error::Singularity(_))
        ));
        let k1 = KernelSpec::GreenGff { dim: 1 };
        assert_eq!(k1.eval(&[2.0], &[3.0]).unwrap(), 2.0);
    }

    #[test]
    fn additive_example() {
        let k = KernelSpec::AdditiveL1 { dim: 2 };
        assert_eq!(k.eval(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(k.eval(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn riesz_log_space_and_sign() {
        let k = KernelSpec::riesz(5.0, 16);
        assert!(k.is_singular_on_diagonal());
        let v = k.eval(&[0.0; 16], &{
            let mut p = [0.0; 16];
            p[0] = 2.0;
            p
        });
        assert!((v.unwrap() - 2f64.powi(-6)).abs() < 1e-15);
        // far beyond the f64 range of r^-6 without log space
        let mut far = [0.0; 16];
        far[3] = 1e60;
        let scaled = KernelSpec::Riesz {
            alpha: 5.0,
            dim: 16,
            scale: 1e300,
        };
        let v = scaled.eval(&[0.0; 16], &far).unwrap();
        assert!(v > 0.0 && v.is_finite());
        let positive = KernelSpec::riesz(1.0, 1);
        assert!((positive.eval(&[0.0], &[3.0]).unwrap() + 3.0).abs() < 1e-14);
        assert!(!positive.is_singular_on_diagonal());
        assert!(KernelSpec::riesz(1.0, 2).validate().is_err());
    }

    #[test]
    fn discrete_values() {
        let k = KernelSpec::Discrete { levels: 3 };
        assert_eq!(k.eval(&[2.0], &[2.0]).unwrap(), 0.25);
        assert_eq!(k.eval(&[1.0], &[2.0]).unwrap(), 0.0);
        assert!(k.eval(&[4.0], &[1.0]).is_err());
        let p = kernel_psd_check(&k, &[vec![1.0], vec![2.0]], &[1.0, -1.0]).unwrap();
        assert_eq!(p, 0.75);
    }

    #[test]
    fn psd_check_examples() {
        let k = KernelSpec::fractional(0.5, 1);
        assert_eq!(kernel_psd_check(&k, &[vec![1.0]], &[0.0]).unwrap(), 0.0);
        let pts = [vec![1.0], vec![2.0], vec![3.0]];
        assert!(kernel_psd_check(&k, &pts, &[1.0, -2.0, 1.0]).unwrap() >= 0.0);
        assert!(kernel_psd_check(&k, &pts, &[1.0]).is_err());
    }

    #[test]
    fn grammar() {
        assert_eq!(
            KernelSpec::parse("fractional:H=0.5", 1).unwrap(),
            KernelSpec::fractional(0.5, 1)
        );
        assert_eq!(
            KernelSpec::parse("green:d=3", 1).unwrap(),
            KernelSpec::GreenGff { dim: 3 }
        );
        assert_eq!(
            KernelSpec::parse("riesz:alpha=5,d=16", 1).unwrap(),
            KernelSpec::riesz(5.0, 16)
        );
        assert_eq!(
            KernelSpec::parse("additive", 4).unwrap(),
            KernelSpec::AdditiveL1 { dim: 4 }
        );
        assert_eq!(
            KernelSpec::parse("discrete:K=8", 1).unwrap(),
            KernelSpec::Discrete { levels: 8 }
        );
        assert!(KernelSpec::parse("fractional:H=1.5", 1).is_err());
        assert!(KernelSpec::parse("fractional", 1).is_err());
        assert!(KernelSpec::parse("gaussian:s=1", 1).is_err());
        assert!(KernelSpec::parse("green:q=1", 1).is_err());
        assert!(KernelSpec::parse("discrete:K=2.5", 1).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
