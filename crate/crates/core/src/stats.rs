//! Order-stable summary statistics for Monte Carlo output.

use crate::quadrature::pairwise_sum;

/// Mean and spread of a set of finite draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    /// `std / sqrt(count)`.
    pub stderr: f64,
}

impl Summary {
    /// Summary over the finite entries of `values`, in slice order.
    pub fn of(values: &[f64]) -> Summary {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let count = finite.len();
        if count == 0 {
            return Summary {
                count,
                mean: f64::NAN,
                std: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = pairwise_sum(&finite) / count as f64;
        let std = if count > 1 {
            let sq: Vec<f64> = finite.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&sq) / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary {
            count,
            mean,
            std,
            stderr: std / (count as f64).sqrt(),
        }
    }
}

/// Sample covariance of paired draws, with the standard error of the
/// covariance estimate from the spread of the centered products.
pub fn covariance_with_stderr(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = pairwise_sum(a) / n;
    let mb = pairwise_sum(b) / n;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let s = Summary::of(&prods);
    (s.mean * n / (n - 1.0), s.stderr)
}
