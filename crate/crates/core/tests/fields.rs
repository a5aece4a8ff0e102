//! Monte Carlo checks of the field samplers against their covariance kernels.

use std::f64::consts::PI;

use kernel_fields::fields::{sample_fbm_grid_1d, FbmGridSampler, FieldSampler};
use kernel_fields::stats::{covariance_with_stderr, Summary};
use kernel_fields::verify::{random_pair, GFF_REL_TOL, MC_SIGMAS};
use kernel_fields::{FieldSpec, KernelSpec, SeedSpec};
use rand::Rng;

const DRAWS: usize = 100_000;

/// `DRAWS` joint samples at `locations`, one column per location.
fn columns(spec: FieldSpec, locations: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let sampler = FieldSampler::new(spec, locations).unwrap();
    let mut rng = SeedSpec::from_seed(seed).rng();
    let mut cols = vec![Vec::with_capacity(DRAWS); locations.len()];
    for _ in 0..DRAWS {
        for (c, v) in cols.iter_mut().zip(sampler.sample_values(&mut rng)) {
            c.push(v);
        }
    }
    cols
}

/// Unbiased variance and its standard error under normality.
fn variance(v: &[f64]) -> (f64, f64) {
    let s = Summary::of(v);
    let var = s.std * s.std;
    (var, var * (2.0 / (v.len() - 1) as f64).sqrt())
}

/// Covariance of the truncated Neumann series, summed directly.
fn gff_covariance(modes: usize, x: f64, y: f64) -> f64 {
    (1..=modes)
        .map(|k| {
            let w = k as f64 * PI;
            2.0 * (w * x).cos() * (w * y).cos() / (w * w)
        })
        .sum()
}

#[test]
fn empirical_covariance_matches_kernel() {
    let cases: Vec<(FieldSpec, Vec<Vec<f64>>)> = vec![
        (
            FieldSpec::Fbm { hurst: 0.3, dim: 1 },
            vec![vec![0.5], vec![1.0], vec![-0.7], vec![2.0]],
        ),
        (
            FieldSpec::Fbm { hurst: 0.8, dim: 1 },
            vec![vec![0.5], vec![1.0], vec![-0.7], vec![2.0]],
        ),
        (
            FieldSpec::Fbm { hurst: 0.6, dim: 2 },
            vec![
                vec![1.0, 0.0],
                vec![0.3, -0.8],
                vec![-1.0, 1.0],
                vec![0.2, 0.2],
            ],
        ),
        (
            FieldSpec::AdditiveBm { dim: 2 },
            vec![
                vec![1.0, 1.0],
                vec![0.5, -1.0],
                vec![-0.3, 2.0],
                vec![1.5, 0.2],
            ],
        ),
        (
            FieldSpec::DiscreteField { levels: 4 },
            vec![vec![1.0], vec![2.0], vec![4.0], vec![1.0]],
        ),
        (
            FieldSpec::GffNeumann1D { modes: 200 },
            vec![vec![0.0], vec![0.25], vec![0.6], vec![1.0]],
        ),
    ];
    for (case, (spec, locs)) in cases.into_iter().enumerate() {
        let cols = columns(spec, &locs, 100 + case as u64);
        for i in 0..locs.len() {
            for j in i..locs.len() {
                let expected = match spec.kernel() {
                    Some(k) => k.eval(&locs[i], &locs[j]).unwrap(),
                    None => gff_covariance(200, locs[i][0], locs[j][0]),
                };
                let (cov, se) = covariance_with_stderr(&cols[i], &cols[j]);
                assert!(
                    (cov - expected).abs() < 4.0 * se + 1e-12,
                    "{spec:?} ({i},{j}): {cov} vs {expected} (se {se})"
                );
            }
        }
    }
}

#[test]
fn brownian_covariance_example() {
    let cols = columns(
        FieldSpec::Fbm { hurst: 0.5, dim: 1 },
        &[vec![1.0], vec![2.0]],
        1,
    );
    let expected = [[1.0, 1.0], [1.0, 2.0]];
    for i in 0..2 {
        for j in 0..2 {
            let (cov, se) = covariance_with_stderr(&cols[i], &cols[j]);
            assert!((cov - expected[i][j]).abs() < 3.0 * se, "({i},{j}) {cov}");
        }
    }
}

#[test]
fn additive_motion_variance_is_dimension() {
    let cols = columns(FieldSpec::AdditiveBm { dim: 2 }, &[vec![1.0, 1.0]], 2);
    let (var, se) = variance(&cols[0]);
    assert!((var - 2.0).abs() < 3.0 * se, "{var}");
}

#[test]
fn self_similarity_of_variances() {
    for (h, sigma) in [(0.2, 3.0), (0.5, 0.4), (0.85, 2.5)] {
        let spec = FieldSpec::Fbm { hurst: h, dim: 2 };
        let x = vec![0.6, -0.3];
        let sx: Vec<f64> = x.iter().map(|v| v * sigma).collect();
        let (base, _) = variance(&columns(spec, &[x], 11)[0]);
        let (scaled, _) = variance(&columns(spec, &[sx], 12)[0]);
        let ratio = scaled / (sigma.powf(2.0 * h) * base);
        assert!((ratio - 1.0).abs() < 0.05, "H={h}: ratio {ratio}");
    }
}

#[test]
fn increments_are_stationary() {
    let mut rng = SeedSpec::from_seed(21).rng();
    for h in [0.25, 0.5, 0.75] {
        let spec = FieldSpec::Fbm { hurst: h, dim: 1 };
        let delta: f64 = rng.random_range(-3.0..3.0);
        let (x, y) = (0.4, 1.3);
        let increment_var = |a: f64, b: f64, seed: u64| {
            let cols = columns(spec, &[vec![a], vec![b]], seed);
            let d: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(p, q)| p - q).collect();
            variance(&d)
        };
        let (v0, s0) = increment_var(x, y, 31);
        let (v1, s1) = increment_var(x + delta, y + delta, 32);
        let se = s0.hypot(s1);
        assert!(
            (v0 - v1).abs() < 4.0 * se,
            "H={h} delta={delta}: {v0} vs {v1}"
        );
        // and both match the variogram |x - y|^{2H}
        assert!((v0 - (y - x).powf(2.0 * h)).abs() < 4.0 * s0);
    }
}

#[test]
fn brownian_grid_increments_are_uncorrelated() {
    let sampler = FbmGridSampler::new(0.5, 1.0, 3).unwrap();
    let mut rng = SeedSpec::from_seed(5).rng();
    let (mut a, mut b) = (Vec::with_capacity(DRAWS), Vec::with_capacity(DRAWS));
    for _ in 0..DRAWS {
        let p = sampler.sample_path(&mut rng);
        a.push(p[1] - p[0]);
        b.push(p[2] - p[1]);
    }
    let (cov, _) = covariance_with_stderr(&a, &b);
    let corr = cov / (variance(&a).0 * variance(&b).0).sqrt();
    assert!(corr.abs() < 3.0 / (DRAWS as f64).sqrt(), "{corr}");
    assert!((variance(&a).0 - 1.0).abs() < 0.02);
}

#[test]
fn grid_sampler_matches_pointwise_sampler_in_law() {
    // the circulant path at t = 1 has the fBm variance 1
    let sampler = FbmGridSampler::new(0.3, 1.0 / 64.0, 65).unwrap();
    let mut rng = SeedSpec::from_seed(9).rng();
    let ends: Vec<f64> = (0..DRAWS)
        .map(|_| sampler.sample_path(&mut rng)[64])
        .collect();
    let (var, se) = variance(&ends);
    assert!((var - 1.0).abs() < 4.0 * se, "{var}");
}

#[test]
fn realizations_are_reproducible() {
    let seed = SeedSpec::new(4, 2);
    let a = sample_fbm_grid_1d(0.7, 0.01, 300, seed).unwrap();
    let b = sample_fbm_grid_1d(0.7, 0.01, 300, seed).unwrap();
    assert_eq!(a, b);
    let locs = vec![vec![0.1, 0.2], vec![0.3, -0.4]];
    let s = FieldSampler::new(FieldSpec::AdditiveBm { dim: 2 }, &locs).unwrap();
    assert_eq!(s.realize(seed), s.realize(seed));
    assert_ne!(s.realize(seed).values, s.realize(seed.stream(3)).values);
}

#[test]
fn free_field_pairing_matches_brownian_pairing() {
    use kernel_fields::estimators::field_mc_distance;
    use kernel_fields::fields::DEFAULT_GFF_MODES;
    use kernel_fields::measures::empirical_cdf_diff_l2;

    for set in 0..3u64 {
        let (x, y) = random_pair(SeedSpec::new(77, set), 3, 8, true);
        let c = empirical_cdf_diff_l2(&x, &y).unwrap();
        let mc = field_mc_distance(
            &x,
            &y,
            FieldSpec::GffNeumann1D {
                modes: DEFAULT_GFF_MODES,
            },
            DRAWS,
            SeedSpec::new(78, set),
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!(
            (mc.value - c).abs() <= GFF_REL_TOL * c + MC_SIGMAS * se,
            "set {set}: {} vs {c}",
            mc.value
        );
    }
}

#[test]
fn kernel_for_each_field_round_trips() {
    for spec in [
        FieldSpec::Fbm { hurst: 0.4, dim: 3 },
        FieldSpec::AdditiveBm { dim: 2 },
        FieldSpec::DiscreteField { levels: 5 },
    ] {
        let k = spec.kernel().unwrap();
        assert_eq!(FieldSpec::for_kernel(&k).unwrap(), spec);
    }
    assert!(FieldSpec::for_kernel(&KernelSpec::riesz(5.0, 16)).is_err());
}
