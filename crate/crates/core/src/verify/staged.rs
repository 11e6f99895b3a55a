//! Checks of the Cayley pushforward of Haar measure on U(k), k ∈ {1, 2},
//! against Hua's density.
//!
//! For k = 1 the Cayley image is `ix` with x standard Cauchy; the empirical
//! law is tested with Kolmogorov–Smirnov. For k = 2 the diagonal
//! coordinates are Cauchy-tailed, so raw moments do not exist; moments of
//! `atan` of the diagonal entries are compared with quadrature of the
//! density instead.

use std::f64::consts::{FRAC_PI_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use super::report::{mean_and_se, Check, McReport, Rejections, Timer};
use super::{chunk_rng, chunks, DEFAULT_CHUNK_SIZE};
use crate::density::log_tau;
use crate::error::{Error, Result};
use crate::matrix::{cayley, haar_unitary, I};

/// Below this many samples the report is flagged as insufficient.
pub const MIN_SAMPLES: usize = 100_000;

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test. Returns `(D, p)`.
pub fn ks_test(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    (d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d))
}

/// Cayley-coordinate samples: the real matrix entries of `K = −i·cayley(g)`
/// that each statistic needs.
fn sample_coordinates(k: usize, samples: usize, seed: u64, chunk_size: usize) -> (Vec<[f64; 2]>, Rejections) {
    let parts: Vec<(Vec<[f64; 2]>, Rejections)> = chunks(samples, chunk_size)
        .into_par_iter()
        .enumerate()
        .map(|(i, (_, len))| {
            let mut rng = chunk_rng(seed, i as u64);
            let mut out = Vec::with_capacity(len);
            let mut rej = Rejections::default();
            for _ in 0..len {
                let g = haar_unitary(k, &mut rng);
                match cayley(&g) {
                    Ok(x) => {
                        let kk = x.scale(-I);
                        out.push([kk[(0, 0)].re, kk[(k - 1, k - 1)].re]);
                    }
                    Err(e) => rej.record(&e),
                }
            }
            (out, rej)
        })
        .collect();
    let mut all = Vec::with_capacity(samples);
    let mut rej = Rejections::default();
    for (v, r) in parts {
        all.extend(v);
        rej.merge(&r);
    }
    (all, rej)
}

/// `∫_0^∞ dr / ((x + r)² + y²)²`, assuming `x > 0` whenever y is small
/// (true on the domain used here: `x = 1 − ad`, `y = a + d`).
fn radial_integral(x: f64, y: f64) -> f64 {
    let y = y.abs();
    if x > 0.0 {
        let r = y / x;
        if r < 0.1 {
            // Σ_k (−1)^k (k+1)/(2k+3) r^{2k}
            let r2 = r * r;
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..12 {
                let kf = k as f64;
                sum += term * (kf + 1.0) / (2.0 * kf + 3.0);
                term *= -r2;
            }
            return sum / (x * x * x);
        }
        return r.atan() / (2.0 * y.powi(3)) - x / (2.0 * y * y * (x * x + y * y));
    }
    (FRAC_PI_2 - (x / y).atan()) / (2.0 * y.powi(3)) - x / (2.0 * y * y * (x * x + y * y))
}

/// Expectations of `atan a`, `atan² a` and `atan a · atan d` under Hua's
/// density on 2×2 Hermitian `K = [[a, b], [b̄, d]]`, together with the total
/// mass (which should be 1).
///
/// With `r = |b|²` the density is `τ₂ / |(1 + ia)(1 + id) + r|⁴` and the
/// off-diagonal measure is `π dr`; the r-integral is done in closed form.
/// Both diagonal axes are compactified by `tan`, on which the atan moments
/// become polynomial.
pub fn hua2_atan_moments(nodes: usize) -> [f64; 4] {
    let tau2 = log_tau(2).exp();
    let gl = GaussLegendre::new(NonZeroUsize::new(nodes).expect("nodes > 0"));
    let axis: Vec<(f64, f64, f64)> = gl
        .as_node_weight_pairs()
        .iter()
        .map(|&(u, w)| {
            let alpha = u * FRAC_PI_2;
            (alpha, alpha.tan(), w * FRAC_PI_2 / alpha.cos().powi(2))
        })
        .collect();
    let mut acc = [0.0; 4];
    for &(alpha, a, wa) in &axis {
        for &(beta, d, wd) in &axis {
            let mass = wa * wd * PI * tau2 * radial_integral(1.0 - a * d, a + d);
            acc[0] += mass;
            acc[1] += mass * alpha;
            acc[2] += mass * alpha * alpha;
            acc[3] += mass * alpha * beta;
        }
    }
    acc
}

fn z_check(name: &str, values: &[f64], expected: f64, threshold: f64) -> Check {
    let (mean, se) = mean_and_se(values);
    let z = (mean - expected) / se;
    Check { name: name.into(), observed: mean, expected, std_error: se, z: Some(z), p_value: None, passed: z.abs() <= threshold }
}

/// Samples Haar on U(k), maps through the Cayley transform and compares
/// with Hua's density.
pub fn staged_pushforward_check(k: usize, samples: usize, seed: u64) -> Result<McReport> {
    staged_pushforward_check_with(k, samples, seed, DEFAULT_CHUNK_SIZE)
}

pub fn staged_pushforward_check_with(k: usize, samples: usize, seed: u64, chunk_size: usize) -> Result<McReport> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!("staged check supports k = 1 or 2, got {k}")));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let timer = Timer::start();
    let (coords, rejections) = sample_coordinates(k, samples, seed, chunk_size);
    let mut details = serde_json::Map::new();
    details.insert("k".into(), serde_json::json!(k));
    let checks = if k == 1 {
        let xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
        let (d, p) = ks_test(xs.clone(), |x| 0.5 + x.atan() / PI);
        let ks = Check {
            name: "ks_cauchy".into(),
            observed: d,
            expected: 0.0,
            std_error: 1.0 / (xs.len() as f64).sqrt(),
            z: None,
            p_value: Some(p),
            passed: p >= 0.01,
        };
        let sq: Vec<f64> = xs.iter().map(|x| x.atan().powi(2)).collect();
        vec![z_check("mean_atan_sq", &sq, PI * PI / 12.0, 4.0), ks]
    } else {
        let q = hua2_atan_moments(400);
        details.insert("quadrature_mass".into(), serde_json::json!(q[0]));
        let a: Vec<f64> = coords.iter().map(|c| c[0].atan()).collect();
        let a2: Vec<f64> = a.iter().map(|x| x * x).collect();
        let ad: Vec<f64> = coords.iter().map(|c| c[0].atan() * c[1].atan()).collect();
        vec![
            z_check("mean_atan_a_d", &ad, q[3] / q[0], 4.0),
            z_check("mean_atan_a", &a, q[1] / q[0], 4.0),
            z_check("mean_atan_sq_a", &a2, q[2] / q[0], 4.0),
        ]
    };
    let n_samples = coords.len() as u64;
    Ok(McReport {
        name: format!("staged_k{k}"),
        estimate: checks[0].observed,
        std_error: checks[0].std_error,
        n_samples,
        n_rejected: rejections.total(),
        rejections,
        effective_sample_size: n_samples as f64,
        seed,
        chunk_size,
        wall_time: timer.seconds(),
        insufficient_samples: samples < MIN_SAMPLES,
        passed: checks.iter().all(|c| c.passed),
        checks,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.36) ≈ 0.049, P(K > 1.63) ≈ 0.0098
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_detects_wrong_scale() {
        let xs: Vec<f64> = (1..=2000).map(|i| 2.0 * (PI * (i as f64 / 2001.0 - 0.5)).tan()).collect();
        let (_, p) = ks_test(xs, |x| 0.5 + x.atan() / PI);
        assert!(p < 1e-6);
    }

    #[test]
    fn radial_integral_matches_numeric() {
        for &(x, y) in &[(1.0, 0.0), (2.0, 0.05), (1.5, 0.3), (-3.0, 2.5), (0.5, 4.0)] {
            let gl = GaussLegendre::new(NonZeroUsize::new(400).unwrap());
            let numeric: f64 = gl
                .as_node_weight_pairs()
                .iter()
                .map(|&(u, w)| {
                    let v = (u + 1.0) * PI / 4.0;
                    let r = v.tan();
                    w * PI / 4.0 / v.cos().powi(2) / ((x + r).powi(2) + y * y).powi(2)
                })
                .sum();
            let closed = radial_integral(x, y);
            assert!((numeric - closed).abs() <= 1e-8 * closed, "({x},{y}) {numeric} {closed}");
        }
    }

    #[test]
    fn quadrature_mass_is_one() {
        let q = hua2_atan_moments(400);
        assert!((q[0] - 1.0).abs() < 2e-5, "{}", q[0]);
        assert!(q[1].abs() < 1e-10);
    }

    #[test]
    fn small_run_flags_insufficient() {
        let r = staged_pushforward_check(1, 100, 3).unwrap();
        assert!(r.insufficient_samples);
        assert!(r.checks[0].std_error > 0.01);
    }

    #[test]
    fn k_out_of_range() {
        assert!(staged_pushforward_check(3, 1000, 1).is_err());
    }
}
