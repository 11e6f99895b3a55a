//! Importance-sampling estimate of the total mass of the main density over
//! the ordered chart.
//!
//! Two proposals are available. [`Proposal::Cayley`] samples the Hermitian
//! matrix `K = −i·cayley(g)` as `W diag(κ) W*` with W Haar on U(n+m) and κ
//! iid Cauchy of scale s, maps it to chart coordinates, and divides by the
//! Jacobian of the chart map. [`Proposal::Chart`] samples the chart
//! directly (Haar U, uniform angles, Gaussian c). The main density has
//! integrable spikes where g is close to having eigenvalue −1; the chart
//! proposal does not follow them and its weights have infinite variance, so
//! it is kept for comparison and for the synthetic self-test only.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{McReport, Rejections, Timer};
use super::{chunk_rng, chunks, DEFAULT_CHUNK_SIZE};
use crate::density::{hua_log_density, ln_factorial, ln_superfactorial, weyl_log_density, MainDensity};
use crate::error::{Error, Result};
use crate::matrix::{cayley, haar_unitary, ComplexMatrix, C64, I, ONE};
use crate::spectral::{canonicalize_with, chart_from_cayley_block, reconstruct, SpectralData};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    #[default]
    Cayley,
    Chart,
}

/// The function whose integral over the chart is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Main(MainDensity),
    /// Known-mass target: half-normal c¹, complex normal remaining
    /// coordinates (unit scale), uniform ordered angles, Haar U. Integrates
    /// to exactly 1.
    Synthetic,
}

impl Default for Target {
    fn default() -> Self {
        Target::Main(MainDensity::default())
    }
}

/// Candidate scales for the pilot run.
pub const PILOT_SCALES: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    /// Proposal scale; `None` runs a pilot over [`PILOT_SCALES`].
    pub scale: Option<f64>,
    pub proposal: Proposal,
    pub target: Target,
    pub chunk_size: usize,
    pub tolerances: Tolerances,
}

impl NormalizationConfig {
    pub fn new(n: usize, m: usize, samples: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            samples,
            seed,
            scale: None,
            proposal: Proposal::default(),
            target: Target::default(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            tolerances: Tolerances::default(),
        }
    }
}

struct Partial {
    sum: f64,
    sum_sq: f64,
    accepted: u64,
    rejections: Rejections,
}

fn ln_std_normal(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * TAU.ln()
}

/// Log weight of one draw, or the reason it was discarded.
fn draw_log_weight(cfg: &NormalizationConfig, s: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (sd, ln_q_chart) = match cfg.proposal {
        Proposal::Cayley => draw_cayley(cfg.n, cfg.m, s, &cfg.tolerances, rng)?,
        Proposal::Chart => draw_chart(cfg, s, rng)?,
    };
    let ln_f = match cfg.target {
        Target::Main(density) => density.log_density(&sd)?.log_value,
        Target::Synthetic => synthetic_log_density(&sd),
    };
    Ok(ln_f - ln_q_chart)
}

/// Synthetic target with respect to the chart reference measure (the
/// `∏ c_k¹` factor of the reference is divided out).
fn synthetic_log_density(sd: &SpectralData) -> f64 {
    let (n, m) = (sd.n(), sd.m());
    let mut lf = ln_factorial(m) - m as f64 * TAU.ln();
    for k in 0..m {
        let c1 = sd.c()[(0, k)].re;
        lf += 2f64.ln() + ln_std_normal(c1) - c1.ln();
        for j in 1..n {
            let z = sd.c()[(j, k)];
            lf += ln_std_normal(z.re) + ln_std_normal(z.im);
        }
    }
    lf
}

/// Cayley-coordinate draw. Returns the chart point and the log density of
/// the proposal pushed to the chart (proposal density of K times the
/// Jacobian `dK / d(chart)`).
pub(crate) fn draw_cayley(
    n: usize,
    m: usize,
    s: f64,
    tols: &Tolerances,
    rng: &mut ChaCha8Rng,
) -> Result<(SpectralData, f64)> {
    let big = n + m;
    let w = haar_unitary(big, rng);
    let kappa: Vec<f64> = (0..big).map(|_| s * (PI * (rng.random::<f64>() - 0.5)).tan()).collect();
    let diag = ComplexMatrix::from_diagonal(&kappa.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
    let k = (&(&w * &diag) * &w.adjoint()).hermitian_part();

    let sd = chart_from_cayley_block(&k, n, m, tols)?;
    let ln_q = cayley_log_q(&kappa, s) + cayley_log_jacobian(&sd, &k.block(0, 0, n, n))?;
    Ok((sd, ln_q))
}

/// Log density of `K = W diag(κ) W*` (W Haar, κ iid Cauchy(s)) with respect
/// to Lebesgue measure on Hermitian matrices.
fn cayley_log_q(kappa: &[f64], s: f64) -> f64 {
    let big = kappa.len();
    let mut ln_q = ln_superfactorial(1, big) - (big * (big - 1)) as f64 / 2.0 * PI.ln();
    for (j, &x) in kappa.iter().enumerate() {
        ln_q += (s / (PI * (s * s + x * x))).ln();
        for &y in &kappa[j + 1..] {
            ln_q -= 2.0 * (x - y).abs().ln();
        }
    }
    ln_q
}

/// Log Jacobian `dK / d(chart)` at a chart point whose Cayley block is A.
fn cayley_log_jacobian(sd: &SpectralData, a: &ComplexMatrix) -> Result<f64> {
    let (n, m) = (sd.n(), sd.m());
    let mut mu: Vec<f64> = sd.t().iter().map(|&t| (-I * (t - ONE) / (t + ONE)).re).collect();
    mu.sort_by(|x, y| y.total_cmp(x));
    let mut ln_jac = -hua_log_density(&a.scale(I), n)?.log_value + weyl_log_density(&mu)?.log_value + ln_factorial(m);
    ln_jac += m as f64 * TAU.ln();
    for &t in sd.t() {
        let ln_r = (ONE + t).norm().ln();
        ln_jac += 2f64.ln() - 2.0 * ln_r;
        ln_jac += n as f64 * (4f64.ln() - 2.0 * ln_r);
    }
    Ok(ln_jac)
}

/// The Cayley proposal density pushed to the chart, evaluated at `sd`.
pub(crate) fn cayley_log_proposal(sd: &SpectralData, s: f64) -> Result<f64> {
    let g = reconstruct(sd)?;
    let k = cayley(g.matrix())?.scale(-I).hermitian_part();
    let kappa: Vec<f64> = k.as_inner().clone().symmetric_eigenvalues().iter().copied().collect();
    Ok(cayley_log_q(&kappa, s) + cayley_log_jacobian(sd, &k.block(0, 0, sd.n(), sd.n()))?)
}

/// Direct chart draw: Haar U, iid uniform angles sorted descending,
/// half-normal c¹ and normal remaining coordinates of scale s. The returned
/// log density is taken with respect to the chart reference measure.
fn draw_chart(cfg: &NormalizationConfig, s: f64, rng: &mut ChaCha8Rng) -> Result<(SpectralData, f64)> {
    let (n, m) = (cfg.n, cfg.m);
    let u = haar_unitary(n, rng);
    let t: Vec<C64> = (0..m).map(|_| C64::from_polar(1.0, TAU * rng.random::<f64>())).collect();
    let mut c = ComplexMatrix::zeros(n, m);
    let mut ln_q = ln_factorial(m) - m as f64 * TAU.ln();
    for k in 0..m {
        let x: f64 = rng.sample(StandardNormal);
        let c1 = s * x.abs();
        c[(0, k)] = C64::new(c1, 0.0);
        // half-normal density, then divide by the c¹ reference weight
        ln_q += 2f64.ln() + ln_std_normal(x) - s.ln() - c1.ln();
        for j in 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c[(j, k)] = C64::new(s * re, s * im);
            ln_q += ln_std_normal(re) + ln_std_normal(im) - 2.0 * s.ln();
        }
    }
    let sd = canonicalize_with(&t, &c, &u, &cfg.tolerances)?;
    Ok((sd, ln_q))
}

fn run_chunks(cfg: &NormalizationConfig, s: f64, samples: usize, stream_offset: u64) -> (f64, f64, u64, Rejections) {
    let partials: Vec<Partial> = chunks(samples, cfg.chunk_size)
        .into_par_iter()
        .enumerate()
        .map(|(i, (_, len))| {
            let mut rng = chunk_rng(cfg.seed, stream_offset + i as u64);
            let mut p = Partial { sum: 0.0, sum_sq: 0.0, accepted: 0, rejections: Rejections::default() };
            for _ in 0..len {
                match draw_log_weight(cfg, s, &mut rng) {
                    Ok(lw) => {
                        let w = lw.exp();
                        p.sum += w;
                        p.sum_sq += w * w;
                        p.accepted += 1;
                    }
                    Err(e) => p.rejections.record(&e),
                }
            }
            p
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut accepted = 0;
    let mut rejections = Rejections::default();
    for p in &partials {
        sum += p.sum;
        sum_sq += p.sum_sq;
        accepted += p.accepted;
        rejections.merge(&p.rejections);
    }
    (sum, sum_sq, accepted, rejections)
}

fn ess(sum: f64, sum_sq: f64) -> f64 {
    if sum_sq > 0.0 {
        sum * sum / sum_sq
    } else {
        0.0
    }
}

/// Streams used by the pilot run start here, well clear of the main run.
const PILOT_STREAM: u64 = 1 << 40;

/// Picks the proposal scale with the largest effective sample size on a
/// pilot of `samples / 100` draws (at least 1000).
pub fn pilot_scale(cfg: &NormalizationConfig) -> (f64, Vec<(f64, f64)>) {
    let pilot = (cfg.samples / 100).max(1000);
    let mut table = Vec::new();
    let mut best = (PILOT_SCALES[0], f64::NEG_INFINITY);
    for (i, &s) in PILOT_SCALES.iter().enumerate() {
        let (sum, sum_sq, _, _) = run_chunks(cfg, s, pilot, PILOT_STREAM * (i as u64 + 1));
        let e = ess(sum, sum_sq);
        table.push((s, e));
        if e > best.1 {
            best = (s, e);
        }
    }
    (best.0, table)
}

/// Importance-sampling estimate of the integral of the target over the
/// chart. Rejected draws count as zero weight (they are measure-zero
/// events). Passes when the estimate is within 3 standard errors of 1 and
/// the effective sample size is at least 1000.
pub fn normalization_check(cfg: &NormalizationConfig) -> Result<McReport> {
    if cfg.n == 0 || cfg.m == 0 {
        return Err(Error::InvalidArgument("n and m must be positive".into()));
    }
    if cfg.samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    let timer = Timer::start();
    let mut details = serde_json::Map::new();
    let s = match cfg.scale {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidArgument(format!("scale must be positive, got {s}"))),
        None => {
            let (s, table) = pilot_scale(cfg);
            details.insert(
                "pilot".into(),
                serde_json::json!(table.iter().map(|(s, e)| serde_json::json!({"scale": s, "ess": e})).collect::<Vec<_>>()),
            );
            s
        }
    };
    details.insert("scale".into(), serde_json::json!(s));
    details.insert("proposal".into(), serde_json::to_value(cfg.proposal).unwrap_or_default());
    details.insert("target".into(), serde_json::to_value(cfg.target).unwrap_or_default());
    details.insert("n".into(), serde_json::json!(cfg.n));
    details.insert("m".into(), serde_json::json!(cfg.m));

    let (sum, sum_sq, accepted, rejections) = run_chunks(cfg, s, cfg.samples, 0);
    let total = cfg.samples as f64;
    let estimate = sum / total;
    let var = ((sum_sq / total) - estimate * estimate).max(0.0) * total / (total - 1.0);
    let std_error = (var / total).sqrt();
    let effective_sample_size = ess(sum, sum_sq);
    let within = (estimate - 1.0).abs() <= 3.0 * std_error;
    Ok(McReport {
        name: "normalization".into(),
        estimate,
        std_error,
        n_samples: accepted,
        n_rejected: rejections.total(),
        rejections,
        effective_sample_size,
        seed: cfg.seed,
        chunk_size: cfg.chunk_size,
        wall_time: timer.seconds(),
        insufficient_samples: effective_sample_size < 100.0,
        checks: Vec::new(),
        details,
        passed: within && effective_sample_size >= 1000.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn proposal_density_at_a_point_matches_the_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let tols = Tolerances::default();
        for (n, m) in [(1, 1), (2, 3), (3, 2)] {
            for _ in 0..20 {
                let Ok((sd, ln_q)) = draw_cayley(n, m, 0.7, &tols, &mut rng) else { continue };
                let again = cayley_log_proposal(&sd, 0.7).unwrap();
                assert!((again - ln_q).abs() <= 1e-7 * (1.0 + ln_q.abs()), "{again} {ln_q}");
            }
        }
    }

    #[test]
    fn synthetic_target_integrates_to_one() {
        for (n, m) in [(1, 1), (2, 2)] {
            let mut cfg = NormalizationConfig::new(n, m, 100_000, 41);
            cfg.proposal = Proposal::Chart;
            cfg.target = Target::Synthetic;
            cfg.scale = Some(1.3);
            let r = normalization_check(&cfg).unwrap();
            assert!((r.estimate - 1.0).abs() <= 3.0 * r.std_error, "{r:?}");
            assert!(r.passed);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed_and_chunking() {
        let mut cfg = NormalizationConfig::new(1, 1, 20_000, 42);
        cfg.scale = Some(1.0);
        let a = normalization_check(&cfg).unwrap();
        let b = normalization_check(&cfg).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| normalization_check(&cfg).unwrap());
        assert_eq!(a.estimate.to_bits(), c.estimate.to_bits());
    }

    #[test]
    fn main_density_small_run_is_near_one() {
        let cfg = NormalizationConfig::new(1, 1, 100_000, 43);
        let r = normalization_check(&cfg).unwrap();
        assert!((r.estimate - 1.0).abs() <= 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn printed_constant_integrates_to_inverse_two_to_m_m_factorial() {
        let mut cfg = NormalizationConfig::new(1, 2, 200_000, 44);
        cfg.target = Target::Main(MainDensity::printed());
        let r = normalization_check(&cfg).unwrap();
        assert!((r.estimate - 0.125).abs() <= 3.0 * r.std_error, "{r:?}");
        assert!(!r.passed);
    }
}
