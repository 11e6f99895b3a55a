//! Two-sample comparison between spectral data extracted from Haar samples
//! and an MCMC chain targeting the main density.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcmc::mcmc_sample_with;
use super::report::{batch_means, mean_and_se, Rejections, Timer};
use super::{chunk_rng, chunks, DEFAULT_CHUNK_SIZE};
use crate::density::MainDensity;
use crate::error::{Error, Result};
use crate::matrix::BlockUnitary;
use crate::spectral::{extract_direct_with, SpectralData};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `arg t₁` (the largest argument).
    MeanArgT1,
    /// `Σ_k (c_k¹)²`.
    MeanSumC1Sq,
    /// `Re tr U`.
    MeanReTrU,
    /// Variance of the m circular gaps between consecutive arguments
    /// (including the wrap-around gap). Needs m ≥ 2.
    VarArgSpacing,
}

impl Statistic {
    pub const ALL: [Statistic; 4] =
        [Statistic::MeanArgT1, Statistic::MeanSumC1Sq, Statistic::MeanReTrU, Statistic::VarArgSpacing];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::MeanArgT1 => "mean_arg_t1",
            Statistic::MeanSumC1Sq => "mean_sum_c1_sq",
            Statistic::MeanReTrU => "mean_re_tr_u",
            Statistic::VarArgSpacing => "var_arg_spacing",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }

    pub fn applies_to(self, m: usize) -> bool {
        self != Statistic::VarArgSpacing || m >= 2
    }

    pub fn value(self, sd: &SpectralData) -> f64 {
        match self {
            Statistic::MeanArgT1 => sd.angles()[0],
            Statistic::MeanSumC1Sq => (0..sd.m()).map(|k| sd.c()[(0, k)].re.powi(2)).sum(),
            Statistic::MeanReTrU => sd.u().trace().re,
            Statistic::VarArgSpacing => {
                let a = sd.angles();
                let m = a.len();
                let mean = TAU / m as f64;
                let mut gaps: Vec<f64> = a.windows(2).map(|w| w[0] - w[1]).collect();
                gaps.push(TAU + a[m - 1] - a[0]);
                gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / m as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub n: usize,
    pub m: usize,
    /// Number of Haar samples.
    pub samples: usize,
    /// Total post-burn-in MCMC sweeps, split across `chains`.
    pub chain_length: usize,
    pub chains: usize,
    pub seed: u64,
    pub statistics: Vec<Statistic>,
    pub density: MainDensity,
    pub chunk_size: usize,
    pub tolerances: Tolerances,
    /// Largest |z| still counted as agreement.
    pub z_threshold: f64,
}

impl ForwardConfig {
    pub fn new(n: usize, m: usize, samples: usize, chain_length: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            samples,
            chain_length,
            chains: 4,
            seed,
            statistics: Statistic::ALL.to_vec(),
            density: MainDensity::default(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            tolerances: Tolerances::default(),
            z_threshold: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatComparison {
    pub statistic: String,
    pub haar_mean: f64,
    pub haar_std_error: f64,
    pub mcmc_mean: f64,
    pub mcmc_std_error: f64,
    pub z: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardReport {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub haar_samples: u64,
    pub n_rejected: u64,
    pub rejections: Rejections,
    pub chain_length: usize,
    pub chains: usize,
    pub acceptance_rates: Vec<f64>,
    /// Chains whose acceptance rate fell below [`STUCK_ACCEPTANCE`].
    pub stuck_chains: usize,
    pub comparisons: Vec<StatComparison>,
    pub max_abs_z: f64,
    pub chunk_size: usize,
    pub wall_time: f64,
    pub passed: bool,
}

/// Haar side: statistic values per sample, in chunk order.
fn haar_values(cfg: &ForwardConfig, stats: &[Statistic]) -> (Vec<Vec<f64>>, Rejections) {
    let parts: Vec<(Vec<Vec<f64>>, Rejections)> = chunks(cfg.samples, cfg.chunk_size)
        .into_par_iter()
        .enumerate()
        .map(|(i, (_, len))| {
            let mut rng = chunk_rng(cfg.seed, i as u64);
            let mut vals = vec![Vec::with_capacity(len); stats.len()];
            let mut rej = Rejections::default();
            for _ in 0..len {
                let g = BlockUnitary::haar(cfg.n, cfg.m, &mut rng);
                let sd = extract_direct_with(&g, &cfg.tolerances)
                    .and_then(|sd| sd.check_general_position(&cfg.tolerances).map(|_| sd));
                match sd {
                    Ok(sd) => {
                        for (v, st) in vals.iter_mut().zip(stats) {
                            v.push(st.value(&sd));
                        }
                    }
                    Err(e) => rej.record(&e),
                }
            }
            (vals, rej)
        })
        .collect();
    let mut out = vec![Vec::with_capacity(cfg.samples); stats.len()];
    let mut rej = Rejections::default();
    for (vals, r) in parts {
        for (o, v) in out.iter_mut().zip(vals) {
            o.extend(v);
        }
        rej.merge(&r);
    }
    (out, rej)
}

/// Streams for the MCMC chains are seeded from `seed` mixed with this tag.
const CHAIN_SEED_TAG: u64 = 0x9e37_79b9_7f4a_7c15;

/// Per chain: batch-means (mean, se) for each statistic and the acceptance rate.
fn chain_values(cfg: &ForwardConfig, stats: &[Statistic]) -> Result<Vec<(Vec<(f64, f64)>, f64)>> {
    let chains = cfg.chains.max(1);
    let per_chain = cfg.chain_length.div_ceil(chains);
    let burn_in = per_chain / 10;
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let seed = cfg.seed ^ CHAIN_SEED_TAG.wrapping_mul(c as u64 + 1);
            let mut run = mcmc_sample_with(cfg.n, cfg.m, per_chain, burn_in, seed, cfg.density)?;
            let mut vals = vec![Vec::with_capacity(per_chain); stats.len()];
            for sd in run.by_ref() {
                for (v, st) in vals.iter_mut().zip(stats) {
                    v.push(st.value(&sd));
                }
            }
            Ok((vals.iter().map(|v| batch_means(v, 50)).collect(), run.sampler().acceptance_rate()))
        })
        .collect()
}

/// Acceptance rate below which a chain counts as stuck.
pub const STUCK_ACCEPTANCE: f64 = 0.01;

/// Compares each statistic's Haar-extraction mean with its MCMC mean. The
/// test passes when every |z| is at most `z_threshold` and no chain is
/// stuck. Stuck chains are reported rather than raised, so that z-scores
/// are still available for mutated densities.
pub fn forward_pushforward_test(cfg: &ForwardConfig) -> Result<ForwardReport> {
    if cfg.n == 0 || cfg.m == 0 || cfg.samples < 2 || cfg.chain_length < 100 {
        return Err(Error::InvalidArgument("forward test needs n, m ≥ 1, samples ≥ 2, chain ≥ 100".into()));
    }
    let timer = Timer::start();
    let stats: Vec<Statistic> = cfg.statistics.iter().copied().filter(|s| s.applies_to(cfg.m)).collect();
    let (haar, rejections) = haar_values(cfg, &stats);
    let per_chain = chain_values(cfg, &stats)?;
    let mut comparisons = Vec::with_capacity(stats.len());
    for (i, st) in stats.iter().enumerate() {
        let (hm, hs) = mean_and_se(&haar[i]);
        let k = per_chain.len() as f64;
        let mm = per_chain.iter().map(|(v, _)| v[i].0).sum::<f64>() / k;
        let ms = per_chain.iter().map(|(v, _)| v[i].1.powi(2)).sum::<f64>().sqrt() / k;
        let z = (hm - mm) / (hs * hs + ms * ms).sqrt();
        comparisons.push(StatComparison {
            statistic: st.name().into(),
            haar_mean: hm,
            haar_std_error: hs,
            mcmc_mean: mm,
            mcmc_std_error: ms,
            z,
            passed: z.abs() <= cfg.z_threshold,
        });
    }
    let stuck_chains = per_chain.iter().filter(|(_, a)| *a < STUCK_ACCEPTANCE).count();
    let max_abs_z = comparisons.iter().fold(0.0, |acc: f64, c| acc.max(c.z.abs()));
    let haar_samples = haar.first().map_or(0, |v| v.len()) as u64;
    Ok(ForwardReport {
        n: cfg.n,
        m: cfg.m,
        seed: cfg.seed,
        haar_samples,
        n_rejected: rejections.total(),
        rejections,
        chain_length: cfg.chain_length,
        chains: cfg.chains.max(1),
        acceptance_rates: per_chain.iter().map(|(_, a)| *a).collect(),
        stuck_chains,
        passed: stuck_chains == 0 && comparisons.iter().all(|c| c.passed),
        comparisons,
        max_abs_z,
        chunk_size: cfg.chunk_size,
        wall_time: timer.seconds(),
    })
}
