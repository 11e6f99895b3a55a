//! Metropolis random walk on the chart targeting
//! `exp(main_log_density) · ∏ c_k¹`.
//!
//! One sweep updates three blocks in turn: all angles (wrapped on the circle
//! and re-sorted, which targets the permutation-symmetric extension of the
//! density), the C coordinates (moves with `c¹ ≤ 0` are rejected), and U by
//! right multiplication with `exp(iσX)` for a random Hermitian X. These
//! three proposals are symmetric, so acceptance uses the density ratio only.
//!
//! A fourth block is an independence move drawn from the Cayley-coordinate
//! proposal of the normalization check, accepted with the ratio of
//! importance weights. The density has narrow integrable spikes where g is
//! close to having eigenvalue −1; the random-walk blocks alone visit them
//! too rarely, which biases statistics such as `Re tr U`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::MainDensity;
use crate::error::{Error, Result};
use super::importance::{cayley_log_proposal, draw_cayley};
use crate::matrix::{complex_gaussian, BlockUnitary, ComplexMatrix, C64};
use crate::spectral::{canonicalize_with, extract_direct_with, SpectralData};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScales {
    pub angle: f64,
    pub c: f64,
    pub u: f64,
}

impl Default for StepScales {
    fn default() -> Self {
        Self { angle: 0.3, c: 0.3, u: 0.3 }
    }
}

const TARGET_ACCEPTANCE: f64 = 0.3;
const BLOCKS: usize = 4;

/// Cauchy scale of the independence proposal.
const INDEPENDENCE_SCALE: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct McmcChain {
    state: SpectralData,
    log_target: f64,
    scales: StepScales,
    density: MainDensity,
    tolerances: Tolerances,
    rng: ChaCha8Rng,
    proposed: [u64; BLOCKS],
    accepted: [u64; BLOCKS],
    chain_length: u64,
}

impl McmcChain {
    /// Starts from the spectral data of a Haar sample.
    pub fn new(n: usize, m: usize, density: MainDensity, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tolerances = Tolerances::default();
        for _ in 0..1000 {
            let g = BlockUnitary::haar(n, m, &mut rng);
            let Ok(sd) = extract_direct_with(&g, &tolerances) else { continue };
            if let Ok(chain) = Self::from_state(sd, density, rng.clone()) {
                return Ok(chain);
            }
        }
        Err(Error::InvalidArgument("no admissible starting state found".into()))
    }

    pub fn from_state(state: SpectralData, density: MainDensity, rng: ChaCha8Rng) -> Result<Self> {
        let log_target = log_target(&density, &state)?;
        Ok(Self {
            state,
            log_target,
            scales: StepScales::default(),
            density,
            tolerances: Tolerances::default(),
            rng,
            proposed: [0; BLOCKS],
            accepted: [0; BLOCKS],
            chain_length: 0,
        })
    }

    pub fn state(&self) -> &SpectralData {
        &self.state
    }

    pub fn scales(&self) -> StepScales {
        self.scales
    }

    pub fn chain_length(&self) -> u64 {
        self.chain_length
    }

    /// Fraction of accepted random-walk moves since the last counter reset
    /// (the independence block is reported by [`Self::block_acceptance`]).
    pub fn acceptance_rate(&self) -> f64 {
        let p: u64 = self.proposed[..BLOCKS - 1].iter().sum();
        if p == 0 {
            return 0.0;
        }
        self.accepted[..BLOCKS - 1].iter().sum::<u64>() as f64 / p as f64
    }

    pub fn block_acceptance(&self) -> [f64; BLOCKS] {
        std::array::from_fn(|i| if self.proposed[i] == 0 { 0.0 } else { self.accepted[i] as f64 / self.proposed[i] as f64 })
    }

    fn reset_counters(&mut self) {
        self.proposed = [0; BLOCKS];
        self.accepted = [0; BLOCKS];
    }

    fn propose_angles(&mut self) -> Option<SpectralData> {
        let sd = &self.state;
        let t: Vec<C64> = sd
            .angles()
            .iter()
            .map(|&a| {
                let step: f64 = self.rng.sample(StandardNormal);
                C64::from_polar(1.0, (a + self.scales.angle * step).rem_euclid(TAU))
            })
            .collect();
        canonicalize_with(&t, sd.c(), sd.u(), &self.tolerances).ok()
    }

    fn propose_c(&mut self) -> Option<SpectralData> {
        let sd = &self.state;
        let s = self.scales.c;
        let mut c = sd.c().clone();
        for k in 0..sd.m() {
            let step: f64 = self.rng.sample(StandardNormal);
            c[(0, k)] += C64::new(s * step, 0.0);
            if c[(0, k)].re <= 0.0 {
                return None;
            }
            for j in 1..sd.n() {
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = self.rng.sample(StandardNormal);
                c[(j, k)] += C64::new(s * re, s * im);
            }
        }
        canonicalize_with(sd.t(), &c, sd.u(), &self.tolerances).ok()
    }

    fn propose_u(&mut self) -> Option<SpectralData> {
        let sd = &self.state;
        let n = sd.n();
        let x = ComplexMatrix::from_fn(n, n, |_, _| complex_gaussian(&mut self.rng)).hermitian_part();
        let step = expi_hermitian(&x, self.scales.u);
        let u = sd.u() * &step;
        canonicalize_with(sd.t(), sd.c(), &u, &self.tolerances).ok()
    }

    /// Independence move: accepted with probability `min(1, w′/w)` where
    /// `w = f / q` is the importance weight under the Cayley proposal.
    fn update_independence(&mut self) {
        const BLOCK: usize = BLOCKS - 1;
        self.proposed[BLOCK] += 1;
        let (n, m) = (self.state.n(), self.state.m());
        let Ok((candidate, ln_q)) = draw_cayley(n, m, INDEPENDENCE_SCALE, &self.tolerances, &mut self.rng) else {
            return;
        };
        let Ok(lt) = log_target(&self.density, &candidate) else { return };
        // no finite Cayley coordinates: infinite weight, stay
        let Ok(ln_q_here) = cayley_log_proposal(&self.state, INDEPENDENCE_SCALE) else { return };
        let log_w_new = lt - ln_c1(&candidate) - ln_q;
        let log_w_old = self.log_target - ln_c1(&self.state) - ln_q_here;
        let log_u: f64 = self.rng.random::<f64>().ln();
        if log_u < log_w_new - log_w_old {
            self.state = candidate;
            self.log_target = lt;
            self.accepted[BLOCK] += 1;
        }
    }

    fn update_block(&mut self, block: usize) {
        if block == BLOCKS - 1 {
            return self.update_independence();
        }
        self.proposed[block] += 1;
        let proposal = match block {
            0 => self.propose_angles(),
            1 => self.propose_c(),
            _ => self.propose_u(),
        };
        let Some(candidate) = proposal else { return };
        let Ok(lt) = log_target(&self.density, &candidate) else { return };
        let log_u: f64 = self.rng.random::<f64>().ln();
        if log_u < lt - self.log_target {
            self.state = candidate;
            self.log_target = lt;
            self.accepted[block] += 1;
        }
    }

    /// One sweep over the four blocks with frozen scales.
    pub fn step(&mut self) {
        for block in 0..BLOCKS {
            self.update_block(block);
        }
        self.chain_length += 1;
    }

    /// Runs `steps` sweeps adapting each block scale towards an acceptance
    /// rate of 0.3, then freezes the scales and resets the counters.
    pub fn burn_in(&mut self, steps: usize) {
        for i in 0..steps {
            let gain = 1.0 / (1.0 + i as f64).powf(0.6);
            for block in 0..BLOCKS {
                let before = self.accepted[block];
                self.update_block(block);
                let hit = if self.accepted[block] > before { 1.0 } else { 0.0 };
                let factor = (gain * (hit - TARGET_ACCEPTANCE)).exp();
                match block {
                    0 => self.scales.angle = (self.scales.angle * factor).clamp(1e-5, std::f64::consts::PI),
                    1 => self.scales.c = (self.scales.c * factor).clamp(1e-5, 10.0),
                    2 => self.scales.u = (self.scales.u * factor).clamp(1e-5, std::f64::consts::PI),
                    _ => {}
                }
            }
            self.chain_length += 1;
        }
        self.reset_counters();
    }
}

fn ln_c1(sd: &SpectralData) -> f64 {
    (0..sd.m()).map(|k| sd.c()[(0, k)].re.ln()).sum()
}

fn log_target(density: &MainDensity, sd: &SpectralData) -> Result<f64> {
    Ok(density.log_density(sd)?.log_value + ln_c1(sd))
}

/// `exp(iσX)` for Hermitian X, by eigendecomposition.
fn expi_hermitian(x: &ComplexMatrix, sigma: f64) -> ComplexMatrix {
    let eig = x.as_inner().clone().symmetric_eigen();
    let v = ComplexMatrix::from_inner(eig.eigenvectors);
    let phases: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, sigma * l)).collect();
    &(&v * &ComplexMatrix::from_diagonal(&phases)) * &v.adjoint()
}

/// Burns in for `burn_in` sweeps and then yields `chain_length` states, one
/// per sweep.
///
/// Fails with `ChainStuck` only through [`McmcRun::finish`]; the iterator
/// itself always yields states.
pub fn mcmc_sample(n: usize, m: usize, chain_length: usize, burn_in: usize, seed: u64) -> Result<McmcRun> {
    mcmc_sample_with(n, m, chain_length, burn_in, seed, MainDensity::default())
}

pub fn mcmc_sample_with(n: usize, m: usize, chain_length: usize, burn_in: usize, seed: u64, density: MainDensity) -> Result<McmcRun> {
    if chain_length < 10 * burn_in {
        return Err(Error::InvalidArgument(format!(
            "chain length {chain_length} must be at least 10 x burn-in {burn_in}"
        )));
    }
    let mut chain = McmcChain::new(n, m, density, seed)?;
    chain.burn_in(burn_in);
    Ok(McmcRun { chain, remaining: chain_length })
}

/// Post-burn-in stream of chain states.
pub struct McmcRun {
    chain: McmcChain,
    remaining: usize,
}

impl McmcRun {
    pub fn sampler(&self) -> &McmcChain {
        &self.chain
    }

    /// Overall acceptance rate after burn-in; `ChainStuck` below 0.01.
    pub fn finish(self) -> Result<McmcChain> {
        let rate = self.chain.acceptance_rate();
        if rate < 0.01 {
            return Err(Error::ChainStuck(rate));
        }
        Ok(self.chain)
    }
}

impl Iterator for McmcRun {
    type Item = SpectralData;

    fn next(&mut self) -> Option<SpectralData> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.chain.step();
        Some(self.chain.state.clone())
    }
}
