//! Bulk extract → reconstruct → extract suite.

use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Rejections, Timer};
use super::{chunk_rng, chunks, DEFAULT_CHUNK_SIZE};
use crate::charfn::CharFunction;
use crate::error::{Error, Result};
use crate::matrix::{complex_gaussian, BlockUnitary, ComplexMatrix, C64};
use crate::spectral::{extract_direct_with, extract_via_cayley_with, reconstruct};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripConfig {
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    /// Size of a unitary perturbation applied to every reconstructed matrix
    /// (negative control); zero for the real suite.
    pub perturbation: f64,
    pub chunk_size: usize,
    pub tolerances: Tolerances,
    /// Field and function agreement threshold.
    pub threshold: f64,
    /// Threshold for `|t_k ⟨χ′(t_k)c_k, c_k⟩ + 1|`.
    pub normalization_threshold: f64,
    /// Largest admissible fraction of degenerate samples.
    pub max_rejection_rate: f64,
}

impl RoundtripConfig {
    pub fn new(n: usize, m: usize, samples: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            samples,
            seed,
            perturbation: 0.0,
            chunk_size: DEFAULT_CHUNK_SIZE,
            tolerances: Tolerances::default(),
            threshold: 1e-7,
            normalization_threshold: 1e-8,
            max_rejection_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub samples: u64,
    pub n_rejected: u64,
    pub rejections: Rejections,
    pub rejection_rate: f64,
    /// Samples where extraction succeeded but a later stage failed.
    pub failures: u64,
    pub max_field_error: f64,
    pub max_function_error: f64,
    pub max_cross_path_error: f64,
    pub max_normalization_residual: f64,
    pub chunk_size: usize,
    pub wall_time: f64,
    pub passed: bool,
}

#[derive(Default)]
struct Partial {
    rejections: Rejections,
    failures: u64,
    field: f64,
    function: f64,
    cross: f64,
    norm: f64,
}

const CIRCLE_POINTS: usize = 20;

fn perturb(g: &BlockUnitary, size: f64, rng: &mut impl Rng) -> Result<BlockUnitary> {
    let k = g.n() + g.m();
    let x = ComplexMatrix::from_fn(k, k, |_, _| complex_gaussian(rng)).hermitian_part();
    let eig = x.as_inner().clone().symmetric_eigen();
    let v = ComplexMatrix::from_inner(eig.eigenvectors);
    let d: Vec<C64> = eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, size * l)).collect();
    let step = &(&v * &ComplexMatrix::from_diagonal(&d)) * &v.adjoint();
    BlockUnitary::with_tolerance(g.matrix() * &step, g.n(), g.m(), 1e-9)
}

fn one_sample(cfg: &RoundtripConfig, rng: &mut impl Rng, p: &mut Partial) {
    let tols = &cfg.tolerances;
    let g = BlockUnitary::haar(cfg.n, cfg.m, rng);
    let sd = match extract_direct_with(&g, tols).and_then(|sd| sd.check_general_position(tols).map(|_| sd)) {
        Ok(sd) => sd,
        Err(e) => {
            p.rejections.record(&e);
            return;
        }
    };
    let f = CharFunction::of_unitary(&g);
    let outcome = (|| -> Result<()> {
        p.norm = p.norm.max(sd.normalization_residual(&f)?);
        match extract_via_cayley_with(&g, tols) {
            Ok(other) => p.cross = p.cross.max(sd.max_field_diff(&other)),
            // cayley(g) undefined: g has eigenvalue −1, a measure-zero event
            Err(Error::Singularity { .. }) => {}
            Err(e) => return Err(e),
        }
        let mut back = reconstruct(&sd)?;
        if cfg.perturbation > 0.0 {
            back = perturb(&back, cfg.perturbation, rng)?;
        }
        let again = extract_direct_with(&back, tols)?;
        p.field = p.field.max(sd.max_field_diff(&again));
        let h = CharFunction::of_unitary(&back);
        let phase0 = rng.random::<f64>() * TAU;
        for j in 0..CIRCLE_POINTS {
            let l = C64::from_polar(1.0, phase0 + TAU * j as f64 / CIRCLE_POINTS as f64);
            match (f.eval(l), h.eval(l)) {
                (Ok(a), Ok(b)) => p.function = p.function.max(a.max_abs_diff(&b)),
                (Err(Error::Pole { .. }), _) | (_, Err(Error::Pole { .. })) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        p.failures += 1;
        p.rejections.record(&e);
        p.field = f64::INFINITY;
    }
}

/// Runs the suite. It passes when every field, function and cross-path
/// error is within `threshold`, every normalization residual within
/// `normalization_threshold`, no non-degenerate failure occurred, and the
/// degenerate fraction is at most `max_rejection_rate`.
pub fn roundtrip_suite(cfg: &RoundtripConfig) -> Result<RoundtripReport> {
    if cfg.n == 0 || cfg.m == 0 || cfg.samples == 0 {
        return Err(Error::InvalidArgument("roundtrip needs n, m ≥ 1 and at least one sample".into()));
    }
    let timer = Timer::start();
    let parts: Vec<Partial> = chunks(cfg.samples, cfg.chunk_size)
        .into_par_iter()
        .enumerate()
        .map(|(i, (_, len))| {
            let mut rng = chunk_rng(cfg.seed, i as u64);
            let mut p = Partial::default();
            for _ in 0..len {
                one_sample(cfg, &mut rng, &mut p);
            }
            p
        })
        .collect();
    let mut total = Partial::default();
    for p in &parts {
        total.rejections.merge(&p.rejections);
        total.failures += p.failures;
        total.field = total.field.max(p.field);
        total.function = total.function.max(p.function);
        total.cross = total.cross.max(p.cross);
        total.norm = total.norm.max(p.norm);
    }
    let degenerate = total.rejections.total() - total.failures;
    let rejection_rate = degenerate as f64 / cfg.samples as f64;
    let passed = total.failures == 0
        && total.field <= cfg.threshold
        && total.function <= cfg.threshold
        && total.cross <= cfg.threshold
        && total.norm <= cfg.normalization_threshold
        && rejection_rate <= cfg.max_rejection_rate;
    Ok(RoundtripReport {
        n: cfg.n,
        m: cfg.m,
        seed: cfg.seed,
        samples: cfg.samples as u64,
        n_rejected: degenerate,
        rejections: total.rejections,
        rejection_rate,
        failures: total.failures,
        max_field_error: total.field,
        max_function_error: total.function,
        max_cross_path_error: total.cross,
        max_normalization_residual: total.norm,
        chunk_size: cfg.chunk_size,
        wall_time: timer.seconds(),
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_for_scalar_blocks() {
        let r = roundtrip_suite(&RoundtripConfig::new(1, 1, 1000, 71)).unwrap();
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn passes_for_three_plus_two() {
        let r = roundtrip_suite(&RoundtripConfig::new(3, 2, 1000, 72)).unwrap();
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn perturbed_reconstruction_fails() {
        let mut cfg = RoundtripConfig::new(2, 2, 200, 73);
        cfg.perturbation = 1e-3;
        let r = roundtrip_suite(&cfg).unwrap();
        assert!(!r.passed);
        assert!(r.max_field_error > 1e-5 || r.failures > 0);
    }
}
