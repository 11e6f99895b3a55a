//! Monte Carlo verification of the closed-form densities against Haar
//! sampling.
//!
//! Every driver splits its work into chunks of fixed size. Chunk `i` draws
//! from its own ChaCha stream `(seed, i)` and partial results are reduced in
//! chunk order, so reports are bit-reproducible for a fixed
//! `(seed, samples, chunk_size)` whatever the number of worker threads.

pub mod export;
pub mod forward;
pub mod importance;
pub mod mcmc;
pub mod report;
pub mod roundtrip;
pub mod staged;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use forward::{forward_pushforward_test, ForwardConfig, ForwardReport, Statistic};
pub use importance::{normalization_check, NormalizationConfig, Proposal, Target};
pub use mcmc::{mcmc_sample, McmcChain, StepScales};
pub use report::{Check, McReport, Rejections};
pub use roundtrip::{roundtrip_suite, RoundtripConfig, RoundtripReport};
pub use staged::staged_pushforward_check;

pub const DEFAULT_CHUNK_SIZE: usize = 4096;

/// Random stream for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// `(start, len)` of each chunk covering `total` items.
pub fn chunks(total: usize, chunk_size: usize) -> Vec<(usize, usize)> {
    let size = chunk_size.max(1);
    (0..total.div_ceil(size)).map(|i| (i * size, size.min(total - i * size))).collect()
}
