//! Seeded, order-independent Monte Carlo expectations.
//!
//! Each replication owns an independent random stream derived from
//! (master seed, replication index) through a SplitMix64 mix, so the i-th
//! stream is the same no matter how replications are chunked or scheduled.
//! Per-replication values are materialized in index order and reduced with a
//! single compensated sequential pass, which makes the estimate bit-identical
//! across chunk sizes and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub replications: usize,
    pub master_seed: u64,
    pub chunk: usize,
}

impl McConfig {
    pub fn new(replications: usize, master_seed: u64) -> Self {
        McConfig { replications, master_seed, chunk: 4096 }
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be positive".into()));
        }
        if self.chunk == 0 {
            return Err(Error::InvalidInput("chunk must be positive".into()));
        }
        Ok(())
    }
}

/// Mean estimate with its standard error and exclusion bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub used: usize,
    pub excluded: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A derived seed for sub-stream `stream` of a master seed; used to give
/// grid members and replications independent, reproducible streams.
pub fn derive_stream_seed(master_seed: u64, stream: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(stream))
}

/// The random stream of replication `index` under `master_seed`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_stream_seed(master_seed, index))
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error of `sampler` over `cfg.replications` independent
/// streams. Non-finite draws are excluded and counted; an exclusion fraction
/// above 1% is a hard failure.
pub fn mc_expectation<F>(sampler: F, cfg: &McConfig) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    cfg.validate()?;
    let reps = cfg.replications;
    let mut values = vec![0.0f64; reps];
    values
        .par_chunks_mut(cfg.chunk)
        .enumerate()
        .for_each(|(chunk_idx, slice)| {
            let base = chunk_idx * cfg.chunk;
            for (offset, slot) in slice.iter_mut().enumerate() {
                let mut rng = replication_rng(cfg.master_seed, (base + offset) as u64);
                *slot = sampler(&mut rng);
            }
        });

    let excluded = values.iter().filter(|v| !v.is_finite()).count();
    if excluded as f64 > 0.01 * reps as f64 {
        return Err(Error::Numerical(format!(
            "{excluded} of {reps} replications returned non-finite values (over the 1% budget)"
        )));
    }
    let used = reps - excluded;
    if used == 0 {
        return Err(Error::Numerical("all replications excluded".into()));
    }
    let finite = || values.iter().copied().filter(|v| v.is_finite());
    let mean = neumaier_sum(finite()) / used as f64;
    let ss = neumaier_sum(finite().map(|v| (v - mean) * (v - mean)));
    let std_error = if used > 1 {
        (ss / ((used - 1) as f64 * used as f64)).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { estimate: mean, std_error, used, excluded })
}
