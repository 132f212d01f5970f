//! Independent references for the grid solvers: binomial trees, plain and
//! regression Monte Carlo, and a discrete hedging simulator.

mod binomial;
mod hedge;
mod lsmc;
mod montecarlo;
mod regression;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use binomial::{binomial_american, binomial_boundary, TreeBoundary};
pub use hedge::simulate_hedge_pnl;
pub use lsmc::{lsmc_bsde, LsmcConfig, Reflection};
pub use montecarlo::mc_risk_neutral;
pub use regression::PolynomialBasis;

/// Paths per RNG substream.
pub(crate) const BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√paths`.
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McEstimate {
    pub(crate) fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
            paths: samples.len(),
            seed,
        }
    }

    /// Sample standard deviation.
    pub fn std_dev(&self) -> f64 {
        self.stderr * (self.paths as f64).sqrt()
    }
}

/// RNG for batch `batch` of a run seeded with `seed`.
pub(crate) fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

pub(crate) fn batch_ranges(paths: usize) -> Vec<std::ops::Range<usize>> {
    (0..paths.div_ceil(BATCH))
        .map(|b| b * BATCH..((b + 1) * BATCH).min(paths))
        .collect()
}
