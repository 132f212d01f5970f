use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{batch_ranges, batch_rng, McEstimate};
use crate::analytic::{discount, earnings_value};
use crate::error::{PricerError, Result};
use crate::model::{ClaimSpec, MarketModel};

/// Simulated asset paths on a uniform time grid, stored per time step with
/// `n` consecutive entries per path.
pub(crate) struct Paths {
    pub n: usize,
    pub count: usize,
    pub times: Vec<f64>,
    /// `spots[k][p·n + i]`.
    pub spots: Vec<Vec<f64>>,
    /// Brownian increments over `[t_k, t_{k+1}]`, same layout; `k < steps`.
    pub dw: Vec<Vec<f64>>,
    /// Volatility matrix used on each step.
    pub vols: Vec<DMatrix<f64>>,
}

impl Paths {
    pub fn spot(&self, k: usize, p: usize) -> &[f64] {
        &self.spots[k][p * self.n..(p + 1) * self.n]
    }

    pub fn increment(&self, k: usize, p: usize) -> &[f64] {
        &self.dw[k][p * self.n..(p + 1) * self.n]
    }
}

/// Exact lognormal stepping with the volatility at each step midpoint;
/// exact whenever volatility breakpoints fall on the time grid.
pub(crate) fn simulate_paths(
    model: &MarketModel,
    s0: &[f64],
    horizon: f64,
    steps: usize,
    count: usize,
    seed: u64,
) -> Result<Paths> {
    let n = model.n;
    if s0.len() != n {
        return Err(PricerError::DimensionMismatch { expected: n, got: s0.len() });
    }
    if s0.iter().any(|&s| !(s > 0.0)) {
        return Err(PricerError::InvalidInput("initial prices must be positive".into()));
    }
    if steps == 0 || count == 0 {
        return Err(PricerError::InvalidInput("need at least one step and one path".into()));
    }
    let dt = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let vols: Vec<DMatrix<f64>> = (0..steps).map(|k| model.vol_at(times[k] + 0.5 * dt).clone()).collect();
    let drifts: Vec<Vec<f64>> = (0..steps)
        .map(|k| {
            let growth = model.rate_integral(times[k], times[k + 1]);
            let v = &vols[k];
            (0..n)
                .map(|i| growth - 0.5 * dt * (0..n).map(|j| v[(i, j)].powi(2)).sum::<f64>())
                .collect()
        })
        .collect();
    let sqrt_dt = dt.sqrt();

    let blocks: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = batch_ranges(count)
        .into_par_iter()
        .enumerate()
        .map(|(b, range)| {
            let mut rng = batch_rng(seed, b);
            let m = range.len();
            let mut spots = vec![vec![0.0; m * n]; steps + 1];
            let mut dw = vec![vec![0.0; m * n]; steps];
            for p in 0..m {
                spots[0][p * n..(p + 1) * n].copy_from_slice(s0);
            }
            for p in 0..m {
                for k in 0..steps {
                    for i in 0..n {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        dw[k][p * n + i] = sqrt_dt * z;
                    }
                    let v = &vols[k];
                    for i in 0..n {
                        let shock: f64 = (0..n).map(|j| v[(i, j)] * dw[k][p * n + j]).sum();
                        spots[k + 1][p * n + i] = spots[k][p * n + i] * (drifts[k][i] + shock).exp();
                    }
                }
            }
            (spots, dw)
        })
        .collect();

    let mut spots = vec![Vec::with_capacity(count * n); steps + 1];
    let mut dw = vec![Vec::with_capacity(count * n); steps];
    for (bs, bw) in blocks {
        for (dst, src) in spots.iter_mut().zip(bs) {
            dst.extend(src);
        }
        for (dst, src) in dw.iter_mut().zip(bw) {
            dst.extend(src);
        }
    }
    Ok(Paths { n, count, times, spots, dw, vols })
}

/// Discounted terminal payoff plus the deterministic earnings stream,
/// averaged over exactly simulated paths.
pub fn mc_risk_neutral(
    model: &MarketModel,
    claim: &ClaimSpec,
    s0: &[f64],
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    claim.validate(model.n)?;
    let horizon = model.horizon;
    let sim = simulate_paths(model, s0, horizon, steps, paths, seed)?;
    let disc = discount(model, 0.0, horizon);
    let stream = earnings_value(model, &claim.earnings, 0.0, horizon);
    let samples: Vec<f64> = (0..paths)
        .map(|p| stream + disc * claim.payoff_eval(sim.spot(steps, p)))
        .collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_price, OptionKind};
    use crate::model::Payoff;
    use crate::piecewise::PiecewiseConstant;

    #[test]
    fn call_within_three_standard_errors() {
        let m = MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap();
        let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
        let est = mc_risk_neutral(&m, &claim, &[100.0], 100_000, 4, 11).unwrap();
        let bs = bs_price(100.0, 100.0, 1.0, 0.05, 0.0, 0.2, OptionKind::Call).unwrap();
        assert!((est.mean - bs).abs() < 3.0 * est.stderr, "{est:?} vs {bs}");
    }

    #[test]
    fn constant_payoff_and_stream_are_exact() {
        let m = MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap();
        let claim = ClaimSpec::european(Payoff::constant(7.0));
        let est = mc_risk_neutral(&m, &claim, &[100.0], 1000, 3, 1).unwrap();
        assert!((est.mean - 7.0 * (-0.05f64).exp()).abs() < 1e-12);
        assert!(est.stderr < 1e-12);

        let m0 = MarketModel::black_scholes(0.0, 0.2, 2.0).unwrap();
        let claim = ClaimSpec::european(Payoff::constant(0.0)).with_earnings(PiecewiseConstant::constant(1.0));
        let est = mc_risk_neutral(&m0, &claim, &[100.0], 1000, 3, 1).unwrap();
        assert_eq!(est.mean, 2.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn seed_determinism() {
        let m = MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap();
        let claim = ClaimSpec::european(Payoff::Put { strike: 95.0 });
        let a = mc_risk_neutral(&m, &claim, &[100.0], 10_000, 5, 42).unwrap();
        let b = mc_risk_neutral(&m, &claim, &[100.0], 10_000, 5, 42).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = mc_risk_neutral(&m, &claim, &[100.0], 10_000, 5, 43).unwrap();
        assert_ne!(a.mean, c.mean);
    }
}
