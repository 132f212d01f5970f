use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{batch_ranges, batch_rng, McEstimate};
use crate::error::{PricerError, Result};
use crate::model::{AmbiguityRectangle, ClaimSpec, ConstraintSpec, MarketModel};
use crate::pde::{query_grad, query_price, PriceSurface};

/// Replication error `X_T − Ψ(S_T)` of the self-financing strategy that
/// starts from `P(0, S₀)` and holds `S∂_S P` dollars in the asset,
/// rebalanced `steps` times.
///
/// Only meaningful without ambiguity and constraints, where the price is
/// the replication cost; other inputs are refused.
#[allow(clippy::too_many_arguments)]
pub fn simulate_hedge_pnl(
    model: &MarketModel,
    surface: &PriceSurface,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    s0: f64,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !amb.is_trivial() {
        return Err(PricerError::ReplicationRefused("ambiguity must be zero".into()));
    }
    if *cons != ConstraintSpec::Unconstrained {
        return Err(PricerError::ReplicationRefused("positions must be unconstrained".into()));
    }
    if model.n != 1 {
        return Err(PricerError::Unsupported("hedge simulation needs one asset".into()));
    }
    if paths == 0 || steps == 0 {
        return Err(PricerError::InvalidInput("need at least one path and one step".into()));
    }
    let horizon = model.horizon;
    let dt = horizon / steps as f64;
    let x0 = query_price(surface, 0.0, s0)?;
    let s_lo = surface.spots[0];
    let s_hi = surface.spots[surface.spots.len() - 1];
    let step_data: Vec<(f64, f64, f64, f64)> = (0..steps)
        .map(|k| {
            let (a, b) = (k as f64 * dt, (k + 1) as f64 * dt);
            let growth = model.rate_integral(a, b);
            let var = model.variance_integral(a, b);
            (a, growth, var, var.sqrt())
        })
        .collect();

    let pnl: Vec<f64> = batch_ranges(paths)
        .into_par_iter()
        .enumerate()
        .map(|(b, range)| -> Result<Vec<f64>> {
            let mut rng = batch_rng(seed, b);
            let mut out = Vec::with_capacity(range.len());
            for _ in range {
                let mut s = s0;
                let mut x = x0;
                for &(t, growth, var, vol) in &step_data {
                    let pos = query_grad(surface, t, s.clamp(s_lo, s_hi))?;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let next = s * (growth - 0.5 * var + vol * z).exp();
                    x = (x - pos) * growth.exp() + pos * next / s;
                    s = next;
                }
                out.push(x - claim.terminal.eval(s));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(McEstimate::from_samples(&pnl, seed))
}
