//! Regression Monte Carlo for the pricing backward equations
//!
//! ```text
//! −dU = (ϱ − rU ∓ d(±Z, B)) dt − Z dW,   U_T = Ψ(S_T)
//! ```
//!
//! with the reflection `U ≥ Γ` for American bids. Each step regresses
//! `U_{k+1}ΔW/Δt` on a polynomial basis in log-prices to get `Z_k`, then
//! applies the driver explicitly at `Z_k`. American claims also regress
//! `U_{k+1}` for the continuation value; see [`Reflection`].

use rayon::prelude::*;

use super::montecarlo::simulate_paths;
use super::regression::PolynomialBasis;
use super::McEstimate;
use crate::ambiguity::{distance_to_constraint, ScalarDistance};
use crate::analytic::{discount, earnings_value};
use crate::error::{PricerError, Result};
use crate::model::{AmbiguityRectangle, ClaimSpec, ConstraintSpec, ExerciseStyle, MarketModel};
use crate::pde::Side;

/// How the obstacle enters the backward induction for American bids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reflection {
    /// Exercise on in-the-money paths where `Γ` exceeds the continuation
    /// value fitted on those paths; elsewhere carry the pathwise value.
    #[default]
    StoppingRule,
    /// `U_k := max(fitted continuation, Γ)` on every path. Biased upwards
    /// because regression noise passes through the max.
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsmcConfig {
    pub steps: usize,
    pub paths: usize,
    pub basis_degree: u32,
    pub seed: u64,
    pub reflection: Reflection,
}

impl Default for LsmcConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            paths: 100_000,
            basis_degree: 4,
            seed: 20_240_601,
            reflection: Reflection::default(),
        }
    }
}

enum Driver {
    Scalar(Vec<ScalarDistance>),
    General,
}

pub fn lsmc_bsde(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    side: Side,
    s0: &[f64],
    cfg: &LsmcConfig,
) -> Result<McEstimate> {
    let issues = model.validate();
    if !issues.is_empty() {
        return Err(PricerError::InvalidModel(issues));
    }
    let n = model.n;
    claim.validate(n)?;
    if amb.dim() != n {
        return Err(PricerError::DimensionMismatch { expected: n, got: amb.dim() });
    }
    cons.check_dim(n)?;
    if cfg.paths < 1000 {
        return Err(PricerError::InvalidInput(format!("need at least 1000 paths, got {}", cfg.paths)));
    }
    let american = claim.style == ExerciseStyle::American;
    if american && side == Side::Ask {
        return Err(PricerError::Unsupported(
            "regression Monte Carlo covers American bids only".into(),
        ));
    }
    let horizon = model.horizon;
    let steps = cfg.steps;
    let sim = simulate_paths(model, s0, horizon, steps, cfg.paths, cfg.seed)?;
    let basis = PolynomialBasis::new(n, cfg.basis_degree);
    let sign = match side {
        Side::Bid => 1.0,
        Side::Ask => -1.0,
    };
    let driver = if n == 1 {
        Driver::Scalar(
            sim.vols
                .iter()
                .map(|v| ScalarDistance::new(amb, cons, v[(0, 0)]))
                .collect::<Result<_>>()?,
        )
    } else {
        Driver::General
    };
    let paths = sim.count;
    let obstacle = |k: usize, p: usize| claim.early_eval(sim.times[k], horizon, sim.spot(k, p));

    let mut u: Vec<f64> = (0..paths).map(|p| claim.payoff_eval(sim.spot(steps, p))).collect();
    if american {
        u.par_iter_mut().enumerate().for_each(|(p, v)| *v = v.max(obstacle(steps, p)));
    }
    for k in (0..steps).rev() {
        let (t0, t1) = (sim.times[k], sim.times[k + 1]);
        let dt = t1 - t0;
        let disc = discount(model, t0, t1);
        let stream = earnings_value(model, &claim.earnings, t0, t1);
        let zt: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..paths).map(|p| u[p] * sim.increment(k, p)[i] / dt).collect())
            .collect();
        let (z, exercise) = if k == 0 {
            let zm: Vec<f64> = zt.iter().map(|c| c.iter().sum::<f64>() / paths as f64).collect();
            (vec![zm; paths], None)
        } else {
            let features: Vec<Vec<f64>> = (0..paths)
                .map(|p| sim.spot(k, p).iter().map(|s| s.ln()).collect())
                .collect();
            let targets: Vec<&[f64]> = zt.iter().map(|c| c.as_slice()).collect();
            let fitted = basis.fit(&features, &targets)?;
            let z: Vec<Vec<f64>> = (0..paths).map(|p| fitted.iter().map(|c| c[p]).collect()).collect();
            let exercise = if american {
                Some(continuation(&basis, &features, &u, |p| obstacle(k, p), cfg.reflection)?)
            } else {
                None
            };
            (z, exercise)
        };
        let penalty: Vec<f64> = match &driver {
            Driver::Scalar(d) => z.par_iter().map(|zp| d[k].value(sign * zp[0])).collect(),
            Driver::General => z
                .par_iter()
                .map(|zp| {
                    let zbar: Vec<f64> = zp.iter().map(|v| sign * v).collect();
                    distance_to_constraint(&zbar, amb, cons, &sim.vols[k]).map(|r| r.value)
                })
                .collect::<Result<_>>()?,
        };
        let step = |p: usize, next: f64| disc * next + stream - sign * penalty[p] * dt;
        if k == 0 {
            let samples: Vec<f64> = (0..paths).map(|p| step(p, u[p])).collect();
            let mut est = McEstimate::from_samples(&samples, cfg.seed);
            if american {
                est.mean = est.mean.max(claim.early_eval(0.0, horizon, s0));
            }
            return Ok(est);
        }
        u = match exercise {
            None => (0..paths).map(|p| step(p, u[p])).collect(),
            Some(cont) => (0..paths)
                .map(|p| {
                    let g = obstacle(k, p);
                    match (cfg.reflection, cont[p]) {
                        (Reflection::Value, Some(c)) => step(p, c).max(g),
                        (Reflection::StoppingRule, Some(c)) if g > step(p, c) => g,
                        _ => step(p, u[p]),
                    }
                })
                .collect(),
        };
    }
    unreachable!("loop returns at k = 0")
}

/// Fitted `E[U_{k+1} | S_k]` on the paths where exercise pays, `None`
/// elsewhere. The value rule fits on every path.
fn continuation(
    basis: &PolynomialBasis,
    features: &[Vec<f64>],
    u: &[f64],
    obstacle: impl Fn(usize) -> f64,
    rule: Reflection,
) -> Result<Vec<Option<f64>>> {
    let eligible: Vec<usize> = match rule {
        Reflection::Value => (0..u.len()).collect(),
        Reflection::StoppingRule => (0..u.len()).filter(|&p| obstacle(p) > 0.0).collect(),
    };
    let mut out = vec![None; u.len()];
    if eligible.len() < 4 * basis.len() {
        // too few candidates to regress; nobody exercises at this date
        return Ok(out);
    }
    let feats: Vec<Vec<f64>> = eligible.iter().map(|&p| features[p].clone()).collect();
    let target: Vec<f64> = eligible.iter().map(|&p| u[p]).collect();
    let fitted = basis.fit(&feats, &[&target])?;
    for (&p, v) in eligible.iter().zip(&fitted[0]) {
        out[p] = Some(*v);
    }
    Ok(out)
}
