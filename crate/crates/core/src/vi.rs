//! American claims: the bid obstacle problem by penalization, the exercise
//! region it induces, and the ask price stopped on that region.

use crate::error::{PricerError, Result};
use crate::model::{AmbiguityRectangle, ClaimSpec, ConstraintSpec, ExerciseStyle, MarketModel};
use crate::pde::{
    build_problem, extract_hedge, meta_hash, surface_from_solution, Grid, GridSpec, Obstacle, PriceSurface, Side,
};

/// Force below which a node counts as untouched by the penalty.
const FORCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySchedule {
    /// Increasing penalty levels `m`.
    pub levels: Vec<f64>,
    /// Stop once successive levels change the surface by less than this.
    pub stop_change: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            levels: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7],
            stop_change: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyStep {
    pub m: f64,
    /// Sup-norm change from the previous level, in price units.
    pub sup_change: f64,
    /// `sup |min(R, P − Γ)|` with `R` the unpenalized discrete residual.
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidDiagnostics {
    pub penalty_report: Vec<PenaltyStep>,
    pub complementarity_residual: f64,
    /// Sup distance between the penalty solution and a projected SOR
    /// solution of the same linear complementarity problem at `t = 0`.
    pub psor_gap: f64,
    /// Set when the sup-norm change went up at some level.
    pub nonmonotone_change: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub t: f64,
    /// Geometric midpoints between neighbouring nodes where the mask flips.
    pub s_star: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseRegion {
    pub mask: Vec<Vec<bool>>,
    pub boundary: Vec<BoundaryPoint>,
    pub eps_reg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmericanSolution {
    pub bid: PriceSurface,
    pub ask: PriceSurface,
    pub region: ExerciseRegion,
    pub diagnostics: BidDiagnostics,
}

fn check_american(claim: &ClaimSpec, grid: &Grid, horizon: f64) -> Result<()> {
    if claim.style != ExerciseStyle::American || claim.early.is_none() {
        return Err(PricerError::InvalidInput(
            "American pricing needs an American claim with an early payoff".into(),
        ));
    }
    claim.check_obstacle_below_payoff(&grid.t, &grid.spots(), horizon)
}

fn obstacle_rows(claim: &ClaimSpec, grid: &Grid, horizon: f64) -> Vec<Vec<f64>> {
    let early = claim.early.as_ref().expect("checked American");
    let spots = grid.spots();
    grid.t
        .iter()
        .map(|&t| spots.iter().map(|&s| early.eval(t, horizon, s)).collect())
        .collect()
}

/// Bid price of an American claim: the penalized equation is solved for
/// each level of `schedule`, warm-started from the previous level.
pub fn solve_american_bid(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    spec: &GridSpec,
    schedule: &PenaltySchedule,
) -> Result<(PriceSurface, BidDiagnostics)> {
    if schedule.levels.is_empty() || schedule.levels.iter().any(|m| !(*m > 0.0)) {
        return Err(PricerError::InvalidInput("penalty schedule needs positive levels".into()));
    }
    let grid = spec.build(model)?;
    let problem = build_problem(model, claim, amb, cons, &grid, spec, Side::Bid)?;
    check_american(claim, &grid, model.horizon)?;
    let gamma = obstacle_rows(claim, &grid, model.horizon);
    let floor: Vec<Vec<f64>> = gamma
        .iter()
        .zip(&problem.discount)
        .map(|(row, d)| row.iter().map(|g| g / d).collect())
        .collect();

    let mut report = Vec::new();
    let mut previous: Option<Vec<Vec<f64>>> = None;
    let mut last = None;
    let mut last_m = 0.0;
    for &m in &schedule.levels {
        let sol = problem.solve(&Obstacle::Penalty { m, floor: &floor }, previous.as_deref())?;
        let change = match &previous {
            Some(prev) => sup_diff(prev, &sol.values, &problem.discount),
            None => f64::INFINITY,
        };
        let comp = complementarity(&sol.values, &sol.residual, &floor, &problem.discount);
        report.push(PenaltyStep { m, sup_change: change, complementarity: comp });
        previous = Some(sol.values.clone());
        last = Some(sol);
        last_m = m;
        if change < schedule.stop_change {
            break;
        }
    }
    let sol = last.expect("schedule is nonempty");
    let first = report[0].complementarity;
    let final_comp = report[report.len() - 1].complementarity;
    if report.len() > 1 && final_comp > first && final_comp > 1e-4 {
        return Err(PricerError::PenaltyStagnation { first, last: final_comp });
    }
    let nonmonotone_change = report
        .windows(2)
        .skip(1)
        .any(|w| w[1].sup_change > w[0].sup_change);

    let psor_gap = match &sol.first_step {
        Some((sys, rhs)) => {
            let psor = projected_sor(sys, rhs, &floor[0], &sol.values[0]);
            psor.iter()
                .zip(&sol.values[0])
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
                * problem.discount[0]
        }
        None => 0.0,
    };

    let meta = meta_hash(model, claim, amb, cons, spec, "american-bid");
    let mut surface = surface_from_solution(&grid, &problem.discount, &sol.values, Side::Bid, meta);
    let force: Vec<Vec<f64>> = surface
        .values
        .iter()
        .zip(&gamma)
        .map(|(p, g)| p.iter().zip(g).map(|(p, g)| last_m * (g - p).max(0.0)).collect())
        .collect();
    surface.obstacle_force = Some(force);
    let surface = extract_hedge(surface, model, amb, cons)?;
    Ok((
        surface,
        BidDiagnostics {
            penalty_report: report,
            complementarity_residual: final_comp,
            psor_gap,
            nonmonotone_change,
        },
    ))
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>], discount: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(discount)
        .map(|((ra, rb), d)| ra.iter().zip(rb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) * d)
        .fold(0.0, f64::max)
}

fn complementarity(values: &[Vec<f64>], residual: &[Vec<f64>], floor: &[Vec<f64>], discount: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..residual.len() {
        for j in 0..residual[k].len() {
            let gap = (values[k][j] - floor[k][j]) * discount[k];
            worst = worst.max(residual[k][j].min(gap).abs());
        }
    }
    worst
}

/// Projected SOR for `A v = b` subject to `v ≥ floor` with complementarity.
fn projected_sor(sys: &crate::pde::tridiag::Tridiagonal, rhs: &[f64], floor: &[f64], start: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let omega = 1.5;
    let mut v: Vec<f64> = start.iter().zip(floor).map(|(a, b)| a.max(*b)).collect();
    for _ in 0..20_000 {
        let mut delta = 0.0f64;
        for j in 0..n {
            let mut acc = rhs[j];
            if j > 0 {
                acc -= sys.lower[j] * v[j - 1];
            }
            if j + 1 < n {
                acc -= sys.upper[j] * v[j + 1];
            }
            let gs = acc / sys.diag[j];
            let new = (v[j] + omega * (gs - v[j])).max(floor[j]);
            delta = delta.max((new - v[j]).abs());
            v[j] = new;
        }
        if delta < 1e-13 {
            break;
        }
    }
    v
}

/// Nodes where the bid sits on the obstacle and the penalty is active;
/// at maturity, nodes where the terminal and early payoffs agree.
pub fn exercise_region(
    bid: &PriceSurface,
    claim: &ClaimSpec,
    horizon: f64,
    eps_reg: f64,
) -> Result<ExerciseRegion> {
    let early = claim
        .early
        .as_ref()
        .ok_or_else(|| PricerError::InvalidInput("exercise region needs an early payoff".into()))?;
    let nt = bid.nt();
    let mut mask = Vec::with_capacity(nt + 1);
    for (k, &t) in bid.times.iter().enumerate() {
        let row: Vec<bool> = bid
            .spots
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let g = early.eval(t, horizon, s);
                if k == nt {
                    (claim.terminal.eval(s) - g).abs() <= eps_reg
                } else {
                    let touches = bid.values[k][j] - g <= eps_reg;
                    let pushed = bid
                        .obstacle_force
                        .as_ref()
                        .map_or(true, |f| f[k][j] > FORCE_FLOOR);
                    touches && pushed
                }
            })
            .collect();
        mask.push(row);
    }
    let boundary = bid
        .times
        .iter()
        .zip(&mask)
        .filter_map(|(&t, row)| {
            let s_star: Vec<f64> = row
                .windows(2)
                .enumerate()
                .filter(|(_, w)| w[0] != w[1])
                .map(|(j, _)| (bid.spots[j] * bid.spots[j + 1]).sqrt())
                .collect();
            (!s_star.is_empty()).then_some(BoundaryPoint { t, s_star })
        })
        .collect();
    Ok(ExerciseRegion { mask, boundary, eps_reg })
}

/// Ask price of an American claim, with `P = Γ` imposed on the bid's
/// exercise region.
pub fn solve_american_ask(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    spec: &GridSpec,
    region: &ExerciseRegion,
) -> Result<PriceSurface> {
    let grid = spec.build(model)?;
    let problem = build_problem(model, claim, amb, cons, &grid, spec, Side::Ask)?;
    check_american(claim, &grid, model.horizon)?;
    if region.mask.len() != grid.t.len() || region.mask.iter().any(|r| r.len() != grid.nx()) {
        return Err(PricerError::InvalidInput("exercise mask does not match the grid".into()));
    }
    let gamma = obstacle_rows(claim, &grid, model.horizon);
    let floor: Vec<Vec<f64>> = gamma
        .iter()
        .zip(&problem.discount)
        .map(|(row, d)| row.iter().map(|g| g / d).collect())
        .collect();
    let sol = problem.solve(&Obstacle::Pinned { mask: &region.mask, floor: &floor }, None)?;
    let meta = meta_hash(model, claim, amb, cons, spec, "american-ask");
    let mut surface = surface_from_solution(&grid, &problem.discount, &sol.values, Side::Ask, meta);
    // Γ/D·D is not always bit-exact, so copy the obstacle onto pinned nodes
    for k in 0..grid.nt() {
        for j in 0..grid.nx() {
            if region.mask[k][j] {
                surface.values[k][j] = gamma[k][j];
            }
        }
    }
    surface.exercise = Some(region.mask.clone());
    extract_hedge(surface, model, amb, cons)
}

/// Bid, exercise region and ask in one call, with the default region
/// tolerance `max(complementarity residual, 1e-9)`.
pub fn solve_american(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    spec: &GridSpec,
    schedule: &PenaltySchedule,
) -> Result<AmericanSolution> {
    let (mut bid, diagnostics) = solve_american_bid(model, claim, amb, cons, spec, schedule)?;
    let eps_reg = diagnostics.complementarity_residual.max(1e-9);
    let region = exercise_region(&bid, claim, model.horizon, eps_reg)?;
    bid.exercise = Some(region.mask.clone());
    let ask = solve_american_ask(model, claim, amb, cons, spec, &region)?;
    Ok(AmericanSolution { bid, ask, region, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EarlyPayoff, Payoff};
    use crate::pde::solve_european;

    #[test]
    fn rejects_european_claims() {
        let m = MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap();
        let claim = ClaimSpec::european(Payoff::Put { strike: 100.0 });
        let r = solve_american_bid(
            &m,
            &claim,
            &AmbiguityRectangle::none(1),
            &ConstraintSpec::Unconstrained,
            &GridSpec::new(100.0, 60, 60),
            &PenaltySchedule::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn slack_obstacle_reproduces_european() {
        let m = MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap();
        let payoff = Payoff::Call { strike: 100.0 };
        let claim = ClaimSpec::american(
            payoff.clone(),
            EarlyPayoff::single(Payoff::linear(-2000.0, -2000.0)),
        );
        let amb = AmbiguityRectangle::ignorance(1, 0.1).unwrap();
        let spec = GridSpec::new(100.0, 81, 60);
        let sol = solve_american(&m, &claim, &amb, &ConstraintSpec::Orthant, &spec, &PenaltySchedule::default()).unwrap();
        let eu = solve_european(&m, &ClaimSpec::european(payoff), &amb, &ConstraintSpec::Orthant, &spec, Side::Bid).unwrap();
        for k in 0..eu.values.len() {
            for j in 0..eu.spots.len() {
                assert!((sol.bid.values[k][j] - eu.values[k][j]).abs() < 1e-8);
            }
        }
        assert!(sol.region.mask.iter().all(|r| r.iter().all(|m| !m)));
        assert!(sol.region.boundary.is_empty());
    }
}
