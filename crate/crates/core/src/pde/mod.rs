//! Finite-difference solver for the European bid and ask pricing equations
//! of a single asset, in log-price.

mod stepper;
pub(crate) mod tridiag;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::ambiguity::{distance_to_constraint, ScalarDistance};
use crate::error::{PricerError, Result};
use crate::model::{AmbiguityRectangle, ClaimSpec, ConstraintSpec, MarketModel};

pub(crate) use stepper::{Obstacle, Problem, StepCoefficients};

pub const MIN_NODES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }
}

/// Discretization request; the actual [`Grid`] also depends on the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Spot the log-price grid is centred on.
    pub anchor: f64,
    /// Number of space nodes.
    pub nx: usize,
    /// Number of time steps.
    pub nt: usize,
    /// Half-width of the log-price range in units of `σ̄√T`.
    pub width_mult: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl GridSpec {
    pub fn new(anchor: f64, nx: usize, nt: usize) -> Self {
        Self {
            anchor,
            nx,
            nt,
            width_mult: 6.0,
            picard_tol: 1e-10,
            picard_max: 50,
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nx: (self.nx - 1) * factor + 1,
            nt: self.nt * factor,
            ..self.clone()
        }
    }

    pub fn build(&self, model: &MarketModel) -> Result<Grid> {
        if self.nx < MIN_NODES || self.nt < MIN_NODES {
            return Err(PricerError::InvalidInput(format!(
                "grid needs at least {MIN_NODES} nodes per axis, got {}x{}",
                self.nx, self.nt
            )));
        }
        if !(self.anchor > 0.0) || !(self.width_mult > 0.0) {
            return Err(PricerError::InvalidInput("grid anchor and width must be positive".into()));
        }
        let horizon = model.horizon;
        let half = self.width_mult * model.rms_vol(0.0, horizon) * horizon.sqrt();
        let center = self.anchor.ln();
        let dx = 2.0 * half / (self.nx - 1) as f64;
        let x: Vec<f64> = (0..self.nx).map(|j| center - half + j as f64 * dx).collect();
        let t: Vec<f64> = (0..=self.nt).map(|k| horizon * k as f64 / self.nt as f64).collect();
        Ok(Grid {
            x,
            t,
            dx,
            anchor: self.anchor,
            width_mult: self.width_mult,
        })
    }
}

/// Uniform grid in time and log-price.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub dx: f64,
    pub anchor: f64,
    pub width_mult: f64,
}

impl Grid {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    /// Number of time steps.
    pub fn nt(&self) -> usize {
        self.t.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.t[k + 1] - self.t[k]
    }

    pub fn spots(&self) -> Vec<f64> {
        self.x.iter().map(|x| x.exp()).collect()
    }
}

/// Prices on the grid, with `S∂_S P` and the optimal position.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface {
    pub times: Vec<f64>,
    pub spots: Vec<f64>,
    pub log_spots: Vec<f64>,
    /// `values[k][j]` at `(times[k], spots[j])`.
    pub values: Vec<Vec<f64>>,
    pub side: Side,
    /// `S ∂_S P`, central differences inside, one-sided at the edges.
    pub grad_s: Vec<Vec<f64>>,
    /// Optimal dollar position in the asset.
    pub pi_star: Vec<Vec<f64>>,
    /// Early-exercise indicator, present for American surfaces.
    pub exercise: Option<Vec<Vec<bool>>>,
    /// Penalty force `m(Γ − P)⁺` of the final penalty level, American bids only.
    pub obstacle_force: Option<Vec<Vec<f64>>>,
    pub meta_hash: u64,
}

impl PriceSurface {
    pub fn nt(&self) -> usize {
        self.times.len() - 1
    }

    /// Price at time node `k`, spot node `j`.
    pub fn at(&self, k: usize, j: usize) -> f64 {
        self.values[k][j]
    }

    /// Spot indices inside the central `fraction` of the log-price range.
    pub fn window(&self, fraction: f64) -> std::ops::RangeInclusive<usize> {
        let n = self.spots.len();
        let lo = self.log_spots[0];
        let hi = self.log_spots[n - 1];
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * fraction * (hi - lo);
        let first = self.log_spots.iter().position(|&x| x >= mid - half - 1e-12).unwrap_or(0);
        let last = self.log_spots.iter().rposition(|&x| x <= mid + half + 1e-12).unwrap_or(n - 1);
        first..=last
    }
}

pub(crate) fn gradient_rows(values: &[Vec<f64>], dx: f64) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|row| {
            let n = row.len();
            (0..n)
                .map(|j| {
                    if j == 0 {
                        (row[1] - row[0]) / dx
                    } else if j == n - 1 {
                        (row[n - 1] - row[n - 2]) / dx
                    } else {
                        (row[j + 1] - row[j - 1]) / (2.0 * dx)
                    }
                })
                .collect()
        })
        .collect()
}

pub(crate) fn meta_hash(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    grid: &GridSpec,
    tag: &str,
) -> u64 {
    let mut h = DefaultHasher::new();
    format!("{model:?}|{claim:?}|{amb:?}|{cons:?}|{grid:?}|{tag}").hash(&mut h);
    h.finish()
}

/// Validates one-dimensional inputs and assembles the discrete problem.
pub(crate) fn build_problem<'a>(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    grid: &'a Grid,
    spec: &GridSpec,
    side: Side,
) -> Result<Problem<'a>> {
    let issues = model.validate();
    if !issues.is_empty() {
        return Err(PricerError::InvalidModel(issues));
    }
    if model.n != 1 {
        return Err(PricerError::Unsupported(format!(
            "grid solvers handle one asset (got {}); use the regression Monte Carlo solver",
            model.n
        )));
    }
    claim.validate(1)?;
    if amb.dim() != 1 {
        return Err(PricerError::DimensionMismatch { expected: 1, got: amb.dim() });
    }
    cons.check_dim(1)?;
    if !(spec.picard_tol > 0.0) || spec.picard_max == 0 {
        return Err(PricerError::InvalidInput("Picard tolerance and iteration cap must be positive".into()));
    }

    let horizon = model.horizon;
    let discount: Vec<f64> = grid
        .t
        .iter()
        .map(|&t| (-model.rate_integral(t, horizon)).exp())
        .collect();
    let mut steps = Vec::with_capacity(grid.nt());
    for k in 0..grid.nt() {
        let (a, b) = (grid.t[k], grid.t[k + 1]);
        let dt = b - a;
        let sigma = (model.variance_integral(a, b) / dt).sqrt();
        let rate = model.rate_integral(a, b) / dt;
        let distance = ScalarDistance::new(amb, cons, sigma)?;
        // ∫ ϱ(s) e^{∫_s^T r} ds, exact on each constant piece
        let mut earnings = 0.0;
        for (lo, hi, rho) in claim.earnings.segments(a, b) {
            if rho == 0.0 {
                continue;
            }
            for (a2, b2, r) in model.rate.segments(lo, hi) {
                let grow = model.rate_integral(b2, horizon).exp();
                let len = b2 - a2;
                let inner = if r.abs() * len < 1e-12 { len } else { ((r * len).exp() - 1.0) / r };
                earnings += rho * grow * inner;
            }
        }
        steps.push(StepCoefficients { sigma, rate, distance, earnings });
    }
    let spots = grid.spots();
    let terminal: Vec<f64> = spots.iter().map(|&s| claim.terminal.eval(s)).collect();
    Ok(Problem {
        grid,
        side,
        steps,
        discount,
        terminal,
        picard_tol: spec.picard_tol,
        picard_max: spec.picard_max,
    })
}

pub(crate) fn surface_from_solution(
    grid: &Grid,
    discount: &[f64],
    values: &[Vec<f64>],
    side: Side,
    meta: u64,
) -> PriceSurface {
    let prices: Vec<Vec<f64>> = values
        .iter()
        .zip(discount)
        .map(|(row, d)| row.iter().map(|v| v * d).collect())
        .collect();
    let grad_s = gradient_rows(&prices, grid.dx);
    let n = grid.nx();
    PriceSurface {
        times: grid.t.clone(),
        spots: grid.spots(),
        log_spots: grid.x.clone(),
        pi_star: vec![vec![0.0; n]; prices.len()],
        values: prices,
        side,
        grad_s,
        exercise: None,
        obstacle_force: None,
        meta_hash: meta,
    }
}

/// Solves the European bid or ask equation backward from the terminal
/// payoff and attaches the optimal hedge.
pub fn solve_european(
    model: &MarketModel,
    claim: &ClaimSpec,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
    spec: &GridSpec,
    side: Side,
) -> Result<PriceSurface> {
    let grid = spec.build(model)?;
    let problem = build_problem(model, claim, amb, cons, &grid, spec, side)?;
    let sol = problem.solve(&Obstacle::Free, None)?;
    let meta = meta_hash(model, claim, amb, cons, spec, side.as_str());
    let surface = surface_from_solution(&grid, &problem.discount, &sol.values, side, meta);
    extract_hedge(surface, model, amb, cons)
}

/// Fills `pi_star = (σᵀ)⁻¹ argmin_z` at `z̄ = ±σ S∂_S P` (plus for the bid,
/// minus for the ask).
pub fn extract_hedge(
    mut surface: PriceSurface,
    model: &MarketModel,
    amb: &AmbiguityRectangle,
    cons: &ConstraintSpec,
) -> Result<PriceSurface> {
    if model.n != 1 {
        return Err(PricerError::Unsupported("hedge extraction on grids needs one asset".into()));
    }
    let sign = match surface.side {
        Side::Bid => 1.0,
        Side::Ask => -1.0,
    };
    for (k, &t) in surface.times.iter().enumerate() {
        let sigma_m = model.vol_at(t.min(model.horizon));
        let sigma = sigma_m[(0, 0)];
        for j in 0..surface.spots.len() {
            let zbar = sign * sigma * surface.grad_s[k][j];
            let r = distance_to_constraint(&[zbar], amb, cons, sigma_m)?;
            surface.pi_star[k][j] = r.argmin_pi[0];
        }
    }
    Ok(surface)
}

/// Bilinear interpolation in `(t, ln S)`.
pub fn query_price(surface: &PriceSurface, t: f64, s: f64) -> Result<f64> {
    query_field(surface, &surface.values, t, s)
}

/// Bilinear interpolation of `S∂_S P`.
pub fn query_grad(surface: &PriceSurface, t: f64, s: f64) -> Result<f64> {
    query_field(surface, &surface.grad_s, t, s)
}

fn query_field(surface: &PriceSurface, field: &[Vec<f64>], t: f64, s: f64) -> Result<f64> {
    let times = &surface.times;
    let xs = &surface.log_spots;
    if !(s > 0.0) {
        return Err(PricerError::OutOfHull { t, s });
    }
    let x = s.ln();
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    let tol = 1e-12;
    if t < t0 - tol || t > t1 + tol || x < x0 - tol || x > x1 + tol {
        return Err(PricerError::OutOfHull { t, s });
    }
    let (k, wt) = bracket(times, t);
    let (j, wx) = bracket(xs, x);
    let v = |kk: usize, jj: usize| field[kk][jj];
    let lower = if wx == 0.0 { v(k, j) } else { (1.0 - wx) * v(k, j) + wx * v(k, j + 1) };
    if wt == 0.0 {
        return Ok(lower);
    }
    let upper = if wx == 0.0 { v(k + 1, j) } else { (1.0 - wx) * v(k + 1, j) + wx * v(k + 1, j + 1) };
    Ok((1.0 - wt) * lower + wt * upper)
}

/// Index `i` and weight `w` with `p = (1−w)·a[i] + w·a[i+1]`; exact nodes
/// give `w = 0`.
fn bracket(a: &[f64], p: f64) -> (usize, f64) {
    let n = a.len();
    let i = a.partition_point(|&v| v <= p);
    if i == 0 {
        return (0, 0.0);
    }
    let i = i - 1;
    if i >= n - 1 || a[i] == p {
        return (i.min(n - 1), 0.0);
    }
    (i, (p - a[i]) / (a[i + 1] - a[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Payoff;

    fn setup() -> (MarketModel, GridSpec) {
        (MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap(), GridSpec::new(100.0, 101, 60))
    }

    #[test]
    fn terminal_row_is_payoff_and_nodes_query_exactly() {
        let (m, g) = setup();
        let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
        let s = solve_european(&m, &claim, &AmbiguityRectangle::none(1), &ConstraintSpec::Unconstrained, &g, Side::Bid)
            .unwrap();
        let last = s.nt();
        for (j, &sp) in s.spots.iter().enumerate() {
            assert_eq!(s.values[last][j], (sp - 100.0f64).max(0.0));
        }
        for &(k, j) in &[(0, 0), (7, 50), (last, 100), (30, 33)] {
            let q = query_price(&s, s.times[k], s.spots[j]).unwrap();
            assert!((q - s.values[k][j]).abs() <= 1e-12 * (1.0 + q.abs()));
        }
        let mid_t = 0.5 * (s.times[10] + s.times[11]);
        let mid_x = (0.5 * (s.log_spots[40] + s.log_spots[41])).exp();
        let q = query_price(&s, mid_t, mid_x).unwrap();
        let corners = [s.values[10][40], s.values[10][41], s.values[11][40], s.values[11][41]];
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(q >= lo && q <= hi);
        assert!(matches!(query_price(&s, 0.5, 1e-6), Err(PricerError::OutOfHull { .. })));
        assert!(matches!(query_price(&s, 1.5, 100.0), Err(PricerError::OutOfHull { .. })));
    }

    #[test]
    fn rejects_small_grids_and_multi_asset() {
        let (m, _) = setup();
        let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
        let amb = AmbiguityRectangle::none(1);
        assert!(solve_european(&m, &claim, &amb, &ConstraintSpec::Orthant, &GridSpec::new(100.0, 20, 60), Side::Bid).is_err());
        let m2 = MarketModel::new(
            crate::piecewise::PiecewiseConstant::constant(0.0),
            crate::piecewise::PiecewiseConstant::constant(nalgebra::DMatrix::identity(2, 2) * 0.2),
            1.0,
        )
        .unwrap();
        let claim2 = claim.clone().with_weights(vec![0.5, 0.5]);
        let err = solve_european(&m2, &claim2, &AmbiguityRectangle::none(2), &ConstraintSpec::Orthant, &GridSpec::new(100.0, 60, 60), Side::Bid)
            .unwrap_err();
        assert!(matches!(err, PricerError::Unsupported(_)));
    }

    #[test]
    fn earnings_stream_alone_prices_as_annuity() {
        let (m, g) = setup();
        let claim = ClaimSpec::european(Payoff::constant(0.0))
            .with_earnings(crate::piecewise::PiecewiseConstant::constant(2.0));
        let s = solve_european(&m, &claim, &AmbiguityRectangle::ignorance(1, 0.1).unwrap(), &ConstraintSpec::Orthant, &g, Side::Bid)
            .unwrap();
        let expected = 2.0 * crate::analytic::annuity(&m, 0.0, 1.0);
        for j in 0..s.spots.len() {
            assert!((s.values[0][j] - expected).abs() < 1e-10);
        }
    }
}
