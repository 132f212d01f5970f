//! Scripted checks of the pricing identities: dividend equivalence for
//! monotone payoffs, sandwich bounds for a straddle, and the linear rate at
//! which prices approach the risk-neutral price as ambiguity vanishes.
//!
//! Every function returns data; failures are rows with a `fail` verdict,
//! not errors.

use rayon::prelude::*;

use crate::analytic::dividend_adjusted_price;
use crate::error::{PricerError, Result};
use crate::model::{AmbiguityRectangle, ClaimSpec, ConstraintSpec, ExerciseStyle, MarketModel, Payoff};
use crate::oracle::binomial_american;
use crate::pde::{query_price, solve_european, GridSpec, PriceSurface, Side};
use crate::vi::{solve_american, PenaltySchedule};

/// Market, claim scale, grid and tolerances shared by all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: MarketModel,
    pub strike: f64,
    pub spot: f64,
    /// Symmetric ignorance level for the equality suite and bound audit.
    pub kappa: f64,
    pub constraint: ConstraintSpec,
    pub grid: GridSpec,
    pub schedule: PenaltySchedule,
    pub tree_steps: usize,
    /// Central fraction of the log-price range used for equality checks.
    pub equality_window: f64,
    /// Central fraction used for the bound audit and convergence sweeps.
    pub audit_window: f64,
    pub relative_tol: f64,
    pub american_tol: f64,
    /// Bound-audit tolerance as a multiple of the strike.
    pub bound_tol: f64,
    pub hedge_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: MarketModel::black_scholes(0.05, 0.2, 1.0).expect("valid constants"),
            strike: 100.0,
            spot: 100.0,
            kappa: 0.1,
            constraint: ConstraintSpec::Orthant,
            grid: GridSpec::new(100.0, 500, 500),
            schedule: PenaltySchedule::default(),
            tree_steps: 2000,
            equality_window: 0.5,
            audit_window: 0.8,
            relative_tol: 5e-3,
            american_tol: 0.05,
            bound_tol: 1e-3,
            hedge_tol: 1e-6,
        }
    }
}

impl ExperimentConfig {
    fn ambiguity(&self, kappa: f64) -> Result<AmbiguityRectangle> {
        AmbiguityRectangle::ignorance(self.model.n, kappa)
    }

    fn average_rate(&self) -> f64 {
        self.model.rate_integral(0.0, self.model.horizon) / self.model.horizon
    }

    fn average_vol(&self) -> f64 {
        self.model.rms_vol(0.0, self.model.horizon)
    }

    /// Synthetic dividend yield `σκ̄` matching the configured ignorance.
    pub fn dividend(&self) -> f64 {
        self.average_vol() * self.kappa
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub case: String,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    /// A row that passes when `value < threshold`.
    pub fn below(case: &str, metric: &str, value: f64, threshold: f64) -> Self {
        Self {
            case: case.into(),
            metric: metric.into(),
            value,
            threshold,
            pass: value < threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckTable {
    pub rows: Vec<CheckRow>,
}

impl CheckTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn get(&self, case: &str, metric: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.case == case && r.metric == metric)
    }
}

/// Largest `|P − oracle| / oracle` over the window at `t = 0`.
fn max_relative_deviation(
    surface: &PriceSurface,
    window: f64,
    oracle: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for j in surface.window(window) {
        let exact = oracle(surface.spots[j])?;
        worst = worst.max((surface.at(0, j) - exact).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Dividend-equivalence checks for calls and puts, European and American.
pub fn run_equality_suite(cfg: &ExperimentConfig) -> Result<CheckTable> {
    let model = &cfg.model;
    let amb = cfg.ambiguity(cfg.kappa)?;
    let cons = &cfg.constraint;
    let q = cfg.dividend();
    let k = cfg.strike;
    let mut table = CheckTable::default();

    let cases = [
        ("eu_call_bid", Payoff::Call { strike: k }, Side::Bid, q),
        ("eu_call_ask", Payoff::Call { strike: k }, Side::Ask, 0.0),
        ("eu_put_bid", Payoff::Put { strike: k }, Side::Bid, 0.0),
        ("eu_put_ask", Payoff::Put { strike: k }, Side::Ask, q),
    ];
    let solved: Vec<(PriceSurface, Payoff, f64)> = cases
        .par_iter()
        .map(|(_, payoff, side, q)| {
            let claim = ClaimSpec::european(payoff.clone());
            let surface = solve_european(model, &claim, &amb, cons, &cfg.grid, *side)?;
            Ok((surface, payoff.clone(), *q))
        })
        .collect::<Result<_>>()?;
    for ((name, ..), (surface, payoff, q)) in cases.iter().zip(&solved) {
        let dev = max_relative_deviation(surface, cfg.equality_window, |s| {
            dividend_adjusted_price(model, payoff, 0.0, s, *q)
        })?;
        table.rows.push(CheckRow::below(name, "max_rel_dev", dev, cfg.relative_tol));
    }
    let call_bid = &solved[0].0;
    let window = call_bid.window(cfg.equality_window);
    let pi_sup = call_bid.pi_star[0][window]
        .iter()
        .fold(0.0f64, |m, p| m.max(p.abs()));
    table.rows.push(CheckRow::below("eu_call_bid", "hedge_sup", pi_sup, cfg.hedge_tol));

    let r = cfg.average_rate();
    let sigma = cfg.average_vol();
    let call = Payoff::Call { strike: k };
    let am = solve_american(model, &ClaimSpec::american_vanilla(call.clone()), &amb, cons, &cfg.grid, &cfg.schedule)?;
    let tree = |s: f64, q: f64| {
        binomial_american(s, r, q, sigma, model.horizon, cfg.tree_steps, &call, ExerciseStyle::American)
    };
    let bid0 = query_price(&am.bid, 0.0, cfg.spot)?;
    table.rows.push(CheckRow::below(
        "am_call_bid",
        "abs_dev_at_spot",
        (bid0 - tree(cfg.spot, q)?).abs(),
        cfg.american_tol,
    ));
    let window: Vec<usize> = am.bid.window(cfg.equality_window).collect();
    let excess = window
        .par_iter()
        .map(|&j| {
            let upper = tree(am.bid.spots[j], 0.0)?;
            let (b, a) = (am.bid.at(0, j), am.ask.at(0, j));
            Ok((b - a).max(a - upper))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    table.rows.push(CheckRow {
        case: "am_call_chain".into(),
        metric: "max_excess".into(),
        value: excess,
        threshold: cfg.american_tol,
        pass: excess <= cfg.american_tol,
    });
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub bound: String,
    pub t: f64,
    pub s: f64,
    /// Amount by which the inequality fails.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundAudit {
    /// One row per inequality; the value is the number of violations.
    pub table: CheckTable,
    /// Largest violations across all inequalities, worst first.
    pub worst: Vec<Violation>,
}

const WORST_KEPT: usize = 20;

enum Bound<'a> {
    /// Dividend-adjusted price of an envelope payoff sits below the bid.
    Below(&'a Payoff, f64),
    /// Bid sits below the dividend-adjusted straddle at this yield.
    Above(f64),
    Ordered(&'a PriceSurface, &'a PriceSurface),
}

/// Time indices up to `T − 2Δt` and the central spatial window.
fn audit_nodes(surface: &PriceSurface, fraction: f64) -> Vec<(usize, usize)> {
    let last = surface.nt().saturating_sub(2);
    let window = surface.window(fraction);
    (0..=last)
        .flat_map(|k| window.clone().map(move |j| (k, j)))
        .collect()
}

/// Sandwich bounds for a straddle bid and the bid ≤ ask chain, European
/// and American.
pub fn run_bound_audit(cfg: &ExperimentConfig) -> Result<BoundAudit> {
    let model = &cfg.model;
    let amb = cfg.ambiguity(cfg.kappa)?;
    let cons = &cfg.constraint;
    let k = cfg.strike;
    let q = cfg.dividend();
    let tol = cfg.bound_tol * k;
    let straddle = Payoff::Straddle { strike: k };
    let claim = ClaimSpec::european(straddle.clone());
    let (bid, ask) = rayon::join(
        || solve_european(model, &claim, &amb, cons, &cfg.grid, Side::Bid),
        || solve_european(model, &claim, &amb, cons, &cfg.grid, Side::Ask),
    );
    let (bid, ask) = (bid?, ask?);
    let am = solve_american(model, &ClaimSpec::american_vanilla(straddle.clone()), &amb, cons, &cfg.grid, &cfg.schedule)?;

    let call = Payoff::Call { strike: k };
    let put = Payoff::Put { strike: k };
    let bounds = [
        ("lower_call_q", Bound::Below(&call, q)),
        ("lower_put_0", Bound::Below(&put, 0.0)),
        ("upper_q_0", Bound::Above(0.0)),
        ("upper_q_half", Bound::Above(0.5 * q)),
        ("upper_q_full", Bound::Above(q)),
        ("eu_bid_le_ask", Bound::Ordered(&bid, &ask)),
        ("am_bid_le_ask", Bound::Ordered(&am.bid, &am.ask)),
    ];
    // excess of the inequality at node (k, j); positive means violated
    let gap = |bound: &Bound, k: usize, j: usize, t: f64, s: f64| -> Result<f64> {
        Ok(match *bound {
            Bound::Below(payoff, qq) => dividend_adjusted_price(model, payoff, t, s, qq)? - bid.at(k, j),
            Bound::Above(qq) => bid.at(k, j) - dividend_adjusted_price(model, &straddle, t, s, qq)?,
            Bound::Ordered(lo, hi) => lo.at(k, j) - hi.at(k, j),
        })
    };

    let mut table = CheckTable::default();
    let mut worst = Vec::new();
    for (name, bound) in &bounds {
        let surface = match bound {
            Bound::Ordered(lo, _) => *lo,
            _ => &bid,
        };
        let found: Vec<Violation> = audit_nodes(surface, cfg.audit_window)
            .par_iter()
            .map(|&(k, j)| {
                let (t, s) = (surface.times[k], surface.spots[j]);
                let excess = gap(bound, k, j, t, s)?;
                Ok((excess > tol).then(|| Violation { bound: name.to_string(), t, s, excess }))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        table.rows.push(CheckRow {
            case: name.to_string(),
            metric: "violations".into(),
            value: found.len() as f64,
            threshold: 0.0,
            pass: found.is_empty(),
        });
        worst.extend(found);
    }
    worst.sort_by(|a, b| b.excess.total_cmp(&a.excess));
    worst.truncate(WORST_KEPT);
    Ok(BoundAudit { table, worst })
}

/// Region over which sweep errors are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepWindow {
    pub s_lo: f64,
    pub s_hi: f64,
    /// Last time included, two steps before maturity.
    pub t_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kappa_values: Vec<f64>,
    pub sup_err_bid: Vec<f64>,
    pub sup_err_ask: Vec<f64>,
    /// Least-squares slope of `ln(err_bid + err_ask)` against `ln κ̄*`.
    pub fitted_slope: f64,
    pub window: SweepWindow,
}

impl ConvergenceReport {
    /// Combined errors shrink with κ̄, up to `slack`.
    pub fn errors_monotone(&self, slack: f64) -> bool {
        let total: Vec<f64> = self.sup_err_bid.iter().zip(&self.sup_err_ask).map(|(b, a)| b + a).collect();
        total.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

fn sup_diff(a: &PriceSurface, b: &PriceSurface, nodes: &[(usize, usize)]) -> f64 {
    nodes
        .iter()
        .map(|&(k, j)| (a.at(k, j) - b.at(k, j)).abs())
        .fold(0.0, f64::max)
}

fn solve_pair(
    cfg: &ExperimentConfig,
    claim: &ClaimSpec,
    kappa: f64,
) -> Result<(PriceSurface, PriceSurface)> {
    let amb = cfg.ambiguity(kappa)?;
    match claim.style {
        ExerciseStyle::European => {
            let (b, a) = rayon::join(
                || solve_european(&cfg.model, claim, &amb, &cfg.constraint, &cfg.grid, Side::Bid),
                || solve_european(&cfg.model, claim, &amb, &cfg.constraint, &cfg.grid, Side::Ask),
            );
            Ok((b?, a?))
        }
        ExerciseStyle::American => {
            let sol = solve_american(&cfg.model, claim, &amb, &cfg.constraint, &cfg.grid, &cfg.schedule)?;
            Ok((sol.bid, sol.ask))
        }
    }
}

/// Distance of bid and ask surfaces from the `κ = 0` surfaces on the same
/// grid, for each ignorance level, with a log-log slope fit.
pub fn run_convergence(cfg: &ExperimentConfig, claim: &ClaimSpec, kappas: &[f64]) -> Result<ConvergenceReport> {
    if kappas.len() < 4 {
        return Err(PricerError::InvalidInput("a sweep needs at least 4 ignorance levels".into()));
    }
    if kappas.windows(2).any(|w| !(w[1] < w[0])) || kappas.iter().any(|&k| !(k >= 0.0)) {
        return Err(PricerError::InvalidInput("ignorance levels must be nonnegative and strictly decreasing".into()));
    }
    let mut levels = vec![0.0];
    levels.extend_from_slice(kappas);
    let surfaces: Vec<(PriceSurface, PriceSurface)> = levels
        .par_iter()
        .map(|&k| solve_pair(cfg, claim, k))
        .collect::<Result<_>>()?;
    let (base_bid, base_ask) = &surfaces[0];
    let nodes = audit_nodes(base_bid, cfg.audit_window);
    let window = {
        let w = base_bid.window(cfg.audit_window);
        SweepWindow {
            s_lo: base_bid.spots[*w.start()],
            s_hi: base_bid.spots[*w.end()],
            t_hi: base_bid.times[base_bid.nt().saturating_sub(2)],
        }
    };
    let (sup_err_bid, sup_err_ask): (Vec<f64>, Vec<f64>) = surfaces[1..]
        .iter()
        .map(|(b, a)| (sup_diff(b, base_bid, &nodes), sup_diff(a, base_ask, &nodes)))
        .unzip();

    let points: Vec<(f64, f64)> = kappas
        .iter()
        .zip(sup_err_bid.iter().zip(&sup_err_ask))
        .filter(|(&k, (b, a))| k > 0.0 && *b + *a > 0.0)
        .map(|(&k, (b, a))| {
            let star = AmbiguityRectangle::ignorance(cfg.model.n, k).map(|r| r.kappa_star());
            star.map(|s| (s.ln(), (b + a).ln()))
        })
        .collect::<Result<_>>()?;
    if points.len() < 3 {
        return Err(PricerError::DegenerateFit(points.len()));
    }
    Ok(ConvergenceReport {
        kappa_values: kappas.to_vec(),
        sup_err_bid,
        sup_err_ask,
        fitted_slope: least_squares_slope(&points),
        window,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
