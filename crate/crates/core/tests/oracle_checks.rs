use ambig_pricer::analytic::{bs_price, norm_pdf, OptionKind};
use ambig_pricer::oracle::*;
use ambig_pricer::prelude::*;
use nalgebra::DMatrix;

fn none() -> AmbiguityRectangle {
    AmbiguityRectangle::none(1)
}

fn model() -> MarketModel {
    MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap()
}

#[test]
fn hedge_error_shrinks_like_root_steps() {
    let m = model();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
    let s = solve_european(&m, &claim, &none(), &ConstraintSpec::Unconstrained, &GridSpec::new(100.0, 500, 500), Side::Bid).unwrap();
    let run = |steps| simulate_hedge_pnl(&m, &s, &claim, &none(), &ConstraintSpec::Unconstrained, 100.0, 20_000, steps, 5).unwrap();
    let (half, full) = (run(250), run(500));
    assert!(full.mean.abs() < 0.02, "{full:?}");
    let ratio = half.std_dev() / full.std_dev();
    assert!((ratio - 2f64.sqrt()).abs() < 0.1, "{ratio}");
    // discrete delta hedging: std ≈ √(π/4) σ vega / √N
    let d1 = (0.05 + 0.02) / 0.2;
    let vega = 100.0 * norm_pdf(d1);
    let predicted = (std::f64::consts::PI / 4.0).sqrt() * 0.2 * vega / 500f64.sqrt();
    assert!((full.std_dev() / predicted - 1.0).abs() < 0.1, "{} vs {predicted}", full.std_dev());
}

#[test]
fn deterministic_market_hedges_exactly() {
    let m = MarketModel::black_scholes(0.05, 1e-8, 1.0).unwrap();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
    // the grid must cover the deterministic forward path
    let grid = GridSpec { width_mult: 1e7, ..GridSpec::new(100.0, 500, 500) };
    let s = solve_european(&m, &claim, &none(), &ConstraintSpec::Unconstrained, &grid, Side::Bid).unwrap();
    let pnl = simulate_hedge_pnl(&m, &s, &claim, &none(), &ConstraintSpec::Unconstrained, 100.0, 1000, 500, 3).unwrap();
    assert!(pnl.std_dev() < 1e-8, "{}", pnl.std_dev());
    // what remains in the mean is the price error of a first-order upwind grid
    let exact = 100.0 - 100.0 * (-0.05f64).exp();
    let price_error = query_price(&s, 0.0, 100.0).unwrap() - exact;
    assert!(price_error.abs() < 2e-3);
    assert!((pnl.mean - price_error).abs() < 1e-4, "{pnl:?} vs {price_error}");
}

#[test]
fn linear_payoff_hedges_to_interpolation_error() {
    let m = model();
    let claim = ClaimSpec::european(Payoff::linear(0.0, 1.0));
    let s = solve_european(&m, &claim, &none(), &ConstraintSpec::Unconstrained, &GridSpec::new(100.0, 200, 200), Side::Bid).unwrap();
    let dx = s.log_spots[1] - s.log_spots[0];
    let pnl = simulate_hedge_pnl(&m, &s, &claim, &none(), &ConstraintSpec::Unconstrained, 100.0, 2000, 100, 3).unwrap();
    assert!(pnl.mean.abs() < 100.0 * dx * dx, "{pnl:?}");
    assert!(pnl.std_dev() < 100.0 * dx * dx);
}

#[test]
fn hedging_is_refused_under_ambiguity_or_constraints() {
    let m = model();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
    let s = solve_european(&m, &claim, &none(), &ConstraintSpec::Unconstrained, &GridSpec::new(100.0, 60, 60), Side::Bid).unwrap();
    let amb = AmbiguityRectangle::ignorance(1, 0.1).unwrap();
    let e = simulate_hedge_pnl(&m, &s, &claim, &amb, &ConstraintSpec::Unconstrained, 100.0, 10, 10, 1);
    assert!(matches!(e, Err(PricerError::ReplicationRefused(_))));
    let e = simulate_hedge_pnl(&m, &s, &claim, &none(), &ConstraintSpec::Orthant, 100.0, 10, 10, 1);
    assert!(matches!(e, Err(PricerError::ReplicationRefused(_))));
}

#[test]
fn regression_monte_carlo_is_seed_deterministic() {
    let cfg = LsmcConfig { paths: 5000, steps: 10, ..LsmcConfig::default() };
    let claim = ClaimSpec::american_vanilla(Payoff::Put { strike: 100.0 });
    let a = lsmc_bsde(&model(), &claim, &none(), &ConstraintSpec::Unconstrained, Side::Bid, &[100.0], &cfg).unwrap();
    let b = lsmc_bsde(&model(), &claim, &none(), &ConstraintSpec::Unconstrained, Side::Bid, &[100.0], &cfg).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn two_asset_basket_matches_plain_monte_carlo_without_ambiguity() {
    let sigma = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.06, 0.25]);
    let m = MarketModel::new(PiecewiseConstant::constant(0.03), PiecewiseConstant::constant(sigma), 1.0).unwrap();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 }).with_weights(vec![0.5, 0.5]);
    let cfg = LsmcConfig { paths: 40_000, steps: 10, basis_degree: 2, ..LsmcConfig::default() };
    let amb = AmbiguityRectangle::none(2);
    let bsde = lsmc_bsde(&m, &claim, &amb, &ConstraintSpec::Orthant, Side::Bid, &[100.0, 100.0], &cfg).unwrap();
    let plain = mc_risk_neutral(&m, &claim, &[100.0, 100.0], 40_000, 10, cfg.seed).unwrap();
    assert!((bsde.mean - plain.mean).abs() < 1e-9, "{bsde:?} {plain:?}");

    // ambiguity with no short sales lowers the bid of an increasing claim
    let amb = AmbiguityRectangle::ignorance(2, 0.1).unwrap();
    let bid = lsmc_bsde(&m, &claim, &amb, &ConstraintSpec::Orthant, Side::Bid, &[100.0, 100.0], &cfg).unwrap();
    assert!(bid.mean < plain.mean - 3.0 * bid.stderr, "{bid:?} {plain:?}");
}

#[test]
fn monte_carlo_call_agrees_with_closed_form() {
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
    let est = mc_risk_neutral(&model(), &claim, &[100.0], 100_000, 1, 9).unwrap();
    let exact = bs_price(100.0, 100.0, 1.0, 0.05, 0.0, 0.2, OptionKind::Call).unwrap();
    assert!((est.mean - exact).abs() < 3.0 * est.stderr);
}

#[test]
fn tree_boundary_matches_penalty_boundary() {
    let m = model();
    let put = Payoff::Put { strike: 100.0 };
    let sol = solve_american(&m, &ClaimSpec::american_vanilla(put.clone()), &none(), &ConstraintSpec::Unconstrained, &GridSpec::new(100.0, 300, 300), &PenaltySchedule::default()).unwrap();
    let tree = binomial_boundary(100.0, 0.05, 0.0, 0.2, 1.0, 1000, &put).unwrap();
    let dx = sol.bid.log_spots[1] - sol.bid.log_spots[0];
    for t in [0.2, 0.4, 0.6, 0.8] {
        let vi = sol.region.boundary.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).unwrap();
        let tb = tree.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).unwrap();
        let cells = (vi.s_star[0].ln() - tb.s_star[0].ln()).abs() / dx;
        assert!(cells <= 2.0, "t={t}: {cells} cells");
    }
}
