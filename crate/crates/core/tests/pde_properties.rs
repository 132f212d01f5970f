mod common;

use ambig_pricer::pde::query_grad;
use ambig_pricer::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(100.0, 200, 100)
}

#[test]
fn bid_below_risk_neutral_below_ask() {
    let v = common::ordering_violation(&grid());
    assert!(v <= 1e-6, "ordering violated by {v}");
}

#[test]
fn cash_shifts_the_bid_by_its_discounted_value() {
    let e = common::cash_translation_error(&grid(), 10.0);
    assert!(e < 1e-8, "{e}");
}

#[test]
fn larger_payoff_larger_bid() {
    let v = common::comparison_violation(&grid());
    assert!(v <= 1e-8, "{v}");
}

#[test]
fn call_surfaces_are_nondecreasing() {
    let m = common::call_min_slope(&grid());
    assert!(m >= -1e-8, "{m}");
}

#[test]
fn doubling_the_grid_cuts_the_error_by_three() {
    // odd node count keeps the strike on a node at both levels
    let (coarse, fine) = common::grid_refinement_errors(101);
    assert!(coarse / fine >= 3.0, "{coarse} -> {fine}");
}

#[test]
fn hedges_respect_the_constraint() {
    assert_eq!(common::infeasible_hedges(&grid()), 0);
}

#[test]
fn orthant_hedges_for_monotone_calls() {
    let m = common::black_scholes();
    let amb = AmbiguityRectangle::ignorance(1, 0.1).unwrap();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
    let bid = solve_european(&m, &claim, &amb, &ConstraintSpec::Orthant, &grid(), Side::Bid).unwrap();
    assert!(bid.pi_star.iter().flatten().all(|&p| p == 0.0));
    let ask = solve_european(&m, &claim, &amb, &ConstraintSpec::Orthant, &grid(), Side::Ask).unwrap();
    for (row, grads) in ask.pi_star.iter().zip(&ask.grad_s) {
        for (p, g) in row.iter().zip(grads) {
            assert!((p - g.max(0.0)).abs() <= 1e-12 * g.abs());
        }
    }
    let free = solve_european(&m, &claim, &AmbiguityRectangle::none(1), &ConstraintSpec::Unconstrained, &grid(), Side::Bid).unwrap();
    for (row, grads) in free.pi_star.iter().zip(&free.grad_s) {
        for (p, g) in row.iter().zip(grads) {
            assert!((p + g).abs() < 1e-12);
        }
    }
}

#[test]
fn queries_reproduce_nodes_and_payoff() {
    let m = common::black_scholes();
    let payoff = Payoff::Straddle { strike: 100.0 };
    let s = solve_european(&m, &ClaimSpec::european(payoff.clone()), &AmbiguityRectangle::none(1), &ConstraintSpec::Unconstrained, &grid(), Side::Bid).unwrap();
    let (k, j) = (37, 81);
    assert_eq!(query_price(&s, s.times[k], s.spots[j]).unwrap(), s.at(k, j));
    let dx = s.log_spots[1] - s.log_spots[0];
    for &spot in &[70.0, 90.0, 100.0, 115.0, 130.0] {
        let v = query_price(&s, 1.0, spot).unwrap();
        let exact = payoff.eval(spot);
        // away from the kink only the curvature of e^x in ln S is lost
        let tol = if (spot - 100.0f64).abs() < 100.0 * dx { spot * dx } else { spot * dx * dx };
        assert!((v - exact).abs() < tol, "{spot}: {v} vs {exact}");
    }
    let mid = query_price(&s, 0.5 * (s.times[3] + s.times[4]), (s.spots[50] * s.spots[51]).sqrt()).unwrap();
    let corners = [s.at(3, 50), s.at(3, 51), s.at(4, 50), s.at(4, 51)];
    assert!(corners.iter().cloned().fold(f64::INFINITY, f64::min) <= mid);
    assert!(mid <= corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    assert!(matches!(query_price(&s, 0.0, 1.0), Err(PricerError::OutOfHull { .. })));
    // S∂_S of the straddle is S(2N(d₁) − 1)
    let d1 = (0.05 + 0.02) * 0.5 / (0.2 * 0.5f64.sqrt());
    let exact = 100.0 * (2.0 * ambig_pricer::analytic::norm_cdf(d1) - 1.0);
    let g = query_grad(&s, 0.5, 100.0).unwrap();
    assert!((g - exact).abs() < 0.1, "{g} vs {exact}");
}

#[test]
fn multi_asset_requests_are_redirected() {
    let m = MarketModel::new(
        PiecewiseConstant::constant(0.05),
        PiecewiseConstant::constant(nalgebra::DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.05, 0.25])),
        1.0,
    )
    .unwrap();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 }).with_weights(vec![0.5, 0.5]);
    let err = solve_european(&m, &claim, &AmbiguityRectangle::none(2), &ConstraintSpec::Orthant, &grid(), Side::Bid);
    assert!(matches!(err, Err(PricerError::Unsupported(_))));
}

#[test]
fn earnings_stream_adds_an_annuity() {
    let m = common::black_scholes();
    let claim = ClaimSpec::european(Payoff::constant(0.0)).with_earnings(PiecewiseConstant::constant(2.0));
    let s = solve_european(&m, &claim, &AmbiguityRectangle::ignorance(1, 0.2).unwrap(), &ConstraintSpec::Orthant, &grid(), Side::Bid).unwrap();
    let exact = 2.0 * (1.0 - (-0.05f64).exp()) / 0.05;
    assert!((query_price(&s, 0.0, 100.0).unwrap() - exact).abs() < 1e-10);
}
