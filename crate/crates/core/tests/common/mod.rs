//! Randomized property checks shared by the property tests and the
//! acceptance target. Each check returns the failing cases rather than
//! panicking so callers can count and report them.

#![allow(dead_code)]

use ambig_pricer::ambiguity::{brute_force_distance, distance_to_constraint, support_value, SearchGrid};
use ambig_pricer::analytic::{discount, dividend_adjusted_price};
use ambig_pricer::prelude::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub zbar: Vec<f64>,
    pub amb: AmbiguityRectangle,
    pub cons: ConstraintSpec,
    pub sigma: DMatrix<f64>,
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "zbar={:?} kappa_lo={:?} kappa_hi={:?} cons={:?} sigma={:?}",
            self.zbar, self.amb.kappa_lo, self.amb.kappa_hi, self.cons, self.sigma
        )
    }
}

/// Lower-triangular volatility with a dominant diagonal; diagonal only when
/// `diagonal` is set.
fn random_sigma(rng: &mut ChaCha8Rng, n: usize, diagonal: bool) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.random_range(0.15..0.5)
        } else if j < i && !diagonal {
            rng.random_range(-0.05..0.05)
        } else {
            0.0
        }
    })
}

fn random_constraint(rng: &mut ChaCha8Rng, n: usize, cones_only: bool) -> ConstraintSpec {
    let pick = rng.random_range(0..if cones_only { 2 } else { 3 });
    match pick {
        0 => ConstraintSpec::Unconstrained,
        1 => ConstraintSpec::Orthant,
        _ => {
            let lo = (0..n).map(|_| -rng.random_range(0.0..3.0)).collect();
            let hi = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            ConstraintSpec::boxed(lo, hi).unwrap()
        }
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, cones_only: bool, diagonal: bool) -> Instance {
    let lo = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
    let hi = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
    Instance {
        zbar: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        amb: AmbiguityRectangle::new(lo, hi).unwrap(),
        cons: random_constraint(rng, n, cones_only),
        sigma: random_sigma(rng, n, diagonal),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact distance against exhaustive grid search, with tolerance twice
/// the grid step times the Lipschitz constant in the position.
pub fn oracle_agreement(seed: u64, cases: usize) -> Vec<String> {
    let mut rng = rng(seed);
    let mut failures = Vec::new();
    for c in 0..cases {
        let n = 1 + c % 3;
        let diagonal = rng.random_bool(0.5);
        let inst = random_instance(&mut rng, n, false, diagonal);
        let exact = distance_to_constraint(&inst.zbar, &inst.amb, &inst.cons, &inst.sigma).unwrap();
        let reach = exact.argmin_pi.iter().fold(0.0f64, |m, p| m.max(p.abs())) + 0.5;
        let step = reach * [2e-4, 4e-3, 4e-2][n - 1];
        let grid = SearchGrid { lo: -reach, hi: reach, step, kernel_points: 2 };
        let brute = brute_force_distance(&inst.zbar, &inst.amb, &inst.cons, &inst.sigma, &grid).unwrap();
        let lipschitz: f64 = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| inst.amb.kappa_lo[i].max(inst.amb.kappa_hi[i]) * inst.sigma[(j, i)].abs())
                    .sum::<f64>()
            })
            .sum();
        let tol = 2.0 * step * lipschitz + 1e-12;
        // the grid only over-estimates a minimum
        if !(brute.value >= exact.value - 1e-12 && brute.value - exact.value <= tol) {
            failures.push(format!("{inst:?}: exact {} brute {} tol {tol}", exact.value, brute.value));
        }
    }
    failures
}

/// `d(λz̄) = λ d(z̄)` for cone constraints.
pub fn homogeneity(seed: u64, cases: usize) -> Vec<String> {
    let mut rng = rng(seed);
    let mut failures = Vec::new();
    for c in 0..cases {
        let n = 1 + c % 3;
        let diagonal = rng.random_bool(0.5);
        let inst = random_instance(&mut rng, n, true, diagonal);
        let base = distance_to_constraint(&inst.zbar, &inst.amb, &inst.cons, &inst.sigma).unwrap().value;
        for lambda in [0.0, 0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = inst.zbar.iter().map(|z| lambda * z).collect();
            let v = distance_to_constraint(&scaled, &inst.amb, &inst.cons, &inst.sigma).unwrap().value;
            if (v - lambda * base).abs() > 1e-12 * (1.0 + lambda * base) {
                failures.push(format!("{inst:?}: lambda {lambda} gives {v}, expected {}", lambda * base));
            }
        }
    }
    failures
}

fn random_feasible_position(rng: &mut ChaCha8Rng, cons: &ConstraintSpec, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let (lo, hi) = cons.bounds(i);
            let a = if lo.is_finite() { lo } else { -20.0 };
            let b = if hi.is_finite() { hi } else { 20.0 };
            if a == b {
                a
            } else {
                rng.random_range(a..=b)
            }
        })
        .collect()
}

/// The returned minimizer attains the value and no sampled feasible point
/// beats it.
pub fn argmin_certificate(seed: u64, cases: usize, probes: usize) -> Vec<String> {
    let mut rng = rng(seed);
    let mut failures = Vec::new();
    for c in 0..cases {
        let n = 1 + c % 3;
        let diagonal = rng.random_bool(0.5);
        let inst = random_instance(&mut rng, n, false, diagonal);
        let r = distance_to_constraint(&inst.zbar, &inst.amb, &inst.cons, &inst.sigma).unwrap();
        if !inst.cons.contains(&r.argmin_pi) {
            failures.push(format!("{inst:?}: minimizer {:?} infeasible", r.argmin_pi));
            continue;
        }
        let w: Vec<f64> = inst.zbar.iter().zip(&r.argmin_z).map(|(a, b)| a + b).collect();
        let attained = support_value(&w, &inst.amb).unwrap();
        if (attained - r.value).abs() > 1e-12 {
            failures.push(format!("{inst:?}: δ at minimizer {attained} != value {}", r.value));
            continue;
        }
        for _ in 0..probes {
            let pi = random_feasible_position(&mut rng, &inst.cons, n);
            let w: Vec<f64> = (0..n)
                .map(|i| inst.zbar[i] + (0..n).map(|j| inst.sigma[(j, i)] * pi[j]).sum::<f64>())
                .collect();
            let v = support_value(&w, &inst.amb).unwrap();
            if v < r.value - 1e-12 {
                failures.push(format!("{inst:?}: probe {pi:?} gives {v} < {}", r.value));
                break;
            }
        }
    }
    failures
}

pub fn black_scholes() -> MarketModel {
    MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap()
}

pub fn straddle_plus(c: f64) -> Payoff {
    Payoff::PiecewiseLinear(PiecewiseLinear::new(vec![(100.0, c)], -1.0, 1.0).unwrap())
}

fn max_over<F: Fn(usize, usize) -> f64>(s: &PriceSurface, f: F) -> f64 {
    (0..s.times.len())
        .flat_map(|k| (0..s.spots.len()).map(move |j| (k, j)))
        .map(|(k, j)| f(k, j))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest of `bid − P⁰` and `P⁰ − ask` over every node and a set of
/// payoffs and constraints.
pub fn ordering_violation(grid: &GridSpec) -> f64 {
    let m = black_scholes();
    let amb = AmbiguityRectangle::new(vec![0.15], vec![0.1]).unwrap();
    let payoffs = [Payoff::Call { strike: 100.0 }, Payoff::Put { strike: 100.0 }, Payoff::Straddle { strike: 100.0 }];
    let constraints = [
        ConstraintSpec::Orthant,
        ConstraintSpec::boxed(vec![-20.0], vec![50.0]).unwrap(),
        ConstraintSpec::Unconstrained,
    ];
    let mut worst = f64::NEG_INFINITY;
    for p in &payoffs {
        let claim = ClaimSpec::european(p.clone());
        let rn = solve_european(&m, &claim, &AmbiguityRectangle::none(1), &ConstraintSpec::Unconstrained, grid, Side::Bid).unwrap();
        for cons in &constraints {
            let bid = solve_european(&m, &claim, &amb, cons, grid, Side::Bid).unwrap();
            let ask = solve_european(&m, &claim, &amb, cons, grid, Side::Ask).unwrap();
            worst = worst.max(max_over(&rn, |k, j| (bid.at(k, j) - rn.at(k, j)).max(rn.at(k, j) - ask.at(k, j))));
        }
    }
    worst
}

/// Pointwise `|bid(Ψ + c) − bid(Ψ) − c·D(t,T)|` for a straddle.
pub fn cash_translation_error(grid: &GridSpec, c: f64) -> f64 {
    let m = black_scholes();
    let amb = AmbiguityRectangle::ignorance(1, 0.1).unwrap();
    let base = solve_european(&m, &ClaimSpec::european(straddle_plus(0.0)), &amb, &ConstraintSpec::Orthant, grid, Side::Bid).unwrap();
    let shifted = solve_european(&m, &ClaimSpec::european(straddle_plus(c)), &amb, &ConstraintSpec::Orthant, grid, Side::Bid).unwrap();
    max_over(&base, |k, j| {
        (shifted.at(k, j) - base.at(k, j) - c * discount(&m, base.times[k], m.horizon)).abs()
    })
}

/// Largest `bid(Ψ₂) − bid(Ψ₁)` for pairs with `Ψ₁ ≥ Ψ₂`.
pub fn comparison_violation(grid: &GridSpec) -> f64 {
    let m = black_scholes();
    let amb = AmbiguityRectangle::new(vec![0.1], vec![0.2]).unwrap();
    let pairs = [
        (Payoff::Straddle { strike: 100.0 }, Payoff::Call { strike: 100.0 }),
        (Payoff::Call { strike: 90.0 }, Payoff::Call { strike: 110.0 }),
        (straddle_plus(1.0), Payoff::Put { strike: 100.0 }),
    ];
    let mut worst = f64::NEG_INFINITY;
    for cons in [ConstraintSpec::Orthant, ConstraintSpec::boxed(vec![-5.0], vec![5.0]).unwrap()] {
        for (hi, lo) in &pairs {
            let a = solve_european(&m, &ClaimSpec::european(hi.clone()), &amb, &cons, grid, Side::Bid).unwrap();
            let b = solve_european(&m, &ClaimSpec::european(lo.clone()), &amb, &cons, grid, Side::Bid).unwrap();
            worst = worst.max(max_over(&a, |k, j| b.at(k, j) - a.at(k, j)));
        }
    }
    worst
}

/// Smallest `∂_S P` on call surfaces, bid and ask.
pub fn call_min_slope(grid: &GridSpec) -> f64 {
    let m = black_scholes();
    let amb = AmbiguityRectangle::ignorance(1, 0.1).unwrap();
    let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
    [Side::Bid, Side::Ask]
        .iter()
        .map(|&side| {
            let s = solve_european(&m, &claim, &amb, &ConstraintSpec::Orthant, grid, side).unwrap();
            -max_over(&s, |k, j| -s.grad_s[k][j] / s.spots[j])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Error against the closed form on the middle half at `t = 0`, for a
/// grid and its doubling.
pub fn grid_refinement_errors(n: usize) -> (f64, f64) {
    let m = black_scholes();
    let payoff = Payoff::Call { strike: 100.0 };
    let claim = ClaimSpec::european(payoff.clone());
    let err = |spec: &GridSpec| {
        let s = solve_european(&m, &claim, &AmbiguityRectangle::none(1), &ConstraintSpec::Unconstrained, spec, Side::Bid).unwrap();
        s.window(0.5)
            .map(|j| (s.at(0, j) - dividend_adjusted_price(&m, &payoff, 0.0, s.spots[j], 0.0).unwrap()).abs())
            .fold(0.0, f64::max)
    };
    let coarse = GridSpec::new(100.0, n, n);
    (err(&coarse), err(&coarse.refined(2)))
}

/// Count of nodes whose hedge lies outside the constraint set.
pub fn infeasible_hedges(grid: &GridSpec) -> usize {
    let m = black_scholes();
    let amb = AmbiguityRectangle::new(vec![0.05], vec![0.2]).unwrap();
    let mut bad = 0;
    for cons in [ConstraintSpec::Orthant, ConstraintSpec::boxed(vec![-30.0], vec![40.0]).unwrap()] {
        for payoff in [Payoff::Call { strike: 100.0 }, Payoff::Put { strike: 100.0 }, Payoff::Straddle { strike: 100.0 }] {
            for side in [Side::Bid, Side::Ask] {
                let s = solve_european(&m, &ClaimSpec::european(payoff.clone()), &amb, &cons, grid, side).unwrap();
                bad += s.pi_star.iter().flatten().filter(|&&p| !cons.contains(&[p])).count();
            }
        }
    }
    bad
}
