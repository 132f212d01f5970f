//! Closed forms: the convex dual of the consumption utility, the value of
//! optimal consumption, discount factors, and dividend-adjusted
//! Black–Scholes prices.

use crate::error::{PricerError, Result};
use crate::model::{MarketModel, UtilitySpec};

const DUAL_TOL: f64 = 1e-12;
const MAX_BRACKET_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualResult {
    /// Optimal consumption rate `ĉ` with `∂_c v(t, ĉ) = 1`.
    pub c_hat: f64,
    /// `v*(t) = v(t, ĉ) − ĉ`.
    pub v_star: f64,
}

/// `sup_c {v(t, c) − c}` by bisection on the marginal.
pub fn convex_dual(u: &UtilitySpec, t: f64) -> Result<DualResult> {
    u.validate()?;
    let f = |c: f64| u.marginal(t, c) - 1.0;
    let mut lo = 1e-12;
    if f(lo) <= 0.0 {
        return Err(PricerError::DualBracket);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(PricerError::DualBracket);
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < DUAL_TOL || hi - lo <= f64::EPSILON * mid {
            lo = mid;
            hi = mid;
            break;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c_hat = 0.5 * (lo + hi);
    Ok(DualResult {
        c_hat,
        v_star: u.value(t, c_hat) - c_hat,
    })
}

/// `e^{−∫_t^s r(u) du}`.
pub fn discount(model: &MarketModel, t: f64, s: f64) -> f64 {
    (-model.rate_integral(t, s)).exp()
}

/// `R(t) = ∫_t^T e^{−∫_t^s r} v*(s) ds`.
///
/// Each rate piece is integrated exactly; `v*` is evaluated once per piece
/// (at the midpoint) when the utility depends on time.
pub fn consumption_value(model: &MarketModel, u: &UtilitySpec, t: f64) -> Result<f64> {
    let horizon = model.horizon;
    if t > horizon {
        return Err(PricerError::InvalidInput(format!("t={t} exceeds the horizon")));
    }
    let homogeneous = if u.is_time_homogeneous() {
        Some(convex_dual(u, 0.0)?.v_star)
    } else {
        None
    };
    let mut total = 0.0;
    for (lo, hi, r) in model.rate.segments(t, horizon) {
        let v_star = match homogeneous {
            Some(v) => v,
            None => convex_dual(u, 0.5 * (lo + hi))?.v_star,
        };
        let weight = discount(model, t, lo);
        let len = hi - lo;
        let integral = if r.abs() * len < 1e-12 {
            len
        } else {
            (1.0 - (-r * len).exp()) / r
        };
        total += v_star * weight * integral;
    }
    Ok(total)
}

/// Same as [`consumption_value`] with a constant `v*`, for tests and checks.
pub fn annuity(model: &MarketModel, t: f64, s: f64) -> f64 {
    model
        .rate
        .segments(t, s)
        .into_iter()
        .map(|(lo, hi, r)| {
            let len = hi - lo;
            let base = if r.abs() * len < 1e-12 { len } else { (1.0 - (-r * len).exp()) / r };
            discount(model, t, lo) * base
        })
        .sum()
}

/// `∫_a^b ϱ(s) e^{−∫_a^s r} ds`, exact for piecewise-constant `ϱ` and `r`.
pub fn earnings_value(model: &MarketModel, earnings: &crate::piecewise::PiecewiseConstant<f64>, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for (lo, hi, rho) in earnings.segments(a, b) {
        if rho != 0.0 {
            total += rho * annuity(model, lo, hi) * discount(model, a, lo);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black–Scholes price with continuous dividend yield `q`, using the
/// time-averaged rate, dividend and root-mean-square volatility over the
/// remaining life.
pub fn bs_price(s: f64, k: f64, tau: f64, r: f64, q: f64, sigma: f64, kind: OptionKind) -> Result<f64> {
    if !(s > 0.0 && k > 0.0 && tau > 0.0 && sigma > 0.0) {
        return Err(PricerError::InvalidInput(format!(
            "Black-Scholes inputs must be positive (S={s}, K={k}, tau={tau}, sigma={sigma})"
        )));
    }
    if !(r.is_finite() && q.is_finite()) {
        return Err(PricerError::InvalidInput("rate and dividend must be finite".into()));
    }
    let vol = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r - q) * tau) / vol + 0.5 * vol;
    let d2 = d1 - vol;
    let fwd = s * (-q * tau).exp();
    let disc = k * (-r * tau).exp();
    Ok(match kind {
        OptionKind::Call => fwd * norm_cdf(d1) - disc * norm_cdf(d2),
        OptionKind::Put => disc * norm_cdf(-d2) - fwd * norm_cdf(-d1),
    })
}

/// Dividend-adjusted price of a piecewise-linear payoff, expanded as a
/// combination of cash, forward and vanilla calls, under the model's
/// coefficients between `t` and `T`.
pub fn dividend_adjusted_price(
    model: &MarketModel,
    payoff: &crate::model::Payoff,
    t: f64,
    s: f64,
    q: f64,
) -> Result<f64> {
    use crate::model::Payoff;
    let tau = model.horizon - t;
    if tau <= 0.0 {
        return Ok(payoff.eval(s));
    }
    let r = model.rate_integral(t, model.horizon) / tau;
    let sigma = model.rms_vol(t, model.horizon);
    let call = |k: f64| bs_price(s, k, tau, r, q, sigma, OptionKind::Call);
    let put = |k: f64| bs_price(s, k, tau, r, q, sigma, OptionKind::Put);
    let cash = (-r * tau).exp();
    let fwd = s * (-q * tau).exp();
    match payoff {
        Payoff::Call { strike } => call(*strike),
        Payoff::Put { strike } => put(*strike),
        Payoff::Straddle { strike } => Ok(call(*strike)? + put(*strike)?),
        Payoff::PiecewiseLinear(p) => {
            // f(S) = f(x₀) + a₀(S − x₀) + Σ Δaᵢ (S − xᵢ)⁺, a₀ the left slope
            let knots = p.knots();
            let slopes = p.slopes();
            let (x0, y0) = knots[0];
            let mut value = y0 * cash + slopes[0] * (fwd - x0 * cash);
            for (i, &(x, _)) in knots.iter().enumerate() {
                let jump = slopes[i + 1] - slopes[i];
                if jump != 0.0 {
                    value += jump * if x > 0.0 { call(x)? } else { fwd - x * cash };
                }
            }
            Ok(value)
        }
    }
}
