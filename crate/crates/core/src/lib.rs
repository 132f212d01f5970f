//! Utility-indifference bid and ask prices under multiple-priors ambiguity
//! and portfolio constraints.
//!
//! The crate prices European and American claims on Black–Scholes assets
//! when the investor only knows that the density kernel of the true measure
//! lies in a rectangle `[−κ̲, κ̄]`, and may be barred from short selling or
//! otherwise restricted to a box of positions. Prices solve semilinear PDEs
//! (European) or variational inequalities (American) in log-price, and every
//! solver is paired with an independent oracle: closed forms, binomial
//! trees, and least-squares Monte Carlo for the backward equations.
//!
//! ```
//! use ambig_pricer::prelude::*;
//!
//! let model = MarketModel::black_scholes(0.05, 0.2, 1.0).unwrap();
//! let claim = ClaimSpec::european(Payoff::Call { strike: 100.0 });
//! let amb = AmbiguityRectangle::ignorance(1, 0.1).unwrap();
//! let grid = GridSpec::new(100.0, 200, 100);
//! let bid = solve_european(&model, &claim, &amb, &ConstraintSpec::Orthant, &grid, Side::Bid).unwrap();
//! let p = query_price(&bid, 0.0, 100.0).unwrap();
//! let closed = bs_price(100.0, 100.0, 1.0, 0.05, 0.02, 0.2, OptionKind::Call).unwrap();
//! assert!((p - closed).abs() < 0.05);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod analytic;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod oracle;
pub mod pde;
pub mod piecewise;
pub mod vi;

pub use error::{PricerError, Result};

/// Crate version, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod prelude {
    pub use crate::ambiguity::{
        brute_force_distance, distance_to_constraint, support_value, DistanceResult, SearchGrid,
    };
    pub use crate::analytic::{bs_price, consumption_value, convex_dual, discount, OptionKind};
    pub use crate::error::{PricerError, Result};
    pub use crate::model::{
        sample_gbm_terminal, validate_model, AmbiguityRectangle, ClaimSpec, ConstraintSpec,
        EarlyPayoff, ExerciseStyle, MarketModel, Payoff, PiecewiseLinear, UtilitySpec,
    };
    pub use crate::pde::{extract_hedge, query_price, solve_european, GridSpec, PriceSurface, Side};
    pub use crate::piecewise::PiecewiseConstant;
    pub use crate::vi::{exercise_region, solve_american, AmericanSolution, PenaltySchedule};
}
