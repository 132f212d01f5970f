//! Market, ambiguity, constraint, claim and utility descriptions.
//!
//! Everything here is immutable once built. Constructors validate what they
//! can; [`validate_model`] reports every violated standing assumption of a
//! [`MarketModel`] at once instead of stopping at the first.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{PricerError, Result};
use crate::piecewise::PiecewiseConstant;

const MIN_EIGENVALUE: f64 = 1e-10;

/// Black–Scholes market with `n` risky assets and deterministic,
/// piecewise-constant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub n: usize,
    pub rate: PiecewiseConstant<f64>,
    pub vol: PiecewiseConstant<DMatrix<f64>>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelIssue {
    NoAssets,
    HorizonNotPositive(f64),
    NonFiniteRate,
    NonFiniteVolatility { t: f64 },
    VolatilityShape { t: f64, rows: usize, cols: usize },
    NotPositiveDefinite { t: f64, min_eigenvalue: f64 },
}

impl fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelIssue::NoAssets => write!(f, "model must have at least one asset"),
            ModelIssue::HorizonNotPositive(t) => write!(f, "horizon must be positive (got {t})"),
            ModelIssue::NonFiniteRate => write!(f, "interest rate has non-finite entries"),
            ModelIssue::NonFiniteVolatility { t } => {
                write!(f, "volatility matrix has non-finite entries at t={t}")
            }
            ModelIssue::VolatilityShape { t, rows, cols } => {
                write!(f, "volatility matrix at t={t} has shape {rows}x{cols}")
            }
            ModelIssue::NotPositiveDefinite { t, min_eigenvalue } => write!(
                f,
                "volatility matrix at t={t} is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})"
            ),
        }
    }
}

impl MarketModel {
    pub fn new(
        rate: PiecewiseConstant<f64>,
        vol: PiecewiseConstant<DMatrix<f64>>,
        horizon: f64,
    ) -> Result<Self> {
        let n = vol.values().first().map_or(0, |m| m.nrows());
        let model = Self {
            n,
            rate,
            vol,
            horizon,
        };
        let issues = model.validate();
        if issues.is_empty() {
            Ok(model)
        } else {
            Err(PricerError::InvalidModel(issues))
        }
    }

    /// Single asset, constant rate and volatility.
    pub fn black_scholes(rate: f64, sigma: f64, horizon: f64) -> Result<Self> {
        Self::new(
            PiecewiseConstant::constant(rate),
            PiecewiseConstant::constant(DMatrix::from_element(1, 1, sigma)),
            horizon,
        )
    }

    pub fn validate(&self) -> Vec<ModelIssue> {
        let mut issues = Vec::new();
        if self.n == 0 {
            issues.push(ModelIssue::NoAssets);
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            issues.push(ModelIssue::HorizonNotPositive(self.horizon));
        }
        if !self.rate.all_finite() {
            issues.push(ModelIssue::NonFiniteRate);
        }
        for (&t, m) in self.vol.starts().iter().zip(self.vol.values()) {
            if m.nrows() != self.n || m.ncols() != self.n {
                issues.push(ModelIssue::VolatilityShape {
                    t,
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
                continue;
            }
            if m.iter().any(|v| !v.is_finite()) {
                issues.push(ModelIssue::NonFiniteVolatility { t });
                continue;
            }
            if self.n == 0 {
                continue;
            }
            let sym = (m + m.transpose()) * 0.5;
            let min_eig = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if !(min_eig > MIN_EIGENVALUE) {
                issues.push(ModelIssue::NotPositiveDefinite {
                    t,
                    min_eigenvalue: min_eig,
                });
            }
        }
        issues
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        *self.rate.value_at(t)
    }

    pub fn vol_at(&self, t: f64) -> &DMatrix<f64> {
        self.vol.value_at(t)
    }

    /// `∫_a^b r(u) du`.
    pub fn rate_integral(&self, a: f64, b: f64) -> f64 {
        self.rate.integral(a, b)
    }

    /// `∫_a^b σ(u)σ(u)ᵀ du`.
    pub fn covariance_integral(&self, a: f64, b: f64) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.n, self.n);
        for (lo, hi, m) in self.vol.segments(a, b) {
            acc += (&m * m.transpose()) * (hi - lo);
        }
        acc
    }

    /// Integrated variance of the first asset's log-price over `[a, b]`.
    pub fn variance_integral(&self, a: f64, b: f64) -> f64 {
        self.covariance_integral(a, b)[(0, 0)]
    }

    /// Root-mean-square volatility of the first asset over `[a, b]`.
    pub fn rms_vol(&self, a: f64, b: f64) -> f64 {
        if b > a {
            (self.variance_integral(a, b) / (b - a)).sqrt()
        } else {
            let s = self.vol_at(a);
            (0..self.n).map(|j| s[(0, j)].powi(2)).sum::<f64>().sqrt()
        }
    }

    pub fn is_one_dimensional(&self) -> bool {
        self.n == 1
    }
}

/// Reports every violated model invariant; empty on success.
pub fn validate_model(model: &MarketModel) -> Vec<ModelIssue> {
    model.validate()
}

/// Maps standard-normal draws to `S_T` through the exact lognormal law of
/// the model between `t` and `horizon`.
pub fn sample_gbm_terminal(
    model: &MarketModel,
    s0: &[f64],
    t: f64,
    horizon: f64,
    normals: &[f64],
) -> Result<Vec<f64>> {
    let n = model.n;
    if s0.len() != n {
        return Err(PricerError::DimensionMismatch { expected: n, got: s0.len() });
    }
    if normals.len() != n {
        return Err(PricerError::DimensionMismatch { expected: n, got: normals.len() });
    }
    if s0.iter().any(|&s| !(s > 0.0)) {
        return Err(PricerError::InvalidInput("initial prices must be positive".into()));
    }
    if horizon < t {
        return Err(PricerError::InvalidInput(format!("need t <= T, got t={t}, T={horizon}")));
    }
    if horizon == t {
        return Ok(s0.to_vec());
    }
    let drift = model.rate_integral(t, horizon);
    let cov = model.covariance_integral(t, horizon);
    let chol = psd_cholesky(&cov);
    Ok((0..n)
        .map(|i| {
            let shock: f64 = (0..=i).map(|j| chol[(i, j)] * normals[j]).sum();
            s0[i] * (drift - 0.5 * cov[(i, i)] + shock).exp()
        })
        .collect())
}

/// Lower Cholesky factor of a positive semidefinite matrix. Zero pivots
/// produce zero columns instead of failing.
pub(crate) fn psd_cholesky(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-300 {
            continue;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    l
}

/// The rectangle `O₁ = {ξ : −κ̲ᵢ ≤ ξᵢ ≤ κ̄ᵢ}` of admissible density kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityRectangle {
    pub kappa_lo: Vec<f64>,
    pub kappa_hi: Vec<f64>,
}

impl AmbiguityRectangle {
    pub fn new(kappa_lo: Vec<f64>, kappa_hi: Vec<f64>) -> Result<Self> {
        if kappa_lo.len() != kappa_hi.len() {
            return Err(PricerError::DimensionMismatch {
                expected: kappa_lo.len(),
                got: kappa_hi.len(),
            });
        }
        if kappa_lo
            .iter()
            .chain(&kappa_hi)
            .any(|k| !(*k >= 0.0) || !k.is_finite())
        {
            return Err(PricerError::InvalidInput(
                "ambiguity bounds must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { kappa_lo, kappa_hi })
    }

    /// κ-ignorance: the symmetric band `[−κ, κ]` in every coordinate.
    pub fn ignorance(n: usize, kappa: f64) -> Result<Self> {
        Self::new(vec![kappa; n], vec![kappa; n])
    }

    /// No ambiguity; the single risk-neutral prior.
    pub fn none(n: usize) -> Self {
        Self {
            kappa_lo: vec![0.0; n],
            kappa_hi: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.kappa_hi.len()
    }

    /// `max_i κ̄_i`.
    pub fn kappa_star(&self) -> f64 {
        self.kappa_hi.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_trivial(&self) -> bool {
        self.kappa_lo.iter().chain(&self.kappa_hi).all(|&k| k == 0.0)
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim()
            && xi
                .iter()
                .zip(self.kappa_lo.iter().zip(&self.kappa_hi))
                .all(|(&x, (&lo, &hi))| x >= -lo && x <= hi)
    }
}

/// The admissible set `A` of dollar positions in the risky assets.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    /// `A = ℝⁿ`.
    Unconstrained,
    /// `A = [0, ∞)ⁿ`, i.e. no short selling.
    Orthant,
    /// Componentwise bounds with `lo ≤ 0 ≤ hi`; infinite bounds allowed.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ConstraintSpec {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(PricerError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(&l, &h)| l.is_nan() || h.is_nan() || l > 0.0 || h < 0.0) {
            return Err(PricerError::InvalidInput(
                "box constraint needs lo <= 0 <= hi in every coordinate".into(),
            ));
        }
        Ok(ConstraintSpec::Box { lo, hi })
    }

    /// Bounds of coordinate `i`.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        match self {
            ConstraintSpec::Unconstrained => (f64::NEG_INFINITY, f64::INFINITY),
            ConstraintSpec::Orthant => (0.0, f64::INFINITY),
            ConstraintSpec::Box { lo, hi } => (lo[i], hi[i]),
        }
    }

    /// Whether `A` is a cone, which makes the distance positively homogeneous.
    pub fn is_cone(&self) -> bool {
        match self {
            ConstraintSpec::Unconstrained | ConstraintSpec::Orthant => true,
            ConstraintSpec::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .all(|(&l, &h)| (l == 0.0 || l == f64::NEG_INFINITY) && (h == 0.0 || h == f64::INFINITY)),
        }
    }

    pub fn contains(&self, pi: &[f64]) -> bool {
        pi.iter().enumerate().all(|(i, &p)| {
            let (lo, hi) = self.bounds(i);
            p >= lo && p <= hi
        })
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            ConstraintSpec::Box { lo, .. } if lo.len() != n => {
                Err(PricerError::DimensionMismatch { expected: n, got: lo.len() })
            }
            _ => Ok(()),
        }
    }
}

/// Continuous piecewise-linear function given by knots and the slopes of
/// the two unbounded end pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
    left_slope: f64,
    right_slope: f64,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if knots.is_empty() {
            return Err(PricerError::InvalidInput("piecewise-linear payoff needs a knot".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(PricerError::InvalidInput("payoff knots must be strictly increasing".into()));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite())
            || !left_slope.is_finite()
            || !right_slope.is_finite()
        {
            return Err(PricerError::InvalidInput("payoff knots and slopes must be finite".into()));
        }
        Ok(Self {
            knots,
            left_slope,
            right_slope,
        })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, s: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if s <= first.0 {
            return first.1 + self.left_slope * (s - first.0);
        }
        if s >= last.0 {
            return last.1 + self.right_slope * (s - last.0);
        }
        let i = self.knots.partition_point(|&(x, _)| x <= s);
        let (x0, y0) = self.knots[i - 1];
        let (x1, y1) = self.knots[i];
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }

    pub fn slopes(&self) -> Vec<f64> {
        let mut slopes = vec![self.left_slope];
        slopes.extend(
            self.knots
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)),
        );
        slopes.push(self.right_slope);
        slopes
    }
}

/// Terminal or early payoff profile as a function of the underlying level.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    Straddle { strike: f64 },
    PiecewiseLinear(PiecewiseLinear),
}

impl Payoff {
    pub fn constant(c: f64) -> Self {
        Payoff::PiecewiseLinear(PiecewiseLinear::new(vec![(0.0, c)], 0.0, 0.0).expect("finite"))
    }

    /// `a + b·S`.
    pub fn linear(intercept: f64, slope: f64) -> Self {
        Payoff::PiecewiseLinear(
            PiecewiseLinear::new(vec![(0.0, intercept)], slope, slope).expect("finite"),
        )
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (s - strike).max(0.0),
            Payoff::Put { strike } => (strike - s).max(0.0),
            Payoff::Straddle { strike } => (s - strike).abs(),
            Payoff::PiecewiseLinear(p) => p.eval(s),
        }
    }

    fn slopes(&self) -> Vec<f64> {
        match self {
            Payoff::Call { .. } => vec![0.0, 1.0],
            Payoff::Put { .. } => vec![-1.0, 0.0],
            Payoff::Straddle { .. } => vec![-1.0, 1.0],
            Payoff::PiecewiseLinear(p) => p.slopes(),
        }
    }

    /// Exact Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.slopes().into_iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.slopes().into_iter().all(|s| s >= 0.0)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.slopes().into_iter().all(|s| s <= 0.0)
    }

    /// Locations where the slope changes.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Payoff::Call { strike } | Payoff::Put { strike } | Payoff::Straddle { strike } => {
                vec![*strike]
            }
            Payoff::PiecewiseLinear(p) => p.knots().iter().map(|k| k.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Payoff::Call { strike } | Payoff::Put { strike } | Payoff::Straddle { strike }
                if !(strike.is_finite() && *strike > 0.0) =>
            {
                Err(PricerError::InvalidInput(format!("strike must be positive, got {strike}")))
            }
            _ => Ok(()),
        }
    }
}

/// Early-exercise payoff `Γ(t, S) = max(Γ₁(S), Γ₂(S)) − decay·(T − t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyPayoff {
    pub first: Payoff,
    pub second: Payoff,
    /// Nonnegative linear time penalty; zero for plain American claims.
    pub decay: f64,
}

impl EarlyPayoff {
    pub fn new(first: Payoff, second: Payoff) -> Self {
        Self {
            first,
            second,
            decay: 0.0,
        }
    }

    /// `Γ = max(Γ₁, Γ₁)`: the usual case where a single profile is supplied.
    pub fn single(payoff: Payoff) -> Self {
        Self::new(payoff.clone(), payoff)
    }

    pub fn eval(&self, t: f64, horizon: f64, s: f64) -> f64 {
        self.first.eval(s).max(self.second.eval(s)) - self.decay * (horizon - t).max(0.0)
    }

    pub fn lipschitz(&self) -> f64 {
        self.first.lipschitz().max(self.second.lipschitz())
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.first.is_nondecreasing() && self.second.is_nondecreasing()
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.first.is_nonincreasing() && self.second.is_nonincreasing()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExerciseStyle {
    European,
    American,
}

/// A claim paying `∫ϱ du + Ψ(S_T)`, or with early exercise `Γ(τ, S_τ)`.
///
/// Payoff profiles act on the basket level `Σ wᵢ Sᵢ`; for one asset the
/// weights are `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimSpec {
    pub earnings: PiecewiseConstant<f64>,
    pub terminal: Payoff,
    pub early: Option<EarlyPayoff>,
    pub style: ExerciseStyle,
    pub weights: Vec<f64>,
}

impl ClaimSpec {
    pub fn european(terminal: Payoff) -> Self {
        Self {
            earnings: PiecewiseConstant::constant(0.0),
            terminal,
            early: None,
            style: ExerciseStyle::European,
            weights: vec![1.0],
        }
    }

    pub fn american(terminal: Payoff, early: EarlyPayoff) -> Self {
        Self {
            early: Some(early),
            style: ExerciseStyle::American,
            ..Self::european(terminal)
        }
    }

    /// American claim with `Γ = Ψ`.
    pub fn american_vanilla(payoff: Payoff) -> Self {
        Self::american(payoff.clone(), EarlyPayoff::single(payoff))
    }

    pub fn with_earnings(mut self, earnings: PiecewiseConstant<f64>) -> Self {
        self.earnings = earnings;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn underlying(&self, s: &[f64]) -> f64 {
        self.weights.iter().zip(s).map(|(w, x)| w * x).sum()
    }

    /// `Ψ` evaluated at an asset vector.
    pub fn payoff_eval(&self, s: &[f64]) -> f64 {
        self.terminal.eval(self.underlying(s))
    }

    /// `Γ(t, S)`, or `−∞` for a European claim.
    pub fn early_eval(&self, t: f64, horizon: f64, s: &[f64]) -> f64 {
        match (&self.early, self.style) {
            (Some(g), ExerciseStyle::American) => g.eval(t, horizon, self.underlying(s)),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.weights.len() != n {
            return Err(PricerError::DimensionMismatch { expected: n, got: self.weights.len() });
        }
        if !self.earnings.all_finite() {
            return Err(PricerError::InvalidInput("earnings rate must be finite".into()));
        }
        self.terminal.validate()?;
        if self.style == ExerciseStyle::American {
            let early = self.early.as_ref().ok_or_else(|| {
                PricerError::InvalidInput("American claim requires the early payoff pair".into())
            })?;
            early.first.validate()?;
            early.second.validate()?;
            if !(early.decay >= 0.0) {
                return Err(PricerError::InvalidInput("early payoff decay must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Checks `Γ(t, S) ≤ Ψ(S)` on every supplied `(t, S)` sample.
    pub fn check_obstacle_below_payoff(&self, times: &[f64], levels: &[f64], horizon: f64) -> Result<()> {
        let Some(early) = &self.early else {
            return Ok(());
        };
        for &t in times {
            for &s in levels {
                let g = early.eval(t, horizon, s);
                let psi = self.terminal.eval(s);
                if g > psi + 1e-12 * (1.0 + psi.abs()) {
                    return Err(PricerError::InvalidInput(format!(
                        "early payoff exceeds terminal payoff at t={t}, S={s} ({g} > {psi})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    /// `v(c) = c^γ / γ`.
    Power { gamma: f64 },
    /// `v(c) = ln c`.
    Log,
    /// Tabulated, strictly decreasing marginal `∂_c v` on increasing
    /// consumption nodes, with `v(1)` supplied as the anchor.
    CustomMarginal { table: Vec<(f64, f64)>, value_at_one: f64 },
}

/// Consumption utility `v(t, c) = e^{−ρt} v₀(c)`, where `ρ` is `impatience`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub impatience: f64,
}

impl UtilitySpec {
    pub fn power(gamma: f64) -> Result<Self> {
        let u = Self {
            kind: UtilityKind::Power { gamma },
            impatience: 0.0,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn log() -> Self {
        Self {
            kind: UtilityKind::Log,
            impatience: 0.0,
        }
    }

    pub fn custom(table: Vec<(f64, f64)>, value_at_one: f64) -> Result<Self> {
        let u = Self {
            kind: UtilityKind::CustomMarginal { table, value_at_one },
            impatience: 0.0,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn with_impatience(mut self, rho: f64) -> Self {
        self.impatience = rho;
        self
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.impatience == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.impatience.is_finite() {
            return Err(PricerError::InvalidInput("impatience must be finite".into()));
        }
        match &self.kind {
            UtilityKind::Power { gamma } if !(*gamma > 0.0 && *gamma < 1.0) => Err(
                PricerError::InvalidInput(format!("power utility needs gamma in (0,1), got {gamma}")),
            ),
            UtilityKind::CustomMarginal { table, value_at_one } => {
                if table.len() < 2 || !value_at_one.is_finite() {
                    return Err(PricerError::InvalidInput(
                        "custom marginal needs at least two nodes and a finite anchor".into(),
                    ));
                }
                let ok = table.iter().all(|&(c, m)| c > 0.0 && m > 0.0 && c.is_finite() && m.is_finite())
                    && table.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1);
                if ok {
                    Ok(())
                } else {
                    Err(PricerError::InvalidInput(
                        "custom marginal must be positive and strictly decreasing on increasing nodes"
                            .into(),
                    ))
                }
            }
            _ => Ok(()),
        }
    }

    fn time_weight(&self, t: f64) -> f64 {
        (-self.impatience * t).exp()
    }

    /// `∂_c v(t, c)` for `c > 0`.
    pub fn marginal(&self, t: f64, c: f64) -> f64 {
        let base = match &self.kind {
            UtilityKind::Power { gamma } => c.powf(gamma - 1.0),
            UtilityKind::Log => 1.0 / c,
            UtilityKind::CustomMarginal { table, .. } => custom_marginal(table, c),
        };
        self.time_weight(t) * base
    }

    /// `v(t, c)` for `c > 0`.
    pub fn value(&self, t: f64, c: f64) -> f64 {
        let base = match &self.kind {
            UtilityKind::Power { gamma } => c.powf(*gamma) / gamma,
            UtilityKind::Log => c.ln(),
            UtilityKind::CustomMarginal { table, value_at_one } => {
                value_at_one + custom_marginal_integral(table, 1.0, c)
            }
        };
        self.time_weight(t) * base
    }
}

/// Linear between nodes; `m₀c₀/c` decay outside the table.
fn custom_marginal(table: &[(f64, f64)], c: f64) -> f64 {
    let (c0, m0) = table[0];
    let (cn, mn) = table[table.len() - 1];
    if c <= c0 {
        return m0 * c0 / c;
    }
    if c >= cn {
        return mn * cn / c;
    }
    let i = table.partition_point(|&(x, _)| x <= c);
    let (x0, y0) = table[i - 1];
    let (x1, y1) = table[i];
    y0 + (y1 - y0) * (c - x0) / (x1 - x0)
}

/// Exact `∫_a^b m(c) dc` for the tabulated marginal.
fn custom_marginal_integral(table: &[(f64, f64)], a: f64, b: f64) -> f64 {
    if b < a {
        return -custom_marginal_integral(table, b, a);
    }
    let (c0, m0) = table[0];
    let (cn, mn) = table[table.len() - 1];
    let mut total = 0.0;
    // left tail
    if a < c0 {
        let hi = b.min(c0);
        total += m0 * c0 * (hi / a).ln();
    }
    // table segments
    for w in table.windows(2) {
        let lo = a.max(w[0].0);
        let hi = b.min(w[1].0);
        if hi > lo {
            total += 0.5 * (custom_marginal(table, lo) + custom_marginal(table, hi)) * (hi - lo);
        }
    }
    // right tail
    if b > cn {
        let lo = a.max(cn);
        total += mn * cn * (b / lo).ln();
    }
    total
}
