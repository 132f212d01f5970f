//! Run configuration: one TOML file, strict schema, dotted-key overrides.

use std::path::{Path, PathBuf};

use ambig_pricer::experiments::ExperimentConfig;
use ambig_pricer::prelude::{
    AmbiguityRectangle, ClaimSpec, ConstraintSpec, GridSpec, MarketModel, Payoff, PiecewiseConstant, PiecewiseLinear, Side,
    UtilitySpec,
};
use ambig_pricer::vi::PenaltySchedule;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub claim: ClaimSection,
    pub ambiguity: AmbiguitySection,
    pub constraint: ConstraintSection,
    #[serde(default)]
    pub utility: UtilitySection,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
}

/// A constant, or `[[start, value], ...]` pieces starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    Pieces(Vec<(f64, f64)>),
}

impl Schedule {
    fn build(&self) -> Result<PiecewiseConstant<f64>, CliError> {
        match self {
            Schedule::Constant(v) => Ok(PiecewiseConstant::constant(*v)),
            Schedule::Pieces(p) => PiecewiseConstant::from_pieces(p.clone()).map_err(CliError::invalid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub rate: Schedule,
    pub vol: Schedule,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Call,
    Put,
    Straddle,
    Linear,
    Piecewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    #[default]
    European,
    American,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSection {
    pub payoff: PayoffKind,
    #[serde(default)]
    pub style: Style,
    pub strike: Option<f64>,
    /// `linear`: value at `S = 0`.
    pub intercept: Option<f64>,
    /// `linear`: slope in `S`.
    pub slope: Option<f64>,
    /// `piecewise`: `[[S, value], ...]` kinks.
    pub knots: Option<Vec<(f64, f64)>>,
    pub left_slope: Option<f64>,
    pub right_slope: Option<f64>,
    /// Earnings rate paid while the claim is held.
    pub earnings: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguitySection {
    /// Symmetric ignorance; excludes `kappa_lo`/`kappa_hi`.
    pub kappa: Option<f64>,
    pub kappa_lo: Option<f64>,
    pub kappa_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Unconstrained,
    Orthant,
    Box,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub kind: ConstraintKind,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKindName {
    Power,
    Log,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    pub kind: UtilityKindName,
    pub gamma: Option<f64>,
    #[serde(default)]
    pub impatience: f64,
}

impl Default for UtilitySection {
    fn default() -> Self {
        Self { kind: UtilityKindName::Log, gamma: None, impatience: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Centre of the log-price range; defaults to the strike.
    pub anchor: Option<f64>,
    pub nx: usize,
    pub nt: usize,
    #[serde(default = "default_width")]
    pub width_mult: f64,
}

fn default_width() -> f64 {
    6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SideChoice {
    Bid,
    Ask,
    #[default]
    Both,
}

impl SideChoice {
    pub fn sides(self) -> Vec<Side> {
        match self {
            SideChoice::Bid => vec![Side::Bid],
            SideChoice::Ask => vec![Side::Ask],
            SideChoice::Both => vec![Side::Bid, Side::Ask],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub side: SideChoice,
    pub penalty_schedule: Vec<f64>,
    pub penalty_stop: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let p = PenaltySchedule::default();
        Self {
            side: SideChoice::Both,
            penalty_schedule: p.levels,
            penalty_stop: p.stop_change,
            picard_tol: 1e-10,
            picard_max: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub basis_degree: u32,
    /// Spot used by point estimates.
    pub spot: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { paths: 100_000, steps: 50, seed: 20_240_601, basis_degree: 4, spot: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub path: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { path: PathBuf::from("out"), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub kappas: Vec<f64>,
    pub tree_steps: usize,
    pub equality_window: f64,
    pub audit_window: f64,
    pub relative_tol: f64,
    pub american_tol: f64,
    pub bound_tol: f64,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            kappas: vec![0.2, 0.1, 0.05, 0.025],
            tree_steps: e.tree_steps,
            equality_window: e.equality_window,
            audit_window: e.audit_window,
            relative_tol: e.relative_tol,
            american_tol: e.american_tol,
            bound_tol: e.bound_tol,
            slope_min: 0.8,
            slope_max: 1.2,
        }
    }
}

/// Library objects built from a validated configuration. Utility is
/// validated but does not enter the prices.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: MarketModel,
    pub claim: ClaimSpec,
    pub amb: AmbiguityRectangle,
    pub cons: ConstraintSpec,
    pub grid: GridSpec,
    pub schedule: PenaltySchedule,
}

/// Parses `key.path=value`; the value is read as a TOML literal, falling
/// back to a bare string.
fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?} descends into a value")))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| CliError::Config(format!("override {key:?} descends into a value")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads, overrides and validates; also returns the SHA-256 of the
    /// effective configuration.
    pub fn load(path: &Path, overrides: &[String]) -> Result<(Self, Resolved, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &[String]) -> Result<(Self, Resolved, String), CliError> {
        let mut doc: toml::Value =
            toml::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = doc
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("invalid config: {}", e.message())))?;
        let resolved = cfg.resolve()?;
        let canonical = toml::to_string(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        let hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));
        Ok((cfg, resolved, hash))
    }

    fn payoff(&self) -> Result<Payoff, CliError> {
        let c = &self.claim;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Config(format!("claim.{name} is required for a {:?} payoff", c.payoff)))
        };
        let payoff = match c.payoff {
            PayoffKind::Call => Payoff::Call { strike: need(c.strike, "strike")? },
            PayoffKind::Put => Payoff::Put { strike: need(c.strike, "strike")? },
            PayoffKind::Straddle => Payoff::Straddle { strike: need(c.strike, "strike")? },
            PayoffKind::Linear => Payoff::linear(need(c.intercept, "intercept")?, need(c.slope, "slope")?),
            PayoffKind::Piecewise => {
                let knots = c
                    .knots
                    .clone()
                    .ok_or_else(|| CliError::Config("claim.knots is required for a piecewise payoff".into()))?;
                Payoff::PiecewiseLinear(
                    PiecewiseLinear::new(knots, need(c.left_slope, "left_slope")?, need(c.right_slope, "right_slope")?)
                        .map_err(CliError::invalid)?,
                )
            }
        };
        payoff.validate().map_err(CliError::invalid)?;
        Ok(payoff)
    }

    /// Strike if given, else the first knot or the oracle spot.
    pub fn reference_level(&self) -> f64 {
        self.claim
            .strike
            .or_else(|| self.claim.knots.as_ref().and_then(|k| k.first().map(|p| p.0)))
            .unwrap_or(self.oracle.spot)
    }

    fn resolve(&self) -> Result<Resolved, CliError> {
        let vol = match &self.model.vol {
            Schedule::Constant(v) => PiecewiseConstant::constant(nalgebra_scalar(*v)),
            Schedule::Pieces(p) => PiecewiseConstant::from_pieces(p.iter().map(|&(t, v)| (t, nalgebra_scalar(v))).collect())
                .map_err(CliError::invalid)?,
        };
        let model = MarketModel::new(self.model.rate.build()?, vol, self.model.horizon).map_err(CliError::invalid)?;

        let payoff = self.payoff()?;
        let mut claim = match self.claim.style {
            Style::European => ClaimSpec::european(payoff),
            Style::American => ClaimSpec::american_vanilla(payoff),
        };
        if let Some(e) = &self.claim.earnings {
            claim = claim.with_earnings(e.build()?);
        }
        claim.validate(1).map_err(CliError::invalid)?;

        let a = &self.ambiguity;
        let amb = match (a.kappa, a.kappa_lo, a.kappa_hi) {
            (Some(k), None, None) => AmbiguityRectangle::ignorance(1, k),
            (None, Some(lo), Some(hi)) => AmbiguityRectangle::new(vec![lo], vec![hi]),
            _ => {
                return Err(CliError::Config(
                    "ambiguity needs either kappa or both kappa_lo and kappa_hi".into(),
                ))
            }
        }
        .map_err(CliError::invalid)?;

        let c = &self.constraint;
        let cons = match (c.kind, c.lo, c.hi) {
            (ConstraintKind::Unconstrained, None, None) => ConstraintSpec::Unconstrained,
            (ConstraintKind::Orthant, None, None) => ConstraintSpec::Orthant,
            (ConstraintKind::Box, Some(lo), Some(hi)) => ConstraintSpec::boxed(vec![lo], vec![hi]).map_err(CliError::invalid)?,
            (ConstraintKind::Box, ..) => return Err(CliError::Config("box constraint needs lo and hi".into())),
            _ => return Err(CliError::Config("lo/hi apply to box constraints only".into())),
        };

        let u = &self.utility;
        let utility = match (u.kind, u.gamma) {
            (UtilityKindName::Power, Some(g)) => UtilitySpec::power(g).map_err(CliError::invalid)?,
            (UtilityKindName::Power, None) => return Err(CliError::Config("power utility needs gamma".into())),
            (UtilityKindName::Log, None) => UtilitySpec::log(),
            (UtilityKindName::Log, Some(_)) => return Err(CliError::Config("log utility takes no gamma".into())),
        }
        .with_impatience(u.impatience);
        utility.validate().map_err(CliError::invalid)?;

        let g = &self.grid;
        let anchor = g.anchor.unwrap_or_else(|| self.reference_level());
        let grid = GridSpec {
            width_mult: g.width_mult,
            picard_tol: self.solver.picard_tol,
            picard_max: self.solver.picard_max,
            ..GridSpec::new(anchor, g.nx, g.nt)
        };
        grid.build(&model).map_err(CliError::invalid)?;
        let schedule = PenaltySchedule {
            levels: self.solver.penalty_schedule.clone(),
            stop_change: self.solver.penalty_stop,
        };
        if schedule.levels.is_empty() || schedule.levels.iter().any(|m| !(*m > 0.0)) {
            return Err(CliError::Config("solver.penalty_schedule needs positive levels".into()));
        }
        if self.oracle.paths == 0 || self.oracle.steps == 0 || !(self.oracle.spot > 0.0) {
            return Err(CliError::Config("oracle needs positive paths, steps and spot".into()));
        }
        Ok(Resolved { model, claim, amb, cons, grid, schedule })
    }

    /// Experiment settings for `verify` and `converge`.
    pub fn experiment(&self, r: &Resolved) -> Result<ExperimentConfig, CliError> {
        let kappa = match (self.ambiguity.kappa, self.ambiguity.kappa_lo, self.ambiguity.kappa_hi) {
            (Some(k), ..) => k,
            (None, Some(lo), Some(hi)) if lo == hi => lo,
            _ => return Err(CliError::Config("verification needs symmetric ignorance (ambiguity.kappa)".into())),
        };
        let v = &self.verify;
        Ok(ExperimentConfig {
            model: r.model.clone(),
            strike: self.reference_level(),
            spot: self.oracle.spot,
            kappa,
            constraint: r.cons.clone(),
            grid: r.grid.clone(),
            schedule: r.schedule.clone(),
            tree_steps: v.tree_steps,
            equality_window: v.equality_window,
            audit_window: v.audit_window,
            relative_tol: v.relative_tol,
            american_tol: v.american_tol,
            bound_tol: v.bound_tol,
            hedge_tol: 1e-6,
        })
    }
}

fn nalgebra_scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
rate = 0.05
vol = 0.2
horizon = 1.0

[claim]
payoff = "call"
strike = 100.0

[ambiguity]
kappa = 0.1

[constraint]
kind = "orthant"

[grid]
nx = 101
nt = 100
"#;

    #[test]
    fn parses_and_hashes_deterministically() {
        let (cfg, r, h1) = RunConfig::from_text(BASE, &[]).unwrap();
        let (_, _, h2) = RunConfig::from_text(BASE, &[]).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        assert_eq!(cfg.solver.side, SideChoice::Both);
        assert_eq!(r.grid.anchor, 100.0);
        assert_eq!(r.cons, ConstraintSpec::Orthant);
    }

    #[test]
    fn overrides_change_values_and_hash() {
        let (_, _, h1) = RunConfig::from_text(BASE, &[]).unwrap();
        let sets = vec!["grid.nx=201".to_string(), "solver.side=bid".to_string(), "model.rate=[[0.0, 0.05], [0.5, 0.03]]".to_string()];
        let (cfg, r, h2) = RunConfig::from_text(BASE, &sets).unwrap();
        assert_eq!(cfg.grid.nx, 201);
        assert_eq!(cfg.solver.side, SideChoice::Bid);
        assert_eq!(r.model.rate_at(0.75), 0.03);
        assert_ne!(h1, h2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = BASE.replace("kappa = 0.1", "kapa = 0.1");
        assert!(matches!(RunConfig::from_text(&typo, &[]), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_text(BASE, &["grid.nz=3".into()]), Err(CliError::Config(_))));
        let missing = BASE.replace("[grid]\nnx = 101\nnt = 100\n", "");
        assert!(matches!(RunConfig::from_text(&missing, &[]), Err(CliError::Config(_))));
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        for bad in ["model.vol=-0.2", "constraint.lo=1.0", "claim.strike=-5", "grid.nx=10", "ambiguity.kappa_lo=0.1"] {
            let r = RunConfig::from_text(BASE, &[bad.to_string()]);
            assert!(matches!(r, Err(CliError::Config(_))), "{bad}");
        }
    }
}
