//! Run configuration: a single JSON document with defaults for everything
//! except the master seed and tick count.
//!
//! Unknown fields are rejected so typos fail loudly, and semantic
//! validation reports the offending field and constraint by name.

use serde::{Deserialize, Serialize};

use crate::economy::POVERTY_LEVELS;
use crate::topology::SmallWorldParams;
use crate::SimError;

/// Version of the configuration schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Complete configuration for one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Master seed; every random stream in the run derives from it.
    pub seed: u64,
    /// Number of ticks to simulate.
    pub ticks: u64,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub agents: AgentInitConfig,
    #[serde(default)]
    pub tax: TaxConfig,
    #[serde(default)]
    pub welfare: WelfareConfig,
    #[serde(default)]
    pub game: GameConfig,
}

/// Contact graph parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            n: 1000,
            k: 10,
            p: 0.1,
        }
    }
}

/// Initial endowment ranges. Wealth is uniform real, spirit uniform
/// integer; both ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentInitConfig {
    pub wealth_min: f64,
    pub wealth_max: f64,
    pub spirit_min: u32,
    pub spirit_max: u32,
}

impl Default for AgentInitConfig {
    fn default() -> Self {
        AgentInitConfig {
            wealth_min: 50.0,
            wealth_max: 150.0,
            spirit_min: 0,
            spirit_max: 100,
        }
    }
}

/// Progressive tax schedule as `(lower_bound, rate)` rows plus the
/// exemption threshold below which profits go untaxed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaxConfig {
    pub brackets: Vec<(f64, f64)>,
    pub exemption_threshold: f64,
}

impl Default for TaxConfig {
    fn default() -> Self {
        TaxConfig {
            brackets: vec![(0.0, 0.05), (50.0, 0.10), (200.0, 0.20)],
            exemption_threshold: 5.0,
        }
    }
}

/// Welfare fund and feedback controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelfareConfig {
    /// Guaranteed minimum wealth at the start of the run.
    pub min_guarantee: f64,
    /// Per-tick subsistence consumption, also the poverty unit.
    pub aver: f64,
    /// Subsidy issuance rates for the three poverty levels, most severe
    /// first; non-increasing, each in `[0, 1]`.
    pub issuance_rates: [f64; POVERTY_LEVELS],
    /// Central fund's initial balance as a fraction of total initial
    /// agent wealth.
    pub center_initial_fraction: f64,
    pub controller: ControllerConfig,
}

impl Default for WelfareConfig {
    fn default() -> Self {
        WelfareConfig {
            min_guarantee: 9.0,
            aver: 1.0,
            issuance_rates: [1.0, 0.75, 0.5],
            center_initial_fraction: 0.1,
            controller: ControllerConfig::default(),
        }
    }
}

/// Feedback controller knobs. Steps and bounds for the guaranteed minimum
/// are expressed as fractions of its initial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// When false the controller never moves rates or the minimum.
    pub enabled: bool,
    pub rate_step: f64,
    pub rate_bounds: (f64, f64),
    pub min_step_fraction: f64,
    pub min_bounds_fraction: (f64, f64),
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            enabled: true,
            rate_step: 0.01,
            rate_bounds: (0.01, 0.45),
            min_step_fraction: 0.05,
            min_bounds_fraction: (0.2, 2.0),
        }
    }
}

/// Project and betrayal parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    /// Probability that a visited agent sponsors a project this tick.
    pub sponsor_probability: f64,
    /// Fraction of white-list contacts sampled into the invitee pool.
    pub white_fraction: f64,
    /// Fraction of spirit-weighted wealth committed as a stake.
    pub invest_fraction: f64,
    /// Ticks of consumption an agent keeps liquid and never stakes.
    pub reserve_ticks: f64,
    /// Extra risk carried by one-participant projects.
    pub solo_risk_penalty: f64,
    /// Upper bound of the integer loss shock.
    pub omega3_max: u64,
    /// Poverty multiplier of betrayal condition one.
    pub gamma: f64,
    /// Pot multiplier of betrayal condition two.
    pub beta: f64,
    /// Consumption multiplier of betrayal condition three.
    pub theta: u32,
    /// Blacklist length in ticks; must exceed 10.
    pub blacklist_multiplier: u32,
    /// Read condition one from the committed stake instead of wealth.
    pub condition_one_uses_stake: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            sponsor_probability: 0.2,
            white_fraction: 0.5,
            invest_fraction: 0.1,
            reserve_ticks: 5.0,
            solo_risk_penalty: 10.0,
            omega3_max: 10_000,
            gamma: 10.0,
            beta: 3.0,
            theta: 1,
            blacklist_multiplier: 11,
            condition_one_uses_stake: false,
        }
    }
}

impl RunConfig {
    /// A ready-to-run configuration with every default and the given seed
    /// and tick count.
    pub fn with_defaults(seed: u64, ticks: u64) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed,
            ticks,
            topology: TopologyConfig::default(),
            agents: AgentInitConfig::default(),
            tax: TaxConfig::default(),
            welfare: WelfareConfig::default(),
            game: GameConfig::default(),
        }
    }

    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every semantic constraint, naming the field on failure.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SimError::InvalidConfig(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        SmallWorldParams {
            n: self.topology.n,
            k: self.topology.k,
            p: self.topology.p,
            seed: 0,
        }
        .validate()
        .map_err(|e| SimError::InvalidConfig(format!("topology: {e}")))?;

        let a = &self.agents;
        if !a.wealth_min.is_finite() || !a.wealth_max.is_finite() || a.wealth_min > a.wealth_max {
            return Err(SimError::InvalidConfig(format!(
                "agents.wealth_min/wealth_max: need finite min <= max, got {} and {}",
                a.wealth_min, a.wealth_max
            )));
        }
        if a.spirit_min > a.spirit_max || a.spirit_max > 100 {
            return Err(SimError::InvalidConfig(format!(
                "agents.spirit_min/spirit_max: need min <= max <= 100, got {} and {}",
                a.spirit_min, a.spirit_max
            )));
        }

        crate::economy::TaxSchedule::new(&self.tax.brackets, self.tax.exemption_threshold)
            .map_err(|e| SimError::InvalidConfig(format!("tax: {e}")))?;

        let w = &self.welfare;
        if !(w.min_guarantee.is_finite() && w.min_guarantee > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.min_guarantee: must be positive and finite, got {}",
                w.min_guarantee
            )));
        }
        if !(w.aver.is_finite() && w.aver >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.aver: must be non-negative and finite, got {}",
                w.aver
            )));
        }
        for (i, &rate) in w.issuance_rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SimError::InvalidConfig(format!(
                    "welfare.issuance_rates[{i}]: must lie in [0, 1], got {rate}"
                )));
            }
        }
        if w.issuance_rates.windows(2).any(|p| p[0] < p[1]) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.issuance_rates: must be non-increasing from the most severe level, got {:?}",
                w.issuance_rates
            )));
        }
        if !(0.0..=10.0).contains(&w.center_initial_fraction) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.center_initial_fraction: must lie in [0, 10], got {}",
                w.center_initial_fraction
            )));
        }

        let c = &w.controller;
        if !(c.rate_step.is_finite() && c.rate_step >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.controller.rate_step: must be non-negative, got {}",
                c.rate_step
            )));
        }
        if !(c.min_step_fraction.is_finite() && c.min_step_fraction >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.controller.min_step_fraction: must be non-negative, got {}",
                c.min_step_fraction
            )));
        }
        if !(0.0 <= c.rate_bounds.0 && c.rate_bounds.0 <= c.rate_bounds.1 && c.rate_bounds.1 <= 1.0)
        {
            return Err(SimError::InvalidConfig(format!(
                "welfare.controller.rate_bounds: need 0 <= low <= high <= 1, got {:?}",
                c.rate_bounds
            )));
        }
        if !(0.0 < c.min_bounds_fraction.0 && c.min_bounds_fraction.0 <= c.min_bounds_fraction.1) {
            return Err(SimError::InvalidConfig(format!(
                "welfare.controller.min_bounds_fraction: need 0 < low <= high, got {:?}",
                c.min_bounds_fraction
            )));
        }

        let g = &self.game;
        for (name, value) in [
            ("game.sponsor_probability", g.sponsor_probability),
            ("game.white_fraction", g.white_fraction),
            ("game.invest_fraction", g.invest_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::InvalidConfig(format!(
                    "{name}: must lie in [0, 1], got {value}"
                )));
            }
        }
        if !(g.reserve_ticks.is_finite() && g.reserve_ticks >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "game.reserve_ticks: must be non-negative, got {}",
                g.reserve_ticks
            )));
        }
        if !(g.solo_risk_penalty.is_finite() && g.solo_risk_penalty >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "game.solo_risk_penalty: must be non-negative, got {}",
                g.solo_risk_penalty
            )));
        }
        if !(g.gamma.is_finite() && g.gamma > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "game.gamma: must be positive, got {}",
                g.gamma
            )));
        }
        if !(g.beta.is_finite() && g.beta > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "game.beta: must be positive, got {}",
                g.beta
            )));
        }
        if g.theta == 0 {
            return Err(SimError::InvalidConfig(
                "game.theta: must be at least 1".into(),
            ));
        }
        if g.blacklist_multiplier <= 10 {
            return Err(SimError::InvalidConfig(format!(
                "game.blacklist_multiplier: must exceed 10, got {}",
                g.blacklist_multiplier
            )));
        }
        Ok(())
    }
}
