//! Engine configuration file (TOML or JSON, chosen by extension).
//!
//! ```toml
//! [protection]
//! soft_limit = 1.0
//! soft_overflow_steps = 3
//! hard_limit = 2.0
//! line_cooldown_steps = 12
//! substation_cooldown_steps = 3
//!
//! [search]
//! depth = 2
//! beam = 8
//! k = 5
//! budget_ms = 2500
//!
//! [agent]
//! alpha = 0.5
//! alert_threshold = 0.97
//! observer_horizon = 3
//! ```
//!
//! Every key is optional; missing keys take the defaults above.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub protection: ProtectionConfig,
    pub search: SearchConfig,
    pub agent: AgentConfig,
    pub screening: ScreeningConfig,
}

impl EngineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<EngineConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: EngineConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?,
            _ => toml::from_str(&text).map_err(|e| Error::parse(path, e))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.protection.validate()?;
        self.search.validate()?;
        self.agent.validate()
    }
}

/// Line protection and switching cooldowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtectionConfig {
    /// Loading above which a line counts as overloaded.
    pub soft_limit: f64,
    /// Consecutive overloaded steps after which a line trips.
    pub soft_overflow_steps: u32,
    /// Loading at which a line trips immediately.
    pub hard_limit: f64,
    pub line_cooldown_steps: u32,
    pub substation_cooldown_steps: u32,
    /// Numerical slack on the overload comparison.
    pub rho_tolerance: f64,
}

impl Default for ProtectionConfig {
    fn default() -> Self {
        ProtectionConfig {
            soft_limit: 1.0,
            soft_overflow_steps: 3,
            hard_limit: 2.0,
            line_cooldown_steps: 12,
            substation_cooldown_steps: 3,
            rho_tolerance: 1e-6,
        }
    }
}

impl ProtectionConfig {
    pub fn is_overloaded(&self, rho: f64) -> bool {
        rho > self.soft_limit + self.rho_tolerance
    }

    fn validate(&self) -> Result<()> {
        if !(self.soft_limit > 0.0 && self.hard_limit > self.soft_limit) {
            return Err(Error::Config("protection: need 0 < soft_limit < hard_limit".into()));
        }
        if self.soft_overflow_steps == 0 {
            return Err(Error::Config("protection: soft_overflow_steps must be >= 1".into()));
        }
        if !(self.rho_tolerance >= 0.0) {
            return Err(Error::Config("protection: rho_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchObjective {
    /// Worst max ρ over the simulated horizon.
    WorstMaxRho,
    /// Σ over steps and lines of max(0, ρ − 1).
    CumulativeOverflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub depth: usize,
    pub beam: usize,
    pub k: usize,
    /// Wall-clock budget; `None` disables it.
    pub budget_ms: Option<u64>,
    /// Prior-ranked follow-up actions tried at each deeper level.
    pub followups: usize,
    pub objective: SearchObjective,
    /// Candidates simulated between budget checks.
    pub chunk: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            depth: 2,
            beam: 8,
            k: 5,
            budget_ms: Some(2500),
            followups: 0,
            objective: SearchObjective::WorstMaxRho,
            chunk: 64,
        }
    }
}

impl SearchConfig {
    pub fn budget(&self) -> Option<Duration> {
        self.budget_ms.map(Duration::from_millis)
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.beam == 0 || self.k == 0 || self.chunk == 0 {
            return Err(Error::Config("search: depth, beam, k and chunk must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// 0 = redispatch only, 1 = topology only.
    pub alpha: f64,
    pub alert_threshold: f64,
    pub observer_horizon: usize,
    pub recovery: bool,
    pub reset: bool,
    /// Curtailment weight relative to one MW of redispatch.
    pub curtailment_penalty: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: 0.5,
            alert_threshold: 0.97,
            observer_horizon: 3,
            recovery: true,
            reset: true,
            curtailment_penalty: 10.0,
        }
    }
}

impl AgentConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("agent: alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.alert_threshold > 0.0 && self.alert_threshold < 2.0) {
            return Err(Error::Config("agent: alert_threshold must be in (0, 2)".into()));
        }
        if self.observer_horizon == 0 {
            return Err(Error::Config("agent: observer_horizon must be >= 1".into()));
        }
        if !(self.curtailment_penalty > 0.0) {
            return Err(Error::Config("agent: curtailment_penalty must be > 0".into()));
        }
        Ok(())
    }
}

/// N-1 screening set used for recommendations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    /// Line ids to screen; empty means every in-service line.
    pub lines: Vec<String>,
}
