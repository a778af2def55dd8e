//! Scenario configuration files.
//!
//! The format is TOML restricted to `key = value` lines under section
//! headers. Top-level keys pick the scenario, seed, output directory and
//! time grid; each scenario reads its own section. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unknown scenario {0:?} (see list-scenarios)")]
    UnknownScenario(String),
    #[error("invalid value for {field}: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::Invalid { field: field.to_owned(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub grid: Option<TimeGrid>,
    pub two_state_relaxation: Option<TwoStateParams>,
    pub unitary_vs_collapse: Option<UnitaryCollapseParams>,
    pub born_statistics: Option<BornParams>,
    pub gas_equilibrium: Option<GasParams>,
    pub ledger_audit: Option<AuditParams>,
}

/// Either explicit `times` or `points` evenly spaced values in `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub times: Option<Vec<f64>>,
}

impl TimeGrid {
    pub fn linspace(start: f64, stop: f64, points: usize) -> Self {
        Self { start: Some(start), stop: Some(stop), points: Some(points), times: None }
    }

    pub fn resolve(&self) -> Result<Vec<f64>, ConfigError> {
        let times = match &self.times {
            Some(t) => t.clone(),
            None => {
                let start = self.start.unwrap_or(0.0);
                let stop = self.stop.ok_or_else(|| ConfigError::invalid("grid.stop", "required without grid.times"))?;
                let points = self.points.unwrap_or(50);
                if points < 2 {
                    return Err(ConfigError::invalid("grid.points", "need at least 2 points"));
                }
                let step = (stop - start) / (points - 1) as f64;
                (0..points).map(|i| start + step * i as f64).collect()
            }
        };
        if times.is_empty() {
            return Err(ConfigError::invalid("grid", "empty time grid"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(ConfigError::invalid("grid", "times must be finite and nonnegative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::invalid("grid", "times must be strictly increasing"));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStateParams {
    /// Rate 2 -> 1.
    pub r12: f64,
    /// Rate 1 -> 2.
    pub r21: f64,
    pub p0: Vec<f64>,
    pub tolerance: f64,
}

impl Default for TwoStateParams {
    fn default() -> Self {
        Self { r12: 1.0, r21: 1.0, p0: vec![1.0, 0.0], tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitaryCollapseParams {
    /// Energy gap of the two-level Hamiltonian.
    pub gap: f64,
    /// Rate of decoherence events in the collapse branch.
    pub collapse_rate: f64,
    pub t_end: f64,
    pub members: usize,
    pub unitary_steps: usize,
    pub drift_tolerance: f64,
    /// Required fraction of ln 2 reached by the ensemble mean at `t_end`.
    pub entropy_fraction: f64,
}

impl Default for UnitaryCollapseParams {
    fn default() -> Self {
        Self {
            gap: 1.0,
            collapse_rate: 1.0,
            t_end: 20.0,
            members: 500,
            unitary_steps: 1000,
            drift_tolerance: 1e-8,
            entropy_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BornParams {
    pub weights: Vec<f64>,
    pub draws: usize,
    pub significance: f64,
}

impl Default for BornParams {
    fn default() -> Self {
        Self { weights: vec![1.0 / 3.0, 2.0 / 3.0], draws: 100_000, significance: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasParams {
    pub molecules: usize,
    pub initially_excited: usize,
    pub decay_rate: f64,
    pub delay: Option<f64>,
    pub t_max: f64,
    pub members: usize,
    /// Sample times at or after this are treated as equilibrated.
    pub equilibrium_after: f64,
    pub k_tolerance: f64,
    /// Allowed relative shortfall of the mean macrostate entropy.
    pub entropy_tolerance: f64,
    pub cross_check_times: Vec<f64>,
    pub tv_tolerance: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self {
            molecules: 100,
            initially_excited: 50,
            decay_rate: 1.0,
            delay: None,
            t_max: 50.0,
            members: 500,
            equilibrium_after: 30.0,
            k_tolerance: 1.0,
            entropy_tolerance: 0.05,
            cross_check_times: vec![2.0, 5.0, 10.0],
            tv_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditParams {
    /// Ledger CSV, relative paths resolved against the config file.
    pub ledger: PathBuf,
    /// With both of these set the ledger is replayed from the documented
    /// initial layout instead of inferring initial levels.
    pub molecules: Option<usize>,
    pub initially_excited: Option<usize>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(audit), Some(dir)) = (cfg.ledger_audit.as_mut(), path.parent()) {
            if audit.ledger.is_relative() {
                audit.ledger = dir.join(&audit.ledger);
            }
        }
        Ok(cfg)
    }

    /// Minimal config for a scenario with all defaults.
    pub fn for_scenario(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_owned(),
            seed,
            output_dir: None,
            grid: None,
            two_state_relaxation: None,
            unitary_vs_collapse: None,
            born_statistics: None,
            gas_equilibrium: None,
            ledger_audit: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = ScenarioConfig::parse(
            r#"
scenario = "two-state-relaxation"
seed = 3

[grid]
start = 0.0
stop = 5.0
points = 11

[two_state_relaxation]
r12 = 2.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        let p = cfg.two_state_relaxation.unwrap();
        assert_eq!(p.r12, 2.0);
        assert_eq!(p.r21, 1.0);
        assert_eq!(cfg.grid.unwrap().resolve().unwrap().len(), 11);
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = ScenarioConfig::parse("scenario = \"born-statistics\"\nseed = 1\n[born_statistics]\ndraw = 5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("draw"), "{err}");
        assert!(err.contains("born_statistics") || err.contains("line 4"), "{err}");
    }

    #[test]
    fn seed_is_required() {
        let err = ScenarioConfig::parse("scenario = \"born-statistics\"\n").unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid { start: None, stop: None, points: None, times: Some(vec![0.0, 0.0]) }.resolve().is_err());
        assert!(TimeGrid { start: None, stop: None, points: None, times: Some(vec![-1.0]) }.resolve().is_err());
        assert!(TimeGrid { start: None, stop: None, points: Some(10), times: None }.resolve().is_err());
        let g = TimeGrid::linspace(0.0, 1.0, 5).resolve().unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
