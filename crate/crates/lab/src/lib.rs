//! Experiment harness around `dana-core`: named scenario presets that
//! replicate the simulation studies at desk scale, deterministic artifact
//! output (`config.json`, `series.csv`, `summary.json` per run), and
//! comparison tables.

pub mod presets;
pub mod runner;
pub mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Named scenarios, one per simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    DanaDiscrete,
    DanaContinuous,
    DanaRobust,
    Discrn,
    NnnQuality,
    NnnTraj2d,
    DispatchFullday,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::DanaDiscrete,
        Scenario::DanaContinuous,
        Scenario::DanaRobust,
        Scenario::Discrn,
        Scenario::NnnQuality,
        Scenario::NnnTraj2d,
        Scenario::DispatchFullday,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "dana_discrete" => Some(Self::DanaDiscrete),
            "dana_continuous" => Some(Self::DanaContinuous),
            "dana_robust" => Some(Self::DanaRobust),
            "discrn" => Some(Self::Discrn),
            "nnn_quality" => Some(Self::NnnQuality),
            "nnn_traj2d" => Some(Self::NnnTraj2d),
            "dispatch_fullday" => Some(Self::DispatchFullday),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DanaDiscrete => "dana_discrete",
            Self::DanaContinuous => "dana_continuous",
            Self::DanaRobust => "dana_robust",
            Self::Discrn => "discrn",
            Self::NnnQuality => "nnn_quality",
            Self::NnnTraj2d => "nnn_traj2d",
            Self::DispatchFullday => "dispatch_fullday",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A reproducible experiment request: the same config (including seed)
/// produces byte-identical artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    /// Scenario-specific parameter overrides (stringly typed on purpose:
    /// they come from `--set k=v` flags and config files).
    #[serde(default)]
    pub overrides: BTreeMap<String, String>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self { scenario, seed, overrides: BTreeMap::new(), output_dir: output_dir.into() }
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.overrides.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get_usize(&self, key: &str, default: usize) -> anyhow::Result<usize> {
        match self.overrides.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| anyhow::anyhow!("override {key}={v} is not an integer"))
            }
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> anyhow::Result<f64> {
        match self.overrides.get(key) {
            None => Ok(default),
            Some(v) => {
                v.parse().map_err(|_| anyhow::anyhow!("override {key}={v} is not a number"))
            }
        }
    }

    pub fn get_string(&self, key: &str, default: &str) -> String {
        self.overrides.get(key).cloned().unwrap_or_else(|| default.to_string())
    }
}

/// Outcome used by the CLI to derive its exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Finished, but some solver hit an iteration cap before its tolerance.
    NonConvergenceFlagged,
}
