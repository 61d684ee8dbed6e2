//! Scenario files (TOML) and the built-in scenario suite.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{HandoverConfig, RlfConfig};
use crate::dataset::OracleConfig;
use crate::engine::DecisionPolicy;
use crate::mobility::{Bounds, UeProfile};
use crate::network::{AlarmSchedule, CellSite, RadioConfig};
use crate::nn::{ModelConfig, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub name: String,
    pub duration_s: f64,
    pub tick_ms: u32,
    pub seed: u64,
    /// Day of week (0 = Monday) at t = 0.
    #[serde(default)]
    pub epoch_day: u8,
    #[serde(default = "default_ping_pong_window")]
    pub ping_pong_window_s: f64,
}

fn default_ping_pong_window() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub window_len: usize,
    pub val_fraction: f64,
    #[serde(flatten)]
    pub optimizer: TrainConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { window_len: 10, val_fraction: 0.3, optimizer: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario: ScenarioMeta,
    pub world: Bounds,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub handover: HandoverConfig,
    #[serde(default)]
    pub rlf: RlfConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub policy: DecisionPolicy,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub cells: Vec<CellSite>,
    pub ues: Vec<UeProfile>,
    #[serde(default)]
    pub schedule: AlarmSchedule,
}

pub const BUILTIN: [(&str, &str); 4] = [
    ("corridor", include_str!("../scenarios/corridor.toml")),
    ("dense-urban", include_str!("../scenarios/dense-urban.toml")),
    ("alarm-veto", include_str!("../scenarios/alarm-veto.toml")),
    ("son-conflict", include_str!("../scenarios/son-conflict.toml")),
];

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::config(format!("unknown built-in scenario {name:?}")))?;
        Self::from_toml_str(text)
    }

    /// A path to a TOML file, or the name of a built-in scenario.
    pub fn resolve(spec: &str) -> Result<Self> {
        if Path::new(spec).exists() {
            Self::load(spec)
        } else if BUILTIN.iter().any(|(n, _)| *n == spec) {
            Self::builtin(spec)
        } else {
            Err(Error::config(format!("no scenario file or built-in named {spec:?}")))
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn tick_s(&self) -> f64 {
        self.scenario.tick_ms as f64 / 1000.0
    }

    pub fn n_ticks(&self) -> usize {
        (self.scenario.duration_s * 1000.0 / self.scenario.tick_ms as f64).round() as usize
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.scenario;
        if !(m.duration_s > 0.0 && m.duration_s.is_finite()) {
            return Err(Error::config("duration_s must be > 0"));
        }
        if m.tick_ms == 0 {
            return Err(Error::config("tick_ms must be > 0"));
        }
        if m.tick_ms != self.handover.tick_ms {
            return Err(Error::config(format!(
                "scenario tick_ms {} does not match handover tick_ms {}",
                m.tick_ms, self.handover.tick_ms
            )));
        }
        if m.epoch_day > 6 {
            return Err(Error::config("epoch_day must be in 0..=6"));
        }
        if !(m.ping_pong_window_s >= 0.0) {
            return Err(Error::config("ping_pong_window_s must be >= 0"));
        }
        let w = &self.world;
        if !(w.min_m.0 < w.max_m.0 && w.min_m.1 < w.max_m.1) {
            return Err(Error::config("world bounds are empty"));
        }
        self.radio.validate()?;
        self.handover.validate()?;
        self.policy.validate()?;
        if self.cells.is_empty() {
            return Err(Error::config("scenario has no cells"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.cells {
            c.validate()?;
            if !ids.insert(c.cell_id) {
                return Err(Error::config(format!("duplicate cell_id {}", c.cell_id)));
            }
        }
        let mut ues = std::collections::BTreeSet::new();
        for u in &self.ues {
            u.validate()?;
            if !ues.insert(u.ue_id) {
                return Err(Error::config(format!("duplicate ue_id {}", u.ue_id)));
            }
        }
        self.schedule.validate(&self.cells)?;
        let t = &self.training;
        if t.window_len == 0 {
            return Err(Error::config("training.window_len must be >= 1"));
        }
        if !(t.val_fraction > 0.0 && t.val_fraction < 1.0) {
            return Err(Error::config("training.val_fraction must be in (0, 1)"));
        }
        Ok(())
    }
}
