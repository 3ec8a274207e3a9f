//! The run configuration: one TOML file with a section per module plus the
//! experiment protocol. A single global seed drives every component seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::analytics::{convergence, savgol};
use crate::baselines::BaselineConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::AgentKind;
use crate::loggen::{EntryProfile, GenConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub episodes: usize,
    pub runs: usize,
    pub agents: Vec<AgentKind>,
    pub significance: f64,
    pub savgol_window: usize,
    pub savgol_poly: usize,
    /// Trailing window for the variance and action-share series.
    pub metrics_window: usize,
    pub convergence_theta: f64,
    pub convergence_window: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            runs: 10,
            agents: AgentKind::ALL.to_vec(),
            significance: 0.01,
            savgol_window: savgol::DEFAULT_WINDOW,
            savgol_poly: savgol::DEFAULT_POLY,
            metrics_window: 100,
            convergence_theta: convergence::DEFAULT_THETA,
            convergence_window: convergence::DEFAULT_WINDOW,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.runs == 0 {
            return Err(Error::config("protocol.episodes and protocol.runs must be positive"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("protocol.agents must name at least one agent"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::config("protocol.significance must lie in (0, 1)"));
        }
        if self.savgol_window % 2 == 0 || self.savgol_poly >= self.savgol_window {
            return Err(Error::config(
                "protocol.savgol_window must be odd and exceed savgol_poly",
            ));
        }
        if self.metrics_window == 0 || self.convergence_window == 0 {
            return Err(Error::config("protocol windows must be positive"));
        }
        if !(self.convergence_theta > 0.0) {
            return Err(Error::config("protocol.convergence_theta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityConfig {
    pub temperature_min: f64,
    pub temperature_max: f64,
    pub temperature_points: usize,
    pub curiosity_min: f64,
    pub curiosity_max: f64,
    pub curiosity_points: usize,
    /// Episodes per grid cell.
    pub episodes: usize,
    /// Training runs averaged per cell; every cell reuses the same run seeds.
    pub seeds_per_cell: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            temperature_min: 0.8,
            temperature_max: 1.2,
            temperature_points: 3,
            curiosity_min: 0.5,
            curiosity_max: 1.5,
            curiosity_points: 3,
            episodes: 2_000,
            seeds_per_cell: 1,
        }
    }
}

impl SensitivityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature_points < 2 || self.curiosity_points < 2 {
            return Err(Error::config("sensitivity grids need at least two points per axis"));
        }
        if !(self.temperature_min > 0.0 && self.temperature_max > self.temperature_min) {
            return Err(Error::config("sensitivity temperature range must be positive and increasing"));
        }
        if !(self.curiosity_min > 0.0 && self.curiosity_max > self.curiosity_min) {
            return Err(Error::config("sensitivity curiosity range must be positive and increasing"));
        }
        if self.episodes == 0 || self.seeds_per_cell == 0 {
            return Err(Error::config("sensitivity.episodes and seeds_per_cell must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub loggen: GenConfig,
    pub profile: EntryProfile,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub baselines: BaselineConfig,
    pub protocol: ProtocolConfig,
    pub sensitivity: SensitivityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("runs"),
            loggen: GenConfig::default(),
            profile: EntryProfile::default(),
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            baselines: BaselineConfig::default(),
            protocol: ProtocolConfig::default(),
            sensitivity: SensitivityConfig::default(),
        }
    }
}

// stream tags for derive_seed
const DATASET_STREAM: u64 = 0x1000;
const RUN_STREAM: u64 = 0x2000;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config = Self::from_toml(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.loggen.total_entries == 0 {
            return Err(Error::config("loggen.total_entries must be positive"));
        }
        self.profile.validate()?;
        self.env.validate()?;
        self.agent.validate()?;
        self.baselines.validate()?;
        self.protocol.validate()?;
        self.sensitivity.validate()
    }

    /// Generator settings with the seed resolved from the global seed unless
    /// the file pins one.
    pub fn dataset_config(&self) -> GenConfig {
        GenConfig {
            seed: Some(self.loggen.seed.unwrap_or_else(|| derive_seed(self.seed, DATASET_STREAM))),
            ..self.loggen.clone()
        }
    }

    /// Seed of run `index`, derived from the global seed.
    pub fn run_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, RUN_STREAM + index as u64)
    }

    /// Copy of this config with the env, agent and baseline seeds set for
    /// run `index`.
    pub fn for_run(&self, index: usize) -> RunConfig {
        let run = self.run_seed(index);
        let mut c = self.clone();
        c.env.seed = derive_seed(run, 1);
        c.agent.seed = derive_seed(run, 2);
        c.baselines.seed = derive_seed(run, 3);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_toml(
            "seed = 7\n[protocol]\nepisodes = 100\nagents = [\"dqn\"]\n[agent]\nplasticity_mode = \"variance\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.protocol.episodes, 100);
        assert_eq!(c.protocol.runs, 10);
        assert_eq!(c.protocol.agents, vec![AgentKind::Dqn]);
        assert_eq!(c.agent.plasticity_mode, crate::agent::PlasticityMode::Variance);
        assert_eq!(c.agent.gamma, 0.99);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_toml("[protocol]\nsavgol_window = 500\n").is_err());
        assert!(RunConfig::from_toml("[agent]\ngamma = 1.5\n").is_err());
        assert!(RunConfig::from_toml("[protocol]\nagents = [\"sarsa\"]\n").is_err());
        assert!(RunConfig::from_toml("[sensitivity]\ntemperature_points = 1\n").is_err());
    }

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let c = RunConfig::default();
        let a = c.for_run(0);
        let b = c.for_run(1);
        assert_ne!(a.agent.seed, b.agent.seed);
        assert_ne!(a.env.seed, a.agent.seed);
        assert_eq!(c.for_run(0), a);
        assert_eq!(c.dataset_config().seed, c.dataset_config().seed);
        let pinned = RunConfig {
            loggen: GenConfig {
                seed: Some(5),
                ..GenConfig::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(pinned.dataset_config().seed, Some(5));
    }
}
