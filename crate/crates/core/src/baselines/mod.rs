//! DQN and PPO baselines built on a small from-scratch MLP, trained with
//! plain SGD.

pub mod dqn;
pub mod mlp;
pub mod ppo;

use serde::{Deserialize, Serialize};

pub use dqn::DqnConfig;
pub use ppo::PpoConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.dqn.validate()?;
        self.ppo.validate()
    }
}
