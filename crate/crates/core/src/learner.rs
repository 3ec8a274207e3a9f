//! The interface every agent presents to the training harness.

use serde::{Deserialize, Serialize};

use crate::env::{Action, StateVector};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    LogGuardQ,
    Dqn,
    Ppo,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::LogGuardQ, AgentKind::Dqn, AgentKind::Ppo];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::LogGuardQ => "logguardq",
            AgentKind::Dqn => "dqn",
            AgentKind::Ppo => "ppo",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            AgentKind::LogGuardQ => "LogGuardQ",
            AgentKind::Dqn => "DQN",
            AgentKind::Ppo => "PPO",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logguardq" | "logguard" | "lgq" => Ok(AgentKind::LogGuardQ),
            "dqn" => Ok(AgentKind::Dqn),
            "ppo" => Ok(AgentKind::Ppo),
            other => Err(crate::Error::Usage(format!(
                "unknown agent kind '{other}' (expected logguardq, dqn or ppo)"
            ))),
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One environment step as seen by a learner. `ip`/`next_ip` are the memory
/// keys of the labeled entry and of the entry behind `next_state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub ip: u32,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateVector,
    pub next_ip: u32,
    pub done: bool,
}

pub trait Learner {
    fn kind(&self) -> AgentKind;

    fn begin_episode(&mut self, episode: usize) -> Result<()>;

    fn act(&mut self, state: &StateVector, ip: u32) -> Result<Action>;

    fn observe(&mut self, transition: &Transition) -> Result<()>;

    fn end_episode(&mut self) -> Result<()> {
        Ok(())
    }

    /// Magnitudes of the per-update Q-value changes recorded so far, for
    /// convergence checks. Empty for learners that do not track them.
    fn q_deltas(&self) -> &[f64] {
        &[]
    }

    /// Serializable snapshot of the learned policy.
    fn policy(&self) -> crate::policy::PolicyFile;
}
