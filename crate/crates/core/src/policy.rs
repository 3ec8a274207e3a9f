//! Versioned policy snapshots: agent kind, memory-mode tag, an echo of the
//! agent configuration and the flat parameter vector (row-major).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::AgentKind;

pub const POLICY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub schema_version: u32,
    pub agent: AgentKind,
    pub memory_mode: String,
    pub config: serde_json::Value,
    /// Layer shapes; for LogGuardQ `[5, 4]`.
    pub shape: Vec<usize>,
    pub parameters: Vec<f64>,
}

impl PolicyFile {
    pub fn new(
        agent: AgentKind,
        memory_mode: &str,
        config: serde_json::Value,
        shape: Vec<usize>,
        parameters: Vec<f64>,
    ) -> Self {
        Self {
            schema_version: POLICY_SCHEMA_VERSION,
            agent,
            memory_mode: memory_mode.to_string(),
            config,
            shape,
            parameters,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let policy: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if policy.schema_version != POLICY_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported policy schema version {}",
                policy.schema_version
            )));
        }
        if policy.parameters.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("policy file contains non-finite parameters".into()));
        }
        Ok(policy)
    }
}
