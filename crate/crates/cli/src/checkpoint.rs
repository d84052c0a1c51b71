//! Versioned, round-trip-exact run-state checkpoints.
//!
//! The format is JSON with a version tag. Floats serialize in shortest
//! round-trip form, so load(save(state)) reproduces the state bit for bit
//! (the state invariants forbid non-finite values, which JSON cannot carry).

use std::path::Path;

use capbandit_core::capacity::QueueBank;
use capbandit_core::models::RewardModel;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Snapshot of an online run: per-agent model state (absent entries for
/// model-free policies), queue bank, and position in the replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Identifies the producing run (policy name, seed).
    pub label: String,
    pub rounds_completed: usize,
    pub models: Vec<Option<RewardModel>>,
    pub queues: QueueBank,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::ParseError {
            file: "<checkpoint>".into(),
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| CliError::ParseError {
            file: file.into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(CliError::ValidationError {
                path: "checkpoint.version".into(),
                message: format!("version {} not supported", cp.version),
            });
        }
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }
}
