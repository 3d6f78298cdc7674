//! Report envelope shared by every experiment.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// JSON schema for reports, shipped with the crate.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
}

impl ReportMeta {
    pub fn new(version: &str, config: &ExperimentConfig) -> Result<Self> {
        Ok(ReportMeta {
            version: version.to_string(),
            experiment: config.experiment.to_string(),
            seed: config.seed,
            config_hash: config.hash()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub meta: ReportMeta,
    /// Whether any checked invariant or inequality failed.
    pub violation: bool,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}
