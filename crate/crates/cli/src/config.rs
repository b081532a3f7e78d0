//! Optional TOML configuration, flag merging, and output metadata.
//!
//! Flags always win over config-file values. Every output embeds the tool
//! version, the resolved command parameters' hash, and the seed when one is
//! in play, so a run can be reproduced from any of its artifacts.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Flat key set accepted in the TOML file; each command reads the keys it
/// understands.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<String>,
    pub output: Option<String>,
    pub model: Option<String>,
    pub report: Option<String>,
    pub method: Option<String>,
    pub kind: Option<String>,
    pub width: Option<usize>,
    pub shift: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub smooth: Option<usize>,
    pub normalize: Option<bool>,
    pub ridge: Option<f64>,
    pub lambda: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub rows: Option<usize>,
    pub n: Option<usize>,
    pub coupling_scale: Option<f64>,
    pub field_scale: Option<f64>,
    pub equilibration: Option<usize>,
    pub thinning: Option<usize>,
    pub data: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", p.display()))
            }
        }
    }
}

/// Metadata block embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<&'static str>,
}

impl Meta {
    pub fn new<C: Serialize>(command: &str, resolved: &C, seed: Option<u64>) -> Self {
        let canonical =
            serde_json::to_string(resolved).expect("resolved configs always serialize");
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update(b"\0");
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let config_hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Meta {
            tool: "maxent-market",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash,
            seed,
            generator: seed.map(|_| maxent_market::sampler::GENERATOR_NAME),
        }
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("meta serializes")
    }
}
