use std::path::Path;

use anyhow::Context;
use pilot_core::agent::EpisodeLimits;
use pilot_core::client::ClientConfig;
use pilot_core::grpo::TrainConfig;
use serde::Deserialize;

use crate::args::LimitArgs;

/// Contents of the `--config` TOML file. Command-line flags win over it.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub client: ClientConfig,
    pub train: TrainConfig,
    pub limits: Option<EpisodeLimits>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Episode limits: file values, then flags.
    pub fn limits(&self, flags: &LimitArgs) -> EpisodeLimits {
        let mut l = self.limits.unwrap_or(self.train.limits);
        if let Some(v) = flags.max_steps {
            l.max_steps = v;
        }
        if let Some(v) = flags.parse_retries {
            l.parse_retries = v;
        }
        if let Some(v) = flags.history_window {
            l.history_window = v;
        }
        l
    }
}
