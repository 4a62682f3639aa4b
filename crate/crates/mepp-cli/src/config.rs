//! Plain key=value config files: one `key = value` per line, `#` comments.

use std::collections::BTreeMap;
use std::fs;

use crate::CliError;

pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile {
            entries: BTreeMap::new(),
        }
    }

    pub fn load(path: &str) -> Result<Self, CliError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{path}:{}: expected key=value, got `{line}`",
                    lineno + 1
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.get(key).cloned()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.entries
            .get(key)
            .map(|raw| {
                raw.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("config key {key}: bad number `{raw}`")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.entries
            .get(key)
            .map(|raw| {
                raw.parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("config key {key}: bad integer `{raw}`")))
            })
            .transpose()
    }
}
