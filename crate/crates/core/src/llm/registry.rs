//! Model definitions loaded from a TOML file of `[[model]]` tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::ModelConfig;

/// `scripted:<name>` selects the script set `<scripts dir>/<name>`.
pub const SCRIPTED_PREFIX: &str = "scripted:";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid model file")]
    Parse(#[from] toml::de::Error),
    #[error("model {0:?} is defined twice")]
    Duplicate(String),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown model {name:?} (known: {known})")]
    Unknown { name: String, known: String },
}

#[derive(Deserialize)]
struct ModelFile {
    #[serde(default)]
    model: Vec<ModelConfig>,
}

#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, ModelConfig>,
}

impl ModelRegistry {
    pub fn from_toml_str(text: &str) -> Result<Self, RegistryError> {
        let file: ModelFile = toml::from_str(text)?;
        let mut models = BTreeMap::new();
        for m in file.model {
            m.validate().map_err(RegistryError::Invalid)?;
            if models.contains_key(&m.name) {
                return Err(RegistryError::Duplicate(m.name));
            }
            models.insert(m.name.clone(), m);
        }
        Ok(Self { models })
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn get(&self, name: &str) -> Option<&ModelConfig> {
        self.models.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    /// Look up `name`, treating `scripted:<x>` as a zero-cost scripted model
    /// reading from `scripts_dir/<x>`.
    pub fn resolve(&self, name: &str, scripts_dir: &Path) -> Result<ModelConfig, RegistryError> {
        if let Some(set) = name.strip_prefix(SCRIPTED_PREFIX) {
            if set.is_empty() {
                return Err(RegistryError::Invalid("empty script set name".into()));
            }
            return Ok(ModelConfig::scripted(name, scripts_dir.join(set)));
        }
        self.models.get(name).cloned().ok_or_else(|| RegistryError::Unknown {
            name: name.to_string(),
            known: self.names().collect::<Vec<_>>().join(", "),
        })
    }
}
