//! Run manifest: one TOML file naming the schema, streams, rules, inputs and
//! output directory of a pipeline run. Relative paths resolve against the
//! manifest's own directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Format, StreamDescriptor, DEFAULT_LATENESS_WINDOWS, DEFAULT_WINDOW_S};
use crate::populate::{MappingRule, PopulateConfig};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Defaults to midnight UTC of the first record's day.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Timestamp>,
    #[serde(default = "default_duration")]
    pub duration_s: u64,
}

fn default_duration() -> u64 {
    DEFAULT_WINDOW_S
}

fn default_horizon() -> u64 {
    DEFAULT_LATENESS_WINDOWS
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            origin: None,
            duration_s: DEFAULT_WINDOW_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub path: PathBuf,
    pub stream_id: String,
    pub format: Format,
    #[serde(default)]
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub window: WindowConfig,
    /// Lateness horizon in windows.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub populate: PopulateConfig,
    #[serde(default)]
    pub streams: Vec<StreamDescriptor>,
    #[serde(default)]
    pub rules: Vec<MappingRule>,
    #[serde(default)]
    pub inputs: Vec<InputFile>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("manifest {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl RunManifest {
    /// Loads a manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m = Self::parse(&text).map_err(|message| ManifestError::Syntax {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base);
        m.check().map_err(|message| ManifestError::Invalid {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.schema);
        abs(&mut self.output);
        for input in &mut self.inputs {
            abs(&mut input.path);
        }
    }

    /// Structural checks that need no parsing of referenced files.
    pub fn check(&self) -> Result<(), String> {
        if self.window.duration_s == 0 {
            return Err("window.duration_s must be positive".into());
        }
        if !self.schema.is_file() {
            return Err(format!("schema file {} does not exist", self.schema.display()));
        }
        let mut ids = HashMap::new();
        for s in &self.streams {
            s.validate().map_err(|e| e.to_string())?;
            if ids.insert(s.stream_id.as_str(), ()).is_some() {
                return Err(format!("stream {} is declared twice", s.stream_id));
            }
        }
        for input in &self.inputs {
            if !ids.contains_key(input.stream_id.as_str()) {
                return Err(format!(
                    "input {} names undeclared stream {}",
                    input.path.display(),
                    input.stream_id
                ));
            }
            if !input.path.is_file() {
                return Err(format!("input file {} does not exist", input.path.display()));
            }
        }
        Ok(())
    }

    pub fn descriptor_map(&self) -> HashMap<String, Arc<StreamDescriptor>> {
        self.streams
            .iter()
            .map(|s| (s.stream_id.clone(), Arc::new(s.clone())))
            .collect()
    }
}
