//! Layered configuration: command-line flags over `TQH_*` environment
//! variables over a `tqh.toml` file over built-in defaults.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{MissingPolicy, Scope};
use crate::report::Format;
use crate::stats::SignificanceConfig;

pub const ENV_PREFIX: &str = "TQH_";
pub const CONFIG_FILE: &str = "tqh.toml";

/// One configuration layer; unset fields defer to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub suite: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub missing: Option<MissingPolicy>,
    pub alpha: Option<f64>,
    pub format: Option<Format>,
    pub scope: Option<Scope>,
    pub workers: Option<usize>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{CONFIG_FILE}: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config layer serializes")
    }

    /// Reads `path` if it exists; a missing file is an empty layer.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Ok(ConfigLayer::default());
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Builds a layer from `TQH_*` variables in `vars`.
    pub fn from_env_map(vars: &HashMap<String, String>) -> Result<Self> {
        let get = |key: &str| vars.get(&format!("{ENV_PREFIX}{key}")).filter(|v| !v.is_empty());
        Ok(ConfigLayer {
            suite: get("SUITE").map(PathBuf::from),
            outputs: get("OUTPUTS").map(PathBuf::from),
            annotations: get("ANNOTATIONS").map(PathBuf::from),
            missing: get("MISSING").map(|v| v.parse()).transpose()?,
            alpha: get("ALPHA")
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("{ENV_PREFIX}ALPHA: not a number: {v}")))
                })
                .transpose()?,
            format: get("FORMAT").map(|v| v.parse()).transpose()?,
            scope: get("SCOPE").map(|v| v.parse()).transpose()?,
            workers: get("WORKERS")
                .map(|v| {
                    v.parse::<usize>()
                        .map_err(|_| Error::Config(format!("{ENV_PREFIX}WORKERS: not a count: {v}")))
                })
                .transpose()?,
        })
    }

    pub fn from_env() -> Result<Self> {
        Self::from_env_map(&std::env::vars().collect())
    }

    /// Fields of `self` win; gaps are filled from `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            suite: self.suite.or(lower.suite),
            outputs: self.outputs.or(lower.outputs),
            annotations: self.annotations.or(lower.annotations),
            missing: self.missing.or(lower.missing),
            alpha: self.alpha.or(lower.alpha),
            format: self.format.or(lower.format),
            scope: self.scope.or(lower.scope),
            workers: self.workers.or(lower.workers),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub suite: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub missing: MissingPolicy,
    pub significance: SignificanceConfig,
    pub format: Format,
    pub scope: Scope,
    pub workers: Option<usize>,
}

impl Config {
    /// Resolves `flags` over `env` over `file`, then applies defaults.
    pub fn resolve(flags: ConfigLayer, env: ConfigLayer, file: ConfigLayer) -> Result<Config> {
        let merged = flags.over(env).over(file);
        Ok(Config {
            suite: merged.suite,
            outputs: merged.outputs,
            annotations: merged.annotations,
            missing: merged.missing.unwrap_or_default(),
            significance: SignificanceConfig::new(merged.alpha.unwrap_or(0.95))?,
            format: merged.format.unwrap_or_default(),
            scope: merged.scope.unwrap_or(Scope::Category),
            workers: merged.workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_env_beat_file() {
        let file = ConfigLayer::from_toml(
            "suite = \"file.jsonl\"\nformat = \"latex\"\nalpha = 0.9\nscope = \"phenomenon\"\n",
        )
        .unwrap();
        let env = ConfigLayer::from_env_map(&HashMap::from([
            ("TQH_FORMAT".to_string(), "markdown".to_string()),
            ("TQH_SUITE".to_string(), "env.jsonl".to_string()),
        ]))
        .unwrap();
        let flags = ConfigLayer {
            suite: Some("flag.jsonl".into()),
            ..Default::default()
        };
        let cfg = Config::resolve(flags, env, file).unwrap();
        assert_eq!(cfg.suite.as_deref(), Some(Path::new("flag.jsonl")));
        assert_eq!(cfg.format, Format::Markdown);
        assert_eq!(cfg.scope, Scope::Phenomenon);
        assert_eq!(cfg.significance.alpha, 0.9);
    }

    #[test]
    fn defaults() {
        let cfg = Config::resolve(Default::default(), Default::default(), Default::default()).unwrap();
        assert_eq!(cfg.missing, MissingPolicy::Strict);
        assert_eq!(cfg.format, Format::Plain);
        assert!((cfg.significance.critical_z - 1.6448536).abs() < 1e-6);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let env = HashMap::from([("TQH_ALPHA".to_string(), "high".to_string())]);
        assert!(matches!(ConfigLayer::from_env_map(&env), Err(Error::Config(_))));
        assert!(ConfigLayer::from_toml("colour = \"red\"").is_err());
        let layer = ConfigLayer {
            alpha: Some(0.3),
            ..Default::default()
        };
        assert!(Config::resolve(layer, Default::default(), Default::default()).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let layer = ConfigLayer {
            suite: Some("s.jsonl".into()),
            missing: Some(MissingPolicy::Fail),
            ..Default::default()
        };
        assert_eq!(ConfigLayer::from_toml(&layer.to_toml()).unwrap(), layer);
    }
}
