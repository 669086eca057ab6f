//! Run configuration file (TOML) with `${VAR}` environment interpolation.
//!
//! ```toml
//! seed = 42
//!
//! [backend]
//! kind = "http_chat_completion"
//! endpoint_url = "https://api.example.com/v1/chat/completions"
//! model_name = "gpt-4"
//! api_key_env_var = "OPENAI_API_KEY"
//!
//! [dataset]
//! corpus = "${DATA_DIR}/imdb62.csv"
//! setting = "cls-expl"
//! ```

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::PhrasePolicy;
use crate::dataset::{DEFAULT_TEST_N, DEFAULT_TRAIN_N, EXPLANATION_POOL_N};
use crate::genclient::{BackendConfig, DEFAULT_MAX_NEW_TOKENS, DEFAULT_TEMPERATURE};
use crate::humaneval::RubricConfig;
use crate::types::DatasetSetting;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("environment variable {0} referenced in config is not set")]
    MissingVar(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_max_new_tokens() -> u32 {
    DEFAULT_MAX_NEW_TOKENS
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub out_prefix: Option<String>,
    #[serde(default = "default_setting")]
    pub setting: DatasetSetting,
    #[serde(default = "default_pool")]
    pub pool: usize,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_test")]
    pub test: usize,
    #[serde(default = "default_true")]
    pub dedup: bool,
    /// JSONL of demonstrations for explanation prompts.
    #[serde(default)]
    pub demonstrations: Option<PathBuf>,
    /// Directory overriding the built-in prompt templates.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default)]
    pub max_text_chars: Option<usize>,
}

fn default_setting() -> DatasetSetting {
    DatasetSetting::ClassificationAndExplanation
}
fn default_pool() -> usize {
    EXPLANATION_POOL_N
}
fn default_train() -> usize {
    DEFAULT_TRAIN_N
}
fn default_test() -> usize {
    DEFAULT_TEST_N
}
fn default_true() -> bool {
    true
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out_prefix: None,
            setting: default_setting(),
            pool: EXPLANATION_POOL_N,
            train: DEFAULT_TRAIN_N,
            test: DEFAULT_TEST_N,
            dedup: true,
            demonstrations: None,
            templates_dir: None,
            max_text_chars: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_backend")]
    pub backend: BackendConfig,
    #[serde(default)]
    pub decoding: DecodingConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub policy: PhrasePolicy,
    #[serde(default)]
    pub rubric: RubricConfig,
}

fn default_backend() -> BackendConfig {
    BackendConfig::mock(0, 0.0)
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            backend: default_backend(),
            decoding: DecodingConfig::default(),
            dataset: DatasetConfig::default(),
            policy: PhrasePolicy::default(),
            rubric: RubricConfig::default(),
        }
    }
}

static VAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

/// Replaces every `${NAME}` using `lookup`; an unset name is an error.
pub fn interpolate(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for cap in VAR.captures_iter(text) {
        let whole = cap.get(0).unwrap();
        let name = &cap[1];
        let value = lookup(name).ok_or_else(|| ConfigError::MissingVar(name.to_string()))?;
        out.push_str(&text[last..whole.start()]);
        out.push_str(&value);
        last = whole.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

impl ToolkitConfig {
    pub fn parse_with(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let expanded = interpolate(text, lookup)?;
        let cfg: ToolkitConfig = toml::from_str(&expanded).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with(text, |k| std::env::var(k).ok())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.backend
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("backend: {e}")))?;
        self.policy
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("policy: {e}")))?;
        self.rubric
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("rubric: {e}")))?;
        if !(self.decoding.temperature >= 0.0 && self.decoding.temperature.is_finite()) {
            return Err(ConfigError::Invalid("decoding.temperature must be >= 0".into()));
        }
        if self.decoding.max_new_tokens == 0 {
            return Err(ConfigError::Invalid("decoding.max_new_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genclient::BackendKind;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ToolkitConfig::parse_with("", |_| None).unwrap();
        assert_eq!(cfg, ToolkitConfig::default());
        assert_eq!(cfg.decoding.temperature, 0.1);
        assert_eq!(cfg.decoding.max_new_tokens, 512);
        assert_eq!(cfg.dataset.train, 10_000);
    }

    #[test]
    fn interpolation() {
        let text = "seed = 9\n[dataset]\ncorpus = \"${DIR}/c.csv\"\nsetting = \"cls\"\n";
        let cfg = ToolkitConfig::parse_with(text, |k| (k == "DIR").then(|| "/data".to_string())).unwrap();
        assert_eq!(cfg.dataset.corpus.unwrap(), PathBuf::from("/data/c.csv"));
        assert_eq!(cfg.dataset.setting, DatasetSetting::ClassificationOnly);
        assert!(matches!(
            ToolkitConfig::parse_with(text, |_| None),
            Err(ConfigError::MissingVar(v)) if v == "DIR"
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ToolkitConfig::parse_with("sed = 1", |_| None), Err(ConfigError::Parse(_))));
        assert!(ToolkitConfig::parse_with("[decoding]\ntemp = 0.2", |_| None).is_err());
    }

    #[test]
    fn semantic_validation() {
        let http = "[backend]\nkind = \"http_chat_completion\"\n";
        assert!(matches!(ToolkitConfig::parse_with(http, |_| None), Err(ConfigError::Invalid(_))));
        let ok = "[backend]\nkind = \"http_chat_completion\"\nendpoint_url = \"http://x\"\nmodel_name = \"m\"\n";
        let cfg = ToolkitConfig::parse_with(ok, |_| None).unwrap();
        assert_eq!(cfg.backend.kind, BackendKind::HttpChatCompletion);
        assert!(ToolkitConfig::parse_with("[decoding]\nmax_new_tokens = 0", |_| None).is_err());
    }
}
