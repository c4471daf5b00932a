//! Run configuration: a TOML file merged with command-line flags and the
//! environment. Flags win over the file, the file over the environment, and
//! the environment over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::{Tokenizer, DEFAULT_PRICE_PER_1K};
use crate::engine::{EngineOptions, Paradigm, DEFAULT_MAX_STEPS};
use crate::evaluation::F1Mode;
use crate::model::{DEFAULT_CONTEXT_LIMIT, DEFAULT_MODEL};
use crate::tools::catalog::ToolConfig;
use crate::tools::FailureInjection;

pub const CONFIG_FILE: &str = "config.toml";
pub const REPLAY_FILE: &str = "replay.jsonl";
pub const TOOLS_FILE: &str = "tools.jsonl";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const EXEMPLARS_FILE: &str = "exemplars.jsonl";

pub const ENV_MODEL: &str = "REWOO_MODEL";
pub const ENV_API_KEY: &str = "REWOO_API_KEY";
pub const ENV_ENDPOINT: &str = "REWOO_ENDPOINT";
pub const ENV_OPENAI_API_KEY: &str = "OPENAI_API_KEY";
pub const ENV_OPENAI_BASE_URL: &str = "OPENAI_BASE_URL";

/// Default toolset: the six tools of the public-benchmark setup.
pub const DEFAULT_TOOLS: [&str; 6] = ["Google", "Wikipedia", "WolframAlpha", "Calculator", "LLM", "SearchSOTU"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// The on-disk config document. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub benchmark: Option<String>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub temperature: Option<f64>,
    pub tokenizer: Option<String>,
    pub price_per_1k: Option<f64>,
    pub paradigms: Option<Vec<String>>,
    pub tools: Option<Vec<String>>,
    /// Toolset for the interleaved baseline when it differs from `tools`.
    pub react_tools: Option<Vec<String>>,
    pub exemplars: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub inject_failure: Option<String>,
    pub failure_text: Option<String>,
    pub max_steps: Option<usize>,
    pub parallelism: Option<usize>,
    pub context_limit: Option<u64>,
    pub strict: Option<bool>,
    pub parallel_waves: Option<bool>,
    pub f1: Option<F1Mode>,
    pub tool_settings: Option<ToolConfig>,
}

impl ConfigFile {
    /// Loads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        let mut cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), reason: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.exemplars, &mut cfg.templates].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Values taken from the environment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnvConfig {
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub endpoint: Option<String>,
}

impl EnvConfig {
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        Self {
            model: var(ENV_MODEL),
            api_key: var(ENV_API_KEY).or_else(|| var(ENV_OPENAI_API_KEY)),
            endpoint: var(ENV_ENDPOINT).or_else(|| var(ENV_OPENAI_BASE_URL)),
        }
    }
}

/// Where model completions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    /// Serve recorded completions from `<dir>/replay.jsonl`.
    Replay(PathBuf),
    /// Answer from a JSONL script of completions.
    Script(PathBuf),
    /// Call the configured endpoint.
    Live,
}

/// Command-line overrides; `None` leaves the lower layers in charge.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub paradigms: Option<Vec<Paradigm>>,
    pub model: Option<String>,
    pub tools: Option<Vec<String>>,
    pub exemplars: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub inject_failure: Option<String>,
    pub max_steps: Option<usize>,
    pub tokenizer: Option<String>,
    pub price: Option<f64>,
    pub parallelism: Option<usize>,
    pub strict: bool,
    pub parallel_waves: bool,
}

/// Fully resolved settings for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmark: String,
    pub paradigms: Vec<Paradigm>,
    pub model_id: String,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub judge_model: Option<String>,
    pub tokenizer: Tokenizer,
    pub price_per_1k: f64,
    pub tools: Vec<String>,
    pub react_tools: Option<Vec<String>>,
    pub exemplars: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub injection: FailureInjection,
    pub parallelism: usize,
    pub f1_mode: F1Mode,
    pub engine: EngineOptions,
    pub tool_settings: ToolConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: "custom".into(),
            paradigms: vec![Paradigm::Rewoo],
            model_id: DEFAULT_MODEL.into(),
            endpoint: None,
            api_key: None,
            judge_model: None,
            tokenizer: Tokenizer::Whitespace,
            price_per_1k: DEFAULT_PRICE_PER_1K,
            tools: DEFAULT_TOOLS.iter().map(|s| s.to_string()).collect(),
            react_tools: None,
            exemplars: None,
            templates: None,
            injection: FailureInjection::off(),
            parallelism: 1,
            f1_mode: F1Mode::Char,
            engine: EngineOptions {
                max_steps: DEFAULT_MAX_STEPS,
                context_limit: Some(DEFAULT_CONTEXT_LIMIT),
                ..Default::default()
            },
            tool_settings: ToolConfig::default(),
        }
    }
}

fn parse_paradigms(list: &[String]) -> Result<Vec<Paradigm>, ConfigError> {
    list.iter().map(|p| p.parse().map_err(ConfigError::Invalid)).collect()
}

impl RunConfig {
    /// Layers defaults, environment, file and flags, then validates.
    pub fn resolve(file: &ConfigFile, env: &EnvConfig, flags: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();

        // environment
        if let Some(m) = &env.model {
            cfg.model_id = m.clone();
        }
        cfg.api_key = env.api_key.clone();
        cfg.endpoint = env.endpoint.clone();

        // file
        if let Some(v) = &file.benchmark {
            cfg.benchmark = v.clone();
        }
        if let Some(v) = &file.model {
            cfg.model_id = v.clone();
        }
        if let Some(v) = &file.endpoint {
            cfg.endpoint = Some(v.clone());
        }
        cfg.judge_model = file.judge_model.clone();
        if let Some(v) = file.temperature {
            cfg.engine.temperature = v;
        }
        if let Some(v) = &file.tokenizer {
            cfg.tokenizer =
                v.parse().map_err(|e: crate::accounting::AccountingError| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(v) = file.price_per_1k {
            cfg.price_per_1k = v;
        }
        if let Some(v) = &file.paradigms {
            cfg.paradigms = parse_paradigms(v)?;
        }
        if let Some(v) = &file.tools {
            cfg.tools = v.clone();
        }
        cfg.react_tools = file.react_tools.clone();
        cfg.exemplars = file.exemplars.clone();
        cfg.templates = file.templates.clone();
        if let Some(v) = &file.inject_failure {
            cfg.injection = FailureInjection::parse(v);
        }
        if let Some(v) = &file.failure_text {
            cfg.injection.failure_text = v.clone();
        }
        if let Some(v) = file.max_steps {
            cfg.engine.max_steps = v;
        }
        if let Some(v) = file.parallelism {
            cfg.parallelism = v;
        }
        if let Some(v) = file.context_limit {
            cfg.engine.context_limit = if v == 0 { None } else { Some(v) };
        }
        if let Some(v) = file.strict {
            cfg.engine.strict = v;
        }
        if let Some(v) = file.parallel_waves {
            cfg.engine.parallel_waves = v;
        }
        if let Some(v) = file.f1 {
            cfg.f1_mode = v;
        }
        if let Some(v) = &file.tool_settings {
            cfg.tool_settings = v.clone();
        }

        // flags
        if let Some(v) = &flags.paradigms {
            cfg.paradigms = v.clone();
        }
        if let Some(v) = &flags.model {
            cfg.model_id = v.clone();
        }
        if let Some(v) = &flags.tools {
            cfg.tools = v.clone();
            cfg.react_tools = None;
        }
        if let Some(v) = &flags.exemplars {
            cfg.exemplars = Some(v.clone());
        }
        if let Some(v) = &flags.templates {
            cfg.templates = Some(v.clone());
        }
        if let Some(v) = &flags.inject_failure {
            let text = cfg.injection.failure_text.clone();
            cfg.injection = FailureInjection { failure_text: text, ..FailureInjection::parse(v) };
        }
        if let Some(v) = flags.max_steps {
            cfg.engine.max_steps = v;
        }
        if let Some(v) = &flags.tokenizer {
            cfg.tokenizer =
                v.parse().map_err(|e: crate::accounting::AccountingError| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(v) = flags.price {
            cfg.price_per_1k = v;
        }
        if let Some(v) = flags.parallelism {
            cfg.parallelism = v;
        }
        cfg.engine.strict |= flags.strict;
        cfg.engine.parallel_waves |= flags.parallel_waves;

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.paradigms.is_empty() {
            return Err(ConfigError::Invalid("no paradigm selected".into()));
        }
        if self.engine.max_steps == 0 {
            return Err(ConfigError::Invalid("max_steps must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        if !(self.price_per_1k >= 0.0 && self.price_per_1k.is_finite()) {
            return Err(ConfigError::Invalid(format!("price {} must be a non-negative number", self.price_per_1k)));
        }
        if !(0.0..=2.0).contains(&self.engine.temperature) {
            return Err(ConfigError::Invalid(format!("temperature {} outside [0, 2]", self.engine.temperature)));
        }
        for p in [&self.exemplars, &self.templates].into_iter().flatten() {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Toolset for a paradigm.
    pub fn toolset(&self, paradigm: Paradigm) -> &[String] {
        match (paradigm, &self.react_tools) {
            (Paradigm::React, Some(t)) => t,
            _ => &self.tools,
        }
    }
}
