//! Kernel configuration.
//!
//! The on-disk format is YAML laid out like the shipped
//! `assets/default_config.yaml`. Each role block (`coder`, `planner`,
//! `file_reader`) inherits the `llm` block, then the role's built-in
//! overrides, then whatever the file sets for that role.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

use crate::llm::RoleSettings;

/// The default configuration file, shipped verbatim.
pub const DEFAULT_CONFIG_YAML: &str = include_str!("../assets/default_config.yaml");

/// Environment variable naming a config file when none is passed explicitly.
pub const CONFIG_ENV: &str = "MLZERO_CONFIG";

const ROLE_BLOCKS: [&str; 3] = ["coder", "planner", "file_reader"];

const LLM_KEYS: [&str; 12] = [
    "provider",
    "model",
    "max_tokens",
    "proxy_url",
    "temperature",
    "verbose",
    "multi_turn",
    "base_url",
    "top_p",
    "max_stdout_length",
    "max_stderr_length",
    "details",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config is not valid YAML: {0}")]
    Yaml(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: String,
    pub model: String,
    pub max_tokens: u32,
    pub proxy_url: Option<String>,
    pub temperature: f64,
    pub verbose: bool,
    pub multi_turn: bool,
    /// OpenAI-compatible endpoint used by the HTTP backend.
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub top_p: Option<f64>,
    #[serde(default)]
    pub max_stdout_length: Option<usize>,
    #[serde(default)]
    pub max_stderr_length: Option<usize>,
    #[serde(default)]
    pub details: Option<bool>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            provider: "bedrock".into(),
            model: "us.anthropic.claude-3-7-sonnet-20250219-v1:0".into(),
            max_tokens: 65536,
            proxy_url: None,
            temperature: 0.0,
            verbose: true,
            multi_turn: false,
            base_url: None,
            top_p: None,
            max_stdout_length: None,
            max_stderr_length: None,
            details: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Literal-vs-wildcard threshold for file grouping.
    pub delta: usize,
    /// Always ask the file reader for generated code instead of builtin readers.
    pub always_generate_readers: bool,
    /// Timeout for one generated reader script, in seconds.
    pub reader_timeout: u64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            delta: 5,
            always_generate_readers: false,
            reader_timeout: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    BySummary,
    ByTitleOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticMemoryConfig {
    pub enabled: bool,
    pub index_mode: IndexMode,
    pub chunk_size: usize,
    /// Root of the knowledge base (`<kb_path>/<tool>/<slug>.md`).
    pub kb_path: Option<String>,
}

impl Default for SemanticMemoryConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            index_mode: IndexMode::BySummary,
            chunk_size: 8192,
            kb_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodicMode {
    #[default]
    Default,
    WithoutFix,
    WithoutBoth,
    MultiTurn,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodicMemoryConfig {
    pub mode: EpisodicMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandboxConfig {
    /// Prepended to every script invocation, e.g. a container runner.
    pub command_prefix: Vec<String>,
    pub python: String,
    /// Seconds between SIGTERM and SIGKILL on timeout.
    pub kill_grace_seconds: u64,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            command_prefix: Vec::new(),
            python: "python3".into(),
            kill_grace_seconds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub stream_output: bool,
    pub per_execution_timeout: u64,
    pub max_chars_per_file: usize,
    pub max_num_tutorials: usize,
    pub max_user_input_length: usize,
    pub max_error_message_length: usize,
    pub max_tutorial_length: usize,
    pub create_venv: bool,
    pub condense_tutorials: bool,
    pub install_packages: bool,
    pub max_iterations: usize,
    pub llm: LlmConfig,
    pub coder: LlmConfig,
    pub planner: LlmConfig,
    pub file_reader: LlmConfig,
    pub perception: PerceptionConfig,
    pub semantic_memory: SemanticMemoryConfig,
    pub episodic_memory: EpisodicMemoryConfig,
    pub sandbox: SandboxConfig,
}

fn role_overrides(role: &str) -> LlmConfig {
    let base = LlmConfig::default();
    match role {
        "coder" => LlmConfig {
            temperature: 0.5,
            top_p: Some(1.0),
            ..base
        },
        "planner" => LlmConfig {
            max_stdout_length: Some(8192),
            max_stderr_length: Some(2048),
            ..base
        },
        "file_reader" => LlmConfig {
            details: Some(false),
            ..base
        },
        _ => base,
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            stream_output: true,
            per_execution_timeout: 10800,
            max_chars_per_file: 1024,
            max_num_tutorials: 5,
            max_user_input_length: 2048,
            max_error_message_length: 2048,
            max_tutorial_length: 8192,
            create_venv: false,
            condense_tutorials: true,
            install_packages: false,
            max_iterations: 5,
            llm: LlmConfig::default(),
            coder: role_overrides("coder"),
            planner: role_overrides("planner"),
            file_reader: role_overrides("file_reader"),
            perception: PerceptionConfig::default(),
            semantic_memory: SemanticMemoryConfig::default(),
            episodic_memory: EpisodicMemoryConfig::default(),
            sandbox: SandboxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Coder,
    Planner,
    FileReader,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Coder => "coder",
            Role::Planner => "planner",
            Role::FileReader => "file_reader",
        }
    }
}

impl KernelConfig {
    pub fn role(&self, role: Role) -> RoleSettings {
        let block = match role {
            Role::Coder => &self.coder,
            Role::Planner => &self.planner,
            Role::FileReader => &self.file_reader,
        };
        RoleSettings {
            role_name: role.name().to_string(),
            model: block.model.clone(),
            temperature: block.temperature,
            max_tokens: block.max_tokens,
            multi_turn: block.multi_turn,
        }
    }

    pub fn max_stdout_length(&self) -> usize {
        self.planner.max_stdout_length.expect("validated at load")
    }

    pub fn max_stderr_length(&self) -> usize {
        self.planner.max_stderr_length.expect("validated at load")
    }

    pub fn file_reader_details(&self) -> bool {
        self.file_reader.details.unwrap_or(false)
    }

    /// Coder runs as one accumulated conversation instead of injecting R_t.
    pub fn multi_turn_coder(&self) -> bool {
        self.episodic_memory.mode == EpisodicMode::MultiTurn || self.coder.multi_turn
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        for (name, block) in [
            ("llm", &self.llm),
            ("coder", &self.coder),
            ("planner", &self.planner),
            ("file_reader", &self.file_reader),
        ] {
            if !(0.0..=1.0).contains(&block.temperature) {
                return invalid(format!("{name}.temperature must be within [0, 1]"));
            }
            if block.max_tokens == 0 {
                return invalid(format!("{name}.max_tokens must be positive"));
            }
        }
        let positive = [
            ("per_execution_timeout", self.per_execution_timeout as usize),
            ("max_chars_per_file", self.max_chars_per_file),
            ("max_user_input_length", self.max_user_input_length),
            ("max_tutorial_length", self.max_tutorial_length),
            ("max_iterations", self.max_iterations),
            ("perception.delta", self.perception.delta),
            ("semantic_memory.chunk_size", self.semantic_memory.chunk_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return invalid(format!("{name} must be positive"));
            }
        }
        if self.max_error_message_length < 2 {
            return invalid("max_error_message_length must be at least 2".into());
        }
        match (self.planner.max_stdout_length, self.planner.max_stderr_length) {
            (Some(o), Some(e)) if o >= 2 && e >= 2 => Ok(()),
            _ => invalid("planner.max_stdout_length and planner.max_stderr_length must be at least 2".into()),
        }
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }
}

/// Loads `path`, or the defaults when absent.
pub fn load_config(path: Option<&Path>) -> Result<KernelConfig, ConfigError> {
    match path {
        None => {
            let cfg = KernelConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            load_config_str(&text)
        }
    }
}

pub fn load_config_str(text: &str) -> Result<KernelConfig, ConfigError> {
    let mut user: Value = serde_yaml::from_str(text).map_err(|e| ConfigError::Yaml(e.to_string()))?;
    user.apply_merge().map_err(|e| ConfigError::Yaml(e.to_string()))?;
    let user = match user {
        Value::Null => Mapping::new(),
        Value::Mapping(m) => m,
        _ => return Err(ConfigError::Invalid("top level must be a mapping".into())),
    };

    let defaults = match serde_yaml::to_value(KernelConfig::default()).expect("defaults serialize") {
        Value::Mapping(m) => m,
        _ => unreachable!("config serializes to a mapping"),
    };
    check_keys(&user, &defaults)?;

    let mut merged = defaults.clone();
    let mut base_llm = defaults.get("llm").cloned().expect("llm block");
    if let Some(llm) = user.get("llm") {
        deep_merge(&mut base_llm, llm);
    }
    for (key, value) in &user {
        let k = key.as_str().unwrap_or_default();
        if !ROLE_BLOCKS.contains(&k) && k != "llm" {
            let slot = merged.entry(key.clone()).or_insert(Value::Null);
            deep_merge(slot, value);
        }
    }
    merged.insert("llm".into(), base_llm.clone());
    for role in ROLE_BLOCKS {
        let mut block = base_llm.clone();
        let builtin = serde_yaml::to_value(role_overrides(role)).expect("role serializes");
        let defaults_llm = serde_yaml::to_value(LlmConfig::default()).expect("llm serializes");
        if let (Value::Mapping(builtin), Value::Mapping(plain)) = (&builtin, &defaults_llm) {
            let diff: Mapping = builtin
                .iter()
                .filter(|(k, v)| plain.get(*k) != Some(*v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            deep_merge(&mut block, &Value::Mapping(diff));
        }
        if let Some(user_block) = user.get(role) {
            deep_merge(&mut block, user_block);
        }
        merged.insert(role.into(), block);
    }

    let cfg: KernelConfig =
        serde_yaml::from_value(Value::Mapping(merged)).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_keys(user: &Mapping, defaults: &Mapping) -> Result<(), ConfigError> {
    for (key, value) in user {
        let name = key
            .as_str()
            .ok_or_else(|| ConfigError::Invalid(format!("non-string key {key:?}")))?;
        if name == "llm" || ROLE_BLOCKS.contains(&name) {
            if let Value::Mapping(block) = value {
                for k in block.keys() {
                    let k = k.as_str().unwrap_or_default();
                    if !LLM_KEYS.contains(&k) {
                        return Err(ConfigError::UnknownKey(format!("{name}.{k}")));
                    }
                }
            }
            continue;
        }
        match defaults.get(name) {
            None => return Err(ConfigError::UnknownKey(name.to_string())),
            Some(Value::Mapping(known)) => {
                if let Value::Mapping(section) = value {
                    for k in section.keys() {
                        let k = k.as_str().unwrap_or_default();
                        if !known.contains_key(k) {
                            return Err(ConfigError::UnknownKey(format!("{name}.{k}")));
                        }
                    }
                }
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn deep_merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Mapping(b), Value::Mapping(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
