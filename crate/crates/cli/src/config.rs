//! Command-line flags, the optional TOML config file, and their merge.
//! A flag always wins over the file; the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use gramgen_core::baselines::{DpConfig, OpfConfig};
use gramgen_core::evolution::GaConfig;
use gramgen_core::gateway::{Gateway, HttpBackend, HttpConfig, MockBackend};
use gramgen_core::runner::{sha256_hex, Method, RunConfig};
use serde::Deserialize;

pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_OUT_DIR: &str = "gramgen-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Dp,
    Opf,
    Hygenar,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dp => Method::Dp,
            MethodArg::Opf => Method::Opf,
            MethodArg::Hygenar => Method::Hygenar,
        }
    }
}

/// Flags shared by every command that talks to a model.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// TOML file providing defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Full URL of the chat-completion endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Name of the environment variable holding the API token.
    #[arg(long)]
    pub token_env: Option<String>,
    /// Response script for the mock backend (JSON lines).
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Flags selecting and tuning a method.
#[derive(Args, Debug, Default, Clone)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    #[arg(long)]
    pub mutation_rate: Option<f64>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Challenges evaluated concurrently.
    #[arg(long)]
    pub parallel: Option<usize>,
}

/// Keys accepted in the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<MethodArg>,
    pub dataset: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub token_env: Option<String>,
    pub script: Option<PathBuf>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
    pub max_turns: Option<usize>,
    pub parallel: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub max_retries: Option<u32>,
    pub max_in_flight: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Fully resolved backend settings.
#[derive(Debug, Clone)]
pub struct BackendSettings {
    pub kind: BackendKind,
    pub http: HttpConfig,
    pub model: String,
    pub script: Option<PathBuf>,
}

impl BackendSettings {
    pub fn resolve(common: &CommonArgs, file: &FileConfig) -> Result<Self> {
        let kind = common.backend.or(file.backend).unwrap_or(BackendKind::Http);
        let defaults = HttpConfig::default();
        let http = HttpConfig {
            endpoint: common
                .endpoint
                .clone()
                .or_else(|| file.endpoint.clone())
                .unwrap_or(defaults.endpoint),
            token_env: common.token_env.clone().or_else(|| file.token_env.clone()),
            max_retries: file.max_retries.unwrap_or(defaults.max_retries),
            max_in_flight: file.max_in_flight.unwrap_or(defaults.max_in_flight),
            ..defaults
        };
        let script = common.script.clone().or_else(|| file.script.clone());
        if kind == BackendKind::Mock && script.is_none() {
            bail!("--backend mock requires --script");
        }
        Ok(BackendSettings {
            kind,
            http,
            model: common
                .model
                .clone()
                .or_else(|| file.model.clone())
                .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            script,
        })
    }

    pub fn gateway(&self, artifact_log: &Path) -> Result<Gateway> {
        let gw = match self.kind {
            BackendKind::Mock => {
                let script = self.script.as_deref().expect("checked in resolve");
                let backend = MockBackend::from_script_file(script)?;
                Gateway::new(Box::new(backend), "mock")
            }
            BackendKind::Http => Gateway::new(Box::new(HttpBackend::new(self.http.clone())?), self.model.clone()),
        };
        gw.with_artifact_log(artifact_log)
            .with_context(|| format!("opening {}", artifact_log.display()))
    }

    /// Description for the manifest. Never contains the token itself.
    pub fn snapshot(&self) -> serde_json::Value {
        match self.kind {
            BackendKind::Mock => {
                let script = self.script.as_deref().expect("checked in resolve");
                let digest = std::fs::read(script).map(|b| sha256_hex(&b)).ok();
                serde_json::json!({"kind": "mock", "script": script.display().to_string(), "script_sha256": digest})
            }
            BackendKind::Http => serde_json::json!({
                "kind": "http",
                "endpoint": self.http.endpoint,
                "model": self.model,
                "token_env": self.http.token_env,
                "max_retries": self.http.max_retries,
                "max_in_flight": self.http.max_in_flight,
            }),
        }
    }
}

pub fn out_dir(common: &CommonArgs, file: &FileConfig) -> PathBuf {
    common
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn seed(common: &CommonArgs, file: &FileConfig) -> u64 {
    common.seed.or(file.seed).unwrap_or(0)
}

pub fn run_config(common: &CommonArgs, m: &MethodArgs, file: &FileConfig) -> Result<RunConfig> {
    let method: Method = m.method.or(file.method).unwrap_or(MethodArg::Hygenar).into();
    let temperature = common.temperature.or(file.temperature);
    let max_tokens = common.max_tokens.or(file.max_tokens);
    let dp = DpConfig::default();
    let dp = DpConfig {
        temperature: temperature.unwrap_or(dp.temperature),
        max_tokens: max_tokens.unwrap_or(dp.max_tokens),
    };
    let opf = OpfConfig::default();
    let opf = OpfConfig {
        max_turns: m.max_turns.or(file.max_turns).unwrap_or(opf.max_turns),
        temperature: temperature.unwrap_or(opf.temperature),
        max_tokens: max_tokens.unwrap_or(opf.max_tokens),
    };
    let ga = GaConfig::default();
    let seed = seed(common, file);
    let ga = GaConfig {
        population_size: m.population.or(file.population).unwrap_or(ga.population_size),
        generations: m.generations.or(file.generations).unwrap_or(ga.generations),
        crossover_rate: m.crossover_rate.or(file.crossover_rate).unwrap_or(ga.crossover_rate),
        mutation_rate: m.mutation_rate.or(file.mutation_rate).unwrap_or(ga.mutation_rate),
        temperature: temperature.unwrap_or(ga.temperature),
        max_tokens: max_tokens.unwrap_or(ga.max_tokens),
        rng_seed: seed,
        ..ga
    };
    ga.validate()?;
    if opf.max_turns == 0 {
        bail!("--max-turns must be at least 1");
    }
    if dp.max_tokens == 0 {
        bail!("--max-tokens must be positive");
    }
    if !(dp.temperature >= 0.0 && opf.temperature >= 0.0) {
        bail!("--temperature must be non-negative");
    }
    let parallel = m.parallel.or(file.parallel).unwrap_or(1);
    if parallel == 0 {
        bail!("--parallel must be at least 1");
    }
    Ok(RunConfig {
        method,
        seed,
        parallel,
        dp,
        opf,
        ga,
    })
}
