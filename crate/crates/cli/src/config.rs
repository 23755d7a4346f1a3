//! Run configuration: a human-editable TOML file plus CLI overrides.
//!
//! Every output artifact embeds the hash of the effective configuration, so
//! completed work is recognizable across reruns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vgs_core::generator::GeneratorConfig;
use vgs_core::pipeline::CutWeighting;
use vgs_core::search::{Aggregation, Guidance, SelectionScope};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub env: Option<EnvConfig>,
    #[serde(default)]
    pub generator: Option<HttpBackendConfig>,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub decoding: DecodingConfig,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub flops: FlopsConfig,
    #[serde(default)]
    pub collect: CollectSection,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub path: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    250
}
fn default_timeout() -> u64 {
    120_000
}
fn default_parallelism() -> usize {
    4
}

impl HttpBackendConfig {
    pub fn to_http_config(&self) -> vgs_core::http::HttpConfig {
        vgs_core::http::HttpConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key: std::env::var(vgs_core::http::API_KEY_ENV).ok(),
            max_retries: self.max_retries,
            initial_backoff_ms: self.initial_backoff_ms,
            timeout_ms: self.timeout_ms,
            parallelism: self.parallelism,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct ScorerConfig {
    #[serde(default)]
    pub kind: ScorerKind,
    /// Checkpoint path for `kind = "checkpoint"` / `kind = "bt_checkpoint"`.
    pub path: Option<PathBuf>,
    /// Endpoint settings for `kind = "http"`.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Optional seeded Gaussian noise on top of the scorer (ablations).
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            kind: ScorerKind::Oracle,
            path: None,
            endpoint: None,
            model: None,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Oracle,
    Checkpoint,
    BtCheckpoint,
    Http,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_len: Option<usize>,
    #[serde(default)]
    pub stop_markers: Vec<String>,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig { temperature: 0.6, top_p: 0.95, max_len: None, stop_markers: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub budget: usize,
    pub width: usize,
    pub block_size: usize,
    pub dvts: usize,
    pub guidance: Guidance,
    pub aggregation: Aggregation,
    #[serde(default)]
    pub selection_scope: SelectionScope,
    pub seed: u64,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            budget: 16,
            width: 2,
            block_size: 4096,
            dvts: 1,
            guidance: Guidance::Value,
            aggregation: Aggregation::Wmv,
            selection_scope: SelectionScope::Global,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub bootstrap_reps: usize,
    pub seeds: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { bootstrap_reps: 100, seeds: vec![0, 1, 2] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlopsConfig {
    pub generator_params: f64,
    pub scorer_params: f64,
}

impl Default for FlopsConfig {
    fn default() -> Self {
        FlopsConfig { generator_params: 1.5e9, scorer_params: 1.5e9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectSection {
    pub n_rollins: usize,
    pub cuts_per_rollin: usize,
    #[serde(default)]
    pub cut_weighting: CutWeighting,
    /// Roll-in policy temperatures; one synthetic policy per entry.
    pub rollin_temperatures: Vec<f64>,
    pub seed: u64,
}

impl Default for CollectSection {
    fn default() -> Self {
        CollectSection {
            n_rollins: 14,
            cuts_per_rollin: 4,
            cut_weighting: CutWeighting::Sqrt,
            rollin_temperatures: vec![1.0],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub budgets: Vec<usize>,
    pub widths: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub methods: Vec<String>,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            budgets: vec![4, 16, 64],
            widths: vec![2],
            block_sizes: vec![4096],
            methods: vec!["mv".into(), "wmv".into(), "vgs".into()],
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let config: RunConfig = toml::from_str(&body)
            .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?;
        Ok(config)
    }

    /// Decoding parameters for the active backend. The synthetic backend
    /// gets the raw chain distribution and the env horizon as max_len
    /// unless overridden.
    pub fn generator_config(&self, block_size: usize, env_horizon: Option<usize>) -> GeneratorConfig {
        let default_max = env_horizon.unwrap_or(16384);
        GeneratorConfig {
            temperature: if self.env.is_some() { 1.0 } else { self.decoding.temperature },
            top_p: if self.env.is_some() { 1.0 } else { self.decoding.top_p },
            max_len: self.decoding.max_len.unwrap_or(default_max),
            block_size,
            stop_markers: self.decoding.stop_markers.clone(),
        }
    }

    /// Stable content hash of the effective configuration.
    pub fn hash(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(body.as_bytes()))
    }
}

/// FNV-1a, 64-bit. Stable across platforms and runs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_config() {
        let config: RunConfig = toml::from_str("").unwrap();
        assert_eq!(config.search.budget, 16);
        assert_eq!(config.search.width, 2);
        assert_eq!(config.search.block_size, 4096);
        assert_eq!(config.eval.bootstrap_reps, 100);
        assert_eq!(config.collect.n_rollins, 14);
        assert_eq!(config.collect.cuts_per_rollin, 4);
    }

    #[test]
    fn hash_is_stable_and_config_sensitive() {
        let a: RunConfig = toml::from_str("").unwrap();
        let b: RunConfig = toml::from_str("").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c: RunConfig = toml::from_str("[search]\nbudget = 32\nwidth = 2\nblock_size = 4096\ndvts = 1\nguidance = \"value\"\naggregation = \"wmv\"\nseed = 0\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<RunConfig>("[search]\nbudgetx = 1").unwrap_err();
        assert!(err.to_string().contains("budgetx"));
    }
}
