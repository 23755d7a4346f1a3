//! HTTP backends: an OpenAI-compatible completions client and a scalar
//! scorer client.
//!
//! Responses are kept as text; token counts come from the endpoint's
//! reported usage when available, otherwise a chars/4 estimate flagged in
//! the block result. Transport failures and timeouts retry with bounded
//! exponential backoff; each request carries independent retry state, so
//! the client can serve any number of concurrent callers up to the
//! configured parallelism.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::generator::{BlockResult, FinishReason, Generator, GeneratorConfig, GeneratorError};
use crate::scorer::{Scorer, ScorerError};
use crate::types::{estimate_text_tokens, Sequence};

/// Environment variable read for endpoint credentials.
pub const API_KEY_ENV: &str = "VGS_API_KEY";

/// Default instruction wrapper applied by `format_prompt`.
pub const PROMPT_TEMPLATE_SUFFIX: &str =
    " Please think step-by-step and put your final answer within \\boxed{}.";

/// Wrap a raw problem statement in the completion prompt template.
pub fn format_prompt(problem: &str) -> String {
    format!(
        "<|begin_of_sentence|><|User|>{problem}{PROMPT_TEMPLATE_SUFFIX}<|Assistant|><think>\n"
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Full URL of the completions (or scoring) endpoint.
    pub endpoint: String,
    pub model: String,
    /// Bearer token; usually injected from `VGS_API_KEY`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub timeout_ms: u64,
    /// Upper bound on concurrent in-flight requests the caller may issue.
    pub parallelism: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            max_retries: 3,
            initial_backoff_ms: 250,
            timeout_ms: 120_000,
            parallelism: 4,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
    top_p: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    stop: Vec<String>,
    seed: u64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    completion_tokens: Option<u64>,
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

enum Attempt<T> {
    Ok(T),
    Retry(GeneratorError),
    Fatal(GeneratorError),
}

/// POST a JSON body with bounded exponential-backoff retries. Backoff
/// doubles per attempt starting at `initial_backoff_ms`.
fn post_with_retries<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    config: &HttpConfig,
    body: &Req,
) -> Result<Resp, GeneratorError> {
    let mut backoff = config.initial_backoff_ms;
    let attempts = config.max_retries + 1;
    let mut last_err = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(backoff));
            backoff = backoff.saturating_mul(2);
        }
        match post_once(client, config, body) {
            Attempt::Ok(resp) => return Ok(resp),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(e) => last_err = Some(e),
        }
    }
    match last_err {
        Some(GeneratorError::Timeout { .. }) => Err(GeneratorError::Timeout { attempts }),
        Some(e) => Err(e),
        None => unreachable!("at least one attempt runs"),
    }
}

fn post_once<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    config: &HttpConfig,
    body: &Req,
) -> Attempt<Resp> {
    let mut req = client.post(&config.endpoint).json(body);
    if let Some(key) = &config.api_key {
        req = req.bearer_auth(key);
    }
    let resp = match req.send() {
        Ok(r) => r,
        Err(e) if e.is_timeout() => {
            return Attempt::Retry(GeneratorError::Timeout { attempts: 1 });
        }
        Err(e) => {
            return Attempt::Retry(GeneratorError::Transport {
                status: None,
                retryable: true,
                message: e.to_string(),
            });
        }
    };
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        let message = resp.text().unwrap_or_default();
        let err = GeneratorError::Transport {
            status: Some(status),
            retryable: retryable_status(status),
            message,
        };
        return if retryable_status(status) { Attempt::Retry(err) } else { Attempt::Fatal(err) };
    }
    match resp.json::<Resp>() {
        Ok(parsed) => Attempt::Ok(parsed),
        Err(e) => Attempt::Fatal(GeneratorError::Transport {
            status: Some(status),
            retryable: false,
            message: format!("malformed response body: {e}"),
        }),
    }
}

/// OpenAI-compatible completions backend. Sequences are text end to end.
pub struct HttpGenerator {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    name: String,
}

impl HttpGenerator {
    pub fn new(config: HttpConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .expect("client builds");
        let name = format!("http:{}", config.model);
        HttpGenerator { config, client, name }
    }
}

impl Generator for HttpGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn sample_block(
        &self,
        prefix: &Sequence,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<BlockResult, GeneratorError> {
        let text = prefix
            .as_text()
            .ok_or_else(|| GeneratorError::InvalidState("http prefix must be text".into()))?;
        let used = prefix.token_len();
        if used >= config.max_len {
            return Err(GeneratorError::InvalidState(format!(
                "prefix length {used} already at max_len {}",
                config.max_len
            )));
        }
        let max_tokens = config.block_size.min(config.max_len - used);
        let request = CompletionRequest {
            model: &self.config.model,
            prompt: text,
            max_tokens,
            temperature: config.temperature,
            top_p: config.top_p,
            stop: config.stop_markers.clone(),
            seed,
        };
        let resp: CompletionResponse = post_with_retries(&self.client, &self.config, &request)?;
        let choice = resp.choices.into_iter().next().ok_or_else(|| GeneratorError::Transport {
            status: None,
            retryable: false,
            message: "no choices in completion response".into(),
        })?;
        let reported = resp.usage.and_then(|u| u.completion_tokens);
        let token_len = reported.map(|t| t as usize).unwrap_or_else(|| {
            estimate_text_tokens(&choice.text)
        });
        let cumulative = used + token_len;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("stop") if !config.stop_markers.is_empty()
                && config.stop_markers.iter().any(|m| choice.text.ends_with(m)) =>
            {
                Some(FinishReason::StopMarker)
            }
            Some("stop") => Some(FinishReason::Terminal),
            // "length" means the block filled; only the overall cap finishes
            // the response (it then labels as incomplete).
            Some("length") | None => {
                if cumulative >= config.max_len {
                    Some(FinishReason::LengthCap)
                } else {
                    None
                }
            }
            Some(other) => {
                return Err(GeneratorError::Transport {
                    status: None,
                    retryable: false,
                    message: format!("unknown finish_reason {other:?}"),
                })
            }
        };
        Ok(BlockResult {
            tokens: Sequence::Text(choice.text),
            finished: finish_reason.is_some(),
            finish_reason,
            token_len,
            token_len_estimated: reported.is_none(),
        })
    }

    fn extract_answer(&self, sequence: &Sequence) -> Option<String> {
        let text = sequence.as_text()?;
        crate::answer::extract_boxed(text).ok()?.pop()
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prefix: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

/// Remote scorer: POST {prefix} -> {score}. Out-of-range scores are clamped
/// to [0, 1] and counted.
pub struct HttpScorer {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    name: String,
    clamp_warnings: AtomicU64,
}

impl HttpScorer {
    pub fn new(config: HttpConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .expect("client builds");
        let name = format!("http-scorer:{}", config.model);
        HttpScorer { config, client, name, clamp_warnings: AtomicU64::new(0) }
    }

    /// Number of responses whose score fell outside [0, 1] and was clamped.
    pub fn clamp_warnings(&self) -> u64 {
        self.clamp_warnings.load(Ordering::Relaxed)
    }
}

impl Scorer for HttpScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64, ScorerError> {
        let (p, r) = match (prompt.as_text(), response.as_text()) {
            (Some(p), Some(r)) => (p, r),
            _ => return Err(ScorerError::InvalidInput("http scorer needs text".into())),
        };
        let prefix = format!("{p}{r}");
        let request = ScoreRequest { prefix: &prefix };
        let resp: ScoreResponse = post_with_retries(&self.client, &self.config, &request)
            .map_err(|e| match e {
                GeneratorError::Timeout { attempts } => ScorerError::Timeout { attempts },
                GeneratorError::Transport { status, retryable, message } => {
                    ScorerError::Transport { status, retryable, message }
                }
                GeneratorError::InvalidState(m) => ScorerError::InvalidInput(m),
            })?;
        if !(0.0..=1.0).contains(&resp.score) {
            self.clamp_warnings.fetch_add(1, Ordering::Relaxed);
        }
        Ok(resp.score.clamp(0.0, 1.0))
    }
}
