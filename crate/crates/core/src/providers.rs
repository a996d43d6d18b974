//! Model providers: live OpenAI-compatible HTTP endpoints and deterministic
//! replay from recorded fixtures, plus the exchange log and cost accounting
//! built on top of it.
//!
//! Every completed call produces exactly one [`LlmExchange`] record; failed
//! calls are recorded by the caller as synthetic exchanges carrying an error
//! tag. Exchanges are keyed by a SHA-256 hash over the exact prompt text,
//! which is also the replay fixture key: any change to prompt construction
//! changes the hash and invalidates stale fixtures loudly instead of
//! replaying the wrong answer.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompting::PromptBundle;

/// Errors surfaced by providers.
#[derive(Debug, Error)]
pub enum ProviderError {
    /// Authentication is broken (missing key material, or the endpoint
    /// answered 401/403). Never retried: repeating a bad credential cannot
    /// succeed.
    #[error("provider {provider}: authentication failure: {detail}")]
    AuthFailure { provider: String, detail: String },
    /// The endpoint kept failing after all retries, or failed in a way that
    /// retrying cannot fix.
    #[error("provider {provider}: unavailable after {attempts} attempt(s): {detail}")]
    Unavailable {
        provider: String,
        attempts: u32,
        detail: String,
    },
    /// The endpoint returned 200 with a body that is not a chat completion.
    #[error("provider {provider}: malformed response: {detail}")]
    BadResponse { provider: String, detail: String },
    /// Replay mode has no fixture recorded for this prompt hash.
    #[error("provider {provider}: no replay fixture for prompt hash {hash}")]
    FixtureMiss { provider: String, hash: String },
    /// A fixture file exists but cannot be read or parsed.
    #[error("replay fixture {path}: {detail}")]
    BadFixture { path: PathBuf, detail: String },
}

/// Static configuration for one live provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Name used in provenance, logs, and replay directory layout.
    pub name: String,
    /// OpenAI-compatible API root, e.g. `https://api.example.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key. Empty means the endpoint
    /// needs no authentication (e.g. a local server).
    #[serde(default)]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Retries after the first attempt, so `max_retries = 4` allows five
    /// attempts in total.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Base delay for exponential backoff between attempts.
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    /// Windows this provider will work on concurrently in the state phase.
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
}

fn default_temperature() -> f64 {
    0.2
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_max_retries() -> u32 {
    4
}
fn default_backoff_base_ms() -> u64 {
    1000
}
fn default_max_concurrency() -> usize {
    4
}

/// One request/response pair with a provider, as recorded in the exchange
/// log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub provider: String,
    /// Hex SHA-256 over `system_text + "\n" + user_text`.
    pub prompt_sha256: String,
    pub response_text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Total wall time across all attempts for this call.
    pub latency_ms: u64,
    /// Attempt number that produced the response (1 = first try). Zero marks
    /// a synthetic record for a call that never succeeded.
    pub attempt: u32,
    /// Error tag for failed calls; `None` on success.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Hash identifying a prompt: hex SHA-256 over the system text, a newline,
/// and the user text. Serves as the replay fixture key.
#[must_use]
pub fn prompt_sha256(system_text: &str, user_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(system_text.as_bytes());
    hasher.update(b"\n");
    hasher.update(user_text.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// A completion backend: live HTTP or recorded replay.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    /// Runs one completion for the bundle. Implementations must be safe to
    /// call from multiple threads at once.
    fn complete(&self, bundle: &PromptBundle) -> Result<LlmExchange, ProviderError>;
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

/// Live provider speaking the OpenAI chat-completions wire format.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish_non_exhaustive()
    }
}

impl HttpProvider {
    /// Builds the provider, resolving the API key from the configured
    /// environment variable. A missing or empty key is an authentication
    /// failure before any network traffic happens.
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let api_key = if config.api_key_env.is_empty() {
            None
        } else {
            match std::env::var(&config.api_key_env) {
                Ok(value) if !value.trim().is_empty() => Some(value),
                _ => {
                    return Err(ProviderError::AuthFailure {
                        provider: config.name.clone(),
                        detail: format!(
                            "environment variable {} is not set or empty",
                            config.api_key_env
                        ),
                    })
                }
            }
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Unavailable {
                provider: config.name.clone(),
                attempts: 0,
                detail: format!("cannot build HTTP client: {e}"),
            })?;
        Ok(HttpProvider {
            config,
            api_key,
            client,
        })
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn backoff_delay(&self, attempt: u32) -> Duration {
        let base = self
            .config
            .backoff_base_ms
            .saturating_mul(1u64 << (attempt - 1).min(16));
        // +/-20% jitter so synchronized clients do not stampede.
        let factor = rand::thread_rng().gen_range(0.8..=1.2);
        Duration::from_millis((base as f64 * factor).round() as u64)
    }
}

/// Whitespace-token estimate used when an endpoint omits usage accounting.
fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

enum AttemptOutcome {
    Success {
        text: String,
        usage: Option<ChatUsage>,
    },
    Retryable(String),
    Fatal(ProviderError),
}

impl HttpProvider {
    fn one_attempt(&self, body: &ChatRequest<'_>) -> AttemptOutcome {
        let mut request = self
            .client
            .post(self.endpoint())
            .header("Content-Type", "application/json")
            .json(body);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) => {
                // Transport-level failures (refused connections, resets,
                // timeouts) are all retryable.
                return AttemptOutcome::Retryable(format!("transport error: {e}"));
            }
        };
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return AttemptOutcome::Fatal(ProviderError::AuthFailure {
                provider: self.config.name.clone(),
                detail: format!("endpoint returned {status}"),
            });
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return AttemptOutcome::Retryable(format!("endpoint returned {status}"));
        }
        if !status.is_success() {
            return AttemptOutcome::Fatal(ProviderError::Unavailable {
                provider: self.config.name.clone(),
                attempts: 0, // filled by the caller
                detail: format!("endpoint returned {status}"),
            });
        }
        let parsed: ChatResponse = match response.json() {
            Ok(p) => p,
            Err(e) => {
                return AttemptOutcome::Fatal(ProviderError::BadResponse {
                    provider: self.config.name.clone(),
                    detail: format!("not a chat completion: {e}"),
                })
            }
        };
        match parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
        {
            Some(text) => AttemptOutcome::Success {
                text,
                usage: parsed.usage,
            },
            None => AttemptOutcome::Fatal(ProviderError::BadResponse {
                provider: self.config.name.clone(),
                detail: "response carries no message content".to_string(),
            }),
        }
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<LlmExchange, ProviderError> {
        let hash = prompt_sha256(&bundle.system_text, &bundle.user_text);
        let body = ChatRequest {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages: vec![
                ChatMessage {
                    role: "system",
                    content: &bundle.system_text,
                },
                ChatMessage {
                    role: "user",
                    content: &bundle.user_text,
                },
            ],
        };
        let started = Instant::now();
        let total_attempts = self.config.max_retries + 1;
        let mut last_detail = String::new();
        for attempt in 1..=total_attempts {
            match self.one_attempt(&body) {
                AttemptOutcome::Success { text, usage } => {
                    let (input_tokens, output_tokens) = match usage {
                        Some(ChatUsage {
                            prompt_tokens: Some(i),
                            completion_tokens: Some(o),
                        }) => (i, o),
                        _ => (
                            estimate_tokens(&bundle.system_text)
                                + estimate_tokens(&bundle.user_text),
                            estimate_tokens(&text),
                        ),
                    };
                    return Ok(LlmExchange {
                        provider: self.config.name.clone(),
                        prompt_sha256: hash,
                        response_text: text,
                        input_tokens,
                        output_tokens,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempt,
                        error: None,
                    });
                }
                AttemptOutcome::Fatal(mut err) => {
                    if let ProviderError::Unavailable { attempts, .. } = &mut err {
                        *attempts = attempt;
                    }
                    return Err(err);
                }
                AttemptOutcome::Retryable(detail) => {
                    log::warn!(
                        "provider {} attempt {attempt}/{total_attempts} failed: {detail}",
                        self.config.name
                    );
                    last_detail = detail;
                    if attempt < total_attempts {
                        std::thread::sleep(self.backoff_delay(attempt));
                    }
                }
            }
        }
        Err(ProviderError::Unavailable {
            provider: self.config.name.clone(),
            attempts: total_attempts,
            detail: last_detail,
        })
    }
}

/// On-disk shape of one replay fixture: `<dir>/<prompt_sha256>.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayFixture {
    pub response_text: String,
    #[serde(default)]
    pub input_tokens: u64,
    #[serde(default)]
    pub output_tokens: u64,
}

/// Deterministic provider that answers from recorded fixtures instead of the
/// network. Used for replayable runs and offline tests.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    name: String,
    dir: PathBuf,
}

impl ReplayProvider {
    #[must_use]
    pub fn new(name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        ReplayProvider {
            name: name.into(),
            dir: dir.into(),
        }
    }

    /// Writes a fixture for the given prompt hash (used by fixture
    /// recorders).
    pub fn store(dir: &Path, hash: &str, fixture: &ReplayFixture) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let payload = serde_json::to_vec_pretty(fixture)?;
        let mut data = payload;
        data.push(b'\n');
        std::fs::write(dir.join(format!("{hash}.json")), data)
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, bundle: &PromptBundle) -> Result<LlmExchange, ProviderError> {
        let hash = prompt_sha256(&bundle.system_text, &bundle.user_text);
        let path = self.dir.join(format!("{hash}.json"));
        let raw = match std::fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProviderError::FixtureMiss {
                    provider: self.name.clone(),
                    hash,
                })
            }
            Err(e) => {
                return Err(ProviderError::BadFixture {
                    path,
                    detail: e.to_string(),
                })
            }
        };
        let fixture: ReplayFixture =
            serde_json::from_str(&raw).map_err(|e| ProviderError::BadFixture {
                path: path.clone(),
                detail: e.to_string(),
            })?;
        Ok(LlmExchange {
            provider: self.name.clone(),
            prompt_sha256: hash,
            response_text: fixture.response_text,
            input_tokens: fixture.input_tokens,
            output_tokens: fixture.output_tokens,
            latency_ms: 0,
            attempt: 1,
            error: None,
        })
    }
}

/// Thread-safe, append-only record of every exchange in a run.
#[derive(Debug, Default)]
pub struct ExchangeLog {
    entries: Mutex<Vec<LlmExchange>>,
}

impl ExchangeLog {
    #[must_use]
    pub fn new() -> Self {
        ExchangeLog::default()
    }

    pub fn record(&self, exchange: LlmExchange) {
        self.entries
            .lock()
            .expect("exchange log lock poisoned")
            .push(exchange);
    }

    /// Copy of everything recorded so far, in recording order.
    #[must_use]
    pub fn snapshot(&self) -> Vec<LlmExchange> {
        self.entries
            .lock()
            .expect("exchange log lock poisoned")
            .clone()
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.entries
            .lock()
            .expect("exchange log lock poisoned")
            .len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the log as JSON Lines, one exchange per line.
    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for exchange in self.snapshot() {
            serde_json::to_writer(&mut file, &exchange)?;
            file.write_all(b"\n")?;
        }
        file.flush()
    }

    /// Reads a JSON Lines exchange log back; blank lines are skipped.
    pub fn read_jsonl(path: &Path) -> std::io::Result<Vec<LlmExchange>> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut out = Vec::new();
        for (idx, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let exchange: LlmExchange = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {e}", idx + 1),
                )
            })?;
            out.push(exchange);
        }
        Ok(out)
    }
}

/// Per-provider cost aggregate over an exchange log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub provider: String,
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Sum of call latencies, in minutes.
    pub wall_minutes: f64,
}

/// Aggregates exchanges into per-provider rows, sorted by provider name.
/// Failed calls count toward `calls` and wall time but carry no tokens.
#[must_use]
pub fn cost_report(exchanges: &[LlmExchange]) -> Vec<CostRow> {
    let mut rows: BTreeMap<&str, CostRow> = BTreeMap::new();
    for ex in exchanges {
        let row = rows.entry(ex.provider.as_str()).or_insert_with(|| CostRow {
            provider: ex.provider.clone(),
            calls: 0,
            input_tokens: 0,
            output_tokens: 0,
            wall_minutes: 0.0,
        });
        row.calls += 1;
        row.input_tokens += ex.input_tokens;
        row.output_tokens += ex.output_tokens;
        row.wall_minutes += ex.latency_ms as f64 / 60_000.0;
    }
    rows.into_values().collect()
}

/// Renders cost rows as an aligned text table with a TOTAL line.
#[must_use]
pub fn render_cost_table(rows: &[CostRow]) -> String {
    let mut width = "provider".len();
    for row in rows {
        width = width.max(row.provider.len());
    }
    width = width.max("TOTAL".len());
    let mut out = format!(
        "{:<width$}  {:>8}  {:>12}  {:>13}  {:>12}\n",
        "provider", "calls", "input tokens", "output tokens", "wall minutes"
    );
    let mut total = CostRow {
        provider: "TOTAL".to_string(),
        calls: 0,
        input_tokens: 0,
        output_tokens: 0,
        wall_minutes: 0.0,
    };
    for row in rows {
        total.calls += row.calls;
        total.input_tokens += row.input_tokens;
        total.output_tokens += row.output_tokens;
        total.wall_minutes += row.wall_minutes;
        out.push_str(&format!(
            "{:<width$}  {:>8}  {:>12}  {:>13}  {:>12.2}\n",
            row.provider, row.calls, row.input_tokens, row.output_tokens, row.wall_minutes
        ));
    }
    out.push_str(&format!(
        "{:<width$}  {:>8}  {:>12}  {:>13}  {:>12.2}\n",
        total.provider, total.calls, total.input_tokens, total.output_tokens, total.wall_minutes
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::Phase;
    use std::io::Read;
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn bundle(system: &str, user: &str) -> PromptBundle {
        PromptBundle {
            phase: Phase::StateExtraction,
            window_id: 0,
            system_text: system.to_string(),
            user_text: user.to_string(),
            context_digest: String::new(),
            resolved_refs: vec![],
        }
    }

    #[test]
    fn prompt_hash_matches_known_answer() {
        // sha256 of the bytes "sys\nuser", frozen from an external tool.
        assert_eq!(
            prompt_sha256("sys", "user"),
            "441e447877ebdddbb30279badd4a8a005594eff813d6b0c10d481bafe3c14491"
        );
        assert_eq!(
            prompt_sha256("You are a protocol analyst.", "Extract now."),
            "9fb0b15a95c7181fb0cc8c0f86a41c83d773ee06ebbc331f372ff4fcbdbabf9c"
        );
    }

    #[test]
    fn prompt_hash_separates_system_from_user() {
        // The separator prevents ("ab", "c") and ("a", "bc") colliding.
        assert_ne!(prompt_sha256("ab", "c"), prompt_sha256("a", "bc"));
    }

    /// Minimal scripted HTTP server: answers each accepted connection with
    /// the next scripted (status, body) pair, then closes it.
    fn mock_server(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let hits_inner = Arc::clone(&hits);
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = match listener.accept() {
                    Ok(pair) => pair,
                    Err(_) => return,
                };
                hits_inner.fetch_add(1, Ordering::SeqCst);
                // Read headers, then the content-length body.
                let mut buf = Vec::new();
                let mut byte = [0u8; 1];
                while !buf.ends_with(b"\r\n\r\n") {
                    match stream.read(&mut byte) {
                        Ok(0) => break,
                        Ok(_) => buf.push(byte[0]),
                        Err(_) => break,
                    }
                }
                let headers = String::from_utf8_lossy(&buf).to_string();
                let content_length = headers
                    .lines()
                    .find_map(|l| {
                        let (name, value) = l.split_once(':')?;
                        name.eq_ignore_ascii_case("content-length")
                            .then(|| value.trim().parse::<usize>().ok())?
                    })
                    .unwrap_or(0);
                let mut body_buf = vec![0u8; content_length];
                let mut read = 0;
                while read < content_length {
                    match stream.read(&mut body_buf[read..]) {
                        Ok(0) => break,
                        Ok(n) => read += n,
                        Err(_) => break,
                    }
                }
                let reason = match status {
                    200 => "OK",
                    401 => "Unauthorized",
                    404 => "Not Found",
                    429 => "Too Many Requests",
                    _ => "Error",
                };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = std::io::Write::write_all(&mut stream, response.as_bytes());
            }
        });
        (base_url, hits)
    }

    fn chat_body(content: &str, usage: Option<(u64, u64)>) -> String {
        let usage_part = match usage {
            Some((i, o)) => format!(r#","usage":{{"prompt_tokens":{i},"completion_tokens":{o}}}"#),
            None => String::new(),
        };
        format!(
            r#"{{"choices":[{{"message":{{"role":"assistant","content":{}}}}}]{usage_part}}}"#,
            serde_json::to_string(content).unwrap()
        )
    }

    fn config(base_url: &str, max_retries: u32) -> ProviderConfig {
        ProviderConfig {
            name: "mock".to_string(),
            base_url: base_url.to_string(),
            model: "test-model".to_string(),
            api_key_env: String::new(),
            temperature: 0.2,
            timeout_secs: 5,
            max_retries,
            backoff_base_ms: 1,
            max_concurrency: 2,
        }
    }

    #[test]
    fn success_on_first_attempt_uses_reported_usage() {
        let (url, hits) = mock_server(vec![(200, chat_body("[]", Some((42, 7))))]);
        let provider = HttpProvider::new(config(&url, 4)).unwrap();
        let exchange = provider.complete(&bundle("sys", "user")).unwrap();
        assert_eq!(exchange.attempt, 1);
        assert_eq!(exchange.response_text, "[]");
        assert_eq!(exchange.input_tokens, 42);
        assert_eq!(exchange.output_tokens, 7);
        assert!(exchange.error.is_none());
        assert_eq!(hits.load(Ordering::SeqCst), 1);
        assert_eq!(
            exchange.prompt_sha256,
            "441e447877ebdddbb30279badd4a8a005594eff813d6b0c10d481bafe3c14491"
        );
    }

    #[test]
    fn missing_usage_falls_back_to_word_estimate() {
        let (url, _) = mock_server(vec![(200, chat_body("one two three", None))]);
        let provider = HttpProvider::new(config(&url, 0)).unwrap();
        let exchange = provider.complete(&bundle("a b", "c d e")).unwrap();
        assert_eq!(exchange.input_tokens, 5);
        assert_eq!(exchange.output_tokens, 3);
    }

    #[test]
    fn server_errors_are_retried_until_success() {
        let (url, hits) = mock_server(vec![
            (500, "oops".to_string()),
            (500, "oops".to_string()),
            (200, chat_body("ok", Some((1, 1)))),
        ]);
        let provider = HttpProvider::new(config(&url, 4)).unwrap();
        let exchange = provider.complete(&bundle("s", "u")).unwrap();
        assert_eq!(exchange.attempt, 3);
        assert_eq!(exchange.response_text, "ok");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn rate_limiting_is_retried() {
        let (url, hits) = mock_server(vec![
            (429, r#"{"error":"slow down"}"#.to_string()),
            (200, chat_body("ok", Some((1, 1)))),
        ]);
        let provider = HttpProvider::new(config(&url, 4)).unwrap();
        let exchange = provider.complete(&bundle("s", "u")).unwrap();
        assert_eq!(exchange.attempt, 2);
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn retries_exhaust_into_unavailable() {
        let (url, hits) = mock_server(vec![
            (500, "x".to_string()),
            (500, "x".to_string()),
            (500, "x".to_string()),
        ]);
        let provider = HttpProvider::new(config(&url, 2)).unwrap();
        let err = provider.complete(&bundle("s", "u")).unwrap_err();
        match err {
            ProviderError::Unavailable { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected Unavailable, got {other:?}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn auth_rejection_is_never_retried() {
        let (url, hits) = mock_server(vec![
            (401, r#"{"error":"bad key"}"#.to_string()),
            (200, chat_body("should never be reached", None)),
        ]);
        let provider = HttpProvider::new(config(&url, 4)).unwrap();
        let err = provider.complete(&bundle("s", "u")).unwrap_err();
        assert!(matches!(err, ProviderError::AuthFailure { .. }));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn client_errors_other_than_auth_fail_without_retry() {
        let (url, hits) = mock_server(vec![(404, "nope".to_string())]);
        let provider = HttpProvider::new(config(&url, 4)).unwrap();
        let err = provider.complete(&bundle("s", "u")).unwrap_err();
        match err {
            ProviderError::Unavailable { attempts, .. } => assert_eq!(attempts, 1),
            other => panic!("expected Unavailable, got {other:?}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn missing_api_key_env_fails_before_any_network() {
        let mut cfg = config("http://127.0.0.1:1/v1", 4);
        cfg.api_key_env = "SPECFSM_TEST_KEY_THAT_DOES_NOT_EXIST".to_string();
        let err = HttpProvider::new(cfg).unwrap_err();
        assert!(matches!(err, ProviderError::AuthFailure { .. }));
    }

    #[test]
    fn malformed_success_body_is_a_bad_response() {
        let (url, _) = mock_server(vec![(200, r#"{"not":"a completion"}"#.to_string())]);
        let provider = HttpProvider::new(config(&url, 4)).unwrap();
        let err = provider.complete(&bundle("s", "u")).unwrap_err();
        assert!(matches!(err, ProviderError::BadResponse { .. }));
    }

    #[test]
    fn replay_round_trips_and_reports_misses() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle("sys", "user");
        let hash = prompt_sha256(&b.system_text, &b.user_text);
        ReplayProvider::store(
            dir.path(),
            &hash,
            &ReplayFixture {
                response_text: "recorded".to_string(),
                input_tokens: 10,
                output_tokens: 2,
            },
        )
        .unwrap();
        let provider = ReplayProvider::new("replay", dir.path());
        let exchange = provider.complete(&b).unwrap();
        assert_eq!(exchange.response_text, "recorded");
        assert_eq!(exchange.input_tokens, 10);
        assert_eq!(exchange.attempt, 1);
        assert_eq!(exchange.latency_ms, 0);

        let other = bundle("sys", "different");
        let err = provider.complete(&other).unwrap_err();
        match err {
            ProviderError::FixtureMiss { hash: missing, .. } => {
                assert_eq!(missing, prompt_sha256("sys", "different"));
            }
            other => panic!("expected FixtureMiss, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_fixture_is_reported_with_its_path() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle("sys", "user");
        let hash = prompt_sha256(&b.system_text, &b.user_text);
        std::fs::write(dir.path().join(format!("{hash}.json")), "{broken").unwrap();
        let provider = ReplayProvider::new("replay", dir.path());
        let err = provider.complete(&b).unwrap_err();
        assert!(matches!(err, ProviderError::BadFixture { .. }));
    }

    #[test]
    fn exchange_log_round_trips_jsonl() {
        let log = ExchangeLog::new();
        log.record(LlmExchange {
            provider: "alpha".to_string(),
            prompt_sha256: "h1".to_string(),
            response_text: "[]".to_string(),
            input_tokens: 5,
            output_tokens: 1,
            latency_ms: 120,
            attempt: 1,
            error: None,
        });
        log.record(LlmExchange {
            provider: "bravo".to_string(),
            prompt_sha256: "h2".to_string(),
            response_text: String::new(),
            input_tokens: 0,
            output_tokens: 0,
            latency_ms: 0,
            attempt: 0,
            error: Some("unavailable".to_string()),
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        log.write_jsonl(&path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2, "one record per call");

        let back = ExchangeLog::read_jsonl(&path).unwrap();
        assert_eq!(back, log.snapshot());
        assert_eq!(back[1].error.as_deref(), Some("unavailable"));
    }

    #[test]
    fn log_can_be_written_from_many_threads() {
        let log = Arc::new(ExchangeLog::new());
        let mut handles = Vec::new();
        for t in 0..8 {
            let log = Arc::clone(&log);
            handles.push(std::thread::spawn(move || {
                for i in 0..50 {
                    log.record(LlmExchange {
                        provider: format!("p{t}"),
                        prompt_sha256: format!("{t}-{i}"),
                        response_text: String::new(),
                        input_tokens: 1,
                        output_tokens: 1,
                        latency_ms: 1,
                        attempt: 1,
                        error: None,
                    });
                }
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(log.len(), 400);
    }

    #[test]
    fn cost_report_groups_by_provider() {
        let exchanges = vec![
            LlmExchange {
                provider: "beta".to_string(),
                prompt_sha256: "a".to_string(),
                response_text: String::new(),
                input_tokens: 100,
                output_tokens: 10,
                latency_ms: 30_000,
                attempt: 1,
                error: None,
            },
            LlmExchange {
                provider: "alpha".to_string(),
                prompt_sha256: "b".to_string(),
                response_text: String::new(),
                input_tokens: 50,
                output_tokens: 5,
                latency_ms: 60_000,
                attempt: 1,
                error: None,
            },
            LlmExchange {
                provider: "beta".to_string(),
                prompt_sha256: "c".to_string(),
                response_text: String::new(),
                input_tokens: 200,
                output_tokens: 20,
                latency_ms: 30_000,
                attempt: 2,
                error: None,
            },
        ];
        let rows = cost_report(&exchanges);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].provider, "alpha");
        assert_eq!(rows[0].calls, 1);
        assert!((rows[0].wall_minutes - 1.0).abs() < 1e-9);
        assert_eq!(rows[1].provider, "beta");
        assert_eq!(rows[1].calls, 2);
        assert_eq!(rows[1].input_tokens, 300);
        assert_eq!(rows[1].output_tokens, 30);
        assert!((rows[1].wall_minutes - 1.0).abs() < 1e-9);

        let table = render_cost_table(&rows);
        assert!(table.contains("provider"));
        assert!(table.contains("TOTAL"));
        assert!(table.lines().count() == 4);
        let total_line = table.lines().last().unwrap();
        assert!(
            total_line.contains('3'),
            "total calls present: {total_line}"
        );
    }
}
