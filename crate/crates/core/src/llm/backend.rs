//! Text-completion backends.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::template::TemplateId;
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub tag: TemplateId,
}

impl BackendRequest {
    /// A request with per-template token and stop defaults.
    pub fn new(tag: TemplateId, prompt: String) -> Self {
        let (max_tokens, stop) = match tag {
            TemplateId::PersonaGen => (96, vec!["</div>"]),
            TemplateId::QueryGenPost | TemplateId::QueryGenReply => (192, vec!["###"]),
            TemplateId::PostGen | TemplateId::ReplyGen => (384, vec!["###"]),
        };
        BackendRequest {
            prompt,
            max_tokens,
            stop_sequences: stop.into_iter().map(str::to_string).collect(),
            tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
    pub backend_meta: String,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse>;
}

/// Validates the request and response around a backend call.
pub fn complete(backend: &dyn Backend, request: &BackendRequest) -> Result<BackendResponse> {
    if request.prompt.trim().is_empty() {
        return Err(Error::config("prompt", "must not be empty"));
    }
    let response = backend.complete(request)?;
    if response.text.is_empty() {
        return Err(Error::MalformedResponse(format!(
            "{} returned empty text for {}",
            backend.id(),
            request.tag
        )));
    }
    Ok(response)
}

/// First eight bytes of SHA-256 over the parts, NUL separated.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Short hex digest the mock embeds in bodies to expose the `{Information}` it saw.
pub fn information_digest(information: &str) -> String {
    let digest = Sha256::digest(information.as_bytes());
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

/// Text of a `### Header` section, up to the next section.
fn section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let marker = format!("### {header}\n");
    let start = prompt.find(&marker)? + marker.len();
    let rest = &prompt[start..];
    let end = rest.find("\n\n### ").unwrap_or(rest.len());
    Some(&rest[..end])
}

fn quoted_after<'a>(prompt: &'a str, lead: &str) -> Option<&'a str> {
    let start = prompt.find(lead)? + lead.len();
    let rest = &prompt[start..];
    Some(&rest[..rest.find('"')?])
}

const DEFAULT_DESCRIPTIONS: [&str; 8] = [
    "Office worker who reads news",
    "Retired economist",
    "University student",
    "Small business owner",
    "Financial analyst",
    "High school teacher",
    "Freelance writer",
    "Part-time investor",
];

const STOPWORDS: [&str; 24] = [
    "the", "and", "for", "with", "about", "that", "this", "from", "are", "was", "were", "has",
    "have", "had", "not", "but", "its", "into", "their", "they", "you", "your", "our", "discuss",
];

/// Data driving the mock backend.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    /// Vocabulary for generated queries. When empty, content words of the
    /// prompt's input section are used instead.
    pub query_terms: Vec<String>,
    /// Descriptions for generated personas (at most 30 characters each).
    pub persona_descriptions: Vec<String>,
    /// Upper bound on AND terms per generated query.
    pub max_query_terms: Option<usize>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
    }
}

/// Deterministic offline backend.
///
/// Every completion is a pure function of the request tag, a hash of the
/// prompt, and the script:
/// - persona prompts yield a `user-NNN` name and a scripted description;
/// - query prompts yield exactly ten `- term term` lines;
/// - post and reply prompts yield a one-line body naming the speaker and
///   carrying [`information_digest`] of the prompt's information section.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script }
    }

    fn persona(&self, hash: u64) -> String {
        let name = format!("user-{:03}", hash % 1000);
        let pool: Vec<&str> = if self.script.persona_descriptions.is_empty() {
            DEFAULT_DESCRIPTIONS.to_vec()
        } else {
            self.script.persona_descriptions.iter().map(String::as_str).collect()
        };
        let description = pool[((hash >> 16) % pool.len() as u64) as usize];
        format!(
            "\n{name}</pre> : \n<pre class=\"user-description\" max-length=\"30\">\n{description}</pre>\n</div>"
        )
    }

    fn queries(&self, prompt: &str, hash: u64) -> String {
        let vocabulary: Vec<String> = if self.script.query_terms.is_empty() {
            let input = section(prompt, "Input").unwrap_or(prompt);
            let mut words: Vec<String> = tokenize(input)
                .into_iter()
                .filter(|w| w.chars().count() >= 3 && !STOPWORDS.contains(&w.as_str()))
                .collect();
            words.sort();
            words.dedup();
            if words.is_empty() {
                vec!["news".to_string()]
            } else {
                words
            }
        } else {
            self.script.query_terms.clone()
        };
        let max_terms = self.script.max_query_terms.unwrap_or(2).max(1);
        let mut lines = Vec::with_capacity(10);
        for i in 0..10u64 {
            let h = stable_hash(&[&hash.to_string(), &i.to_string()]);
            let n_terms = 1 + (h % max_terms as u64) as usize;
            let mut terms: Vec<&str> = Vec::new();
            for k in 0..n_terms {
                let pick = stable_hash(&[&h.to_string(), &k.to_string()]) as usize % vocabulary.len();
                let term = vocabulary[pick].as_str();
                if !terms.contains(&term) {
                    terms.push(term);
                }
            }
            lines.push(format!("- {}", terms.join(" ")));
        }
        lines.join("\n")
    }

    fn post(&self, prompt: &str, hash: u64) -> String {
        const OPENERS: [&str; 4] = [
            "Here is my take on",
            "I have been thinking about",
            "Quick thought on",
            "Curious what everyone thinks about",
        ];
        let goal = quoted_after(prompt, "for the purpose of \"").unwrap_or("this topic");
        let info = section(prompt, "Available Information").unwrap_or("");
        let opener = OPENERS[(hash % OPENERS.len() as u64) as usize];
        format!("{opener}: {goal} (info {})", information_digest(info))
    }

    fn reply(&self, prompt: &str, hash: u64) -> String {
        const OPENERS: [&str; 4] = [
            "I see your point",
            "Interesting, but I disagree a little",
            "Thanks for sharing",
            "That matches what I read",
        ];
        let target = prompt
            .rsplit_once("[ReplyTo: ")
            .and_then(|(_, rest)| rest.split_once(']'))
            .map(|(t, _)| t)
            .unwrap_or("everyone");
        let info = section(prompt, "Available Information").unwrap_or("");
        let opener = OPENERS[(hash % OPENERS.len() as u64) as usize];
        format!("@{target} {opener}. (info {})]", information_digest(info))
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let hash = stable_hash(&[request.tag.as_str(), &request.prompt]);
        let text = match request.tag {
            TemplateId::PersonaGen => self.persona(hash),
            TemplateId::QueryGenPost | TemplateId::QueryGenReply => {
                self.queries(&request.prompt, hash)
            }
            TemplateId::PostGen => self.post(&request.prompt, hash),
            TemplateId::ReplyGen => self.reply(&request.prompt, hash),
        };
        Ok(BackendResponse {
            text,
            backend_meta: format!("mock:{hash:016x}"),
        })
    }
}

fn default_token_env() -> String {
    "SNSIM_API_TOKEN".to_string()
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    3
}

fn default_initial_backoff_ms() -> u64 {
    500
}

fn default_max_backoff_ms() -> u64 {
    8_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    /// Environment variable holding a bearer token, if any.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_initial_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_backoff_ms")]
    pub max_backoff_ms: u64,
    /// Extra decoding fields (temperature, top_p, ...) copied into the body.
    /// Empty means the server's own defaults.
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpBackendConfig {
            endpoint: endpoint.into(),
            token_env: default_token_env(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            initial_backoff_ms: default_initial_backoff_ms(),
            max_backoff_ms: default_max_backoff_ms(),
            params: BTreeMap::new(),
        }
    }

    /// Delay before retry number `attempt` (0-based), doubling up to the cap.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    prompt: &'a str,
    max_tokens: u32,
    stop: &'a [String],
    #[serde(flatten)]
    params: &'a BTreeMap<String, serde_json::Value>,
}

/// Completion over HTTP.
///
/// POSTs `{"prompt", "max_tokens", "stop", ...params}` as JSON and reads the
/// first candidate from `choices[0].text`, falling back to a top-level
/// `text` field.
pub struct HttpBackend {
    config: HttpBackendConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            config,
            token,
            agent,
        }
    }

    fn attempt(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let body = CompletionBody {
            prompt: &request.prompt,
            max_tokens: request.max_tokens,
            stop: &request.stop_sequences,
            params: &self.config.params,
        };
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call.send_json(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => Error::Timeout(self.config.timeout_ms),
            other => Error::Transport(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Error::Transport(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Error::MalformedResponse(format!("HTTP {status}: {text}")));
        }
        let json: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::MalformedResponse(e.to_string()))?;
        let completion = json
            .pointer("/choices/0/text")
            .or_else(|| json.get("text"))
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| Error::MalformedResponse("no completion text in response".into()))?;
        Ok(BackendResponse {
            text: completion.to_string(),
            backend_meta: format!("http:{status}"),
        })
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    log::warn!("backend call failed ({e}); retry {} of {}", attempt + 1, self.config.max_retries);
                    thread::sleep(self.config.backoff(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
