//! Provider-agnostic completion client.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
    /// Transport-level retries after the first attempt.
    pub max_retries: u32,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            model: "gpt-4".into(),
            temperature: 0.0,
            max_output_tokens: 1024,
            timeout_secs: 60,
            max_retries: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("LLM unavailable: {0}")]
    Unavailable(String),
    #[error("LLM request timed out after {0}s")]
    Timeout(u64),
}

/// One-shot text completion. Implementations enforce `config.timeout_secs`,
/// retry at most `config.max_retries` times, and surface every failure.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, config: &LlmConfig) -> Result<String, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, prompt: &str, config: &LlmConfig) -> Result<String, LlmError> {
        (**self).complete(prompt, config)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for std::sync::Arc<T> {
    fn complete(&self, prompt: &str, config: &LlmConfig) -> Result<String, LlmError> {
        (**self).complete(prompt, config)
    }
}

/// A client that always fails; stands in for an unreachable provider.
#[derive(Debug, Clone, Default)]
pub struct OfflineClient;

impl LlmClient for OfflineClient {
    fn complete(&self, _prompt: &str, _config: &LlmConfig) -> Result<String, LlmError> {
        Err(LlmError::Unavailable("no LLM configured".into()))
    }
}

pub const ENV_URL: &str = "PLANVERIFY_LLM_URL";
pub const ENV_KEY: &str = "PLANVERIFY_LLM_KEY";

/// Chat-completion style HTTP client.
///
/// Request body: `{"model", "temperature", "max_tokens", "messages": [{"role":
/// "user", "content": prompt}]}`. The reply text is read from a top-level
/// `text` field, falling back to `choices[0].message.content`.
#[cfg(feature = "live")]
#[derive(Debug, Clone)]
pub struct HttpLlmClient {
    url: String,
    key: String,
}

#[cfg(feature = "live")]
impl HttpLlmClient {
    pub fn new(url: impl Into<String>, key: impl Into<String>) -> Self {
        HttpLlmClient {
            url: url.into(),
            key: key.into(),
        }
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let get = |name: &str| {
            std::env::var(name)
                .ok()
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| LlmError::Unavailable(format!("{name} is not set")))
        };
        Ok(HttpLlmClient::new(get(ENV_URL)?, get(ENV_KEY)?))
    }

    fn attempt(&self, prompt: &str, config: &LlmConfig) -> Result<String, LlmError> {
        use std::time::Duration;

        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        let body = serde_json::json!({
            "model": config.model,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut response = agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => LlmError::Timeout(config.timeout_secs),
                other => LlmError::Unavailable(other.to_string()),
            })?;
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Unavailable(format!("malformed response: {e}")))?;
        value
            .get("text")
            .or_else(|| value.pointer("/choices/0/message/content"))
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::Unavailable("response carries no text field".into()))
    }
}

#[cfg(feature = "live")]
impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str, config: &LlmConfig) -> Result<String, LlmError> {
        let mut last = None;
        for _ in 0..=config.max_retries {
            match self.attempt(prompt, config) {
                Ok(text) => return Ok(text),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

#[cfg(all(test, feature = "live"))]
mod tests {
    use super::*;

    #[test]
    fn unreachable_endpoint_fails_after_bounded_retries() {
        // Port 9 (discard) on localhost is closed in the test sandbox.
        let client = HttpLlmClient::new("http://127.0.0.1:9/v1/chat", "k");
        let config = LlmConfig {
            timeout_secs: 2,
            max_retries: 1,
            ..LlmConfig::default()
        };
        assert!(client.complete("hi", &config).is_err());
    }
}
