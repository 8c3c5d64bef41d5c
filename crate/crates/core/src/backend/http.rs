//! Minimal chat endpoint client.
//!
//! POSTs `{"system": .., "user": .., "temperature": ..}` to the configured URL
//! and expects `{"text": ..}` back. Vendor-specific schemas belong in a proxy
//! in front of this contract.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub base_url: String,
    /// Environment variable holding the bearer token, if any.
    pub token_env: Option<String>,
    pub timeout_secs: f64,
    /// Transport-level retries after the first attempt.
    pub retries: u32,
    pub backoff_initial_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080/v1/complete".into(),
            token_env: Some("PAIREVO_API_TOKEN".into()),
            timeout_secs: 600.0,
            retries: 2,
            backoff_initial_ms: 1000,
        }
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    system: Option<&'a str>,
    user: &'a str,
    temperature: f64,
}

#[derive(Deserialize)]
struct ResponseBody {
    text: String,
}

pub struct HttpBackend {
    client: Client,
    config: HttpConfig,
    token: Option<String>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let token = config
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|t| !t.is_empty());
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs.max(0.001)))
            .build()
            .map_err(|e| BackendError {
                message: format!("failed to build HTTP client: {e}"),
                attempts: 0,
            })?;
        Ok(Self {
            client,
            config,
            token,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, (bool, String)> {
        let body = RequestBody {
            system: request.system_prompt.as_deref(),
            user: &request.user_prompt,
            temperature: request.temperature,
        };
        let mut builder = self.client.post(&self.config.base_url).json(&body);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| (true, e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS;
            return Err((retryable, format!("HTTP {status}")));
        }
        response
            .json::<ResponseBody>()
            .map(|r| r.text)
            .map_err(|e| (true, format!("malformed response body: {e}")))
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut attempts = 0;
        let mut backoff = Duration::from_millis(self.config.backoff_initial_ms);
        loop {
            attempts += 1;
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err((retryable, message)) => {
                    if !retryable || attempts > self.config.retries {
                        return Err(BackendError { message, attempts });
                    }
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        }
    }
}
