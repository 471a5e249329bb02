//! Blocking client for a remote generation server.
//!
//! Wire protocol, JSON bodies throughout:
//!
//! ```text
//! POST /v1/headline {"temperature", "genre", "seed"}                           -> {"text"}
//! POST /v1/story    {"headline", "temperature", "genre_code", "links_code", "seed"} -> {"text"}
//! GET  /v1/health                                                             -> {"status": "ok"}
//! ```

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};
use rand::RngCore;
use rumour_mill::textgen::{BackendError, GenerationBackend, Health};
use rumour_mill::{ControlSpec, Genre};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use ureq::Agent;

pub const HEALTH_TIMEOUT: Duration = Duration::from_millis(1000);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("invalid remote config: {0}")]
    InvalidConfig(String),
}

impl From<RemoteError> for BackendError {
    fn from(e: RemoteError) -> Self {
        match e {
            RemoteError::ProtocolError(m) => BackendError::Protocol(m),
            other => BackendError::Unavailable(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteBackendConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub health_interval_ms: u64,
}

impl Default for RemoteBackendConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8700".into(),
            timeout_ms: 8000,
            retries: 1,
            health_interval_ms: 10_000,
        }
    }
}

impl RemoteBackendConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.timeout_ms == 0 {
            return Err(RemoteError::InvalidConfig("timeout_ms must be positive".into()));
        }
        if self.health_interval_ms == 0 {
            return Err(RemoteError::InvalidConfig("health_interval_ms must be positive".into()));
        }
        if !self.base_url.starts_with("http://") {
            return Err(RemoteError::InvalidConfig(format!(
                "base_url must be an http:// URL, got {:?}",
                self.base_url
            )));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineRequest {
    pub temperature: f64,
    pub genre: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryRequest {
    pub headline: String,
    pub temperature: f64,
    pub genre_code: String,
    pub links_code: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Largest seed the client sends; keeps seeds exact in every JSON parser.
pub const MAX_WIRE_SEED: u64 = (1 << 53) - 1;

fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

enum Attempt {
    Retryable(String),
    Fatal(RemoteError),
}

fn post_once(agent: &Agent, url: &str, body: &str) -> Result<String, Attempt> {
    let mut resp = agent
        .post(url)
        .header("content-type", "application/json")
        .send(body)
        .map_err(|e| Attempt::Retryable(format!("{url}: {e}")))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Attempt::Retryable(format!("{url}: reading body: {e}")))?;
    match status {
        200 => {
            let parsed: TextResponse = serde_json::from_str(&text)
                .map_err(|e| Attempt::Fatal(RemoteError::ProtocolError(format!("{url}: {e}"))))?;
            Ok(parsed.text)
        }
        500..=599 => Err(Attempt::Retryable(format!("{url}: HTTP {status}"))),
        _ => {
            let detail = serde_json::from_str::<ErrorResponse>(&text)
                .map(|e| e.error)
                .unwrap_or_default();
            Err(Attempt::Fatal(RemoteError::BackendUnavailable(format!(
                "{url}: HTTP {status} {detail}"
            ))))
        }
    }
}

fn post_text<T: Serialize>(agent: &Agent, config: &RemoteBackendConfig, path: &str, req: &T) -> Result<String, RemoteError> {
    config.validate()?;
    let url = config.url(path);
    let body = serde_json::to_string(req).expect("request types always serialize");
    let mut last = String::new();
    for attempt in 0..=config.retries {
        match post_once(agent, &url, &body) {
            Ok(text) => return Ok(text),
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retryable(why)) => {
                debug!("attempt {} failed: {why}", attempt + 1);
                last = why;
            }
        }
    }
    Err(RemoteError::BackendUnavailable(last))
}

pub fn remote_generate_headline(
    config: &RemoteBackendConfig,
    temperature: f64,
    genre: Genre,
    seed: u64,
) -> Result<String, RemoteError> {
    RemoteClient::new(config.clone())?.headline(temperature, genre, seed)
}

pub fn remote_generate_story(
    config: &RemoteBackendConfig,
    headline: &str,
    spec: &ControlSpec,
    seed: u64,
) -> Result<String, RemoteError> {
    RemoteClient::new(config.clone())?.story(headline, spec, seed)
}

/// Up iff the health endpoint answers 200 within a second.
pub fn health(config: &RemoteBackendConfig) -> Health {
    if config.validate().is_err() {
        return Health::Down;
    }
    probe(&agent(HEALTH_TIMEOUT), config)
}

fn probe(agent: &Agent, config: &RemoteBackendConfig) -> Health {
    match agent.get(config.url("/v1/health")).call() {
        Ok(resp) if resp.status().as_u16() == 200 => Health::Up,
        Ok(resp) => {
            debug!("health check: HTTP {}", resp.status());
            Health::Down
        }
        Err(e) => {
            debug!("health check: {e}");
            Health::Down
        }
    }
}

/// Reuses one connection pool across requests.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    config: RemoteBackendConfig,
    agent: Agent,
    health_agent: Agent,
}

impl RemoteClient {
    pub fn new(config: RemoteBackendConfig) -> Result<Self, RemoteError> {
        config.validate()?;
        Ok(Self {
            agent: agent(Duration::from_millis(config.timeout_ms)),
            health_agent: agent(HEALTH_TIMEOUT),
            config,
        })
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.config
    }

    pub fn headline(&self, temperature: f64, genre: Genre, seed: u64) -> Result<String, RemoteError> {
        let req = HeadlineRequest {
            temperature,
            genre: genre.name().to_string(),
            seed,
        };
        post_text(&self.agent, &self.config, "/v1/headline", &req)
    }

    pub fn story(&self, headline: &str, spec: &ControlSpec, seed: u64) -> Result<String, RemoteError> {
        if headline.trim().is_empty() {
            return Err(RemoteError::ProtocolError("story needs a non-empty headline".into()));
        }
        let req = StoryRequest {
            headline: headline.to_string(),
            temperature: spec.temperature,
            genre_code: spec.genre_code.clone(),
            links_code: spec.links_code.clone(),
            seed,
        };
        post_text(&self.agent, &self.config, "/v1/story", &req)
    }

    pub fn health(&self) -> Health {
        probe(&self.health_agent, &self.config)
    }
}

/// A [`GenerationBackend`] over the wire. Seeds are drawn from the caller's
/// rng so a deterministic server makes the whole mill reproducible.
#[derive(Debug)]
pub struct RemoteBackend {
    client: RemoteClient,
    up: Arc<AtomicBool>,
}

fn wire_seed(rng: &mut dyn RngCore) -> u64 {
    rng.next_u64() & MAX_WIRE_SEED
}

impl RemoteBackend {
    /// Probes health once so the snapshot starts out truthful.
    pub fn new(config: RemoteBackendConfig) -> Result<Self, RemoteError> {
        let client = RemoteClient::new(config)?;
        let up = Arc::new(AtomicBool::new(client.health() == Health::Up));
        Ok(Self { client, up })
    }

    pub fn client(&self) -> &RemoteClient {
        &self.client
    }

    pub fn refresh_health(&self) -> Health {
        let h = self.client.health();
        self.up.store(h == Health::Up, Ordering::SeqCst);
        h
    }

    /// Starts a thread polling the health endpoint every
    /// `health_interval_ms`. It stops when the returned handle is dropped.
    pub fn spawn_health_poller(&self) -> HealthPoller {
        let (stop, wake) = mpsc::channel::<()>();
        let client = self.client.clone();
        let up = self.up.clone();
        let every = Duration::from_millis(self.client.config.health_interval_ms);
        let thread = std::thread::spawn(move || loop {
            match wake.recv_timeout(every) {
                Err(RecvTimeoutError::Timeout) => {
                    let h = client.health();
                    if up.swap(h == Health::Up, Ordering::SeqCst) != (h == Health::Up) {
                        warn!("remote backend is now {h:?}");
                    }
                }
                _ => return,
            }
        });
        HealthPoller {
            stop: Some(stop),
            thread: Some(thread),
        }
    }

    fn note<T>(&self, result: Result<T, RemoteError>) -> Result<T, BackendError> {
        match &result {
            Ok(_) => self.up.store(true, Ordering::SeqCst),
            Err(RemoteError::BackendUnavailable(_)) => self.up.store(false, Ordering::SeqCst),
            Err(_) => {}
        }
        result.map_err(BackendError::from)
    }
}

impl GenerationBackend for RemoteBackend {
    fn generate_headline(&self, temperature: f64, genre: Genre, rng: &mut dyn RngCore) -> Result<String, BackendError> {
        let seed = wire_seed(rng);
        self.note(self.client.headline(temperature, genre, seed))
    }

    /// The server decides story length; `max_tokens` is not on the wire.
    fn generate_story(
        &self,
        headline: &str,
        spec: &ControlSpec,
        rng: &mut dyn RngCore,
        _max_tokens: usize,
    ) -> Result<String, BackendError> {
        let seed = wire_seed(rng);
        self.note(self.client.story(headline, spec, seed))
    }

    fn health(&self) -> Health {
        if self.up.load(Ordering::SeqCst) {
            Health::Up
        } else {
            Health::Down
        }
    }
}

#[derive(Debug)]
pub struct HealthPoller {
    stop: Option<mpsc::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Drop for HealthPoller {
    fn drop(&mut self) {
        drop(self.stop.take());
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(RemoteBackendConfig::default().validate().is_ok());
        let bad = RemoteBackendConfig {
            timeout_ms: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(RemoteError::InvalidConfig(_))));
        assert!(RemoteBackendConfig::new("https://x").validate().is_err());
        assert_eq!(RemoteBackendConfig::new("http://h:1/").url("/v1/health"), "http://h:1/v1/health");
    }

    #[test]
    fn wire_seeds_fit_in_a_double() {
        struct Ones;
        impl RngCore for Ones {
            fn next_u32(&mut self) -> u32 {
                u32::MAX
            }
            fn next_u64(&mut self) -> u64 {
                u64::MAX
            }
            fn fill_bytes(&mut self, d: &mut [u8]) {
                d.fill(0xFF)
            }
            fn try_fill_bytes(&mut self, d: &mut [u8]) -> Result<(), rand::Error> {
                d.fill(0xFF);
                Ok(())
            }
        }
        let s = wire_seed(&mut Ones);
        assert_eq!(s, MAX_WIRE_SEED);
        assert_eq!(s as f64 as u64, s);
    }

    #[test]
    fn error_mapping() {
        assert_eq!(
            BackendError::from(RemoteError::ProtocolError("x".into())),
            BackendError::Protocol("x".into())
        );
        assert!(matches!(
            BackendError::from(RemoteError::BackendUnavailable("x".into())),
            BackendError::Unavailable(_)
        ));
    }

    #[test]
    fn nothing_listening_is_down_and_unavailable() {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let cfg = RemoteBackendConfig::new(format!("http://127.0.0.1:{port}"));
        assert_eq!(health(&cfg), Health::Down);
        assert!(matches!(
            remote_generate_headline(&cfg, 1.0, Genre::Politics, 1),
            Err(RemoteError::BackendUnavailable(_))
        ));
    }
}
