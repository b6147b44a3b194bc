//! Clients for external chat-VLM and text-to-image endpoints.
//!
//! Real clients speak the common chat-completions / image-generations JSON
//! dialect over HTTP. They compose with [`Retrying`] (exponential backoff),
//! [`CachedChatClient`] (content-addressed response cache) and an
//! [`InflightLimiter`]. The mocks in [`mock`] are pure functions of the
//! request and are what the test suite runs against.

mod cache;
mod http;
pub mod mock;
mod retry;
mod store;

use std::fmt;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{request_key, CachedChatClient, ResponseCache};
pub use http::{EndpointConfig, HttpChatClient, HttpImageClient};
pub use retry::{RetryPolicy, Retrying};
pub use store::{content_ref, ContentStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("EndpointUnavailable: {0}")]
    EndpointUnavailable(String),
    #[error("AuthError: {0}")]
    AuthError(String),
    #[error("ResponseEmpty: endpoint returned no content")]
    ResponseEmpty,
    /// A failure worth retrying (network error, 429, 5xx).
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("io: {0}")]
    Io(String),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Transient(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, text: text.into(), image_ref: None }
    }
    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, text: text.into(), image_ref: None }
    }
    pub fn user_with_image(text: impl Into<String>, image_ref: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, text: text.into(), image_ref: Some(image_ref.into()) }
    }
    pub fn assistant(text: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, text: text.into(), image_ref: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest { messages, model_id: model_id.into(), temperature: 0.0, seed: None }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("at least one message is required".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// Image attached to the most recent message that has one.
    pub fn image_ref(&self) -> Option<&str> {
        self.messages.iter().rev().find_map(|m| m.image_ref.as_deref())
    }

    pub fn user_turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::User).count()
    }

    pub fn system_text(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == Role::System).map(|m| m.text.as_str())
    }

    pub fn last_user_text(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.text.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Hanging,
    Square,
    Handscroll,
    Free,
}

impl Aspect {
    /// Size string for image-generation APIs.
    pub fn size(self) -> &'static str {
        match self {
            Aspect::Hanging => "1024x1536",
            Aspect::Square => "1024x1024",
            Aspect::Handscroll => "1536x1024",
            Aspect::Free => "auto",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub aspect: Aspect,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompt must be non-empty".into()));
        }
        Ok(())
    }
}

pub trait ChatClient: Send + Sync {
    /// Returns the assistant message text.
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

pub trait ImageClient: Send + Sync {
    /// Generates one image and returns its content-store reference.
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError>;
}

impl<T: ChatClient + ?Sized> ChatClient for &T {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(request)
    }
}

impl<T: ChatClient + ?Sized> ChatClient for Box<T> {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(request)
    }
}

impl<T: ImageClient + ?Sized> ImageClient for &T {
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        (**self).generate_image(request)
    }
}

impl<T: ImageClient + ?Sized> ImageClient for Box<T> {
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        (**self).generate_image(request)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InflightLimiter {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub struct InflightPermit<'a> {
    limiter: &'a InflightLimiter,
}

impl InflightLimiter {
    pub fn new(cap: usize) -> Self {
        InflightLimiter { cap: cap.max(1), used: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn acquire(&self) -> InflightPermit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|p| p.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|p| p.into_inner());
        }
        *used += 1;
        InflightPermit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.used.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Drop for InflightPermit<'_> {
    fn drop(&mut self) {
        let mut used = self.limiter.used.lock().unwrap_or_else(|p| p.into_inner());
        *used -= 1;
        self.limiter.freed.notify_one();
    }
}

/// Wraps a client so at most `cap` calls run at once.
pub struct Throttled<C> {
    inner: C,
    limiter: InflightLimiter,
}

impl<C> Throttled<C> {
    pub fn new(inner: C, cap: usize) -> Self {
        Throttled { inner, limiter: InflightLimiter::new(cap) }
    }

    pub fn limiter(&self) -> &InflightLimiter {
        &self.limiter
    }
}

impl<C: ChatClient> ChatClient for Throttled<C> {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let _permit = self.limiter.acquire();
        self.inner.chat(request)
    }
}

impl<C: ImageClient> ImageClient for Throttled<C> {
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let _permit = self.limiter.acquire();
        self.inner.generate_image(request)
    }
}
