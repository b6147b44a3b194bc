use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};

use super::store::REF_PREFIX;
use super::{ChatClient, ChatRequest, ContentStore, GatewayError, GenerationRequest, ImageClient};

const BODY_LIMIT: u64 = 256 * 1024 * 1024;

/// Where and how to reach one model endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    /// Base URL such as `https://host/v1`; `None` means not configured.
    pub base_url: Option<String>,
    pub api_key: Option<String>,
    pub model_id: String,
    pub timeout: Duration,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: Some(base_url.into()),
            api_key: None,
            model_id: model_id.into(),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads `{PREFIX}_URL`, `{PREFIX}_KEY` and `{PREFIX}_MODEL`.
    pub fn from_env(prefix: &str, default_model: &str) -> Self {
        let var = |suffix: &str| std::env::var(format!("{prefix}_{suffix}")).ok().filter(|v| !v.is_empty());
        EndpointConfig {
            base_url: var("URL"),
            api_key: var("KEY"),
            model_id: var("MODEL").unwrap_or_else(|| default_model.to_string()),
            timeout: Duration::from_secs(120),
        }
    }

    fn url(&self, path: &str) -> Result<String, GatewayError> {
        let base = self.base_url.as_deref().ok_or_else(|| {
            GatewayError::EndpointUnavailable(format!("no endpoint configured for model {}", self.model_id))
        })?;
        Ok(format!("{}/{path}", base.trim_end_matches('/')))
    }

    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder().timeout_global(Some(self.timeout)).http_status_as_error(false).build().into()
    }
}

fn sniff_mime(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG") {
        "image/png"
    } else if bytes.starts_with(&[0xFF, 0xD8]) {
        "image/jpeg"
    } else if bytes.starts_with(b"GIF8") {
        "image/gif"
    } else if bytes.len() > 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        "image/webp"
    } else {
        "application/octet-stream"
    }
}

fn post_json(agent: &ureq::Agent, url: &str, key: Option<&str>, body: &Value) -> Result<Value, GatewayError> {
    log::debug!("POST {url}: {body}");
    let mut req = agent.post(url);
    if let Some(key) = key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(|e| GatewayError::Transient(format!("{url}: {e}")))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_string()
        .map_err(|e| GatewayError::Transient(format!("{url}: reading body: {e}")))?;
    log::debug!("{url} -> HTTP {status}: {} bytes", text.len());
    match status {
        200..=299 => serde_json::from_str(&text)
            .map_err(|e| GatewayError::Rejected { status, body: format!("unparseable response: {e}") }),
        401 | 403 => Err(GatewayError::AuthError(format!("HTTP {status} from {url}"))),
        429 | 500..=599 => Err(GatewayError::Transient(format!("HTTP {status} from {url}"))),
        _ => Err(GatewayError::Rejected { status, body: text.chars().take(500).collect() }),
    }
}

/// Chat-completions client. Images are sent as `image_url` content parts;
/// local files and content-store references are inlined as base64 data URLs.
pub struct HttpChatClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    store: Option<Arc<ContentStore>>,
}

impl HttpChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = config.agent();
        HttpChatClient { config, agent, store: None }
    }

    /// Lets `sha256:` image references resolve through `store`.
    pub fn with_store(mut self, store: Arc<ContentStore>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn image_url(&self, image_ref: &str) -> Result<String, GatewayError> {
        if ["http://", "https://", "data:"].iter().any(|p| image_ref.starts_with(p)) {
            return Ok(image_ref.to_string());
        }
        let bytes = if image_ref.starts_with(REF_PREFIX) {
            let store = self
                .store
                .as_ref()
                .ok_or_else(|| GatewayError::InvalidRequest(format!("no content store to resolve {image_ref}")))?;
            store.get(image_ref)?
        } else {
            std::fs::read(image_ref).map_err(|e| GatewayError::Io(format!("{image_ref}: {e}")))?
        };
        Ok(format!("data:{};base64,{}", sniff_mime(&bytes), BASE64.encode(&bytes)))
    }

    /// The JSON body sent for `request`.
    pub fn request_body(&self, request: &ChatRequest) -> Result<Value, GatewayError> {
        let mut messages = Vec::with_capacity(request.messages.len());
        for m in &request.messages {
            let content = match &m.image_ref {
                None => json!(m.text),
                Some(image) => json!([
                    {"type": "image_url", "image_url": {"url": self.image_url(image)?}},
                    {"type": "text", "text": m.text},
                ]),
            };
            messages.push(json!({"role": m.role.to_string(), "content": content}));
        }
        let mut body = json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        Ok(body)
    }
}

fn message_text(resp: &Value) -> Option<String> {
    let content = resp.pointer("/choices/0/message/content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect()),
        _ => None,
    }
}

impl ChatClient for HttpChatClient {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let url = self.config.url("chat/completions")?;
        let body = self.request_body(request)?;
        let resp = post_json(&self.agent, &url, self.config.api_key.as_deref(), &body)?;
        match message_text(&resp) {
            Some(text) if !text.trim().is_empty() => Ok(text),
            _ => Err(GatewayError::ResponseEmpty),
        }
    }
}

/// Image-generations client. Returned images are written to the content store.
pub struct HttpImageClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    store: Arc<ContentStore>,
}

impl HttpImageClient {
    pub fn new(config: EndpointConfig, store: Arc<ContentStore>) -> Self {
        let agent = config.agent();
        HttpImageClient { config, agent, store }
    }

    fn download(&self, url: &str) -> Result<Vec<u8>, GatewayError> {
        let mut resp = self.agent.get(url).call().map_err(|e| GatewayError::Transient(format!("{url}: {e}")))?;
        if resp.status().as_u16() != 200 {
            return Err(GatewayError::Transient(format!("HTTP {} from {url}", resp.status())));
        }
        resp.body_mut()
            .with_config()
            .limit(BODY_LIMIT)
            .read_to_vec()
            .map_err(|e| GatewayError::Transient(format!("{url}: {e}")))
    }
}

impl ImageClient for HttpImageClient {
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let url = self.config.url("images/generations")?;
        let model = if request.model_id.is_empty() { &self.config.model_id } else { &request.model_id };
        let mut body = json!({
            "model": model,
            "prompt": request.prompt,
            "size": request.aspect.size(),
            "n": 1,
            "response_format": "b64_json",
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let resp = post_json(&self.agent, &url, self.config.api_key.as_deref(), &body)?;
        let item = resp.pointer("/data/0").ok_or(GatewayError::ResponseEmpty)?;
        let bytes = if let Some(b64) = item.get("b64_json").and_then(Value::as_str) {
            BASE64
                .decode(b64)
                .map_err(|e| GatewayError::Rejected { status: 200, body: format!("bad base64 image: {e}") })?
        } else if let Some(link) = item.get("url").and_then(Value::as_str) {
            self.download(link)?
        } else {
            return Err(GatewayError::ResponseEmpty);
        };
        if bytes.is_empty() {
            return Err(GatewayError::ResponseEmpty);
        }
        self.store.put(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    #[test]
    fn unconfigured_endpoint() {
        let cfg =
            EndpointConfig { base_url: None, api_key: None, model_id: "m".into(), timeout: Duration::from_secs(1) };
        let chat = HttpChatClient::new(cfg.clone());
        let req = ChatRequest::new("m", vec![ChatMessage::user("x")]);
        assert!(matches!(chat.chat(&req), Err(GatewayError::EndpointUnavailable(_))));
        let img = HttpImageClient::new(cfg, Arc::new(ContentStore::in_memory()));
        let g = GenerationRequest {
            prompt: "p".into(),
            aspect: crate::gateway::Aspect::Square,
            model_id: String::new(),
            seed: None,
        };
        assert!(matches!(img.generate_image(&g), Err(GatewayError::EndpointUnavailable(_))));
    }

    #[test]
    fn body_inlines_stored_images() {
        let store = Arc::new(ContentStore::in_memory());
        let r = store.put(b"\x89PNG....").unwrap();
        let client = HttpChatClient::new(EndpointConfig::new("http://x", "vlm")).with_store(store);
        let mut req = ChatRequest::new("vlm", vec![ChatMessage::system("s"), ChatMessage::user_with_image("评估", r)]);
        req.seed = Some(3);
        let body = client.request_body(&req).unwrap();
        assert_eq!(body["messages"][0]["content"], "s");
        let url = body["messages"][1]["content"][0]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
        assert_eq!(body["seed"], 3);
    }
}
