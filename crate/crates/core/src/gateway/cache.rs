use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::store::write_atomic;
use super::{ChatClient, ChatRequest, GatewayError};

/// Cache key: SHA-256 of the request's JSON serialization (model id, messages,
/// image references, temperature and seed all participate).
pub fn request_key(request: &ChatRequest) -> String {
    let json = serde_json::to_vec(request).expect("requests always serialize");
    hex::encode(Sha256::digest(json))
}

/// Response cache on disk (one file per key) or in memory.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache::default()
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: Some(dir.into()), memory: Mutex::default() }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        match &self.dir {
            Some(dir) => fs::read_to_string(dir.join(key)).ok(),
            None => self.memory.lock().unwrap_or_else(|p| p.into_inner()).get(key).cloned(),
        }
    }

    pub fn put(&self, key: &str, value: &str) -> Result<(), GatewayError> {
        match &self.dir {
            Some(dir) => {
                let path = dir.join(key);
                write_atomic(&path, value.as_bytes()).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))
            }
            None => {
                self.memory.lock().unwrap_or_else(|p| p.into_inner()).insert(key.to_string(), value.to_string());
                Ok(())
            }
        }
    }
}

/// Serves repeated identical requests from a [`ResponseCache`].
pub struct CachedChatClient<C> {
    inner: C,
    cache: ResponseCache,
    hits: AtomicUsize,
}

impl<C> CachedChatClient<C> {
    pub fn new(inner: C, cache: ResponseCache) -> Self {
        CachedChatClient { inner, cache, hits: AtomicUsize::new(0) }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }
}

impl<C: ChatClient> ChatClient for CachedChatClient<C> {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let key = request_key(request);
        if let Some(hit) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let reply = self.inner.chat(request)?;
        if let Err(e) = self.cache.put(&key, &reply) {
            log::warn!("response cache write failed: {e}");
        }
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockChatClient;
    use crate::gateway::ChatMessage;

    #[test]
    fn identical_requests_hit_cache() {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockChatClient::fixed("最终分数: 3");
        let client = CachedChatClient::new(&mock, ResponseCache::at(dir.path()));
        let mut req = ChatRequest::new("m", vec![ChatMessage::user_with_image("评估", "a.png")]);
        assert_eq!(client.chat(&req).unwrap(), "最终分数: 3");
        assert_eq!(client.chat(&req).unwrap(), "最终分数: 3");
        assert_eq!(mock.calls(), 1);
        assert_eq!(client.hits(), 1);
        req.seed = Some(7);
        client.chat(&req).unwrap();
        assert_eq!(mock.calls(), 2);
    }
}
