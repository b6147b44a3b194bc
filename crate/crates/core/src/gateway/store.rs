use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::GatewayError;

/// Content-addressed blob store. References have the form `sha256:<hex>`.
/// Without a directory, blobs live in memory for the life of the store.
#[derive(Debug, Default)]
pub struct ContentStore {
    root: Option<PathBuf>,
    memory: Mutex<HashMap<String, Vec<u8>>>,
}

pub const REF_PREFIX: &str = "sha256:";

pub fn content_ref(bytes: &[u8]) -> String {
    format!("{REF_PREFIX}{}", hex::encode(Sha256::digest(bytes)))
}

fn digest_of(reference: &str) -> Option<&str> {
    let hex = reference.strip_prefix(REF_PREFIX)?;
    (hex.len() == 64 && hex.bytes().all(|b| b.is_ascii_hexdigit())).then_some(hex)
}

/// Writes via a temp file and rename so readers never see partial content.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl ContentStore {
    pub fn in_memory() -> Self {
        ContentStore::default()
    }

    pub fn at(root: impl Into<PathBuf>) -> Self {
        ContentStore { root: Some(root.into()), memory: Mutex::default() }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn put(&self, bytes: &[u8]) -> Result<String, GatewayError> {
        let reference = content_ref(bytes);
        let digest = digest_of(&reference).expect("fresh reference is well-formed");
        match &self.root {
            Some(root) => {
                let path = root.join(digest);
                if !path.exists() {
                    write_atomic(&path, bytes).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
                }
            }
            None => {
                self.memory.lock().unwrap_or_else(|p| p.into_inner()).insert(digest.to_string(), bytes.to_vec());
            }
        }
        Ok(reference)
    }

    pub fn get(&self, reference: &str) -> Result<Vec<u8>, GatewayError> {
        let digest = digest_of(reference)
            .ok_or_else(|| GatewayError::InvalidRequest(format!("not a content reference: {reference}")))?;
        match &self.root {
            Some(root) => {
                let path = root.join(digest);
                fs::read(&path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))
            }
            None => self
                .memory
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .get(digest)
                .cloned()
                .ok_or_else(|| GatewayError::Io(format!("{reference} not in store"))),
        }
    }

    /// Filesystem path of a stored blob, for file-backed stores.
    pub fn path_of(&self, reference: &str) -> Option<PathBuf> {
        Some(self.root.as_ref()?.join(digest_of(reference)?))
    }
}
