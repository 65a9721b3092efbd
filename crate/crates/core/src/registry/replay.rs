//! Record/replay of registry traffic, one JSON file per request keyed by a
//! hash of method, URL, and body.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::transport::{HttpRequest, HttpResponse, Transport, TransportError};

const REDACTED_HEADERS: &[&str] = &["authorization", "x-api-key", "cookie"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Answer only from stored fixtures. Missing fixtures fail the request.
    Replay,
    /// Forward to the inner transport and store every final response.
    Record,
}

#[derive(Debug, Serialize, Deserialize)]
struct Fixture {
    request: HttpRequest,
    response: HttpResponse,
}

/// Stable fixture name for a request.
pub fn request_key(request: &HttpRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.method.as_str().as_bytes());
    hasher.update(b"\n");
    hasher.update(request.url.as_bytes());
    hasher.update(b"\n");
    hasher.update(request.body.as_deref().unwrap_or("").as_bytes());
    hex::encode(hasher.finalize())
}

fn redact(request: &HttpRequest) -> HttpRequest {
    let mut r = request.clone();
    for (k, v) in &mut r.headers {
        if REDACTED_HEADERS.contains(&k.to_ascii_lowercase().as_str()) {
            *v = "[redacted]".into();
        }
    }
    r
}

pub struct ReplayTransport {
    dir: PathBuf,
    mode: ReplayMode,
    inner: Option<Box<dyn Transport>>,
}

impl ReplayTransport {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            mode: ReplayMode::Replay,
            inner: None,
        }
    }

    pub fn record(dir: impl Into<PathBuf>, inner: Box<dyn Transport>) -> Self {
        Self {
            dir: dir.into(),
            mode: ReplayMode::Record,
            inner: Some(inner),
        }
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn fixture_path(&self, request: &HttpRequest) -> PathBuf {
        self.dir.join(format!("{}.json", request_key(request)))
    }

    fn store(&self, request: &HttpRequest, response: &HttpResponse) -> Result<(), TransportError> {
        fs::create_dir_all(&self.dir).map_err(|e| TransportError::Other(e.to_string()))?;
        let fixture = Fixture {
            request: redact(request),
            response: response.clone(),
        };
        let mut text =
            serde_json::to_string_pretty(&fixture).map_err(|e| TransportError::Other(e.to_string()))?;
        text.push('\n');
        let path = self.fixture_path(request);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| TransportError::Other(e.to_string()))
    }
}

impl Transport for ReplayTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        match (self.mode, &self.inner) {
            (ReplayMode::Record, Some(inner)) => {
                let response = inner.execute(request)?;
                // transient failures are retried by the gateway, not replayed
                if !response.is_transient() {
                    self.store(request, &response)?;
                }
                Ok(response)
            }
            _ => {
                let path = self.fixture_path(request);
                let missing = || TransportError::FixtureMissing {
                    method: request.method.as_str().to_owned(),
                    url: request.url.clone(),
                };
                let text = fs::read_to_string(&path).map_err(|_| missing())?;
                let fixture: Fixture = serde_json::from_str(&text)
                    .map_err(|e| TransportError::Other(format!("{}: {e}", path.display())))?;
                Ok(fixture.response)
            }
        }
    }
}
