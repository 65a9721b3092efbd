//! HTTP transport abstraction. The gateway talks to registries only through
//! [`Transport`], so tests and offline runs can substitute replayed or
//! simulated upstreams.

use std::io::Read;
use std::net::IpAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Responses larger than this are rejected.
pub const DEFAULT_MAX_RESPONSE_BYTES: usize = 10 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: String) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("content-type".into(), "application/json".into())],
            body: Some(body),
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.into()));
        self
    }

    pub fn host(&self) -> String {
        url::Url::parse(&self.url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl HttpResponse {
    pub fn json(status: u16, body: String) -> Self {
        Self {
            status,
            headers: vec![("content-type".into(), "application/json".into())],
            body,
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Throttling or server-side failure worth retrying.
    pub fn is_transient(&self) -> bool {
        self.status == 429 || (500..600).contains(&self.status)
    }

    pub fn retry_after(&self) -> Option<Duration> {
        self.header("retry-after")
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("cannot connect to {host}: {reason}")]
    Unreachable { host: String, reason: String },
    #[error("request to {host} timed out")]
    Timeout { host: String },
    #[error("response exceeds the {limit}-byte size limit")]
    TooLarge { limit: usize },
    #[error("redirect rejected: {0}")]
    Redirect(String),
    #[error("no recorded response for {method} {url}")]
    FixtureMissing { method: String, url: String },
    #[error("transport failure: {0}")]
    Other(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Unreachable { .. } | TransportError::Timeout { .. })
    }
}

/// One HTTP exchange.
pub trait Transport: Send + Sync {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).execute(request)
    }
}

/// Live HTTPS transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    max_response_bytes: usize,
}

impl HttpTransport {
    pub fn new(user_agent: &str, max_response_bytes: usize) -> Result<Self, TransportError> {
        let policy = reqwest::redirect::Policy::custom(|attempt| {
            if attempt.previous().len() >= 5 {
                return attempt.error("too many redirects");
            }
            let url = attempt.url().clone();
            if url.scheme() != "https" {
                return attempt.error(format!("non-HTTPS redirect to {url}"));
            }
            if resolves_to_internal_address(&url) {
                return attempt.error(format!("redirect to internal address {url}"));
            }
            attempt.follow()
        });
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(Duration::from_secs(30))
            .redirect(policy)
            .build()
            .map_err(|e| TransportError::Other(e.to_string()))?;
        Ok(Self {
            client,
            max_response_bytes,
        })
    }
}

fn is_internal(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => {
            v4.is_loopback()
                || v4.is_private()
                || v4.is_link_local()
                || v4.is_unspecified()
                || v4.is_broadcast()
        }
        IpAddr::V6(v6) => {
            v6.is_loopback()
                || v6.is_unspecified()
                || (v6.segments()[0] & 0xfe00) == 0xfc00
                || (v6.segments()[0] & 0xffc0) == 0xfe80
        }
    }
}

fn resolves_to_internal_address(url: &url::Url) -> bool {
    match url.socket_addrs(|| Some(443)) {
        Ok(addrs) => addrs.iter().any(|a| is_internal(a.ip())),
        Err(_) => true,
    }
}

impl Transport for HttpTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let host = request.host();
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (k, v) in &request.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout { host: host.clone() }
            } else if e.is_redirect() {
                TransportError::Redirect(e.to_string())
            } else if e.is_connect() {
                TransportError::Unreachable {
                    host: host.clone(),
                    reason: e.to_string(),
                }
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let headers: Vec<(String, String)> = ["content-type", "retry-after"]
            .iter()
            .filter_map(|name| {
                response
                    .headers()
                    .get(*name)
                    .and_then(|v| v.to_str().ok())
                    .map(|v| ((*name).to_owned(), v.to_owned()))
            })
            .collect();
        if response
            .content_length()
            .is_some_and(|len| len as usize > self.max_response_bytes)
        {
            return Err(TransportError::TooLarge {
                limit: self.max_response_bytes,
            });
        }
        let mut buf = Vec::new();
        response
            .take(self.max_response_bytes as u64 + 1)
            .read_to_end(&mut buf)
            .map_err(|e| TransportError::Other(e.to_string()))?;
        if buf.len() > self.max_response_bytes {
            return Err(TransportError::TooLarge {
                limit: self.max_response_bytes,
            });
        }
        Ok(HttpResponse {
            status,
            headers,
            body: String::from_utf8_lossy(&buf).into_owned(),
        })
    }
}

/// Wraps a transport and keeps every outbound request.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<HttpRequest>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn count_for_host(&self, host: &str) -> usize {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.host() == host)
            .count()
    }

    pub fn clear(&self) {
        self.log.lock().unwrap().clear();
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.log.lock().unwrap().push(request.clone());
        self.inner.execute(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn internal_addresses() {
        assert!(is_internal("127.0.0.1".parse().unwrap()));
        assert!(is_internal("10.1.2.3".parse().unwrap()));
        assert!(is_internal("169.254.1.1".parse().unwrap()));
        assert!(is_internal("::1".parse().unwrap()));
        assert!(is_internal("fd00::1".parse().unwrap()));
        assert!(!is_internal("8.8.8.8".parse().unwrap()));
        let u = url::Url::parse("https://127.0.0.1/x").unwrap();
        assert!(resolves_to_internal_address(&u));
    }

    #[test]
    fn retry_after_parsed() {
        let mut r = HttpResponse::json(429, String::new());
        r.headers.push(("Retry-After".into(), "7".into()));
        assert_eq!(r.retry_after(), Some(Duration::from_secs(7)));
        assert!(r.is_transient());
        assert!(!HttpResponse::json(404, String::new()).is_transient());
    }
}
