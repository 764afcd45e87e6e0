//! The did:wba identifier grammar and its HTTPS mapping.
//!
//! Grammar: `did:wba:<domain>[:<segment>]*`. The domain is a DNS hostname,
//! lowercased on parse; a nonstandard port is carried percent-encoded
//! (`example.com%3A8443`). Colons separate path segments, which may themselves
//! contain percent-encoded characters but never a raw `/` or `:` after
//! decoding other escapes.
//!
//! URL mapping follows the well-known convention: an empty path resolves at
//! `https://<domain>/.well-known/did.json`, a non-empty path at
//! `https://<domain>/<segments…>/did.json`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DidParseError {
    #[error("malformed did: {0}")]
    Malformed(String),
    #[error("unsupported did method: {0}")]
    UnsupportedMethod(String),
}

/// A parsed `did:wba` identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DidId {
    domain: String,
    path_segments: Vec<String>,
}

impl DidId {
    /// Build an identifier from parts, applying the same validation as parsing.
    pub fn new(
        domain: impl Into<String>,
        path_segments: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, DidParseError> {
        let domain = domain.into().to_ascii_lowercase();
        validate_domain(&domain)?;
        let mut segments = Vec::new();
        for seg in path_segments {
            let seg = seg.into();
            validate_segment(&seg)?;
            segments.push(seg);
        }
        Ok(Self {
            domain,
            path_segments: segments,
        })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn path_segments(&self) -> &[String] {
        &self.path_segments
    }

    /// Hostname with any percent-encoded port decoded, e.g. `example.com:8443`.
    pub fn authority(&self) -> String {
        self.domain.replace("%3a", ":").replace("%3A", ":")
    }

    /// The deterministic URL the DID document is fetched from.
    pub fn to_https_url(&self) -> String {
        if self.path_segments.is_empty() {
            format!("https://{}/.well-known/did.json", self.authority())
        } else {
            format!(
                "https://{}/{}/did.json",
                self.authority(),
                self.path_segments.join("/")
            )
        }
    }

    /// A DID URL addressing a fragment of this document, e.g. `did:wba:x.com#key-1`.
    pub fn with_fragment(&self, fragment: &str) -> String {
        let fragment = fragment.trim_start_matches('#');
        format!("{self}#{fragment}")
    }
}

impl fmt::Display for DidId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "did:wba:{}", self.domain)?;
        for seg in &self.path_segments {
            write!(f, ":{seg}")?;
        }
        Ok(())
    }
}

impl FromStr for DidId {
    type Err = DidParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_did(s)
    }
}

impl Serialize for DidId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DidId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_did(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse a DID string, rejecting any method other than `wba`.
pub fn parse_did(text: &str) -> Result<DidId, DidParseError> {
    let rest = text
        .strip_prefix("did:")
        .ok_or_else(|| DidParseError::Malformed(format!("missing did: prefix in {text:?}")))?;
    let (method, rest) = rest.split_once(':').ok_or_else(|| {
        DidParseError::Malformed(format!("missing method-specific id in {text:?}"))
    })?;
    if method != "wba" {
        return Err(DidParseError::UnsupportedMethod(method.to_string()));
    }
    let mut parts = rest.split(':');
    let domain = parts
        .next()
        .filter(|d| !d.is_empty())
        .ok_or_else(|| DidParseError::Malformed("empty domain".to_string()))?;
    DidId::new(domain, parts.map(str::to_string))
}

fn validate_domain(domain: &str) -> Result<(), DidParseError> {
    if domain.is_empty() {
        return Err(DidParseError::Malformed("empty domain".to_string()));
    }
    // Split off a percent-encoded port before checking hostname labels.
    let (host, port) = match domain.to_ascii_lowercase().split_once("%3a") {
        Some((h, p)) => (h.to_string(), Some(p.to_string())),
        None => (domain.to_string(), None),
    };
    if let Some(port) = port {
        if port.is_empty() || !port.bytes().all(|b| b.is_ascii_digit()) {
            return Err(DidParseError::Malformed(format!("invalid port: {port:?}")));
        }
    }
    if host.len() > 253 || host.starts_with('.') || host.ends_with('.') {
        return Err(DidParseError::Malformed(format!(
            "invalid hostname: {host:?}"
        )));
    }
    for label in host.split('.') {
        let ok = !label.is_empty()
            && label.len() <= 63
            && !label.starts_with('-')
            && !label.ends_with('-')
            && label
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-');
        if !ok {
            return Err(DidParseError::Malformed(format!(
                "invalid hostname: {host:?}"
            )));
        }
    }
    Ok(())
}

fn validate_segment(seg: &str) -> Result<(), DidParseError> {
    if seg.is_empty() {
        return Err(DidParseError::Malformed("empty path segment".to_string()));
    }
    let decoded = percent_decode(seg)
        .ok_or_else(|| DidParseError::Malformed(format!("bad percent-encoding in {seg:?}")))?;
    if decoded.contains('/') || decoded.contains(':') {
        return Err(DidParseError::Malformed(format!(
            "path segment {seg:?} decodes to a reserved character"
        )));
    }
    let url_safe = seg
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~' | b'%'));
    if !url_safe {
        return Err(DidParseError::Malformed(format!(
            "path segment {seg:?} contains characters outside the URL-safe set"
        )));
    }
    Ok(())
}

fn percent_decode(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hi = *bytes.get(i + 1)?;
            let lo = *bytes.get(i + 2)?;
            let hex = [hi, lo];
            let val = u8::from_str_radix(std::str::from_utf8(&hex).ok()?, 16).ok()?;
            out.push(val);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}
