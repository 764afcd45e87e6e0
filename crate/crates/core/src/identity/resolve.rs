//! DID resolution: fetch and validate the document behind an identifier.

use std::collections::HashMap;
use std::sync::Mutex;

use thiserror::Error;

use super::did::DidId;
use super::document::{validate_did_document, DidDocument};
use crate::time::Clock;
use crate::wire::{HttpRequest, Transport};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("fetch failure for {did}: {reason}")]
    FetchFailure { did: DidId, reason: String },
    #[error("document id mismatch: requested {requested}, document says {found}")]
    IdMismatch { requested: DidId, found: DidId },
    #[error("invalid document for {did}: {reason}")]
    InvalidDocument { did: DidId, reason: String },
}

/// Capability for resolving a DID to its validated document.
pub trait DidResolver: Send + Sync {
    fn resolve(&self, did: &DidId) -> Result<DidDocument, ResolveError>;
}

/// Resolver that fetches `https://…/did.json` over a [`Transport`].
pub struct TransportResolver<T> {
    transport: T,
}

impl<T: Transport> TransportResolver<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }
}

impl<T: Transport> DidResolver for TransportResolver<T> {
    fn resolve(&self, did: &DidId) -> Result<DidDocument, ResolveError> {
        let url = did.to_https_url();
        let response = self
            .transport
            .execute(HttpRequest::get(&url))
            .map_err(|e| ResolveError::FetchFailure {
                did: did.clone(),
                reason: e.to_string(),
            })?;
        if !response.is_success() {
            return Err(ResolveError::FetchFailure {
                did: did.clone(),
                reason: format!("GET {url} returned status {}", response.status),
            });
        }
        let doc: DidDocument =
            serde_json::from_slice(&response.body).map_err(|e| ResolveError::InvalidDocument {
                did: did.clone(),
                reason: e.to_string(),
            })?;
        if &doc.id != did {
            return Err(ResolveError::IdMismatch {
                requested: did.clone(),
                found: doc.id,
            });
        }
        let violations = validate_did_document(&doc);
        if !violations.is_empty() {
            return Err(ResolveError::InvalidDocument {
                did: did.clone(),
                reason: violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
        Ok(doc)
    }
}

/// Bounded-staleness cache in front of another resolver, so verifying a burst
/// of requests from one peer does not refetch its document every time.
pub struct CachingResolver<R, C> {
    inner: R,
    clock: C,
    ttl_secs: u64,
    cache: Mutex<HashMap<DidId, (u64, DidDocument)>>,
}

impl<R: DidResolver, C: Clock> CachingResolver<R, C> {
    pub fn new(inner: R, clock: C, ttl_secs: u64) -> Self {
        Self {
            inner,
            clock,
            ttl_secs,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<R: DidResolver, C: Clock> DidResolver for CachingResolver<R, C> {
    fn resolve(&self, did: &DidId) -> Result<DidDocument, ResolveError> {
        let now = self.clock.now_unix();
        {
            let cache = self.cache.lock().unwrap();
            if let Some((fetched_at, doc)) = cache.get(did) {
                if now.saturating_sub(*fetched_at) < self.ttl_secs {
                    return Ok(doc.clone());
                }
            }
        }
        let doc = self.inner.resolve(did)?;
        self.cache
            .lock()
            .unwrap()
            .insert(did.clone(), (now, doc.clone()));
        Ok(doc)
    }
}

/// Fixed in-memory resolver for tests.
#[derive(Default)]
pub struct StaticResolver {
    docs: HashMap<DidId, DidDocument>,
}

impl StaticResolver {
    pub fn new(docs: impl IntoIterator<Item = DidDocument>) -> Self {
        Self {
            docs: docs.into_iter().map(|d| (d.id.clone(), d)).collect(),
        }
    }

    pub fn insert(&mut self, doc: DidDocument) {
        self.docs.insert(doc.id.clone(), doc);
    }
}

impl DidResolver for StaticResolver {
    fn resolve(&self, did: &DidId) -> Result<DidDocument, ResolveError> {
        self.docs
            .get(did)
            .cloned()
            .ok_or_else(|| ResolveError::FetchFailure {
                did: did.clone(),
                reason: "no such document".to_string(),
            })
    }
}

impl<R: DidResolver + ?Sized> DidResolver for &R {
    fn resolve(&self, did: &DidId) -> Result<DidDocument, ResolveError> {
        (**self).resolve(did)
    }
}

impl<R: DidResolver + ?Sized> DidResolver for std::sync::Arc<R> {
    fn resolve(&self, did: &DidId) -> Result<DidDocument, ResolveError> {
        (**self).resolve(did)
    }
}
