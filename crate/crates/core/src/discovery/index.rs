//! Passive discovery: the registration API and the periodically re-crawled
//! search index.
//!
//! Registered AD URLs start `pending`; each refresh cycle fetches due
//! registrations (with a bounded retry budget), indexes the ones that
//! validate, and marks the rest `unreachable`, removing their entries.
//! Queries never observe a partially updated entry: readers take the entries
//! lock only to snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::auth::sign_request;
use crate::description::validate_agent_description;
use crate::identity::{DidId, KeyPair};
use crate::time::Clock;
use crate::wire::{HttpRequest, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistrationStatus {
    Pending,
    Indexed,
    Unreachable,
}

#[derive(Debug, Clone)]
pub struct Registration {
    pub ad_url: String,
    pub registrant: DidId,
    pub registered_at: u64,
    pub last_crawled: Option<u64>,
    pub status: RegistrationStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub ad_url: String,
    pub did: DidId,
    pub name: String,
    pub capability_terms: BTreeSet<String>,
    pub fetched_at: u64,
}

#[derive(Debug, Default)]
pub struct RefreshReport {
    pub refreshed: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// Lowercased alphanumeric tokens of a text.
pub fn tokenize(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

pub struct SearchIndex {
    refresh_interval_secs: u64,
    retry_budget: u32,
    retry_base_delay: Duration,
    registrations: Mutex<BTreeMap<String, Registration>>,
    entries: RwLock<BTreeMap<String, IndexEntry>>,
}

impl SearchIndex {
    /// Defaults: refresh every 15 minutes, 3 retries.
    pub fn new() -> Self {
        Self::with_config(15 * 60, 3, Duration::ZERO)
    }

    pub fn with_config(
        refresh_interval_secs: u64,
        retry_budget: u32,
        retry_base_delay: Duration,
    ) -> Self {
        Self {
            refresh_interval_secs,
            retry_budget,
            retry_base_delay,
            registrations: Mutex::new(BTreeMap::new()),
            entries: RwLock::new(BTreeMap::new()),
        }
    }

    /// Accept a registration unless the URL is already registered.
    pub fn register(&self, ad_url: &str, registrant: &DidId, now: u64) -> RegisterOutcome {
        let mut registrations = self.registrations.lock().unwrap();
        if registrations.contains_key(ad_url) {
            return RegisterOutcome::Duplicate;
        }
        registrations.insert(
            ad_url.to_string(),
            Registration {
                ad_url: ad_url.to_string(),
                registrant: registrant.clone(),
                registered_at: now,
                last_crawled: None,
                status: RegistrationStatus::Pending,
            },
        );
        RegisterOutcome::Accepted
    }

    pub fn registration(&self, ad_url: &str) -> Option<Registration> {
        self.registrations.lock().unwrap().get(ad_url).cloned()
    }

    pub fn registrations(&self) -> Vec<Registration> {
        self.registrations
            .lock()
            .unwrap()
            .values()
            .cloned()
            .collect()
    }

    pub fn entry(&self, ad_url: &str) -> Option<IndexEntry> {
        self.entries.read().unwrap().get(ad_url).cloned()
    }

    fn due_urls(&self, now: u64) -> Vec<String> {
        self.registrations
            .lock()
            .unwrap()
            .values()
            .filter(|r| match (r.status, r.last_crawled) {
                (RegistrationStatus::Pending, _) | (RegistrationStatus::Unreachable, _) => true,
                (_, None) => true,
                (_, Some(at)) => now.saturating_sub(at) >= self.refresh_interval_secs,
            })
            .map(|r| r.ad_url.clone())
            .collect()
    }

    fn fetch_with_retries(&self, transport: &dyn Transport, url: &str) -> Result<Vec<u8>, String> {
        let mut last_error = String::new();
        for attempt in 0..self.retry_budget.max(1) {
            if attempt > 0 && !self.retry_base_delay.is_zero() {
                std::thread::sleep(self.retry_base_delay * 2u32.pow(attempt - 1));
            }
            match transport.execute(HttpRequest::get(url)) {
                Ok(response) if response.is_success() => return Ok(response.body),
                Ok(response) => last_error = format!("status {}", response.status),
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(last_error)
    }

    /// Fetch every registration due for refresh and fold the results into the
    /// index. Writers hold the entries lock per entry, never across fetches.
    pub fn refresh(&self, transport: &dyn Transport, clock: &dyn Clock) -> RefreshReport {
        let now = clock.now_unix();
        let mut report = RefreshReport::default();

        for url in self.due_urls(now) {
            match self.fetch_with_retries(transport, &url) {
                Ok(body) => {
                    let (doc, violations) = validate_agent_description(&body);
                    match doc {
                        Some(doc) => {
                            let mut terms = tokenize(&doc.name);
                            for capability in &doc.capabilities {
                                terms.extend(tokenize(&capability.name));
                                terms.extend(tokenize(&capability.description));
                            }
                            self.entries.write().unwrap().insert(
                                url.clone(),
                                IndexEntry {
                                    ad_url: url.clone(),
                                    did: doc.did.clone(),
                                    name: doc.name.clone(),
                                    capability_terms: terms,
                                    fetched_at: now,
                                },
                            );
                            let mut registrations = self.registrations.lock().unwrap();
                            if let Some(r) = registrations.get_mut(&url) {
                                r.status = RegistrationStatus::Indexed;
                                r.last_crawled = Some(now);
                            }
                            report.refreshed.push(url);
                        }
                        None => {
                            let summary = violations
                                .iter()
                                .map(|v| v.to_string())
                                .collect::<Vec<_>>()
                                .join("; ");
                            self.mark_unreachable(&url, now);
                            report
                                .failed
                                .push((url, format!("invalid description: {summary}")));
                        }
                    }
                }
                Err(reason) => {
                    self.mark_unreachable(&url, now);
                    report.failed.push((url, reason));
                }
            }
        }
        report
    }

    fn mark_unreachable(&self, url: &str, now: u64) {
        self.entries.write().unwrap().remove(url);
        let mut registrations = self.registrations.lock().unwrap();
        if let Some(r) = registrations.get_mut(url) {
            r.status = RegistrationStatus::Unreachable;
            r.last_crawled = Some(now);
        }
    }

    /// Rank indexed agents by distinct-term overlap. Ties break on URL order;
    /// zero-score entries and empty queries return nothing.
    pub fn query(&self, terms: &[String], limit: usize) -> Vec<(String, u32)> {
        if terms.is_empty() || limit == 0 {
            return Vec::new();
        }
        let needles: BTreeSet<String> = terms.iter().map(|t| t.to_lowercase()).collect();
        let entries = self.entries.read().unwrap();
        let mut scored: Vec<(String, u32)> = entries
            .values()
            .map(|entry| {
                let score = needles
                    .iter()
                    .filter(|t| {
                        entry.capability_terms.contains(*t) || tokenize(&entry.name).contains(*t)
                    })
                    .count() as u32;
                (entry.ad_url.clone(), score)
            })
            .filter(|(_, score)| *score > 0)
            .collect();
        scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(limit);
        scored
    }
}

impl Default for SearchIndex {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegisterOutcome {
    Accepted,
    Duplicate,
    Unauthenticated,
    Failed(String),
}

/// Client-side registration call: POST the AD URL to a search service's
/// register endpoint with a WBA-signed header.
pub fn register(
    index_endpoint: &str,
    ad_url: &str,
    did: &DidId,
    key: &KeyPair,
    clock: &dyn Clock,
    transport: &dyn Transport,
) -> RegisterOutcome {
    let body = serde_json::json!({ "adUrl": ad_url });
    let header = match sign_request(did, key, "POST", index_endpoint, clock) {
        Ok(h) => h,
        Err(e) => return RegisterOutcome::Failed(e.to_string()),
    };
    let request = HttpRequest::post(index_endpoint, serde_json::to_vec(&body).unwrap())
        .with_header("Authorization", header.encode())
        .with_header("Content-Type", "application/json");
    match transport.execute(request) {
        Ok(response) => match response.status {
            201 => RegisterOutcome::Accepted,
            409 => RegisterOutcome::Duplicate,
            401 => RegisterOutcome::Unauthenticated,
            other => RegisterOutcome::Failed(format!("status {other}")),
        },
        Err(e) => RegisterOutcome::Failed(e.to_string()),
    }
}
