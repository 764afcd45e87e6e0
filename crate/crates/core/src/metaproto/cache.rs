//! Cache of negotiation results, keyed by requirement digest.
//!
//! A hit lets an agent lead with the protocol that worked last time instead
//! of negotiating from scratch. Keying is exact-match over the canonical
//! requirement; similarity matching is an extension point.

use std::collections::BTreeMap;
use std::sync::Mutex;

use thiserror::Error;

use super::descriptor::{ProtocolDescriptor, Requirement};

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub protocol_id: String,
    pub descriptor: ProtocolDescriptor,
    pub created_at: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("descriptor id does not match its body")]
    InconsistentDescriptor,
}

#[derive(Default)]
pub struct NegotiationCache {
    entries: Mutex<BTreeMap<String, CacheEntry>>,
}

impl NegotiationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(
        &self,
        requirement: &Requirement,
        descriptor: &ProtocolDescriptor,
        now: u64,
    ) -> Result<(), CacheError> {
        if !descriptor.id_is_consistent() {
            return Err(CacheError::InconsistentDescriptor);
        }
        self.entries.lock().unwrap().insert(
            requirement.digest(),
            CacheEntry {
                protocol_id: descriptor.protocol_id.clone(),
                descriptor: descriptor.clone(),
                created_at: now,
            },
        );
        Ok(())
    }

    pub fn lookup(&self, requirement: &Requirement) -> Option<ProtocolDescriptor> {
        self.entries
            .lock()
            .unwrap()
            .get(&requirement.digest())
            .map(|e| e.descriptor.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
