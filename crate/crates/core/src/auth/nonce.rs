//! Replay defense: each (did, nonce) pair is accepted at most once within the
//! timestamp skew window. Expired pairs are pruned on insert so memory stays
//! bounded by the window.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::sync::Mutex;

use crate::identity::DidId;

pub struct NonceStore {
    window_secs: u64,
    seen: Mutex<HashMap<(String, String), u64>>,
}

impl NonceStore {
    pub fn new(window_secs: u64) -> Self {
        Self {
            window_secs,
            seen: Mutex::new(HashMap::new()),
        }
    }

    pub fn window_secs(&self) -> u64 {
        self.window_secs
    }

    /// Record the pair unless it is already present and unexpired.
    /// Returns true exactly once per pair per window. Atomic: the check and
    /// the insert happen under one lock, the only mutation point in request
    /// verification.
    pub fn insert_if_absent(&self, did: &DidId, nonce: &str, now: u64) -> bool {
        let mut seen = self.seen.lock().unwrap();
        seen.retain(|_, expires| *expires > now);
        match seen.entry((did.to_string(), nonce.to_string())) {
            Entry::Occupied(_) => false,
            Entry::Vacant(slot) => {
                slot.insert(now + self.window_secs);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.seen.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
