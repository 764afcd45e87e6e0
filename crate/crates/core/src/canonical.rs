//! Canonical JSON encoding.
//!
//! Signatures over documents are only stable if both sides serialize them to
//! the same bytes. The canonical form used throughout the protocol is compact
//! JSON (no insignificant whitespace) with object keys sorted lexicographically
//! and arrays kept in source order, encoded as UTF-8.
//!
//! `serde_json`'s `Value` is backed by a `BTreeMap` (the `preserve_order`
//! feature is not enabled), so round-tripping any serializable value through
//! `Value` sorts keys at every nesting level.

use serde::Serialize;

/// Serialize `value` to canonical JSON bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    let tree = serde_json::to_value(value)?;
    serde_json::to_vec(&tree)
}

/// SHA-256 of the canonical JSON form, as lowercase hex.
pub fn canonical_digest<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    use sha2::{Digest, Sha256};
    let bytes = to_canonical_json(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
