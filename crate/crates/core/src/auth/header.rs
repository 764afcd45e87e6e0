//! Per-request DID signatures carried in the `Authorization` header.
//!
//! Header grammar (one line, fields in exactly this order):
//!
//! ```text
//! Authorization: WBA did="<did>",key="<fragment>",ts=<unix seconds>,nonce="<32 hex>",sig="<base64url>"
//! ```
//!
//! The signature covers the versioned payload
//!
//! ```text
//! wba-auth.v1\n<did>\n<key>\n<ts>\n<nonce>\n<METHOD>\n<normalized url>
//! ```
//!
//! so a header is bound to one request shape and cannot be replayed against a
//! different method or URL, nor confused with any other signed structure in
//! the protocol. URL normalization lowercases the scheme and host, strips the
//! default port and any fragment, and preserves path and query.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use rand::rngs::OsRng;
use rand::RngCore;
use thiserror::Error;

use crate::identity::{verify_signature, DidId, DidResolver, KeyPair, KeyPurpose};
use crate::time::Clock;

use super::nonce::NonceStore;

/// Default acceptance window for header timestamps, in seconds.
pub const DEFAULT_SKEW_SECS: u64 = 300;

pub const PAYLOAD_VERSION: &str = "wba-auth.v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthHeader {
    pub did: DidId,
    /// Bare verification-method fragment, without the leading `#`.
    pub key_id: String,
    pub timestamp: u64,
    /// 16 random bytes, lowercase hex.
    pub nonce: String,
    pub signature: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeaderParseError {
    #[error("not a WBA authorization header")]
    NotWba,
    #[error("malformed field: {0}")]
    MalformedField(&'static str),
    #[error("bad did: {0}")]
    BadDid(String),
}

impl AuthHeader {
    /// Serialize to the `Authorization` header value.
    pub fn encode(&self) -> String {
        format!(
            "WBA did=\"{}\",key=\"{}\",ts={},nonce=\"{}\",sig=\"{}\"",
            self.did,
            self.key_id,
            self.timestamp,
            self.nonce,
            URL_SAFE_NO_PAD.encode(&self.signature)
        )
    }

    /// Parse an `Authorization` header value. The field order is fixed.
    pub fn parse(value: &str) -> Result<Self, HeaderParseError> {
        let rest = value.strip_prefix("WBA ").ok_or(HeaderParseError::NotWba)?;

        fn quoted<'a>(
            rest: &'a str,
            label: &'static str,
            key: &str,
        ) -> Result<(&'a str, &'a str), HeaderParseError> {
            let rest = rest
                .strip_prefix(key)
                .ok_or(HeaderParseError::MalformedField(label))?;
            let rest = rest
                .strip_prefix('"')
                .ok_or(HeaderParseError::MalformedField(label))?;
            let end = rest
                .find('"')
                .ok_or(HeaderParseError::MalformedField(label))?;
            Ok((&rest[..end], &rest[end + 1..]))
        }

        let (did_str, rest) = quoted(rest, "did", "did=")?;
        let (key_id, rest) = quoted(rest, "key", ",key=")?;
        let rest = rest
            .strip_prefix(",ts=")
            .ok_or(HeaderParseError::MalformedField("ts"))?;
        let ts_end = rest
            .find(',')
            .ok_or(HeaderParseError::MalformedField("ts"))?;
        let ts_str = &rest[..ts_end];
        if ts_str.is_empty() || !ts_str.bytes().all(|b| b.is_ascii_digit()) {
            return Err(HeaderParseError::MalformedField("ts"));
        }
        let timestamp: u64 = ts_str
            .parse()
            .map_err(|_| HeaderParseError::MalformedField("ts"))?;
        let (nonce, rest) = quoted(&rest[ts_end..], "nonce", ",nonce=")?;
        let (sig_b64, rest) = quoted(rest, "sig", ",sig=")?;
        if !rest.is_empty() {
            return Err(HeaderParseError::MalformedField("trailing data"));
        }

        if nonce.len() != 32
            || !nonce
                .bytes()
                .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
        {
            return Err(HeaderParseError::MalformedField("nonce"));
        }
        let signature = URL_SAFE_NO_PAD
            .decode(sig_b64)
            .map_err(|_| HeaderParseError::MalformedField("sig"))?;
        let did: DidId = did_str
            .parse()
            .map_err(|e: crate::identity::DidParseError| HeaderParseError::BadDid(e.to_string()))?;
        // The did field must be in canonical rendering so the signed payload
        // is exactly reconstructible from the header text.
        if did.to_string() != did_str {
            return Err(HeaderParseError::MalformedField("did"));
        }

        Ok(AuthHeader {
            did,
            key_id: key_id.to_string(),
            timestamp,
            nonce: nonce.to_string(),
            signature,
        })
    }
}

/// Lowercase scheme and host, strip default port and fragment.
pub fn normalize_url(url: &str) -> Result<String, url::ParseError> {
    let mut parsed = url::Url::parse(url)?;
    parsed.set_fragment(None);
    Ok(parsed.to_string())
}

/// The exact bytes covered by the header signature.
pub fn signing_payload(
    did: &DidId,
    key_id: &str,
    timestamp: u64,
    nonce: &str,
    method: &str,
    normalized_url: &str,
) -> Vec<u8> {
    format!(
        "{PAYLOAD_VERSION}\n{did}\n{key_id}\n{timestamp}\n{nonce}\n{}\n{normalized_url}",
        method.to_ascii_uppercase()
    )
    .into_bytes()
}

#[derive(Debug, Error)]
pub enum SignError {
    #[error("invalid url: {0}")]
    InvalidUrl(#[from] url::ParseError),
    #[error(transparent)]
    Key(#[from] crate::identity::KeyError),
}

/// Sign a request, producing the header that authenticates it.
///
/// The key must be referenced under `authentication` in the signer's DID
/// document; the server enforces that on verification.
pub fn sign_request(
    did: &DidId,
    key: &KeyPair,
    method: &str,
    url: &str,
    clock: &dyn Clock,
) -> Result<AuthHeader, SignError> {
    let mut nonce_bytes = [0u8; 16];
    OsRng.fill_bytes(&mut nonce_bytes);
    let nonce = hex::encode(nonce_bytes);
    let timestamp = clock.now_unix();
    let key_id = key.fragment().trim_start_matches('#').to_string();
    let normalized = normalize_url(url)?;
    let payload = signing_payload(did, &key_id, timestamp, &nonce, method, &normalized);
    let signature = key.sign(&payload)?;
    Ok(AuthHeader {
        did: did.clone(),
        key_id,
        timestamp,
        nonce,
        signature,
    })
}

/// Why a request was rejected. Rejections are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    BadSignature,
    ExpiredTimestamp,
    ReplayedNonce,
    UnknownKey,
    KeyPurposeMismatch,
    ResolutionFailure(String),
    InvalidUrl(String),
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::BadSignature => write!(f, "bad-signature"),
            RejectReason::ExpiredTimestamp => write!(f, "expired-timestamp"),
            RejectReason::ReplayedNonce => write!(f, "replayed-nonce"),
            RejectReason::UnknownKey => write!(f, "unknown-key"),
            RejectReason::KeyPurposeMismatch => write!(f, "key-purpose-mismatch"),
            RejectReason::ResolutionFailure(r) => write!(f, "resolution-failure: {r}"),
            RejectReason::InvalidUrl(r) => write!(f, "invalid-url: {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verification {
    Accepted(DidId),
    Rejected(RejectReason),
}

impl Verification {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verification::Accepted(_))
    }
}

/// Verify a signed request against the signer's resolved DID document.
///
/// Accepts iff the document resolves, the named key exists under the
/// `authentication` purpose, the signature covers this method and URL, the
/// timestamp is inside the skew window, and the nonce is fresh. The nonce is
/// recorded only on acceptance, atomically, so concurrent presentations of
/// the same header admit at most one.
pub fn verify_request(
    header: &AuthHeader,
    method: &str,
    url: &str,
    resolver: &dyn DidResolver,
    nonces: &NonceStore,
    clock: &dyn Clock,
) -> Verification {
    let doc = match resolver.resolve(&header.did) {
        Ok(doc) => doc,
        Err(e) => return Verification::Rejected(RejectReason::ResolutionFailure(e.to_string())),
    };
    let method_entry = match doc.find_method(&header.key_id) {
        Some(m) => m,
        None => return Verification::Rejected(RejectReason::UnknownKey),
    };
    if doc.purpose_of(&header.key_id) != Some(KeyPurpose::Authentication) {
        return Verification::Rejected(RejectReason::KeyPurposeMismatch);
    }

    let now = clock.now_unix();
    if now.abs_diff(header.timestamp) > nonces.window_secs() {
        return Verification::Rejected(RejectReason::ExpiredTimestamp);
    }

    let normalized = match normalize_url(url) {
        Ok(n) => n,
        Err(e) => return Verification::Rejected(RejectReason::InvalidUrl(e.to_string())),
    };
    let payload = signing_payload(
        &header.did,
        &header.key_id,
        header.timestamp,
        &header.nonce,
        method,
        &normalized,
    );
    if !verify_signature(&method_entry.public_key, &payload, &header.signature) {
        return Verification::Rejected(RejectReason::BadSignature);
    }

    if !nonces.insert_if_absent(&header.did, &header.nonce, now) {
        return Verification::Rejected(RejectReason::ReplayedNonce);
    }
    Verification::Accepted(header.did.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{
        build_did_document, generate_keypair, Algorithm, DidDocument, KeyClass, StaticResolver,
    };
    use crate::time::SimClock;
    use std::collections::HashSet;

    fn fixture() -> (DidId, KeyPair, KeyPair, DidDocument) {
        let did: DidId = "did:wba:client.example".parse().unwrap();
        let routine = generate_keypair(Algorithm::Ed25519, KeyClass::Routine, "key-1");
        let human = generate_keypair(Algorithm::Ed25519, KeyClass::HumanAuthorization, "human-1");
        let doc = build_did_document(
            &did,
            std::slice::from_ref(&routine),
            Some(&human),
            &[],
            None,
        )
        .unwrap();
        (did, routine, human, doc)
    }

    const URL: &str = "https://server.example/anp/negotiate";

    #[test]
    fn sign_then_verify_accepts() {
        let (did, key, _, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();
        let outcome = verify_request(&header, "POST", URL, &resolver, &nonces, &clock);
        assert_eq!(outcome, Verification::Accepted(did));
    }

    #[test]
    fn verify_rejects_different_url() {
        let (did, key, _, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();
        let outcome = verify_request(
            &header,
            "POST",
            "https://server.example/anp/negotiatf",
            &resolver,
            &nonces,
            &clock,
        );
        assert_eq!(outcome, Verification::Rejected(RejectReason::BadSignature));
    }

    #[test]
    fn nonces_are_distinct_across_signs() {
        let (did, key, _, _) = fixture();
        let clock = SimClock::new(1_000_000);
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let header = sign_request(&did, &key, "GET", URL, &clock).unwrap();
            assert!(seen.insert(header.nonce), "nonce collision");
        }
    }

    #[test]
    fn replayed_header_is_rejected() {
        let (did, key, _, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();
        assert!(verify_request(&header, "POST", URL, &resolver, &nonces, &clock).is_accepted());
        assert_eq!(
            verify_request(&header, "POST", URL, &resolver, &nonces, &clock),
            Verification::Rejected(RejectReason::ReplayedNonce)
        );
    }

    #[test]
    fn stale_timestamp_is_rejected() {
        let (did, key, _, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();
        clock.advance(600); // 10 minutes later, window is 5
        assert_eq!(
            verify_request(&header, "POST", URL, &resolver, &nonces, &clock),
            Verification::Rejected(RejectReason::ExpiredTimestamp)
        );
    }

    #[test]
    fn human_authorization_key_cannot_authenticate() {
        let (did, _, human, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &human, "POST", URL, &clock).unwrap();
        assert_eq!(
            verify_request(&header, "POST", URL, &resolver, &nonces, &clock),
            Verification::Rejected(RejectReason::KeyPurposeMismatch)
        );
    }

    #[test]
    fn unknown_key_is_rejected() {
        let (did, _, _, doc) = fixture();
        let other = generate_keypair(Algorithm::Ed25519, KeyClass::Routine, "key-9");
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &other, "POST", URL, &clock).unwrap();
        assert_eq!(
            verify_request(&header, "POST", URL, &resolver, &nonces, &clock),
            Verification::Rejected(RejectReason::UnknownKey)
        );
    }

    #[test]
    fn header_encode_parse_round_trip() {
        let (did, key, _, _) = fixture();
        let clock = SimClock::new(1_000_000);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();
        let encoded = header.encode();
        assert!(encoded.starts_with("WBA did=\"did:wba:client.example\",key=\"key-1\",ts="));
        assert_eq!(AuthHeader::parse(&encoded).unwrap(), header);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert_eq!(
            AuthHeader::parse("Bearer abc"),
            Err(HeaderParseError::NotWba)
        );
        assert!(AuthHeader::parse("WBA did=\"did:wba:x.com\"").is_err());
        assert!(AuthHeader::parse(
            "WBA did=\"did:wba:x.com\",key=\"k\",ts=zz,nonce=\"00\",sig=\"AA\""
        )
        .is_err());
    }

    #[test]
    fn url_normalization() {
        assert_eq!(
            normalize_url("HTTPS://Server.Example:443/Path?q=1#frag").unwrap(),
            "https://server.example/Path?q=1"
        );
        assert_eq!(
            normalize_url("https://server.example:8443/x").unwrap(),
            "https://server.example:8443/x"
        );
    }

    #[test]
    fn concurrent_replay_admits_one() {
        let (did, key, _, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();

        let accepted = std::sync::atomic::AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..16 {
                scope.spawn(|| {
                    if verify_request(&header, "POST", URL, &resolver, &nonces, &clock)
                        .is_accepted()
                    {
                        accepted.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    }
                });
            }
        });
        assert_eq!(accepted.load(std::sync::atomic::Ordering::SeqCst), 1);
    }

    #[test]
    fn corrupted_headers_never_verify() {
        let (did, key, _, doc) = fixture();
        let clock = SimClock::new(1_000_000);
        let resolver = StaticResolver::new([doc]);
        let header = sign_request(&did, &key, "POST", URL, &clock).unwrap();
        let encoded = header.encode().into_bytes();

        let mut rng = rand::thread_rng();
        for _ in 0..1000 {
            let mut corrupted = encoded.clone();
            let pos = rand::Rng::gen_range(&mut rng, 0..corrupted.len());
            let old = corrupted[pos];
            let mut new = old;
            while new == old {
                new = rand::Rng::gen(&mut rng);
            }
            corrupted[pos] = new;

            let Ok(text) = std::str::from_utf8(&corrupted) else {
                continue;
            };
            let Ok(parsed) = AuthHeader::parse(text) else {
                continue;
            };
            // Fresh nonce store per trial: the signature alone must reject.
            let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
            let outcome = verify_request(&parsed, "POST", URL, &resolver, &nonces, &clock);
            assert!(!outcome.is_accepted(), "corrupted header accepted: {text}");
        }
    }
}
