//! Authenticated ECDHE handshake between two DIDs.
//!
//! Both parties contribute a fresh X25519 ephemeral key and sign the
//! handshake transcript with their DID authentication key, binding the
//! ephemeral keys to their identities (no unauthenticated Diffie-Hellman).
//! The responder's signature covers both messages, so a reply cannot be
//! replayed into a different handshake.
//!
//! Directional session keys come from HKDF-SHA256 keyed by the shared secret
//! and salted with the transcript hash; the ephemeral secrets are dropped
//! when the session is derived, which is what gives recorded envelopes
//! forward secrecy against later static-key compromise.

use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::encoding::{b64url, hex_str};
use crate::identity::{verify_signature, DidDocument, DidId, KeyPair};

use super::session::Session;

const INIT_CONTEXT: &[u8] = b"anp-handshake-init.v1\n";
const RESP_CONTEXT: &[u8] = b"anp-handshake-resp.v1\n";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HandshakeError {
    #[error("peer document has no key-agreement method")]
    NoKeyAgreementMethod,
    #[error("handshake names a key absent from the initiator document")]
    UnknownInitiatorKey,
    #[error("handshake signature does not verify")]
    BadHandshakeSignature,
    #[error("handshake peer does not match this session")]
    PeerMismatch,
    #[error("degenerate shared secret")]
    DegenerateSharedSecret,
    #[error("signing failed: {0}")]
    Signing(String),
}

/// The keys one party brings to a handshake.
#[derive(Clone)]
pub struct E2eIdentity {
    pub did: DidId,
    /// Ed25519 authentication key that signs the transcript.
    pub signing_key: KeyPair,
    /// X25519 key-agreement key named by `staticKeyId`.
    pub agreement_key: KeyPair,
}

/// First handshake message, initiator to responder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HandshakeMessage {
    pub sender_did: DidId,
    pub recipient_did: DidId,
    #[serde(with = "b64url")]
    pub ephemeral_public: [u8; 32],
    /// Fragment of the sender's key-agreement verification method.
    pub static_key_id: String,
    #[serde(with = "hex_str")]
    pub handshake_nonce: [u8; 16],
    #[serde(with = "b64url")]
    pub sender_signature: Vec<u8>,
}

/// Second handshake message, responder to initiator. Same shape; the
/// signature covers the whole transcript.
pub type HandshakeReply = HandshakeMessage;

/// Initiator-side state held between sending the message and receiving the
/// reply. Owns the ephemeral secret; consumed by [`complete_handshake`].
pub struct PendingSession {
    local_did: DidId,
    remote_did: DidId,
    ephemeral_secret: StaticSecret,
    init_core: Vec<u8>,
}

impl PendingSession {
    #[cfg(test)]
    pub(crate) fn ephemeral_secret_bytes(&self) -> [u8; 32] {
        self.ephemeral_secret.to_bytes()
    }
}

impl std::fmt::Debug for PendingSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PendingSession")
            .field("local_did", &self.local_did)
            .field("remote_did", &self.remote_did)
            .finish_non_exhaustive()
    }
}

/// Signed portion of a handshake message: everything but the signature.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct HandshakeCore<'a> {
    sender_did: &'a DidId,
    recipient_did: &'a DidId,
    #[serde(with = "b64url")]
    ephemeral_public: [u8; 32],
    static_key_id: &'a str,
    #[serde(with = "hex_str")]
    handshake_nonce: [u8; 16],
}

fn core_bytes(msg: &HandshakeMessage) -> Vec<u8> {
    crate::canonical::to_canonical_json(&HandshakeCore {
        sender_did: &msg.sender_did,
        recipient_did: &msg.recipient_did,
        ephemeral_public: msg.ephemeral_public,
        static_key_id: &msg.static_key_id,
        handshake_nonce: msg.handshake_nonce,
    })
    .expect("handshake core serializes")
}

fn transcript(init_core: &[u8], reply_core: &[u8]) -> Vec<u8> {
    let mut t = Vec::with_capacity(init_core.len() + reply_core.len() + 1);
    t.extend_from_slice(init_core);
    t.push(b'\n');
    t.extend_from_slice(reply_core);
    t
}

fn labeled(context: &[u8], body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(context.len() + body.len());
    out.extend_from_slice(context);
    out.extend_from_slice(body);
    out
}

fn signed_by_any_auth_key(doc: &DidDocument, payload: &[u8], signature: &[u8]) -> bool {
    doc.authentication_methods()
        .any(|m| verify_signature(&m.public_key, payload, signature))
}

fn derive_session(
    local_did: &DidId,
    remote_did: &DidId,
    ephemeral_secret: StaticSecret,
    peer_public: &[u8; 32],
    init_core: &[u8],
    reply_core: &[u8],
    is_initiator: bool,
) -> Result<Session, HandshakeError> {
    let shared = ephemeral_secret.diffie_hellman(&PublicKey::from(*peer_public));
    if !shared.was_contributory() {
        return Err(HandshakeError::DegenerateSharedSecret);
    }
    let transcript_hash = Sha256::digest(transcript(init_core, reply_core));
    let kdf = hkdf::Hkdf::<Sha256>::new(Some(&transcript_hash), shared.as_bytes());

    let mut key_i2r = [0u8; 32];
    let mut key_r2i = [0u8; 32];
    let mut session_id = [0u8; 16];
    kdf.expand(b"anp-e2e.v1 initiator", &mut key_i2r)
        .expect("32-byte okm");
    kdf.expand(b"anp-e2e.v1 responder", &mut key_r2i)
        .expect("32-byte okm");
    kdf.expand(b"anp-e2e.v1 session-id", &mut session_id)
        .expect("16-byte okm");

    let (send_key, recv_key) = if is_initiator {
        (key_i2r, key_r2i)
    } else {
        (key_r2i, key_i2r)
    };
    Ok(Session::new(
        local_did.clone(),
        remote_did.clone(),
        session_id,
        send_key,
        recv_key,
    ))
}

fn fresh_ephemeral() -> (StaticSecret, [u8; 32]) {
    let mut secret_bytes = [0u8; 32];
    OsRng.fill_bytes(&mut secret_bytes);
    let secret = StaticSecret::from(secret_bytes);
    let public = PublicKey::from(&secret).to_bytes();
    (secret, public)
}

/// Open a handshake toward the agent described by `remote_doc`.
pub fn initiate_handshake(
    local: &E2eIdentity,
    remote_doc: &DidDocument,
) -> Result<(HandshakeMessage, PendingSession), HandshakeError> {
    if remote_doc.key_agreement_methods().next().is_none() {
        return Err(HandshakeError::NoKeyAgreementMethod);
    }
    let (ephemeral_secret, ephemeral_public) = fresh_ephemeral();
    let mut handshake_nonce = [0u8; 16];
    OsRng.fill_bytes(&mut handshake_nonce);

    let mut message = HandshakeMessage {
        sender_did: local.did.clone(),
        recipient_did: remote_doc.id.clone(),
        ephemeral_public,
        static_key_id: local.agreement_key.fragment(),
        handshake_nonce,
        sender_signature: Vec::new(),
    };
    let init_core = core_bytes(&message);
    message.sender_signature = local
        .signing_key
        .sign(&labeled(INIT_CONTEXT, &init_core))
        .map_err(|e| HandshakeError::Signing(e.to_string()))?;

    Ok((
        message,
        PendingSession {
            local_did: local.did.clone(),
            remote_did: remote_doc.id.clone(),
            ephemeral_secret,
            init_core,
        },
    ))
}

/// Accept a handshake: verify the initiator, emit the reply, and derive the
/// responder-side session.
pub fn respond_handshake(
    msg: &HandshakeMessage,
    local: &E2eIdentity,
    initiator_doc: &DidDocument,
) -> Result<(HandshakeReply, Session), HandshakeError> {
    let named_frag = msg.static_key_id.trim_start_matches('#');
    let named_key_known = initiator_doc
        .key_agreement_methods()
        .any(|m| m.fragment() == named_frag);
    if !named_key_known {
        return Err(HandshakeError::UnknownInitiatorKey);
    }

    let init_core = core_bytes(msg);
    if !signed_by_any_auth_key(
        initiator_doc,
        &labeled(INIT_CONTEXT, &init_core),
        &msg.sender_signature,
    ) {
        return Err(HandshakeError::BadHandshakeSignature);
    }

    let (ephemeral_secret, ephemeral_public) = fresh_ephemeral();
    let mut handshake_nonce = [0u8; 16];
    OsRng.fill_bytes(&mut handshake_nonce);

    let mut reply = HandshakeReply {
        sender_did: local.did.clone(),
        recipient_did: msg.sender_did.clone(),
        ephemeral_public,
        static_key_id: local.agreement_key.fragment(),
        handshake_nonce,
        sender_signature: Vec::new(),
    };
    let reply_core = core_bytes(&reply);
    reply.sender_signature = local
        .signing_key
        .sign(&labeled(RESP_CONTEXT, &transcript(&init_core, &reply_core)))
        .map_err(|e| HandshakeError::Signing(e.to_string()))?;

    let session = derive_session(
        &local.did,
        &msg.sender_did,
        ephemeral_secret,
        &msg.ephemeral_public,
        &init_core,
        &reply_core,
        false,
    )?;
    Ok((reply, session))
}

/// Finish the handshake on the initiator side.
pub fn complete_handshake(
    pending: PendingSession,
    reply: &HandshakeReply,
    responder_doc: &DidDocument,
) -> Result<Session, HandshakeError> {
    if reply.sender_did != pending.remote_did || reply.recipient_did != pending.local_did {
        return Err(HandshakeError::PeerMismatch);
    }
    let reply_core = core_bytes(reply);
    let payload = labeled(RESP_CONTEXT, &transcript(&pending.init_core, &reply_core));
    if !signed_by_any_auth_key(responder_doc, &payload, &reply.sender_signature) {
        return Err(HandshakeError::BadHandshakeSignature);
    }
    derive_session(
        &pending.local_did,
        &pending.remote_did,
        pending.ephemeral_secret,
        &reply.ephemeral_public,
        &pending.init_core,
        &reply_core,
        true,
    )
}
