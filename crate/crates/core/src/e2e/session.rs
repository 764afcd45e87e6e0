//! Established sessions and the envelopes they produce.
//!
//! An [`Envelope`] is ChaCha20-Poly1305 ciphertext addressed by a plaintext
//! routing header naming only the two DIDs. The session id, the sequence
//! number, and the routing header are bound as associated data, so a
//! forwarding proxy can deliver an envelope but cannot read, reorder, splice,
//! or replay it undetected.
//!
//! Binary wire format (the message route prepends a one-line JSON routing
//! header):
//!
//! ```text
//! [1-byte version=1][16-byte session id][8-byte big-endian sequence]
//! [4-byte big-endian ciphertext length][ciphertext || tag]
//! ```

use chacha20poly1305::aead::{Aead, Payload};
use chacha20poly1305::{ChaCha20Poly1305, KeyInit, Nonce};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::hex_str;
use crate::identity::DidId;

pub const ENVELOPE_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SealError {
    #[error("send counter exhausted")]
    CounterExhausted,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OpenError {
    #[error("envelope belongs to another session")]
    SessionMismatch,
    #[error("replayed or out-of-order sequence number")]
    ReplayedSequence,
    #[error("authentication failure")]
    AuthFailure,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated envelope")]
    Truncated,
    #[error("unsupported envelope version {0}")]
    BadVersion(u8),
    #[error("length field does not match body")]
    LengthMismatch,
    #[error("bad routing header")]
    BadRoutingHeader,
}

/// Plaintext addressing visible to forwarders: the two DIDs and nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingHeader {
    pub from: DidId,
    pub to: DidId,
}

/// One encrypted message unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub session_id: [u8; 16],
    pub sequence: u64,
    pub ciphertext: Vec<u8>,
    pub routing: RoutingHeader,
}

/// An established duplex channel. Stateful: the send counter increments per
/// envelope and received sequence numbers must strictly increase, so a
/// session belongs to one logical owner at a time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    local_did: DidId,
    remote_did: DidId,
    #[serde(with = "hex_str")]
    session_id: [u8; 16],
    #[serde(with = "hex_str")]
    send_key: [u8; 32],
    #[serde(with = "hex_str")]
    recv_key: [u8; 32],
    send_counter: u64,
    recv_counter: u64,
}

fn nonce_for(sequence: u64) -> Nonce {
    let mut bytes = [0u8; 12];
    bytes[4..].copy_from_slice(&sequence.to_be_bytes());
    Nonce::from(bytes)
}

fn associated_data(session_id: &[u8; 16], sequence: u64, routing: &RoutingHeader) -> Vec<u8> {
    let mut aad = Vec::with_capacity(64);
    aad.extend_from_slice(session_id);
    aad.extend_from_slice(&sequence.to_be_bytes());
    aad.extend_from_slice(
        &crate::canonical::to_canonical_json(routing).expect("routing header serializes"),
    );
    aad
}

impl Session {
    pub(crate) fn new(
        local_did: DidId,
        remote_did: DidId,
        session_id: [u8; 16],
        send_key: [u8; 32],
        recv_key: [u8; 32],
    ) -> Self {
        Self {
            local_did,
            remote_did,
            session_id,
            send_key,
            recv_key,
            send_counter: 0,
            recv_counter: 0,
        }
    }

    pub fn local_did(&self) -> &DidId {
        &self.local_did
    }

    pub fn remote_did(&self) -> &DidId {
        &self.remote_did
    }

    pub fn session_id(&self) -> &[u8; 16] {
        &self.session_id
    }

    #[cfg(test)]
    pub(crate) fn send_key(&self) -> &[u8; 32] {
        &self.send_key
    }

    #[cfg(test)]
    pub(crate) fn recv_key(&self) -> &[u8; 32] {
        &self.recv_key
    }

    /// Seal a plaintext into the next envelope. Sequence numbers start at 1
    /// and never wrap.
    pub fn encrypt(&mut self, plaintext: &[u8]) -> Result<Envelope, SealError> {
        if self.send_counter >= u64::MAX - 1 {
            return Err(SealError::CounterExhausted);
        }
        let sequence = self.send_counter + 1;
        let routing = RoutingHeader {
            from: self.local_did.clone(),
            to: self.remote_did.clone(),
        };
        let aad = associated_data(&self.session_id, sequence, &routing);
        let cipher = ChaCha20Poly1305::new((&self.send_key).into());
        let ciphertext = cipher
            .encrypt(
                &nonce_for(sequence),
                Payload {
                    msg: plaintext,
                    aad: &aad,
                },
            )
            .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
        self.send_counter = sequence;
        Ok(Envelope {
            session_id: self.session_id,
            sequence,
            ciphertext,
            routing,
        })
    }

    /// Open an envelope. Rejects foreign sessions, replays, and anything that
    /// fails authentication; accepts only strictly increasing sequences.
    pub fn decrypt(&mut self, envelope: &Envelope) -> Result<Vec<u8>, OpenError> {
        if envelope.session_id != self.session_id {
            return Err(OpenError::SessionMismatch);
        }
        if envelope.sequence <= self.recv_counter {
            return Err(OpenError::ReplayedSequence);
        }
        let aad = associated_data(&envelope.session_id, envelope.sequence, &envelope.routing);
        let cipher = ChaCha20Poly1305::new((&self.recv_key).into());
        let plaintext = cipher
            .decrypt(
                &nonce_for(envelope.sequence),
                Payload {
                    msg: &envelope.ciphertext,
                    aad: &aad,
                },
            )
            .map_err(|_| OpenError::AuthFailure)?;
        self.recv_counter = envelope.sequence;
        Ok(plaintext)
    }

    #[cfg(test)]
    pub(crate) fn force_send_counter(&mut self, value: u64) {
        self.send_counter = value;
    }
}

impl Envelope {
    /// Binary framing without the routing header.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(29 + self.ciphertext.len());
        out.push(ENVELOPE_VERSION);
        out.extend_from_slice(&self.session_id);
        out.extend_from_slice(&self.sequence.to_be_bytes());
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    fn from_wire(bytes: &[u8], routing: RoutingHeader) -> Result<Self, WireError> {
        if bytes.len() < 29 {
            return Err(WireError::Truncated);
        }
        if bytes[0] != ENVELOPE_VERSION {
            return Err(WireError::BadVersion(bytes[0]));
        }
        let session_id: [u8; 16] = bytes[1..17].try_into().expect("slice length checked");
        let sequence = u64::from_be_bytes(bytes[17..25].try_into().expect("slice length checked"));
        let len =
            u32::from_be_bytes(bytes[25..29].try_into().expect("slice length checked")) as usize;
        if bytes.len() - 29 != len {
            return Err(WireError::LengthMismatch);
        }
        Ok(Envelope {
            session_id,
            sequence,
            ciphertext: bytes[29..].to_vec(),
            routing,
        })
    }

    /// Body carried on the message route: one-line JSON routing header, a
    /// newline, then the binary envelope.
    pub fn to_message_body(&self) -> Vec<u8> {
        let mut body =
            crate::canonical::to_canonical_json(&self.routing).expect("routing header serializes");
        body.push(b'\n');
        body.extend_from_slice(&self.to_wire());
        body
    }

    pub fn from_message_body(body: &[u8]) -> Result<Self, WireError> {
        let newline = body
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(WireError::BadRoutingHeader)?;
        let routing: RoutingHeader =
            serde_json::from_slice(&body[..newline]).map_err(|_| WireError::BadRoutingHeader)?;
        // The line must be byte-exact canonical JSON; otherwise a forwarder
        // could rewrite it into a form that parses to the same value.
        let canonical =
            crate::canonical::to_canonical_json(&routing).expect("routing header serializes");
        if canonical != body[..newline] {
            return Err(WireError::BadRoutingHeader);
        }
        Self::from_wire(&body[newline + 1..], routing)
    }
}
