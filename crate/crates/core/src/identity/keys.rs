//! Key material: generation, classification, signing and agreement primitives.
//!
//! Two algorithms are supported: Ed25519 for signatures and X25519 for key
//! agreement. Keys are classified at creation as `Routine` (day-to-day
//! request signing) or `HumanAuthorization` (reserved for explicit human
//! confirmation of high-risk operations); the class never changes afterwards.

use ed25519_dalek::{Signer as _, Verifier as _};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("unsupported algorithm: {0}")]
    UnsupportedAlgorithm(String),
    #[error("invalid key bytes for {0}")]
    InvalidKey(&'static str),
    #[error("algorithm {0} cannot sign")]
    NotASigningKey(&'static str),
}

/// Signature or agreement scheme of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Ed25519,
    X25519,
}

impl Algorithm {
    /// Verification-method `type` string used on the wire.
    pub fn method_type(self) -> &'static str {
        match self {
            Algorithm::Ed25519 => "Ed25519VerificationKey2020",
            Algorithm::X25519 => "X25519KeyAgreementKey2019",
        }
    }

    pub fn from_method_type(s: &str) -> Result<Self, KeyError> {
        match s {
            "Ed25519VerificationKey2020" => Ok(Algorithm::Ed25519),
            "X25519KeyAgreementKey2019" => Ok(Algorithm::X25519),
            other => Err(KeyError::UnsupportedAlgorithm(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ed25519 => "ed25519",
            Algorithm::X25519 => "x25519",
        }
    }

    pub fn from_name(s: &str) -> Result<Self, KeyError> {
        match s.to_ascii_lowercase().as_str() {
            "ed25519" => Ok(Algorithm::Ed25519),
            "x25519" => Ok(Algorithm::X25519),
            other => Err(KeyError::UnsupportedAlgorithm(other.to_string())),
        }
    }
}

/// Separation between ordinary request keys and the human-authorization key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyClass {
    Routine,
    HumanAuthorization,
}

/// A key pair plus the metadata a DID document needs to reference it.
#[derive(Clone, Serialize, Deserialize)]
pub struct KeyPair {
    pub algorithm: Algorithm,
    pub public_key: Vec<u8>,
    secret_key: Vec<u8>,
    key_class: KeyClass,
    pub key_id: String,
}

// Debug elides the secret so key pairs can be logged safely.
impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("algorithm", &self.algorithm)
            .field("public_key", &hex::encode(&self.public_key))
            .field("key_class", &self.key_class)
            .field("key_id", &self.key_id)
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn key_class(&self) -> KeyClass {
        self.key_class
    }

    /// Fragment form of the key id, e.g. `#key-1`.
    pub fn fragment(&self) -> String {
        format!("#{}", self.key_id.trim_start_matches('#'))
    }

    pub fn secret_bytes(&self) -> &[u8] {
        &self.secret_key
    }

    /// Rebuild a pair from a stored secret. The public key is re-derived, so a
    /// corrupted store cannot produce a mismatched pair.
    pub fn from_secret(
        algorithm: Algorithm,
        secret_key: Vec<u8>,
        key_class: KeyClass,
        key_id: impl Into<String>,
    ) -> Result<Self, KeyError> {
        let secret: [u8; 32] = secret_key
            .as_slice()
            .try_into()
            .map_err(|_| KeyError::InvalidKey("secret key must be 32 bytes"))?;
        let public_key = match algorithm {
            Algorithm::Ed25519 => ed25519_dalek::SigningKey::from_bytes(&secret)
                .verifying_key()
                .to_bytes()
                .to_vec(),
            Algorithm::X25519 => {
                let secret = x25519_dalek::StaticSecret::from(secret);
                x25519_dalek::PublicKey::from(&secret).as_bytes().to_vec()
            }
        };
        Ok(Self {
            algorithm,
            public_key,
            secret_key,
            key_class,
            key_id: key_id.into(),
        })
    }

    /// Sign with an Ed25519 key. X25519 keys cannot sign.
    pub fn sign(&self, message: &[u8]) -> Result<Vec<u8>, KeyError> {
        match self.algorithm {
            Algorithm::Ed25519 => {
                let secret: [u8; 32] = self
                    .secret_key
                    .as_slice()
                    .try_into()
                    .map_err(|_| KeyError::InvalidKey("secret key must be 32 bytes"))?;
                let key = ed25519_dalek::SigningKey::from_bytes(&secret);
                Ok(key.sign(message).to_bytes().to_vec())
            }
            Algorithm::X25519 => Err(KeyError::NotASigningKey("x25519")),
        }
    }
}

/// Generate a fresh key pair from OS randomness.
pub fn generate_keypair(
    algorithm: Algorithm,
    key_class: KeyClass,
    key_id: impl Into<String>,
) -> KeyPair {
    let mut secret = [0u8; 32];
    OsRng.fill_bytes(&mut secret);
    KeyPair::from_secret(algorithm, secret.to_vec(), key_class, key_id)
        .expect("32-byte secret is always valid")
}

/// Generate a key pair for an algorithm given by name, as the CLI does.
pub fn generate_keypair_named(
    algorithm: &str,
    key_class: KeyClass,
    key_id: impl Into<String>,
) -> Result<KeyPair, KeyError> {
    Ok(generate_keypair(
        Algorithm::from_name(algorithm)?,
        key_class,
        key_id,
    ))
}

/// Verify an Ed25519 signature over `message`.
pub fn verify_signature(public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
    let Ok(key_bytes) = <[u8; 32]>::try_from(public_key) else {
        return false;
    };
    let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&key_bytes) else {
        return false;
    };
    let Ok(sig_bytes) = <[u8; 64]>::try_from(signature) else {
        return false;
    };
    key.verify(message, &ed25519_dalek::Signature::from_bytes(&sig_bytes))
        .is_ok()
}

/// Multibase base58btc encoding used for public keys on the wire.
pub fn multibase_encode(bytes: &[u8]) -> String {
    format!("z{}", bs58::encode(bytes).into_string())
}

pub fn multibase_decode(s: &str) -> Option<Vec<u8>> {
    let rest = s.strip_prefix('z')?;
    bs58::decode(rest).into_vec().ok()
}
