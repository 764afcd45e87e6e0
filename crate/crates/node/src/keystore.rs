//! Encrypted-at-rest key storage.
//!
//! Two files under the store directory: `keys.json` for routine and
//! key-agreement keys, `human.json` for humanAuthorization keys — separate
//! files so the high-risk key can live on stricter storage. Secrets are
//! sealed with ChaCha20-Poly1305 under a PBKDF2-HMAC-SHA256 key derived from
//! the operator passphrase; the key id is bound as associated data.

use std::path::{Path, PathBuf};

use chacha20poly1305::aead::{Aead, Payload};
use chacha20poly1305::{ChaCha20Poly1305, KeyInit, Nonce};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use anp_core::identity::{multibase_decode, multibase_encode, Algorithm, KeyClass, KeyPair};

/// Environment variable the CLI reads the passphrase from.
pub const PASSPHRASE_ENV: &str = "ANP_KEY_PASSPHRASE";

const ROUTINE_FILE: &str = "keys.json";
const HUMAN_FILE: &str = "human.json";
const DEFAULT_ITERATIONS: u32 = 100_000;

#[derive(Debug, Error)]
pub enum KeyStoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt key store: {0}")]
    Corrupt(String),
    #[error("wrong passphrase or tampered entry: {0}")]
    Unsealable(String),
    #[error("no {0} key in store")]
    MissingKey(&'static str),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct KdfParams {
    salt_hex: String,
    iterations: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SealedKey {
    key_id: String,
    algorithm: String,
    key_class: KeyClass,
    public_key_multibase: String,
    /// hex(nonce || ciphertext)
    secret_enc: String,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    kdf: KdfParams,
    keys: Vec<SealedKey>,
}

pub struct KeyStore {
    dir: PathBuf,
    iterations: u32,
}

impl KeyStore {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            iterations: DEFAULT_ITERATIONS,
        }
    }

    fn file_for(&self, class: KeyClass) -> PathBuf {
        match class {
            KeyClass::Routine => self.dir.join(ROUTINE_FILE),
            KeyClass::HumanAuthorization => self.dir.join(HUMAN_FILE),
        }
    }

    fn derive_key(passphrase: &str, salt: &[u8], iterations: u32) -> [u8; 32] {
        let mut key = [0u8; 32];
        pbkdf2::pbkdf2_hmac::<sha2::Sha256>(passphrase.as_bytes(), salt, iterations, &mut key);
        key
    }

    fn read_file(&self, path: &Path) -> Result<Option<StoreFile>, KeyStoreError> {
        if !path.exists() {
            return Ok(None);
        }
        let raw = std::fs::read(path)?;
        let file: StoreFile =
            serde_json::from_slice(&raw).map_err(|e| KeyStoreError::Corrupt(e.to_string()))?;
        Ok(Some(file))
    }

    /// Seal and append a key; creates the file (and directory) on first use.
    pub fn add_key(&self, key: &KeyPair, passphrase: &str) -> Result<(), KeyStoreError> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.file_for(key.key_class());
        let mut file = match self.read_file(&path)? {
            Some(file) => file,
            None => {
                let mut salt = [0u8; 16];
                OsRng.fill_bytes(&mut salt);
                StoreFile {
                    kdf: KdfParams {
                        salt_hex: hex::encode(salt),
                        iterations: self.iterations,
                    },
                    keys: Vec::new(),
                }
            }
        };

        let salt =
            hex::decode(&file.kdf.salt_hex).map_err(|e| KeyStoreError::Corrupt(e.to_string()))?;
        let sealing_key = Self::derive_key(passphrase, &salt, file.kdf.iterations);
        let cipher = ChaCha20Poly1305::new((&sealing_key).into());
        let mut nonce = [0u8; 12];
        OsRng.fill_bytes(&mut nonce);
        let ciphertext = cipher
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: key.secret_bytes(),
                    aad: key.key_id.as_bytes(),
                },
            )
            .expect("sealing cannot fail");
        let mut sealed = nonce.to_vec();
        sealed.extend_from_slice(&ciphertext);

        file.keys.retain(|k| k.key_id != key.key_id);
        file.keys.push(SealedKey {
            key_id: key.key_id.clone(),
            algorithm: key.algorithm.name().to_string(),
            key_class: key.key_class(),
            public_key_multibase: multibase_encode(&key.public_key),
            secret_enc: hex::encode(sealed),
        });
        std::fs::write(&path, serde_json::to_vec_pretty(&file)?)?;
        Ok(())
    }

    fn unseal_file(&self, path: &Path, passphrase: &str) -> Result<Vec<KeyPair>, KeyStoreError> {
        let Some(file) = self.read_file(path)? else {
            return Ok(Vec::new());
        };
        let salt =
            hex::decode(&file.kdf.salt_hex).map_err(|e| KeyStoreError::Corrupt(e.to_string()))?;
        let sealing_key = Self::derive_key(passphrase, &salt, file.kdf.iterations);
        let cipher = ChaCha20Poly1305::new((&sealing_key).into());

        let mut keys = Vec::new();
        for sealed in &file.keys {
            let blob = hex::decode(&sealed.secret_enc)
                .map_err(|e| KeyStoreError::Corrupt(e.to_string()))?;
            if blob.len() < 12 {
                return Err(KeyStoreError::Corrupt(format!(
                    "entry {} too short",
                    sealed.key_id
                )));
            }
            let secret = cipher
                .decrypt(
                    Nonce::from_slice(&blob[..12]),
                    Payload {
                        msg: &blob[12..],
                        aad: sealed.key_id.as_bytes(),
                    },
                )
                .map_err(|_| KeyStoreError::Unsealable(sealed.key_id.clone()))?;
            let algorithm = Algorithm::from_name(&sealed.algorithm)
                .map_err(|e| KeyStoreError::Corrupt(e.to_string()))?;
            let key = KeyPair::from_secret(algorithm, secret, sealed.key_class, &sealed.key_id)
                .map_err(|e| KeyStoreError::Corrupt(e.to_string()))?;
            if multibase_decode(&sealed.public_key_multibase).as_deref()
                != Some(&key.public_key[..])
            {
                return Err(KeyStoreError::Corrupt(format!(
                    "public key mismatch for {}",
                    sealed.key_id
                )));
            }
            keys.push(key);
        }
        Ok(keys)
    }

    /// All keys across both files.
    pub fn load_keys(&self, passphrase: &str) -> Result<Vec<KeyPair>, KeyStoreError> {
        let mut keys = self.unseal_file(&self.dir.join(ROUTINE_FILE), passphrase)?;
        keys.extend(self.unseal_file(&self.dir.join(HUMAN_FILE), passphrase)?);
        Ok(keys)
    }

    /// The signing / agreement / human key bundle a node runs with.
    pub fn load_node_keys(
        &self,
        passphrase: &str,
    ) -> Result<crate::config::NodeKeys, KeyStoreError> {
        let keys = self.load_keys(passphrase)?;
        let signing = keys
            .iter()
            .find(|k| k.algorithm == Algorithm::Ed25519 && k.key_class() == KeyClass::Routine)
            .cloned()
            .ok_or(KeyStoreError::MissingKey("routine signing"))?;
        let agreement = keys
            .iter()
            .find(|k| k.algorithm == Algorithm::X25519)
            .cloned()
            .ok_or(KeyStoreError::MissingKey("key-agreement"))?;
        let human = keys
            .iter()
            .find(|k| k.key_class() == KeyClass::HumanAuthorization)
            .cloned();
        Ok(crate::config::NodeKeys {
            signing,
            agreement,
            human,
        })
    }
}
