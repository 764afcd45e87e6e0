//! DID documents: the public record resolved from a did:wba identifier.
//!
//! Wire format is canonical JSON with the fields `id`, `verificationMethod`,
//! `authentication`, `humanAuthorization`, `keyAgreement` and `service`;
//! public keys are multibase base58btc. Purposes are expressed by membership
//! in the reference lists, and the `humanAuthorization` list must stay
//! disjoint from `authentication` so a high-risk confirmation key can never
//! double as a routine request key.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::did::DidId;
use super::keys::{multibase_decode, multibase_encode, Algorithm, KeyClass, KeyPair};

/// What a verification method may be used for, derived from the reference
/// list that names it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyPurpose {
    Authentication,
    KeyAgreement,
    HumanAuthorization,
}

/// A named public key inside a DID document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WireMethod", into = "WireMethod")]
pub struct VerificationMethod {
    /// Full DID URL with fragment, e.g. `did:wba:example.com#key-1`.
    pub id: String,
    pub controller: DidId,
    pub algorithm: Algorithm,
    pub public_key: Vec<u8>,
}

impl VerificationMethod {
    pub fn fragment(&self) -> &str {
        fragment_of(&self.id)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireMethod {
    id: String,
    #[serde(rename = "type")]
    method_type: String,
    controller: DidId,
    public_key_multibase: String,
}

impl From<VerificationMethod> for WireMethod {
    fn from(m: VerificationMethod) -> Self {
        WireMethod {
            id: m.id,
            method_type: m.algorithm.method_type().to_string(),
            controller: m.controller,
            public_key_multibase: multibase_encode(&m.public_key),
        }
    }
}

impl TryFrom<WireMethod> for VerificationMethod {
    type Error = String;

    fn try_from(w: WireMethod) -> Result<Self, Self::Error> {
        let algorithm = Algorithm::from_method_type(&w.method_type).map_err(|e| e.to_string())?;
        let public_key = multibase_decode(&w.public_key_multibase)
            .ok_or_else(|| format!("bad multibase public key on {}", w.id))?;
        Ok(VerificationMethod {
            id: w.id,
            controller: w.controller,
            algorithm,
            public_key,
        })
    }
}

/// A service endpoint advertised by the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServiceEntry {
    #[serde(rename = "type")]
    pub service_type: String,
    pub service_endpoint: String,
}

/// Service type linking a DID to its agent description document.
pub const AGENT_DESCRIPTION_SERVICE: &str = "AgentDescription";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DidDocument {
    pub id: DidId,
    pub verification_method: Vec<VerificationMethod>,
    /// References (DID URLs) to routine request-signing methods.
    pub authentication: Vec<String>,
    /// References to the human-confirmation method(s) for high-risk operations.
    #[serde(default)]
    pub human_authorization: Vec<String>,
    /// References to key-agreement methods used for session establishment.
    #[serde(default)]
    pub key_agreement: Vec<String>,
    #[serde(default)]
    pub service: Vec<ServiceEntry>,
}

impl DidDocument {
    /// Look up a verification method by fragment or full DID URL.
    pub fn find_method(&self, reference: &str) -> Option<&VerificationMethod> {
        let frag = fragment_of(reference);
        self.verification_method
            .iter()
            .find(|m| m.fragment() == frag)
    }

    fn list_contains(list: &[String], reference: &str) -> bool {
        let frag = fragment_of(reference);
        list.iter().any(|r| fragment_of(r) == frag)
    }

    /// Purpose of a referenced method, if the reference appears in any list.
    pub fn purpose_of(&self, reference: &str) -> Option<KeyPurpose> {
        if Self::list_contains(&self.authentication, reference) {
            Some(KeyPurpose::Authentication)
        } else if Self::list_contains(&self.human_authorization, reference) {
            Some(KeyPurpose::HumanAuthorization)
        } else if Self::list_contains(&self.key_agreement, reference) {
            Some(KeyPurpose::KeyAgreement)
        } else {
            None
        }
    }

    /// Methods usable for routine request authentication.
    pub fn authentication_methods(&self) -> impl Iterator<Item = &VerificationMethod> {
        self.authentication
            .iter()
            .filter_map(|r| self.find_method(r))
    }

    /// Methods usable for human confirmation of high-risk operations.
    pub fn human_authorization_methods(&self) -> impl Iterator<Item = &VerificationMethod> {
        self.human_authorization
            .iter()
            .filter_map(|r| self.find_method(r))
    }

    /// Methods usable for key agreement.
    pub fn key_agreement_methods(&self) -> impl Iterator<Item = &VerificationMethod> {
        self.key_agreement
            .iter()
            .filter_map(|r| self.find_method(r))
    }

    /// URL of the agent description document, when advertised.
    pub fn agent_description_url(&self) -> Option<&str> {
        self.service
            .iter()
            .find(|s| s.service_type == AGENT_DESCRIPTION_SERVICE)
            .map(|s| s.service_endpoint.as_str())
    }

    /// Canonical JSON bytes (sorted keys, compact, UTF-8).
    pub fn to_canonical_json(&self) -> Vec<u8> {
        crate::canonical::to_canonical_json(self).expect("did document serializes")
    }
}

fn fragment_of(reference: &str) -> &str {
    match reference.rsplit_once('#') {
        Some((_, frag)) => frag,
        None => reference,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("at least one routine key is required")]
    NoRoutineKeys,
    #[error("key-class violation: {0}")]
    KeyClassViolation(String),
    #[error("duplicate key id: {0}")]
    DuplicateKeyId(String),
}

/// Assemble a DID document from key pairs. Only public material is copied in.
pub fn build_did_document(
    id: &DidId,
    routine_keys: &[KeyPair],
    human_auth_key: Option<&KeyPair>,
    agreement_keys: &[KeyPair],
    ad_url: Option<&str>,
) -> Result<DidDocument, BuildError> {
    if routine_keys.is_empty() {
        return Err(BuildError::NoRoutineKeys);
    }
    for key in routine_keys {
        if key.key_class() != KeyClass::Routine {
            return Err(BuildError::KeyClassViolation(format!(
                "key {} offered as routine but classified {:?}",
                key.key_id,
                key.key_class()
            )));
        }
        if key.algorithm != Algorithm::Ed25519 {
            return Err(BuildError::KeyClassViolation(format!(
                "authentication key {} must be a signing key",
                key.key_id
            )));
        }
    }
    if let Some(key) = human_auth_key {
        if key.key_class() != KeyClass::HumanAuthorization {
            return Err(BuildError::KeyClassViolation(format!(
                "key {} offered as humanAuthorization but classified {:?}",
                key.key_id,
                key.key_class()
            )));
        }
        if key.algorithm != Algorithm::Ed25519 {
            return Err(BuildError::KeyClassViolation(format!(
                "humanAuthorization key {} must be a signing key",
                key.key_id
            )));
        }
    }
    for key in agreement_keys {
        if key.algorithm != Algorithm::X25519 {
            return Err(BuildError::KeyClassViolation(format!(
                "key-agreement key {} must be an agreement key",
                key.key_id
            )));
        }
    }

    let mut methods = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut push_method = |key: &KeyPair| -> Result<String, BuildError> {
        let frag = key.fragment();
        if !seen.insert(frag.clone()) {
            return Err(BuildError::DuplicateKeyId(key.key_id.clone()));
        }
        let method_id = id.with_fragment(&frag);
        methods.push(VerificationMethod {
            id: method_id.clone(),
            controller: id.clone(),
            algorithm: key.algorithm,
            public_key: key.public_key.clone(),
        });
        Ok(method_id)
    };

    let mut authentication = Vec::new();
    for key in routine_keys {
        authentication.push(push_method(key)?);
    }
    let mut human_authorization = Vec::new();
    if let Some(key) = human_auth_key {
        human_authorization.push(push_method(key)?);
    }
    let mut key_agreement = Vec::new();
    for key in agreement_keys {
        key_agreement.push(push_method(key)?);
    }

    let service = ad_url
        .map(|url| {
            vec![ServiceEntry {
                service_type: AGENT_DESCRIPTION_SERVICE.to_string(),
                service_endpoint: url.to_string(),
            }]
        })
        .unwrap_or_default();

    Ok(DidDocument {
        id: id.clone(),
        verification_method: methods,
        authentication,
        human_authorization,
        key_agreement,
        service,
    })
}

/// A structural violation found by [`validate_did_document`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoVerificationMethods,
    NoAuthenticationMethods,
    DanglingReference {
        list: &'static str,
        reference: String,
    },
    AuthHumanAuthOverlap {
        reference: String,
    },
    DuplicateMethodId {
        id: String,
    },
    InvalidPublicKey {
        id: String,
    },
    MultipleAgentDescriptionServices,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NoVerificationMethods => write!(f, "document lists no verification methods"),
            Violation::NoAuthenticationMethods => {
                write!(f, "document lists no authentication references")
            }
            Violation::DanglingReference { list, reference } => {
                write!(
                    f,
                    "{list} reference {reference} has no matching verification method"
                )
            }
            Violation::AuthHumanAuthOverlap { reference } => {
                write!(f, "auth/human-auth overlap: {reference}")
            }
            Violation::DuplicateMethodId { id } => write!(f, "duplicate method id {id}"),
            Violation::InvalidPublicKey { id } => {
                write!(f, "method {id} has an invalid public key")
            }
            Violation::MultipleAgentDescriptionServices => {
                write!(f, "more than one AgentDescription service entry")
            }
        }
    }
}

/// Check every structural invariant; an empty report means the document is valid.
pub fn validate_did_document(doc: &DidDocument) -> Vec<Violation> {
    let mut violations = Vec::new();

    if doc.verification_method.is_empty() {
        violations.push(Violation::NoVerificationMethods);
    }
    if doc.authentication.is_empty() {
        violations.push(Violation::NoAuthenticationMethods);
    }

    let mut fragments = std::collections::HashSet::new();
    for method in &doc.verification_method {
        if !fragments.insert(method.fragment().to_string()) {
            violations.push(Violation::DuplicateMethodId {
                id: method.id.clone(),
            });
        }
        if method.public_key.len() != 32 {
            violations.push(Violation::InvalidPublicKey {
                id: method.id.clone(),
            });
        }
    }

    for (list, refs) in [
        ("authentication", &doc.authentication),
        ("humanAuthorization", &doc.human_authorization),
        ("keyAgreement", &doc.key_agreement),
    ] {
        for reference in refs {
            if doc.find_method(reference).is_none() {
                violations.push(Violation::DanglingReference {
                    list,
                    reference: reference.clone(),
                });
            }
        }
    }

    for reference in &doc.human_authorization {
        if DidDocument::list_contains(&doc.authentication, reference) {
            violations.push(Violation::AuthHumanAuthOverlap {
                reference: reference.clone(),
            });
        }
    }

    let ad_services = doc
        .service
        .iter()
        .filter(|s| s.service_type == AGENT_DESCRIPTION_SERVICE)
        .count();
    if ad_services > 1 {
        violations.push(Violation::MultipleAgentDescriptionServices);
    }

    violations
}
