//! Agent description documents: the agent's business card.
//!
//! A JSON-LD-shaped document with five field groups — identity, capabilities,
//! interfaces, security, contact — bound to the agent's DID both ways: the
//! document names its DID, and the DID document's `AgentDescription` service
//! endpoint names the document URL. Contexts are opaque identifiers checked
//! by string match; no JSON-LD expansion is performed.
//!
//! Wire field names, bit-exact: `@context`, `anpVersion`, `id`, `did`,
//! `name`, `owner`, `capabilities`, `interfaces`, `security`, `contact`,
//! `proof`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::encoding::b64url;
use crate::identity::{verify_signature, DidId, DidResolver, KeyPair};
use crate::time::Clock;

/// Contexts every description must carry.
pub const SCHEMA_ORG_CONTEXT: &str = "https://schema.org";
/// The protocol vocabulary, hosted as a static file in this repository
/// (`docs/context/anp-v1.json`).
pub const ANP_CONTEXT: &str = "https://agent-network-protocol.com/context/v1";
pub const ANP_VERSION: &str = "1.0";

const PROOF_CONTEXT: &str = "anp-ad-proof.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapabilityKind {
    Information,
    Service,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capability {
    pub name: String,
    pub description: String,
    pub kind: CapabilityKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InterfaceDecl {
    /// Protocol identifier: a negotiated-descriptor digest or well-known name.
    pub protocol: String,
    pub endpoint: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_description: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecurityScheme {
    #[serde(rename = "didwba")]
    DidWba,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityDecl {
    pub scheme: SecurityScheme,
    pub did: DidId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentProof {
    /// DID URL of the verification method that signed.
    pub verification_method: String,
    /// Unix seconds.
    pub created: u64,
    #[serde(with = "b64url")]
    pub proof_value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdDocument {
    #[serde(rename = "@context")]
    pub context: Vec<String>,
    #[serde(rename = "anpVersion")]
    pub anp_version: String,
    /// URL this document is served at.
    pub id: String,
    pub did: DidId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    #[serde(default)]
    pub capabilities: Vec<Capability>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceDecl>,
    pub security: SecurityDecl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<Contact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<DocumentProof>,
}

/// Companion of [`DidId::to_https_url`]: where the agent description for a
/// DID is served by convention.
pub fn default_ad_url(did: &DidId) -> String {
    if did.path_segments().is_empty() {
        format!("https://{}/.well-known/ad.json", did.authority())
    } else {
        format!(
            "https://{}/{}/ad.json",
            did.authority(),
            did.path_segments().join("/")
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildAdError {
    #[error("name must be nonempty")]
    EmptyName,
    #[error("duplicate capability name: {0}")]
    DuplicateCapabilityName(String),
}

/// Build an unsigned description with the standard contexts and didwba
/// security, served at the conventional URL for `did`.
pub fn build_agent_description(
    did: &DidId,
    name: &str,
    capabilities: Vec<Capability>,
    interfaces: Vec<InterfaceDecl>,
    contact: Option<Contact>,
) -> Result<AdDocument, BuildAdError> {
    if name.is_empty() {
        return Err(BuildAdError::EmptyName);
    }
    let mut seen = std::collections::HashSet::new();
    for capability in &capabilities {
        if !seen.insert(capability.name.clone()) {
            return Err(BuildAdError::DuplicateCapabilityName(
                capability.name.clone(),
            ));
        }
    }
    Ok(AdDocument {
        context: vec![SCHEMA_ORG_CONTEXT.to_string(), ANP_CONTEXT.to_string()],
        anp_version: ANP_VERSION.to_string(),
        id: default_ad_url(did),
        did: did.clone(),
        name: name.to_string(),
        owner: None,
        capabilities,
        interfaces,
        security: SecurityDecl {
            scheme: SecurityScheme::DidWba,
            did: did.clone(),
        },
        contact,
        proof: None,
    })
}

/// Canonical bytes covered by the proof signature: the document minus the
/// `proof` field, sorted-key compact JSON. Array order is significant.
pub fn canonicalize(doc: &AdDocument) -> Vec<u8> {
    let mut value = serde_json::to_value(doc).expect("ad document serializes");
    if let Value::Object(map) = &mut value {
        map.remove("proof");
    }
    serde_json::to_vec(&value).expect("value serializes")
}

fn proof_payload(doc: &AdDocument) -> Vec<u8> {
    let mut payload = format!("{PROOF_CONTEXT}\n").into_bytes();
    payload.extend_from_slice(&canonicalize(doc));
    payload
}

/// Attach a proof signed by `key`, which `method_id` must name in the
/// agent's DID document.
pub fn sign_description(
    mut doc: AdDocument,
    key: &KeyPair,
    method_id: &str,
    clock: &dyn Clock,
) -> Result<AdDocument, crate::identity::KeyError> {
    doc.proof = None;
    let signature = key.sign(&proof_payload(&doc))?;
    doc.proof = Some(DocumentProof {
        verification_method: method_id.to_string(),
        created: clock.now_unix(),
        proof_value: signature,
    });
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescriptionOutcome {
    Verified,
    Failed(VerifyFailure),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyFailure {
    NoProof,
    BadSignature,
    UnknownMethod,
    BindingMismatch,
    ResolutionFailure(String),
}

impl DescriptionOutcome {
    pub fn is_verified(&self) -> bool {
        matches!(self, DescriptionOutcome::Verified)
    }
}

impl std::fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerifyFailure::NoProof => write!(f, "no-proof"),
            VerifyFailure::BadSignature => write!(f, "bad-signature"),
            VerifyFailure::UnknownMethod => write!(f, "unknown-method"),
            VerifyFailure::BindingMismatch => write!(f, "binding-mismatch"),
            VerifyFailure::ResolutionFailure(r) => write!(f, "resolution-failure: {r}"),
        }
    }
}

/// Verify a signed description against the agent's resolved DID document,
/// including the bidirectional DID↔AD binding when the DID document
/// advertises an AgentDescription endpoint.
pub fn verify_description(doc: &AdDocument, resolver: &dyn DidResolver) -> DescriptionOutcome {
    let Some(proof) = &doc.proof else {
        return DescriptionOutcome::Failed(VerifyFailure::NoProof);
    };
    let did_doc = match resolver.resolve(&doc.did) {
        Ok(d) => d,
        Err(e) => {
            return DescriptionOutcome::Failed(VerifyFailure::ResolutionFailure(e.to_string()))
        }
    };

    // No third-party proofs: the method must belong to the described DID.
    if let Some((method_did, _)) = proof.verification_method.split_once('#') {
        if !method_did.is_empty() && method_did != doc.did.to_string() {
            return DescriptionOutcome::Failed(VerifyFailure::UnknownMethod);
        }
    }
    let Some(method) = did_doc.find_method(&proof.verification_method) else {
        return DescriptionOutcome::Failed(VerifyFailure::UnknownMethod);
    };

    let mut unsigned = doc.clone();
    unsigned.proof = None;
    if !verify_signature(
        &method.public_key,
        &proof_payload(&unsigned),
        &proof.proof_value,
    ) {
        return DescriptionOutcome::Failed(VerifyFailure::BadSignature);
    }

    if let Some(endpoint) = did_doc.agent_description_url() {
        if endpoint != doc.id {
            return DescriptionOutcome::Failed(VerifyFailure::BindingMismatch);
        }
    }
    DescriptionOutcome::Verified
}

/// A problem found while validating a raw description document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdViolation {
    MalformedJson(String),
    MissingField(&'static str),
    InvalidField(String),
    MissingSchemaOrgContext,
    MissingAnpContext,
    UnsupportedVersion(String),
    EmptyName,
    DuplicateCapability(String),
    InsecureEndpoint(String),
    SecurityDidMismatch,
}

impl std::fmt::Display for AdViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdViolation::MalformedJson(e) => write!(f, "malformed json: {e}"),
            AdViolation::MissingField(name) => write!(f, "missing required field: {name}"),
            AdViolation::InvalidField(e) => write!(f, "invalid field: {e}"),
            AdViolation::MissingSchemaOrgContext => {
                write!(f, "@context lacks {SCHEMA_ORG_CONTEXT}")
            }
            AdViolation::MissingAnpContext => write!(f, "@context lacks {ANP_CONTEXT}"),
            AdViolation::UnsupportedVersion(v) => write!(f, "unsupported anpVersion: {v}"),
            AdViolation::EmptyName => write!(f, "name is empty"),
            AdViolation::DuplicateCapability(name) => {
                write!(f, "duplicate capability name: {name}")
            }
            AdViolation::InsecureEndpoint(url) => write!(f, "insecure endpoint: {url}"),
            AdViolation::SecurityDidMismatch => {
                write!(f, "security.did does not match the document did")
            }
        }
    }
}

const REQUIRED_FIELDS: [&str; 6] = ["@context", "anpVersion", "id", "did", "name", "security"];

/// Parse and validate raw bytes. Returns the document only when the
/// violation list is empty.
pub fn validate_agent_description(raw: &[u8]) -> (Option<AdDocument>, Vec<AdViolation>) {
    let value: Value = match serde_json::from_slice(raw) {
        Ok(v) => v,
        Err(e) => return (None, vec![AdViolation::MalformedJson(e.to_string())]),
    };
    let Some(object) = value.as_object() else {
        return (
            None,
            vec![AdViolation::MalformedJson("not a JSON object".to_string())],
        );
    };

    let mut violations: Vec<AdViolation> = REQUIRED_FIELDS
        .iter()
        .filter(|f| !object.contains_key(**f))
        .map(|f| AdViolation::MissingField(f))
        .collect();
    if !violations.is_empty() {
        return (None, violations);
    }

    let doc: AdDocument = match serde_json::from_value(value) {
        Ok(d) => d,
        Err(e) => return (None, vec![AdViolation::InvalidField(e.to_string())]),
    };

    if !doc.context.iter().any(|c| c == SCHEMA_ORG_CONTEXT) {
        violations.push(AdViolation::MissingSchemaOrgContext);
    }
    if !doc.context.iter().any(|c| c == ANP_CONTEXT) {
        violations.push(AdViolation::MissingAnpContext);
    }
    if doc.anp_version != ANP_VERSION {
        violations.push(AdViolation::UnsupportedVersion(doc.anp_version.clone()));
    }
    if doc.name.is_empty() {
        violations.push(AdViolation::EmptyName);
    }
    let mut seen = std::collections::HashSet::new();
    for capability in &doc.capabilities {
        if !seen.insert(capability.name.clone()) {
            violations.push(AdViolation::DuplicateCapability(capability.name.clone()));
        }
    }
    for interface in &doc.interfaces {
        let secure =
            interface.endpoint.starts_with("https://") || interface.endpoint.starts_with("sim://");
        if !secure {
            violations.push(AdViolation::InsecureEndpoint(interface.endpoint.clone()));
        }
    }
    if doc.security.did != doc.did {
        violations.push(AdViolation::SecurityDidMismatch);
    }

    if violations.is_empty() {
        (Some(doc), violations)
    } else {
        (None, violations)
    }
}
