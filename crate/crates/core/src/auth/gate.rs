//! The human-authorization gate for high-risk operations.
//!
//! Low-risk routes proceed on agent authority alone. High-risk routes demand
//! an explicit confirmation signed with a `humanAuthorization`-purpose key of
//! the requester — a routine key never satisfies the gate. Every high-risk
//! decision is appended to an audit log.
//!
//! Confirmation signature payload:
//!
//! ```text
//! wba-human-auth.v1\n<route>\n<requester did>\n<timestamp>
//! ```

use std::sync::Mutex;

use crate::identity::{verify_signature, DidDocument, DidId, KeyPair};
use crate::time::Clock;

const HUMAN_AUTH_CONTEXT: &str = "wba-human-auth.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskClass {
    Low,
    High,
}

/// A human's signed approval of one operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanConfirmation {
    /// Fragment of the humanAuthorization verification method that signed.
    pub method_fragment: String,
    pub timestamp: u64,
    pub signature: Vec<u8>,
}

/// The exact bytes a human-authorization key signs to approve an operation.
pub fn human_confirmation_payload(route: &str, requester: &DidId, timestamp: u64) -> Vec<u8> {
    format!("{HUMAN_AUTH_CONTEXT}\n{route}\n{requester}\n{timestamp}").into_bytes()
}

/// Capability that asks the human for confirmation. Implementations range
/// from an interactive prompt to the header-carried confirmation a node
/// extracts from a request.
pub trait HumanGate {
    fn confirm(&self, route: &str, requester: &DidId) -> Option<HumanConfirmation>;
}

/// Gate that never confirms.
pub struct DecliningGate;

impl HumanGate for DecliningGate {
    fn confirm(&self, _route: &str, _requester: &DidId) -> Option<HumanConfirmation> {
        None
    }
}

/// Gate that signs with a fixed key, standing in for an interactive approver.
pub struct SigningGate<'a> {
    pub key: &'a KeyPair,
    pub clock: &'a dyn Clock,
}

impl HumanGate for SigningGate<'_> {
    fn confirm(&self, route: &str, requester: &DidId) -> Option<HumanConfirmation> {
        let timestamp = self.clock.now_unix();
        let payload = human_confirmation_payload(route, requester, timestamp);
        let signature = self.key.sign(&payload).ok()?;
        Some(HumanConfirmation {
            method_fragment: self.key.fragment(),
            timestamp,
            signature,
        })
    }
}

/// Gate carrying a confirmation that arrived with the request.
pub struct PresentedConfirmation(pub Option<HumanConfirmation>);

impl HumanGate for PresentedConfirmation {
    fn confirm(&self, _route: &str, _requester: &DidId) -> Option<HumanConfirmation> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    HumanConfirmationAbsent,
    HumanSignatureInvalid,
}

impl std::fmt::Display for DenyReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenyReason::HumanConfirmationAbsent => write!(f, "human-confirmation-absent"),
            DenyReason::HumanSignatureInvalid => write!(f, "human-signature-invalid"),
        }
    }
}

impl Decision {
    pub fn is_allowed(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// One immutable entry per high-risk decision.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub route: String,
    pub requester: DidId,
    pub allowed: bool,
    pub deny_reason: Option<DenyReason>,
    /// The verified human signature on allowed operations.
    pub signature: Option<Vec<u8>>,
    pub at: u64,
}

#[derive(Default)]
pub struct AuditLog {
    records: Mutex<Vec<AuditRecord>>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn append(&self, record: AuditRecord) {
        self.records.lock().unwrap().push(record);
    }

    pub fn snapshot(&self) -> Vec<AuditRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decide whether an operation may proceed.
///
/// Low risk allows unconditionally. High risk requires a confirmation whose
/// signature verifies under a humanAuthorization-purpose method in the
/// requester's DID document; the decision (either way) is appended to `audit`.
pub fn authorize_operation(
    route: &str,
    risk: RiskClass,
    requester_doc: &DidDocument,
    gate: &dyn HumanGate,
    audit: &AuditLog,
    clock: &dyn Clock,
) -> Decision {
    if risk == RiskClass::Low {
        return Decision::Allow;
    }

    let requester = &requester_doc.id;
    let decision = match gate.confirm(route, requester) {
        None => Decision::Deny(DenyReason::HumanConfirmationAbsent),
        Some(confirmation) => {
            let payload = human_confirmation_payload(route, requester, confirmation.timestamp);
            let frag = confirmation.method_fragment.trim_start_matches('#');
            let valid = requester_doc
                .human_authorization_methods()
                .filter(|m| m.fragment() == frag)
                .any(|m| verify_signature(&m.public_key, &payload, &confirmation.signature));
            if valid {
                audit.append(AuditRecord {
                    route: route.to_string(),
                    requester: requester.clone(),
                    allowed: true,
                    deny_reason: None,
                    signature: Some(confirmation.signature.clone()),
                    at: clock.now_unix(),
                });
                return Decision::Allow;
            }
            Decision::Deny(DenyReason::HumanSignatureInvalid)
        }
    };

    if let Decision::Deny(reason) = &decision {
        audit.append(AuditRecord {
            route: route.to_string(),
            requester: requester.clone(),
            allowed: false,
            deny_reason: Some(*reason),
            signature: None,
            at: clock.now_unix(),
        });
    }
    decision
}
