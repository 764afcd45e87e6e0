//! Protocol descriptors and requirements: the vocabulary of negotiation.
//!
//! A descriptor pins a concrete protocol — transport, message schema,
//! processing notes — and is identified by the SHA-256 of its canonical
//! serialization, so equal bodies always carry equal ids and an id can be
//! checked against the body it claims to describe.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One field of a message schema or requirement signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub field_type: String,
    pub required: bool,
}

impl FieldSpec {
    pub fn required(name: &str, field_type: &str) -> Self {
        Self {
            name: name.to_string(),
            field_type: field_type.to_string(),
            required: true,
        }
    }

    pub fn optional(name: &str, field_type: &str) -> Self {
        Self {
            name: name.to_string(),
            field_type: field_type.to_string(),
            required: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportKind {
    #[serde(rename = "http-json")]
    HttpJson,
    #[serde(rename = "envelope-binary")]
    EnvelopeBinary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProtocolDescriptor {
    /// SHA-256 (lowercase hex) of the canonical serialization of the rest.
    pub protocol_id: String,
    pub transport: TransportKind,
    pub message_schema: Vec<FieldSpec>,
    pub processing_notes: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DescriptorBody<'a> {
    transport: TransportKind,
    message_schema: &'a [FieldSpec],
    processing_notes: &'a str,
}

impl ProtocolDescriptor {
    pub fn new(
        transport: TransportKind,
        message_schema: Vec<FieldSpec>,
        processing_notes: impl Into<String>,
    ) -> Self {
        let processing_notes = processing_notes.into();
        let protocol_id = Self::digest(transport, &message_schema, &processing_notes);
        Self {
            protocol_id,
            transport,
            message_schema,
            processing_notes,
        }
    }

    fn digest(transport: TransportKind, schema: &[FieldSpec], notes: &str) -> String {
        let body = crate::canonical::to_canonical_json(&DescriptorBody {
            transport,
            message_schema: schema,
            processing_notes: notes,
        })
        .expect("descriptor body serializes");
        hex::encode(Sha256::digest(&body))
    }

    /// Whether the carried id matches the digest of the body.
    pub fn id_is_consistent(&self) -> bool {
        self.protocol_id
            == Self::digest(self.transport, &self.message_schema, &self.processing_notes)
    }
}

/// What the initiator wants, in natural language plus structured field lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Requirement {
    pub description: String,
    #[serde(default)]
    pub inputs: Vec<FieldSpec>,
    #[serde(default)]
    pub expected_outputs: Vec<FieldSpec>,
}

impl Requirement {
    pub fn new(description: impl Into<String>) -> Self {
        Self {
            description: description.into(),
            inputs: Vec::new(),
            expected_outputs: Vec::new(),
        }
    }

    /// Cache key: digest of the canonical form, so reordered JSON keys in a
    /// re-serialized requirement still hit.
    pub fn digest(&self) -> String {
        crate::canonical::canonical_digest(self).expect("requirement serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ProtocolDescriptor {
        ProtocolDescriptor::new(
            TransportKind::HttpJson,
            vec![FieldSpec::required("text", "string")],
            "echo the text field back",
        )
    }

    #[test]
    fn equal_bodies_have_equal_ids() {
        assert_eq!(sample().protocol_id, sample().protocol_id);
        assert!(sample().id_is_consistent());
    }

    #[test]
    fn different_bodies_have_different_ids() {
        let other = ProtocolDescriptor::new(
            TransportKind::HttpJson,
            vec![FieldSpec::required("text", "string")],
            "reverse the text field",
        );
        assert_ne!(sample().protocol_id, other.protocol_id);
    }

    #[test]
    fn tampered_id_is_detected() {
        let mut descriptor = sample();
        descriptor.protocol_id = "0".repeat(64);
        assert!(!descriptor.id_is_consistent());
    }

    #[test]
    fn requirement_digest_survives_key_reordering() {
        let requirement = Requirement {
            description: "translate text".to_string(),
            inputs: vec![FieldSpec::required("text", "string")],
            expected_outputs: vec![FieldSpec::required("translation", "string")],
        };
        let reordered: Requirement = serde_json::from_str(
            r#"{"expectedOutputs":[{"required":true,"type":"string","name":"translation"}],
                "inputs":[{"name":"text","type":"string","required":true}],
                "description":"translate text"}"#,
        )
        .unwrap();
        assert_eq!(requirement.digest(), reordered.digest());
    }

    #[test]
    fn wire_format_uses_kebab_transport() {
        let value = serde_json::to_value(sample()).unwrap();
        assert_eq!(value["transport"], "http-json");
        assert!(value["protocolId"].as_str().unwrap().len() == 64);
        assert_eq!(value["messageSchema"][0]["type"], "string");
    }
}
