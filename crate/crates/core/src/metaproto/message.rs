//! Negotiation messages exchanged over the authenticated negotiate route.

use serde::{Deserialize, Serialize};

use super::descriptor::{ProtocolDescriptor, Requirement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MessageKind {
    Propose,
    Counter,
    Accept,
    Reject,
    TestVectors,
    TestResult,
    GoLive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NegotiationMessage {
    pub session_id: String,
    pub round: u32,
    pub kind: MessageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requirement: Option<Requirement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<ProtocolDescriptor>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

impl NegotiationMessage {
    fn bare(session_id: &str, round: u32, kind: MessageKind) -> Self {
        Self {
            session_id: session_id.to_string(),
            round,
            kind,
            requirement: None,
            candidates: None,
            chosen: None,
            payload: None,
        }
    }

    pub fn propose(
        session_id: &str,
        requirement: Requirement,
        candidates: Vec<ProtocolDescriptor>,
    ) -> Self {
        Self {
            requirement: Some(requirement),
            candidates: Some(candidates),
            ..Self::bare(session_id, 0, MessageKind::Propose)
        }
    }

    pub fn counter(session_id: &str, round: u32, candidates: Vec<ProtocolDescriptor>) -> Self {
        Self {
            candidates: Some(candidates),
            ..Self::bare(session_id, round, MessageKind::Counter)
        }
    }

    pub fn accept(session_id: &str, round: u32, chosen: &str) -> Self {
        Self {
            chosen: Some(chosen.to_string()),
            ..Self::bare(session_id, round, MessageKind::Accept)
        }
    }

    pub fn reject(session_id: &str, round: u32, reason: &str) -> Self {
        Self {
            payload: Some(serde_json::json!({ "reason": reason })),
            ..Self::bare(session_id, round, MessageKind::Reject)
        }
    }

    pub fn test_vectors(session_id: &str, round: u32, payload: serde_json::Value) -> Self {
        Self {
            payload: Some(payload),
            ..Self::bare(session_id, round, MessageKind::TestVectors)
        }
    }

    pub fn test_result(session_id: &str, round: u32, payload: serde_json::Value) -> Self {
        Self {
            payload: Some(payload),
            ..Self::bare(session_id, round, MessageKind::TestResult)
        }
    }

    pub fn go_live(session_id: &str, round: u32, chosen: &str) -> Self {
        Self {
            chosen: Some(chosen.to_string()),
            ..Self::bare(session_id, round, MessageKind::GoLive)
        }
    }

    /// Kind-specific fields must be present exactly when required.
    pub fn shape_error(&self) -> Option<String> {
        let candidates_ok = self
            .candidates
            .as_ref()
            .is_some_and(|c| !c.is_empty() && c.iter().all(|d| d.id_is_consistent()));
        match self.kind {
            MessageKind::Propose => {
                if self.requirement.is_none() {
                    Some("propose requires a requirement".to_string())
                } else if !candidates_ok {
                    Some("propose requires consistent, nonempty candidates".to_string())
                } else {
                    None
                }
            }
            MessageKind::Counter => (!candidates_ok)
                .then(|| "counter requires consistent, nonempty candidates".to_string()),
            MessageKind::Accept | MessageKind::GoLive => self
                .chosen
                .is_none()
                .then(|| format!("{:?} requires a chosen protocol id", self.kind)),
            MessageKind::Reject => None,
            MessageKind::TestVectors | MessageKind::TestResult => self
                .payload
                .is_none()
                .then(|| format!("{:?} requires a payload", self.kind)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::descriptor::{FieldSpec, TransportKind};
    use super::*;

    #[test]
    fn kind_names_on_the_wire() {
        let msg = NegotiationMessage::test_vectors("s", 1, serde_json::json!({"vectors": []}));
        let value = serde_json::to_value(&msg).unwrap();
        assert_eq!(value["kind"], "testVectors");
        assert_eq!(value["sessionId"], "s");
        let round_trip: NegotiationMessage = serde_json::from_value(value).unwrap();
        assert_eq!(round_trip, msg);
    }

    #[test]
    fn shape_rules() {
        let descriptor = ProtocolDescriptor::new(
            TransportKind::HttpJson,
            vec![FieldSpec::required("text", "string")],
            "echo",
        );
        let ok = NegotiationMessage::propose(
            "s",
            Requirement::new("echo text"),
            vec![descriptor.clone()],
        );
        assert_eq!(ok.shape_error(), None);

        let mut missing_requirement = ok.clone();
        missing_requirement.requirement = None;
        assert!(missing_requirement.shape_error().is_some());

        let mut empty_candidates = ok.clone();
        empty_candidates.candidates = Some(vec![]);
        assert!(empty_candidates.shape_error().is_some());

        let mut inconsistent = ok;
        inconsistent.candidates.as_mut().unwrap()[0].protocol_id = "0".repeat(64);
        assert!(inconsistent.shape_error().is_some());

        let accept = NegotiationMessage::accept("s", 0, &descriptor.protocol_id);
        assert_eq!(accept.shape_error(), None);
        let mut accept_without_choice = accept;
        accept_without_choice.chosen = None;
        assert!(accept_without_choice.shape_error().is_some());
    }
}
