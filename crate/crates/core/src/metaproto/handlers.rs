//! Pre-registered protocol handlers and the joint test phase.
//!
//! Agreeing on a descriptor selects a handler keyed by protocol id. Anything
//! that can map inputs to outputs can stand behind a descriptor — the
//! registry is the pluggable boundary where generated or model-backed
//! implementations would plug in.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::descriptor::{FieldSpec, ProtocolDescriptor, TransportKind};
use super::session::{NegotiationSession, Phase};

pub trait ProtocolHandler: Send + Sync {
    fn handle(&self, input: &str) -> String;
}

/// Returns its input unchanged.
pub struct EchoHandler;

impl ProtocolHandler for EchoHandler {
    fn handle(&self, input: &str) -> String {
        input.to_string()
    }
}

/// Reverses its input, character-wise.
pub struct ReverseHandler;

impl ProtocolHandler for ReverseHandler {
    fn handle(&self, input: &str) -> String {
        input.chars().rev().collect()
    }
}

pub fn echo_descriptor() -> ProtocolDescriptor {
    ProtocolDescriptor::new(
        TransportKind::HttpJson,
        vec![FieldSpec::required("text", "string")],
        "reply with the text field unchanged",
    )
}

pub fn reverse_descriptor() -> ProtocolDescriptor {
    ProtocolDescriptor::new(
        TransportKind::HttpJson,
        vec![FieldSpec::required("text", "string")],
        "reply with the text field reversed",
    )
}

#[derive(Default, Clone)]
pub struct HandlerRegistry {
    handlers: BTreeMap<String, Arc<dyn ProtocolHandler>>,
}

impl HandlerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with the built-in echo and reverse protocols.
    pub fn standard() -> Self {
        let mut registry = Self::new();
        registry.register(&echo_descriptor(), Arc::new(EchoHandler));
        registry.register(&reverse_descriptor(), Arc::new(ReverseHandler));
        registry
    }

    pub fn register(&mut self, descriptor: &ProtocolDescriptor, handler: Arc<dyn ProtocolHandler>) {
        self.handlers
            .insert(descriptor.protocol_id.clone(), handler);
    }

    pub fn get(&self, protocol_id: &str) -> Option<Arc<dyn ProtocolHandler>> {
        self.handlers.get(protocol_id).cloned()
    }

    pub fn supports(&self, protocol_id: &str) -> bool {
        self.handlers.contains_key(protocol_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestVector {
    pub input: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestReport {
    Passed,
    Failed { first_mismatch: usize },
}

impl TestReport {
    pub fn passed(&self) -> bool {
        matches!(self, TestReport::Passed)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TestPhaseError {
    #[error("session is not in the testing phase")]
    NotTesting,
    #[error("no handler registered for protocol {0}")]
    NoHandlerRegistered(String),
}

/// Run the agreed protocol's handler over the negotiated vectors.
pub fn run_test_phase(
    session: &NegotiationSession,
    vectors: &[TestVector],
    handlers: &HandlerRegistry,
) -> Result<TestReport, TestPhaseError> {
    if session.phase != Phase::Testing {
        return Err(TestPhaseError::NotTesting);
    }
    let agreed = session
        .agreed
        .as_deref()
        .ok_or(TestPhaseError::NotTesting)?;
    let handler = handlers
        .get(agreed)
        .ok_or_else(|| TestPhaseError::NoHandlerRegistered(agreed.to_string()))?;
    for (index, vector) in vectors.iter().enumerate() {
        if handler.handle(&vector.input) != vector.expected {
            return Ok(TestReport::Failed {
                first_mismatch: index,
            });
        }
    }
    Ok(TestReport::Passed)
}

#[cfg(test)]
mod tests {
    use super::super::session::Role;
    use super::*;

    fn testing_session(agreed: &str) -> NegotiationSession {
        let mut session = NegotiationSession::new("s1".to_string(), Role::Responder, 4);
        session.phase = Phase::Testing;
        session.agreed = Some(agreed.to_string());
        session
    }

    fn vector(input: &str, expected: &str) -> TestVector {
        TestVector {
            input: input.to_string(),
            expected: expected.to_string(),
        }
    }

    #[test]
    fn echo_vectors_pass() {
        let session = testing_session(&echo_descriptor().protocol_id);
        let report =
            run_test_phase(&session, &[vector("x", "x")], &HandlerRegistry::standard()).unwrap();
        assert_eq!(report, TestReport::Passed);
    }

    #[test]
    fn mismatch_is_reported_with_index() {
        let session = testing_session(&echo_descriptor().protocol_id);
        let report =
            run_test_phase(&session, &[vector("x", "y")], &HandlerRegistry::standard()).unwrap();
        assert_eq!(report, TestReport::Failed { first_mismatch: 0 });
    }

    #[test]
    fn missing_handler_is_an_error() {
        let session = testing_session(&"f".repeat(64));
        let err = run_test_phase(&session, &[], &HandlerRegistry::standard()).unwrap_err();
        assert!(matches!(err, TestPhaseError::NoHandlerRegistered(_)));
    }

    #[test]
    fn reverse_handler_reverses() {
        let session = testing_session(&reverse_descriptor().protocol_id);
        let report = run_test_phase(
            &session,
            &[vector("abc", "cba"), vector("", "")],
            &HandlerRegistry::standard(),
        )
        .unwrap();
        assert!(report.passed());
    }
}
