//! Meta-protocol negotiation: agree on a concrete protocol, test it jointly,
//! and go live, caching the result for next time.

mod cache;
mod descriptor;
mod handlers;
mod message;
mod session;

pub use cache::{CacheEntry, CacheError, NegotiationCache};
pub use descriptor::{FieldSpec, ProtocolDescriptor, Requirement, TransportKind};
pub use handlers::{
    echo_descriptor, reverse_descriptor, run_test_phase, EchoHandler, HandlerRegistry,
    ProtocolHandler, ReverseHandler, TestPhaseError, TestReport, TestVector,
};
pub use message::{MessageKind, NegotiationMessage};
pub use session::{
    evaluate_proposal, propose, propose_test_vectors, respond_to_proposal, step_session,
    CapabilitySet, DefaultEvaluator, EvaluationDecision, NegotiateError, NegotiationSession, Phase,
    ProposalEvaluator, ProtocolViolation, Role, SessionContext, DEFAULT_MAX_ROUNDS,
};
