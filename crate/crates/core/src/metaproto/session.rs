//! The negotiation state machine.
//!
//! Phases move `proposing → negotiating* → testing → live`, or to `failed`
//! from anywhere. Rounds increment on counter-proposals and are capped by
//! `max_rounds`; exceeding the cap fails the session on both sides rather
//! than letting it hang. The deterministic default evaluator refuses
//! requirements it cannot meet, accepts the first proposed candidate it
//! supports (proposer's order wins ties), and otherwise counters with its
//! own descriptor list.

use rand::rngs::OsRng;
use rand::RngCore;
use std::sync::Arc;
use thiserror::Error;

use super::cache::NegotiationCache;
use super::descriptor::{ProtocolDescriptor, Requirement};
use super::handlers::{run_test_phase, HandlerRegistry, TestPhaseError, TestReport, TestVector};
use super::message::{MessageKind, NegotiationMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Proposing,
    Negotiating,
    Testing,
    Live,
    Failed,
}

impl Phase {
    /// Forward-progress rank; `Failed` is terminal and unranked.
    pub fn rank(self) -> Option<u8> {
        match self {
            Phase::Proposing => Some(0),
            Phase::Negotiating => Some(1),
            Phase::Testing => Some(2),
            Phase::Live => Some(3),
            Phase::Failed => None,
        }
    }
}

pub const DEFAULT_MAX_ROUNDS: u32 = 4;

#[derive(Debug, Clone)]
pub struct NegotiationSession {
    pub session_id: String,
    pub role: Role,
    pub phase: Phase,
    pub round: u32,
    pub agreed: Option<String>,
    pub max_rounds: u32,
    pub transcript: Vec<NegotiationMessage>,
}

impl NegotiationSession {
    pub(crate) fn new(session_id: String, role: Role, max_rounds: u32) -> Self {
        Self {
            session_id,
            role,
            phase: Phase::Proposing,
            round: 0,
            agreed: None,
            max_rounds,
            transcript: Vec::new(),
        }
    }

    pub fn is_live(&self) -> bool {
        self.phase == Phase::Live
    }

    pub fn is_failed(&self) -> bool {
        self.phase == Phase::Failed
    }
}

/// What one side can do: the descriptors it has handlers for (in preference
/// order) and a predicate over requirements.
type RequirementPredicate = Arc<dyn Fn(&Requirement) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct CapabilitySet {
    pub supported: Vec<ProtocolDescriptor>,
    predicate: Option<RequirementPredicate>,
}

impl CapabilitySet {
    /// Meets every requirement; supports the given descriptors.
    pub fn new(supported: Vec<ProtocolDescriptor>) -> Self {
        Self {
            supported,
            predicate: None,
        }
    }

    pub fn with_predicate(
        supported: Vec<ProtocolDescriptor>,
        predicate: impl Fn(&Requirement) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            supported,
            predicate: Some(Arc::new(predicate)),
        }
    }

    pub fn can_meet(&self, requirement: &Requirement) -> bool {
        self.predicate.as_ref().is_none_or(|p| p(requirement))
    }

    pub fn supports(&self, protocol_id: &str) -> bool {
        self.supported.iter().any(|d| d.protocol_id == protocol_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvaluationDecision {
    Accept(String),
    Counter(Vec<ProtocolDescriptor>),
    Reject(String),
}

/// Pluggable decision capability. The default is deterministic; a
/// model-backed evaluator can replace it without touching the state machine.
pub trait ProposalEvaluator: Send + Sync {
    fn evaluate(
        &self,
        requirement: Option<&Requirement>,
        candidates: &[ProtocolDescriptor],
        capabilities: &CapabilitySet,
    ) -> EvaluationDecision;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultEvaluator;

impl ProposalEvaluator for DefaultEvaluator {
    fn evaluate(
        &self,
        requirement: Option<&Requirement>,
        candidates: &[ProtocolDescriptor],
        capabilities: &CapabilitySet,
    ) -> EvaluationDecision {
        if let Some(requirement) = requirement {
            if !capabilities.can_meet(requirement) {
                return EvaluationDecision::Reject("requirement outside capabilities".to_string());
            }
        }
        for candidate in candidates {
            if capabilities.supports(&candidate.protocol_id) {
                return EvaluationDecision::Accept(candidate.protocol_id.clone());
            }
        }
        EvaluationDecision::Counter(capabilities.supported.clone())
    }
}

/// Everything `step_session` needs besides the session itself.
pub struct SessionContext<'a> {
    pub capabilities: &'a CapabilitySet,
    pub evaluator: &'a dyn ProposalEvaluator,
    pub handlers: &'a HandlerRegistry,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NegotiateError {
    #[error("candidates must be nonempty")]
    EmptyCandidates,
    #[error("malformed message: {0}")]
    MalformedMessage(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolViolation {
    #[error("message belongs to a different session")]
    SessionMismatch,
    #[error("{kind:?} is illegal in phase {phase:?}")]
    IllegalKind { phase: Phase, kind: MessageKind },
    #[error("malformed message: {0}")]
    Malformed(String),
}

fn fresh_session_id() -> String {
    let mut bytes = [0u8; 16];
    OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

/// Open a negotiation. A cache hit for the requirement is promoted to the
/// front of the candidate list so a previously agreed protocol is offered
/// first.
pub fn propose(
    requirement: Requirement,
    candidates: Vec<ProtocolDescriptor>,
    cache: &NegotiationCache,
) -> Result<(NegotiationSession, NegotiationMessage), NegotiateError> {
    if candidates.is_empty() {
        return Err(NegotiateError::EmptyCandidates);
    }
    let ordered = match cache.lookup(&requirement) {
        Some(hit) => {
            let mut ordered = vec![hit.clone()];
            ordered.extend(
                candidates
                    .into_iter()
                    .filter(|c| c.protocol_id != hit.protocol_id),
            );
            ordered
        }
        None => candidates,
    };
    let session_id = fresh_session_id();
    let message = NegotiationMessage::propose(&session_id, requirement, ordered);
    if let Some(e) = message.shape_error() {
        return Err(NegotiateError::MalformedMessage(e));
    }
    let mut session = NegotiationSession::new(session_id, Role::Initiator, DEFAULT_MAX_ROUNDS);
    session.transcript.push(message.clone());
    Ok((session, message))
}

/// Evaluate an incoming propose/counter into an accept, counter, or reject
/// reply. Pure: no session state is touched.
pub fn evaluate_proposal(
    msg: &NegotiationMessage,
    capabilities: &CapabilitySet,
    evaluator: &dyn ProposalEvaluator,
) -> Result<NegotiationMessage, NegotiateError> {
    if !matches!(msg.kind, MessageKind::Propose | MessageKind::Counter) {
        return Err(NegotiateError::MalformedMessage(format!(
            "{:?} is not a proposal",
            msg.kind
        )));
    }
    if let Some(e) = msg.shape_error() {
        return Err(NegotiateError::MalformedMessage(e));
    }
    let candidates = msg.candidates.as_deref().unwrap_or(&[]);
    let decision = evaluator.evaluate(msg.requirement.as_ref(), candidates, capabilities);
    Ok(match decision {
        EvaluationDecision::Accept(id) => {
            NegotiationMessage::accept(&msg.session_id, msg.round, &id)
        }
        EvaluationDecision::Counter(own) => {
            NegotiationMessage::counter(&msg.session_id, msg.round + 1, own)
        }
        EvaluationDecision::Reject(reason) => {
            NegotiationMessage::reject(&msg.session_id, msg.round, &reason)
        }
    })
}

/// Build the responder session for an incoming propose and produce the reply.
pub fn respond_to_proposal(
    incoming: &NegotiationMessage,
    ctx: &SessionContext<'_>,
    max_rounds: u32,
) -> Result<(NegotiationSession, NegotiationMessage), ProtocolViolation> {
    if incoming.kind != MessageKind::Propose {
        return Err(ProtocolViolation::IllegalKind {
            phase: Phase::Proposing,
            kind: incoming.kind,
        });
    }
    if let Some(e) = incoming.shape_error() {
        return Err(ProtocolViolation::Malformed(e));
    }
    let mut session =
        NegotiationSession::new(incoming.session_id.clone(), Role::Responder, max_rounds);
    session.transcript.push(incoming.clone());
    let reply = evaluate_proposal(incoming, ctx.capabilities, ctx.evaluator)
        .map_err(|e| ProtocolViolation::Malformed(e.to_string()))?;
    apply_own_reply(&mut session, &reply);
    session.transcript.push(reply.clone());
    Ok((session, reply))
}

fn apply_own_reply(session: &mut NegotiationSession, reply: &NegotiationMessage) {
    match reply.kind {
        MessageKind::Accept => {
            session.agreed = reply.chosen.clone();
            session.phase = Phase::Testing;
            session.round = reply.round;
        }
        MessageKind::Counter => {
            session.phase = Phase::Negotiating;
            session.round = reply.round;
        }
        MessageKind::Reject => session.phase = Phase::Failed,
        _ => {}
    }
}

/// Initiator-side: emit the joint-test vectors once the session is testing.
pub fn propose_test_vectors(
    session: &mut NegotiationSession,
    vectors: &[TestVector],
) -> Result<NegotiationMessage, ProtocolViolation> {
    if session.role != Role::Initiator || session.phase != Phase::Testing {
        return Err(ProtocolViolation::IllegalKind {
            phase: session.phase,
            kind: MessageKind::TestVectors,
        });
    }
    let message = NegotiationMessage::test_vectors(
        &session.session_id,
        session.round,
        serde_json::json!({ "vectors": vectors }),
    );
    session.transcript.push(message.clone());
    Ok(message)
}

/// Apply one incoming message to a session, returning the outgoing reply when
/// the protocol calls for one.
pub fn step_session(
    session: &mut NegotiationSession,
    incoming: &NegotiationMessage,
    ctx: &SessionContext<'_>,
) -> Result<Option<NegotiationMessage>, ProtocolViolation> {
    if incoming.session_id != session.session_id {
        return Err(ProtocolViolation::SessionMismatch);
    }
    if matches!(session.phase, Phase::Live | Phase::Failed) {
        return Err(ProtocolViolation::IllegalKind {
            phase: session.phase,
            kind: incoming.kind,
        });
    }
    if let Some(e) = incoming.shape_error() {
        return Err(ProtocolViolation::Malformed(e));
    }

    let outgoing = match (session.phase, incoming.kind) {
        (_, MessageKind::Reject) => {
            session.phase = Phase::Failed;
            None
        }

        (Phase::Proposing | Phase::Negotiating, MessageKind::Accept) => {
            session.agreed = incoming.chosen.clone();
            session.phase = Phase::Testing;
            session.round = incoming.round.max(session.round);
            None
        }

        (Phase::Proposing | Phase::Negotiating, MessageKind::Counter) => {
            session.round = incoming.round;
            if incoming.round > session.max_rounds {
                session.phase = Phase::Failed;
                Some(NegotiationMessage::reject(
                    &session.session_id,
                    incoming.round,
                    "max rounds exceeded",
                ))
            } else {
                let reply = evaluate_proposal(incoming, ctx.capabilities, ctx.evaluator)
                    .map_err(|e| ProtocolViolation::Malformed(e.to_string()))?;
                match reply.kind {
                    MessageKind::Counter if reply.round > session.max_rounds => {
                        session.phase = Phase::Failed;
                        Some(NegotiationMessage::reject(
                            &session.session_id,
                            reply.round,
                            "max rounds exceeded",
                        ))
                    }
                    _ => {
                        apply_own_reply(session, &reply);
                        Some(reply)
                    }
                }
            }
        }

        (Phase::Testing, MessageKind::TestVectors) => {
            let vectors: Vec<TestVector> = incoming
                .payload
                .as_ref()
                .and_then(|p| p.get("vectors"))
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .ok_or_else(|| ProtocolViolation::Malformed("bad test vectors".to_string()))?;
            match run_test_phase(session, &vectors, ctx.handlers) {
                Ok(TestReport::Passed) => Some(NegotiationMessage::test_result(
                    &session.session_id,
                    session.round,
                    serde_json::json!({ "passed": true }),
                )),
                Ok(TestReport::Failed { first_mismatch }) => {
                    session.phase = Phase::Failed;
                    Some(NegotiationMessage::test_result(
                        &session.session_id,
                        session.round,
                        serde_json::json!({ "passed": false, "mismatchIndex": first_mismatch }),
                    ))
                }
                Err(TestPhaseError::NoHandlerRegistered(id)) => {
                    session.phase = Phase::Failed;
                    Some(NegotiationMessage::test_result(
                        &session.session_id,
                        session.round,
                        serde_json::json!({ "passed": false, "error": format!("no handler for {id}") }),
                    ))
                }
                Err(TestPhaseError::NotTesting) => unreachable!("phase checked above"),
            }
        }

        (Phase::Testing, MessageKind::TestResult) => {
            let passed = incoming
                .payload
                .as_ref()
                .and_then(|p| p.get("passed"))
                .and_then(|v| v.as_bool())
                .ok_or_else(|| ProtocolViolation::Malformed("bad test result".to_string()))?;
            if passed {
                session.phase = Phase::Live;
                let agreed = session.agreed.clone().ok_or_else(|| {
                    ProtocolViolation::Malformed("test result without agreement".to_string())
                })?;
                Some(NegotiationMessage::go_live(
                    &session.session_id,
                    session.round,
                    &agreed,
                ))
            } else {
                session.phase = Phase::Failed;
                None
            }
        }

        (Phase::Testing, MessageKind::GoLive) => {
            if incoming.chosen != session.agreed {
                return Err(ProtocolViolation::Malformed(
                    "goLive names a different protocol than was agreed".to_string(),
                ));
            }
            session.phase = Phase::Live;
            None
        }

        (phase, kind) => return Err(ProtocolViolation::IllegalKind { phase, kind }),
    };

    session.transcript.push(incoming.clone());
    if let Some(out) = &outgoing {
        session.transcript.push(out.clone());
    }
    Ok(outgoing)
}

#[cfg(test)]
mod tests {
    use super::super::handlers::{echo_descriptor, reverse_descriptor, HandlerRegistry};
    use super::*;

    fn ctx<'a>(caps: &'a CapabilitySet, handlers: &'a HandlerRegistry) -> SessionContext<'a> {
        SessionContext {
            capabilities: caps,
            evaluator: &DefaultEvaluator,
            handlers,
        }
    }

    #[test]
    fn propose_passes_candidates_through() {
        let cache = NegotiationCache::new();
        let (session, msg) = propose(
            Requirement::new("echo"),
            vec![echo_descriptor(), reverse_descriptor()],
            &cache,
        )
        .unwrap();
        assert_eq!(session.phase, Phase::Proposing);
        assert_eq!(session.round, 0);
        let candidates = msg.candidates.unwrap();
        assert_eq!(candidates[0], echo_descriptor());
        assert_eq!(candidates[1], reverse_descriptor());
    }

    #[test]
    fn cached_agreement_is_offered_first() {
        let cache = NegotiationCache::new();
        let requirement = Requirement::new("echo");
        cache
            .store(&requirement, &reverse_descriptor(), 100)
            .unwrap();
        let (_, msg) = propose(
            requirement,
            vec![echo_descriptor(), reverse_descriptor()],
            &cache,
        )
        .unwrap();
        let candidates = msg.candidates.unwrap();
        assert_eq!(candidates[0], reverse_descriptor());
        assert_eq!(candidates[1], echo_descriptor());
        assert_eq!(candidates.len(), 2);
    }

    #[test]
    fn empty_candidates_are_rejected() {
        let cache = NegotiationCache::new();
        assert_eq!(
            propose(Requirement::new("x"), vec![], &cache).unwrap_err(),
            NegotiateError::EmptyCandidates
        );
    }

    #[test]
    fn evaluate_accepts_first_supported_in_proposer_order() {
        let caps = CapabilitySet::new(vec![reverse_descriptor(), echo_descriptor()]);
        let msg = NegotiationMessage::propose(
            "s",
            Requirement::new("either"),
            vec![echo_descriptor(), reverse_descriptor()],
        );
        let reply = evaluate_proposal(&msg, &caps, &DefaultEvaluator).unwrap();
        assert_eq!(reply.kind, MessageKind::Accept);
        // Proposer's order wins: echo listed first.
        assert_eq!(
            reply.chosen.as_deref(),
            Some(&echo_descriptor().protocol_id[..])
        );
    }

    #[test]
    fn evaluate_counters_on_disjoint_sets() {
        let caps = CapabilitySet::new(vec![reverse_descriptor()]);
        let msg = NegotiationMessage::propose("s", Requirement::new("x"), vec![echo_descriptor()]);
        let reply = evaluate_proposal(&msg, &caps, &DefaultEvaluator).unwrap();
        assert_eq!(reply.kind, MessageKind::Counter);
        assert_eq!(reply.round, 1);
        assert_eq!(reply.candidates.unwrap(), vec![reverse_descriptor()]);
    }

    #[test]
    fn evaluate_rejects_unmeetable_requirement() {
        let caps = CapabilitySet::with_predicate(vec![echo_descriptor()], |_| false);
        let msg = NegotiationMessage::propose(
            "s",
            Requirement::new("impossible"),
            vec![echo_descriptor()],
        );
        let reply = evaluate_proposal(&msg, &caps, &DefaultEvaluator).unwrap();
        assert_eq!(reply.kind, MessageKind::Reject);
    }

    #[test]
    fn accept_moves_initiator_to_testing() {
        let cache = NegotiationCache::new();
        let caps = CapabilitySet::new(vec![echo_descriptor()]);
        let handlers = HandlerRegistry::standard();
        let (mut session, msg) =
            propose(Requirement::new("echo"), vec![echo_descriptor()], &cache).unwrap();
        let accept = NegotiationMessage::accept(&msg.session_id, 0, &echo_descriptor().protocol_id);
        let out = step_session(&mut session, &accept, &ctx(&caps, &handlers)).unwrap();
        assert!(out.is_none());
        assert_eq!(session.phase, Phase::Testing);
        assert_eq!(
            session.agreed.as_deref(),
            Some(&echo_descriptor().protocol_id[..])
        );
    }

    #[test]
    fn counter_at_max_rounds_fails_the_session() {
        let cache = NegotiationCache::new();
        let caps = CapabilitySet::new(vec![echo_descriptor()]);
        let handlers = HandlerRegistry::standard();
        let (mut session, msg) =
            propose(Requirement::new("echo"), vec![echo_descriptor()], &cache).unwrap();
        let over = NegotiationMessage::counter(
            &msg.session_id,
            session.max_rounds + 1,
            vec![reverse_descriptor()],
        );
        let out = step_session(&mut session, &over, &ctx(&caps, &handlers)).unwrap();
        assert_eq!(session.phase, Phase::Failed);
        assert_eq!(out.unwrap().kind, MessageKind::Reject);
    }

    #[test]
    fn live_session_rejects_new_proposals() {
        let cache = NegotiationCache::new();
        let caps = CapabilitySet::new(vec![echo_descriptor()]);
        let handlers = HandlerRegistry::standard();
        let (mut session, msg) =
            propose(Requirement::new("echo"), vec![echo_descriptor()], &cache).unwrap();
        let accept = NegotiationMessage::accept(&msg.session_id, 0, &echo_descriptor().protocol_id);
        step_session(&mut session, &accept, &ctx(&caps, &handlers)).unwrap();
        let result = NegotiationMessage::test_result(
            &msg.session_id,
            0,
            serde_json::json!({"passed": true}),
        );
        step_session(&mut session, &result, &ctx(&caps, &handlers)).unwrap();
        assert!(session.is_live());

        let stray = NegotiationMessage::propose(
            &msg.session_id,
            Requirement::new("again"),
            vec![echo_descriptor()],
        );
        let err = step_session(&mut session, &stray, &ctx(&caps, &handlers)).unwrap_err();
        assert_eq!(
            err,
            ProtocolViolation::IllegalKind {
                phase: Phase::Live,
                kind: MessageKind::Propose
            }
        );
    }

    #[test]
    fn session_id_mismatch_is_refused() {
        let cache = NegotiationCache::new();
        let caps = CapabilitySet::new(vec![echo_descriptor()]);
        let handlers = HandlerRegistry::standard();
        let (mut session, _) =
            propose(Requirement::new("echo"), vec![echo_descriptor()], &cache).unwrap();
        let foreign = NegotiationMessage::accept("other-session", 0, "x");
        assert_eq!(
            step_session(&mut session, &foreign, &ctx(&caps, &handlers)).unwrap_err(),
            ProtocolViolation::SessionMismatch
        );
    }

    /// Drive two sessions to completion by relaying messages, as the test
    /// suites and the node's negotiate route both do.
    fn drive(
        a_caps: &CapabilitySet,
        b_caps: &CapabilitySet,
        requirement: Requirement,
        candidates: Vec<ProtocolDescriptor>,
    ) -> (NegotiationSession, NegotiationSession) {
        let cache = NegotiationCache::new();
        let handlers = HandlerRegistry::standard();
        let a_ctx = ctx(a_caps, &handlers);
        let b_ctx = ctx(b_caps, &handlers);

        let (mut a, mut in_flight) = propose(requirement, candidates, &cache).unwrap();
        let (mut b, reply) = match respond_to_proposal(&in_flight, &b_ctx, DEFAULT_MAX_ROUNDS) {
            Ok(v) => v,
            Err(_) => unreachable!("propose is well-formed"),
        };
        let mut to_a = Some(reply);

        // Relay until neither side emits anything further.
        for _ in 0..32 {
            let mut progressed = false;
            if let Some(msg) = to_a.take() {
                progressed = true;
                if let Ok(out) = step_session(&mut a, &msg, &a_ctx) {
                    if let Some(out) = out {
                        in_flight = out;
                        if let Ok(reply) = step_session(&mut b, &in_flight, &b_ctx) {
                            to_a = reply;
                        }
                    } else if a.phase == Phase::Testing {
                        // Initiator proposes vectors for the agreed protocol.
                        let vectors = vec![TestVector {
                            input: "ping".to_string(),
                            expected: echo_vector_expectation(&a),
                        }];
                        if let Ok(tv) = propose_test_vectors(&mut a, &vectors) {
                            if let Ok(reply) = step_session(&mut b, &tv, &b_ctx) {
                                to_a = reply;
                            }
                        }
                    }
                }
            }
            if !progressed || a.phase == Phase::Failed || (a.is_live() && b.is_live()) {
                break;
            }
        }
        (a, b)
    }

    fn echo_vector_expectation(session: &NegotiationSession) -> String {
        if session.agreed.as_deref() == Some(&reverse_descriptor().protocol_id[..]) {
            "gnip".to_string()
        } else {
            "ping".to_string()
        }
    }

    #[test]
    fn overlapping_capabilities_reach_live_on_the_same_protocol() {
        let a_caps = CapabilitySet::new(vec![echo_descriptor(), reverse_descriptor()]);
        let b_caps = CapabilitySet::new(vec![reverse_descriptor()]);
        let (a, b) = drive(
            &a_caps,
            &b_caps,
            Requirement::new("text transform"),
            vec![echo_descriptor(), reverse_descriptor()],
        );
        assert!(a.is_live(), "initiator phase {:?}", a.phase);
        assert!(b.is_live(), "responder phase {:?}", b.phase);
        assert_eq!(a.agreed, b.agreed);
        assert_eq!(
            a.agreed.as_deref(),
            Some(&reverse_descriptor().protocol_id[..])
        );
    }

    #[test]
    fn disjoint_capabilities_fail_within_max_rounds() {
        let a_caps = CapabilitySet::new(vec![echo_descriptor()]);
        let b_caps = CapabilitySet::new(vec![reverse_descriptor()]);
        let (a, b) = drive(
            &a_caps,
            &b_caps,
            Requirement::new("text transform"),
            vec![echo_descriptor()],
        );
        assert!(a.is_failed());
        assert!(b.is_failed());
        assert!(a.round <= a.max_rounds + 1);
    }

    #[test]
    fn transcript_rounds_are_monotone_and_phases_never_regress() {
        let a_caps = CapabilitySet::new(vec![echo_descriptor(), reverse_descriptor()]);
        let b_caps = CapabilitySet::new(vec![reverse_descriptor()]);
        let (a, b) = drive(
            &a_caps,
            &b_caps,
            Requirement::new("text transform"),
            vec![echo_descriptor(), reverse_descriptor()],
        );
        for session in [&a, &b] {
            let rounds: Vec<u32> = session.transcript.iter().map(|m| m.round).collect();
            assert!(
                rounds.windows(2).all(|w| w[0] <= w[1]),
                "rounds regressed: {rounds:?}"
            );
        }
    }
}
