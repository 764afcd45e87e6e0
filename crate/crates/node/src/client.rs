//! Client side of every protocol: request signing with token reuse,
//! negotiation driving, E2E handshakes, message delivery, registration and
//! search.
//!
//! The first request to a host is WBA-signed; the token that comes back in
//! the response body is cached per host and used as a bearer credential
//! until it stops working, at which point the client falls back to signing
//! again.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde_json::Value;
use thiserror::Error;

use anp_core::auth::HumanGate as _;
use anp_core::auth::{sign_request, HumanConfirmation, SigningGate};
use anp_core::description::{
    validate_agent_description, verify_description, AdDocument, DescriptionOutcome,
};
use anp_core::e2e::{
    complete_handshake, initiate_handshake, E2eIdentity, HandshakeError, HandshakeReply, Session,
};
use anp_core::identity::{
    CachingResolver, DidId, DidResolver, KeyPair, ResolveError, TransportResolver,
};
use anp_core::metaproto::{
    propose, propose_test_vectors, step_session, CapabilitySet, DefaultEvaluator, HandlerRegistry,
    NegotiationCache, NegotiationMessage, NegotiationSession, Phase, ProtocolDescriptor,
    Requirement, SessionContext, TestVector,
};
use anp_core::time::Clock;
use anp_core::wire::{HttpRequest, HttpResponse, Transport};

use crate::disclosure::strip_to_schema;
use crate::service::{encode_human_auth_header, HUMAN_AUTH_HEADER};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] anp_core::wire::TransportError),
    #[error("unexpected status {status}: {detail}")]
    Status { status: u16, detail: String },
    #[error("resolution: {0}")]
    Resolution(#[from] ResolveError),
    #[error("handshake: {0}")]
    Handshake(#[from] HandshakeError),
    #[error("negotiation failed: {0}")]
    Negotiation(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// An in-flight negotiation: the initiator session plus the responder's
/// first reply, produced by the authenticating first exchange.
pub struct OpenNegotiation {
    pub requirement: Requirement,
    pub session: NegotiationSession,
    pub first_reply: NegotiationMessage,
}

pub struct AgentClient {
    pub identity: E2eIdentity,
    human_key: Option<KeyPair>,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    resolver: CachingResolver<TransportResolver<Arc<dyn Transport>>, Arc<dyn Clock>>,
    tokens: Mutex<HashMap<String, String>>,
}

fn host_of(url: &str) -> String {
    url::Url::parse(url)
        .ok()
        .and_then(|u| {
            u.host_str().map(|h| match u.port() {
                Some(p) => format!("{h}:{p}"),
                None => h.to_string(),
            })
        })
        .unwrap_or_default()
}

impl AgentClient {
    pub fn new(
        identity: E2eIdentity,
        human_key: Option<KeyPair>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let resolver = CachingResolver::new(
            TransportResolver::new(transport.clone()),
            clock.clone(),
            crate::service::RESOLVER_CACHE_SECS,
        );
        Self {
            identity,
            human_key,
            transport,
            clock,
            resolver,
            tokens: Mutex::new(HashMap::new()),
        }
    }

    pub fn resolver(&self) -> &dyn DidResolver {
        &self.resolver
    }

    pub fn has_token_for(&self, host: &str) -> bool {
        self.tokens.lock().unwrap().contains_key(host)
    }

    pub fn forget_tokens(&self) {
        self.tokens.lock().unwrap().clear();
    }

    /// Unauthenticated GET (discovery and document routes are public).
    pub fn get_public(&self, url: &str) -> Result<HttpResponse, ClientError> {
        Ok(self.transport.execute(HttpRequest::get(url))?)
    }

    fn capture_token(&self, host: &str, response: &HttpResponse) {
        if !response.is_success() {
            return;
        }
        if let Ok(Value::Object(body)) = serde_json::from_slice(&response.body) {
            if let Some(Value::String(token)) = body.get("token") {
                self.tokens
                    .lock()
                    .unwrap()
                    .insert(host.to_string(), token.clone());
            }
        }
    }

    fn wba_header(&self, method: &str, url: &str) -> Result<String, ClientError> {
        let header = sign_request(
            &self.identity.did,
            &self.identity.signing_key,
            method,
            url,
            &self.clock,
        )
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
        Ok(header.encode())
    }

    /// Signed confirmation for a high-risk route, when a human key is held.
    pub fn human_confirmation(&self, route: &str) -> Option<HumanConfirmation> {
        let key = self.human_key.as_ref()?;
        SigningGate {
            key,
            clock: &self.clock,
        }
        .confirm(route, &self.identity.did)
    }

    /// Authenticated request: bearer token when one is cached for the host,
    /// WBA signature otherwise (and as the retry path for a stale token).
    pub fn request_authed(
        &self,
        method: &str,
        url: &str,
        body: Vec<u8>,
        human_confirmation: Option<&HumanConfirmation>,
    ) -> Result<HttpResponse, ClientError> {
        let host = host_of(url);
        let cached = self.tokens.lock().unwrap().get(&host).cloned();

        let build = |authorization: String| {
            let mut request = HttpRequest {
                method: method.to_string(),
                url: url.to_string(),
                headers: vec![
                    ("Authorization".to_string(), authorization),
                    ("Content-Type".to_string(), "application/json".to_string()),
                ],
                body: body.clone(),
            };
            if let Some(confirmation) = human_confirmation {
                request =
                    request.with_header(HUMAN_AUTH_HEADER, encode_human_auth_header(confirmation));
            }
            request
        };

        if let Some(token) = cached {
            let response = self.transport.execute(build(format!("Bearer {token}")))?;
            if response.status != 401 {
                return Ok(response);
            }
            self.tokens.lock().unwrap().remove(&host);
        }

        let response = self
            .transport
            .execute(build(self.wba_header(method, url)?))?;
        self.capture_token(&host, &response);
        Ok(response)
    }

    fn post_json(
        &self,
        url: &str,
        value: &Value,
        human_confirmation: Option<&HumanConfirmation>,
    ) -> Result<Value, ClientError> {
        let response = self.request_authed(
            "POST",
            url,
            serde_json::to_vec(value).expect("json serializes"),
            human_confirmation,
        )?;
        if !response.is_success() {
            return Err(ClientError::Status {
                status: response.status,
                detail: String::from_utf8_lossy(&response.body).into_owned(),
            });
        }
        serde_json::from_slice(&response.body)
            .map_err(|e| ClientError::Protocol(format!("bad response body: {e}")))
    }

    // ── descriptions ─────────────────────────────────────────────────────

    /// Fetch, parse, and signature-verify a peer's description document.
    pub fn fetch_and_verify_ad(&self, ad_url: &str) -> Result<AdDocument, ClientError> {
        let response = self.get_public(ad_url)?;
        if !response.is_success() {
            return Err(ClientError::Status {
                status: response.status,
                detail: format!("GET {ad_url}"),
            });
        }
        let (doc, violations) = validate_agent_description(&response.body);
        let Some(doc) = doc else {
            return Err(ClientError::Protocol(format!(
                "invalid description: {}",
                violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            )));
        };
        match verify_description(&doc, &self.resolver) {
            DescriptionOutcome::Verified => Ok(doc),
            DescriptionOutcome::Failed(reason) => Err(ClientError::Protocol(format!(
                "description failed verification: {reason}"
            ))),
        }
    }

    // ── negotiation ──────────────────────────────────────────────────────

    fn negotiate_url(peer_authority: &str) -> String {
        format!("https://{peer_authority}/anp/negotiate")
    }

    /// First negotiation exchange: authenticates, obtains a token, and
    /// returns the responder's opening reply.
    pub fn start_negotiation(
        &self,
        peer_authority: &str,
        requirement: Requirement,
        candidates: Vec<ProtocolDescriptor>,
        cache: &NegotiationCache,
    ) -> Result<OpenNegotiation, ClientError> {
        let (session, message) = propose(requirement.clone(), candidates, cache)
            .map_err(|e| ClientError::Negotiation(e.to_string()))?;
        let reply_value = self.post_json(
            &Self::negotiate_url(peer_authority),
            &serde_json::to_value(&message).unwrap(),
            None,
        )?;
        let first_reply: NegotiationMessage = serde_json::from_value(reply_value)
            .map_err(|e| ClientError::Protocol(format!("bad negotiation reply: {e}")))?;
        Ok(OpenNegotiation {
            requirement,
            session,
            first_reply,
        })
    }

    fn vectors_for(
        &self,
        session: &NegotiationSession,
        handlers: &HandlerRegistry,
    ) -> Result<Vec<TestVector>, ClientError> {
        let agreed = session
            .agreed
            .as_deref()
            .ok_or_else(|| ClientError::Negotiation("testing without agreement".to_string()))?;
        let handler = handlers
            .get(agreed)
            .ok_or_else(|| ClientError::Negotiation(format!("no handler for {agreed}")))?;
        Ok(["ping", "negotiation test"]
            .iter()
            .map(|input| TestVector {
                input: input.to_string(),
                expected: handler.handle(input),
            })
            .collect())
    }

    /// Drive an open negotiation to `live` or `failed`.
    pub fn continue_negotiation(
        &self,
        peer_authority: &str,
        open: OpenNegotiation,
        capabilities: &CapabilitySet,
        handlers: &HandlerRegistry,
        cache: &NegotiationCache,
    ) -> Result<NegotiationSession, ClientError> {
        let url = Self::negotiate_url(peer_authority);
        let ctx = SessionContext {
            capabilities,
            evaluator: &DefaultEvaluator,
            handlers,
        };
        let OpenNegotiation {
            requirement,
            mut session,
            first_reply,
        } = open;
        let mut incoming = first_reply;

        // Bounded relay loop; each iteration consumes one incoming message.
        for _ in 0..(2 * session.max_rounds + 6) {
            let outgoing = step_session(&mut session, &incoming, &ctx)
                .map_err(|e| ClientError::Negotiation(e.to_string()))?;
            if session.phase == Phase::Failed {
                if let Some(out) = outgoing {
                    let _ = self.post_json(&url, &serde_json::to_value(&out).unwrap(), None);
                }
                return Ok(session);
            }
            match outgoing {
                Some(out) => {
                    let is_go_live = out.kind == anp_core::metaproto::MessageKind::GoLive;
                    let reply = self.post_json(&url, &serde_json::to_value(&out).unwrap(), None)?;
                    if session.phase == Phase::Live && is_go_live {
                        break;
                    }
                    match serde_json::from_value::<NegotiationMessage>(reply) {
                        Ok(message) => incoming = message,
                        Err(_) => {
                            // Status ack, no counterpart message: if we just
                            // reached testing it is our turn to send vectors.
                            if session.phase == Phase::Testing {
                                let vectors = self.vectors_for(&session, handlers)?;
                                let tv = propose_test_vectors(&mut session, &vectors)
                                    .map_err(|e| ClientError::Negotiation(e.to_string()))?;
                                let reply = self.post_json(
                                    &url,
                                    &serde_json::to_value(&tv).unwrap(),
                                    None,
                                )?;
                                incoming = serde_json::from_value(reply).map_err(|e| {
                                    ClientError::Protocol(format!("bad test reply: {e}"))
                                })?;
                            } else {
                                break;
                            }
                        }
                    }
                }
                None if session.phase == Phase::Testing => {
                    let vectors = self.vectors_for(&session, handlers)?;
                    let tv = propose_test_vectors(&mut session, &vectors)
                        .map_err(|e| ClientError::Negotiation(e.to_string()))?;
                    let reply = self.post_json(&url, &serde_json::to_value(&tv).unwrap(), None)?;
                    incoming = serde_json::from_value(reply)
                        .map_err(|e| ClientError::Protocol(format!("bad test reply: {e}")))?;
                }
                None => break,
            }
        }

        if session.phase == Phase::Live {
            if let Some(agreed) = session.agreed.as_deref() {
                if let Some(descriptor) = capabilities
                    .supported
                    .iter()
                    .find(|d| d.protocol_id == agreed)
                {
                    let _ = cache.store(&requirement, descriptor, self.clock.now_unix());
                }
            }
        }
        Ok(session)
    }

    /// Full negotiation: authenticate, negotiate, test, go live.
    pub fn negotiate(
        &self,
        peer_authority: &str,
        requirement: Requirement,
        candidates: Vec<ProtocolDescriptor>,
        capabilities: &CapabilitySet,
        handlers: &HandlerRegistry,
        cache: &NegotiationCache,
    ) -> Result<NegotiationSession, ClientError> {
        let open = self.start_negotiation(peer_authority, requirement, candidates, cache)?;
        self.continue_negotiation(peer_authority, open, capabilities, handlers, cache)
    }

    // ── end-to-end messaging ─────────────────────────────────────────────

    /// Establish an E2E session with a peer agent by DID.
    pub fn handshake(&self, peer_did: &DidId) -> Result<Session, ClientError> {
        let peer_doc = self.resolver.resolve(peer_did)?;
        let (message, pending) = initiate_handshake(&self.identity, &peer_doc)?;
        let url = format!("https://{}/anp/handshake", peer_did.authority());
        let reply_value = self.post_json(&url, &serde_json::to_value(&message).unwrap(), None)?;
        let reply: HandshakeReply = serde_json::from_value(stripped_of_token(reply_value))
            .map_err(|e| ClientError::Protocol(format!("bad handshake reply: {e}")))?;
        Ok(complete_handshake(pending, &reply, &peer_doc)?)
    }

    /// Encrypt and deliver one payload over an established session.
    /// Returns the envelope sequence number.
    pub fn send_envelope(
        &self,
        session: &mut Session,
        plaintext: &[u8],
        human_confirmation: Option<&HumanConfirmation>,
    ) -> Result<u64, ClientError> {
        let envelope = session
            .encrypt(plaintext)
            .map_err(|e| ClientError::Protocol(e.to_string()))?;
        let url = format!("https://{}/anp/message", session.remote_did().authority());
        let response =
            self.request_authed("POST", &url, envelope.to_message_body(), human_confirmation)?;
        if !response.is_success() {
            return Err(ClientError::Status {
                status: response.status,
                detail: String::from_utf8_lossy(&response.body).into_owned(),
            });
        }
        Ok(envelope.sequence)
    }

    /// Minimal disclosure: strip fields outside the negotiated schema, then
    /// send. Returns the sequence number, the bytes actually sent, and the
    /// names of any stripped fields (each one worth a warning upstream).
    pub fn send_structured(
        &self,
        session: &mut Session,
        descriptor: &ProtocolDescriptor,
        payload: &Value,
        human_confirmation: Option<&HumanConfirmation>,
    ) -> Result<(u64, Vec<u8>, Vec<String>), ClientError> {
        let (reduced, stripped) = strip_to_schema(payload, &descriptor.message_schema);
        let bytes = serde_json::to_vec(&reduced).expect("json serializes");
        let sequence = self.send_envelope(session, &bytes, human_confirmation)?;
        Ok((sequence, bytes, stripped))
    }

    // ── discovery ────────────────────────────────────────────────────────

    pub fn register_with_index(
        &self,
        index_authority: &str,
        ad_url: &str,
    ) -> anp_core::discovery::RegisterOutcome {
        anp_core::discovery::register(
            &format!("https://{index_authority}/anp/register"),
            ad_url,
            &self.identity.did,
            &self.identity.signing_key,
            &self.clock,
            &self.transport,
        )
    }

    pub fn search(
        &self,
        index_authority: &str,
        terms: &[String],
        limit: usize,
    ) -> Result<Vec<(String, u32)>, ClientError> {
        let url = format!(
            "https://{index_authority}/anp/search?q={}&limit={limit}",
            terms.join("+")
        );
        let response = self.request_authed("GET", &url, Vec::new(), None)?;
        if !response.is_success() {
            return Err(ClientError::Status {
                status: response.status,
                detail: String::from_utf8_lossy(&response.body).into_owned(),
            });
        }
        let value: Value = serde_json::from_slice(&response.body)
            .map_err(|e| ClientError::Protocol(e.to_string()))?;
        let results = value
            .get("results")
            .and_then(|r| r.as_array())
            .map(|arr| {
                arr.iter()
                    .filter_map(|item| {
                        Some((
                            item.get("adUrl")?.as_str()?.to_string(),
                            item.get("score")?.as_u64()? as u32,
                        ))
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(results)
    }
}

/// Handshake replies come back with token fields injected; drop them before
/// typed parsing.
fn stripped_of_token(mut value: Value) -> Value {
    if let Value::Object(map) = &mut value {
        map.remove("token");
        map.remove("expiresAt");
    }
    value
}
