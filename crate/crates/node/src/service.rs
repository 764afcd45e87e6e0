//! The reference agent node: one `handle_request` entry point serving every
//! route, identical over real HTTP and the simulated network.
//!
//! Route table:
//!
//! | route                                | auth | notes                       |
//! |--------------------------------------|------|-----------------------------|
//! | `GET /.well-known/agent-descriptions`| none | paginated directory         |
//! | `GET <did paths>/did.json`           | none | DID documents               |
//! | `GET <ad paths>`                     | none | signed AD documents         |
//! | `POST /anp/negotiate`                | yes  | negotiation messages        |
//! | `POST /anp/handshake`                | yes  | E2E handshake               |
//! | `POST /anp/message`                  | yes  | E2E envelopes               |
//! | `POST /anp/register`                 | yes  | search index, when enabled  |
//! | `GET /anp/search`                    | yes  | search index, when enabled  |
//!
//! Authentication accepts a per-request WBA signature or a bearer token
//! previously issued by this node. A WBA-authenticated JSON response carries
//! `token` and `expiresAt` top-level fields so the first exchange both does
//! its work and provisions the cheap path — no extra round trip. Routes
//! marked high-risk in the config additionally demand a human-authorization
//! confirmation carried in the `X-ANP-Human-Authorization` header.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use serde_json::{json, Value};

use anp_core::auth::{
    authorize_operation, issue_token, parse_bearer, verify_request, verify_token, AuditLog,
    AuthHeader, Decision, HumanConfirmation, NonceStore, PresentedConfirmation, RiskClass, Token,
    TokenOutcome, Verification, DEFAULT_SKEW_SECS,
};
use anp_core::discovery::{
    build_collection_pages, RefreshReport, RegisterOutcome, SearchIndex, WELL_KNOWN_PATH,
};
use anp_core::e2e::{respond_handshake, E2eIdentity, HandshakeMessage, Session};
use anp_core::identity::{CachingResolver, DidId, DidResolver, TransportResolver};
use anp_core::metaproto::{
    respond_to_proposal, step_session, CapabilitySet, DefaultEvaluator, HandlerRegistry,
    MessageKind, NegotiationCache, NegotiationMessage, NegotiationSession, ProtocolDescriptor,
    ProtocolHandler, SessionContext, DEFAULT_MAX_ROUNDS,
};
use anp_core::time::Clock;
use anp_core::wire::{HttpRequest, HttpResponse, Transport, TransportError};

use crate::config::{ConfigError, NodeConfig, NodeKeys};

/// Issued bearer tokens live this long, seconds.
pub const TOKEN_TTL_SECS: u64 = 300;
/// Resolved DID documents are reused for this long during verification.
pub const RESOLVER_CACHE_SECS: u64 = 60;

pub const HUMAN_AUTH_HEADER: &str = "X-ANP-Human-Authorization";

/// Outbound transport slot, filled in when the node joins a network. Nodes
/// and the network reference each other, so the slot breaks the cycle.
#[derive(Default)]
pub struct OutboundSlot(RwLock<Option<Arc<dyn Transport>>>);

impl OutboundSlot {
    pub fn set(&self, transport: Arc<dyn Transport>) {
        *self.0.write().unwrap() = Some(transport);
    }
}

impl Transport for OutboundSlot {
    fn execute(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let guard = self.0.read().unwrap();
        match guard.as_ref() {
            Some(t) => t.execute(request),
            None => Err(TransportError::Io(
                "node has no outbound transport".to_string(),
            )),
        }
    }
}

/// A message delivered to a hosted agent over the E2E route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InboxEntry {
    pub from: DidId,
    pub plaintext: Vec<u8>,
}

pub struct Node {
    config: NodeConfig,
    identity: E2eIdentity,
    human_key: Option<anp_core::identity::KeyPair>,
    clock: Arc<dyn Clock>,
    outbound: Arc<OutboundSlot>,
    resolver: CachingResolver<TransportResolver<Arc<OutboundSlot>>, Arc<dyn Clock>>,
    nonces: NonceStore,
    static_docs: BTreeMap<String, Vec<u8>>,
    directory: Vec<String>,
    e2e_sessions: Mutex<HashMap<String, Session>>,
    negotiations: Mutex<HashMap<String, NegotiationSession>>,
    handlers: HandlerRegistry,
    capabilities: CapabilitySet,
    cache: NegotiationCache,
    index: Option<SearchIndex>,
    audit: AuditLog,
    inbox: Mutex<Vec<InboxEntry>>,
}

fn path_of(url: &str) -> Option<String> {
    url::Url::parse(url).ok().map(|u| u.path().to_string())
}

fn error_response(status: u16, message: &str) -> HttpResponse {
    HttpResponse::json(status, &json!({ "error": message }))
}

impl Node {
    pub fn new(
        config: NodeConfig,
        keys: NodeKeys,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Self::check_key_binding(&config, &keys)?;

        let mut static_docs = BTreeMap::new();
        let mut directory = Vec::new();
        let mut hosted: Vec<(
            &anp_core::identity::DidDocument,
            &anp_core::description::AdDocument,
        )> = vec![(&config.did_document, &config.ad_document)];
        hosted.extend(
            config
                .served_agents
                .iter()
                .map(|a| (&a.did_document, &a.ad_document)),
        );
        for (did_doc, ad_doc) in hosted {
            let did_path = path_of(&did_doc.id.to_https_url()).ok_or_else(|| {
                ConfigError::Invalid(format!("unparseable did url for {}", did_doc.id))
            })?;
            static_docs.insert(did_path, did_doc.to_canonical_json());
            let ad_path = path_of(&ad_doc.id)
                .ok_or_else(|| ConfigError::Invalid(format!("unparseable ad url {}", ad_doc.id)))?;
            static_docs.insert(
                ad_path,
                serde_json::to_vec(ad_doc).expect("ad document serializes"),
            );
            directory.push(ad_doc.id.clone());
        }

        let outbound = Arc::new(OutboundSlot::default());
        let resolver = CachingResolver::new(
            TransportResolver::new(outbound.clone()),
            clock.clone(),
            RESOLVER_CACHE_SECS,
        );
        let handlers = HandlerRegistry::standard();
        let capabilities = CapabilitySet::new(vec![
            anp_core::metaproto::echo_descriptor(),
            anp_core::metaproto::reverse_descriptor(),
        ]);
        let index = config.index_enabled.then(|| {
            SearchIndex::with_config(config.refresh_interval, 3, std::time::Duration::ZERO)
        });
        let identity = E2eIdentity {
            did: config.did.clone(),
            signing_key: keys.signing.clone(),
            agreement_key: keys.agreement.clone(),
        };

        Ok(Self {
            config,
            identity,
            human_key: keys.human,
            clock,
            outbound,
            resolver,
            nonces: NonceStore::new(DEFAULT_SKEW_SECS),
            static_docs,
            directory,
            e2e_sessions: Mutex::new(HashMap::new()),
            negotiations: Mutex::new(HashMap::new()),
            handlers,
            capabilities,
            cache: NegotiationCache::new(),
            index,
            audit: AuditLog::new(),
            inbox: Mutex::new(Vec::new()),
        })
    }

    fn check_key_binding(config: &NodeConfig, keys: &NodeKeys) -> Result<(), ConfigError> {
        let doc = &config.did_document;
        let bound = |fragment: &str, public: &[u8]| {
            doc.find_method(fragment)
                .is_some_and(|m| m.public_key == public)
        };
        if !bound(&keys.signing.fragment(), &keys.signing.public_key) {
            return Err(ConfigError::Invalid(
                "signing key is not listed in the did document".to_string(),
            ));
        }
        if !bound(&keys.agreement.fragment(), &keys.agreement.public_key) {
            return Err(ConfigError::Invalid(
                "agreement key is not listed in the did document".to_string(),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> &str {
        &self.config.domain
    }

    pub fn did(&self) -> &DidId {
        &self.config.did
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn e2e_identity(&self) -> &E2eIdentity {
        &self.identity
    }

    pub fn human_key(&self) -> Option<&anp_core::identity::KeyPair> {
        self.human_key.as_ref()
    }

    pub fn outbound_slot(&self) -> Arc<OutboundSlot> {
        self.outbound.clone()
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.clock.clone()
    }

    pub fn audit_log(&self) -> &AuditLog {
        &self.audit
    }

    /// This node's negotiation-result cache (read-only surface).
    pub fn negotiation_cache(&self) -> &NegotiationCache {
        &self.cache
    }

    pub fn inbox_snapshot(&self) -> Vec<InboxEntry> {
        self.inbox.lock().unwrap().clone()
    }

    /// AD URLs this node serves, directory order.
    pub fn served_ad_urls(&self) -> Vec<String> {
        self.directory.clone()
    }

    /// Add a protocol this node can speak. Call before sharing the node.
    pub fn register_protocol(
        &mut self,
        descriptor: ProtocolDescriptor,
        handler: Arc<dyn ProtocolHandler>,
    ) {
        self.handlers.register(&descriptor, handler);
        self.capabilities.supported.push(descriptor);
    }

    /// Replace the protocol set entirely (for nodes that must not speak the
    /// standard protocols). Call before sharing the node.
    pub fn set_protocols(
        &mut self,
        protocols: Vec<(ProtocolDescriptor, Arc<dyn ProtocolHandler>)>,
    ) {
        self.handlers = HandlerRegistry::new();
        self.capabilities = CapabilitySet::new(Vec::new());
        for (descriptor, handler) in protocols {
            self.register_protocol(descriptor, handler);
        }
    }

    /// Re-crawl registrations due for refresh; no-op without an index.
    pub fn refresh_index(&self) -> Option<RefreshReport> {
        self.index
            .as_ref()
            .map(|index| index.refresh(&self.outbound as &dyn Transport, &self.clock))
    }

    // ── request handling ─────────────────────────────────────────────────

    pub fn handle_request(&self, request: &HttpRequest) -> HttpResponse {
        let Ok(url) = url::Url::parse(&request.url) else {
            return error_response(400, "unparseable url");
        };
        let path = url.path().to_string();
        let query: HashMap<String, String> = url
            .query_pairs()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();

        match (request.method.as_str(), path.as_str()) {
            ("GET", WELL_KNOWN_PATH) => self.serve_directory(&query),
            ("GET", "/anp/search") => {
                self.authenticated(request, &path, |did| self.serve_search(&query, &did))
            }
            ("POST", "/anp/negotiate") => {
                self.authenticated(request, &path, |did| self.serve_negotiate(request, &did))
            }
            ("POST", "/anp/handshake") => {
                self.authenticated(request, &path, |did| self.serve_handshake(request, &did))
            }
            ("POST", "/anp/message") => {
                self.authenticated(request, &path, |did| self.serve_message(request, &did))
            }
            ("POST", "/anp/register") => {
                self.authenticated(request, &path, |did| self.serve_register(request, &did))
            }
            ("GET", _) => match self.static_docs.get(&path) {
                Some(body) => HttpResponse {
                    status: 200,
                    headers: vec![("Content-Type".to_string(), "application/json".to_string())],
                    body: body.clone(),
                },
                None => error_response(404, "not found"),
            },
            _ => error_response(404, "not found"),
        }
    }

    fn serve_directory(&self, query: &HashMap<String, String>) -> HttpResponse {
        let page_index: usize = query.get("page").and_then(|p| p.parse().ok()).unwrap_or(0);
        let base = format!("https://{}{}", self.config.domain, WELL_KNOWN_PATH);
        let pages = build_collection_pages(&self.directory, self.config.page_size, &base)
            .expect("page_size validated at construction");
        match pages.get(page_index) {
            Some(page) => HttpResponse::json(200, &serde_json::to_value(page).unwrap()),
            None => error_response(404, "no such page"),
        }
    }

    /// Run `handler` for an authenticated requester, enforcing the risk
    /// table and injecting a fresh token into WBA-authenticated responses.
    fn authenticated(
        &self,
        request: &HttpRequest,
        route: &str,
        handler: impl FnOnce(DidId) -> HttpResponse,
    ) -> HttpResponse {
        let (did, via_wba) = match self.check_credentials(request) {
            Ok(v) => v,
            Err(response) => return response,
        };
        if let Err(response) = self.check_risk(request, route, &did) {
            return response;
        }
        let response = handler(did.clone());
        if via_wba && response.is_success() {
            self.inject_token(response, &did)
        } else {
            response
        }
    }

    fn check_credentials(&self, request: &HttpRequest) -> Result<(DidId, bool), HttpResponse> {
        let Some(value) = request.header("Authorization") else {
            return Err(error_response(401, "missing Authorization header"));
        };

        if let Some(framed) = parse_bearer(value) {
            let token =
                Token::decode(framed).map_err(|_| error_response(401, "malformed bearer token"))?;
            return match verify_token(&token, &self.config.did_document, &self.clock) {
                TokenOutcome::Valid(claims) => Ok((claims.sub, false)),
                TokenOutcome::Invalid(reason) => {
                    Err(error_response(401, &format!("invalid token: {reason:?}")))
                }
            };
        }

        let header = AuthHeader::parse(value)
            .map_err(|e| error_response(401, &format!("malformed authorization: {e}")))?;
        // A signature is bound to this node's authority; anything else is a
        // cross-server replay attempt.
        let host_ok = url::Url::parse(&request.url)
            .ok()
            .and_then(|u| {
                u.host_str().map(|h| match u.port() {
                    Some(p) => format!("{h}:{p}"),
                    None => h.to_string(),
                })
            })
            .is_some_and(|authority| authority.eq_ignore_ascii_case(&self.config.domain));
        if !host_ok {
            return Err(error_response(401, "request url is not for this node"));
        }
        match verify_request(
            &header,
            &request.method,
            &request.url,
            &self.resolver,
            &self.nonces,
            &self.clock,
        ) {
            Verification::Accepted(did) => Ok((did, true)),
            Verification::Rejected(reason) => {
                Err(error_response(401, &format!("rejected: {reason}")))
            }
        }
    }

    fn check_risk(
        &self,
        request: &HttpRequest,
        route: &str,
        requester: &DidId,
    ) -> Result<(), HttpResponse> {
        let risk = self
            .config
            .risk_table
            .get(route)
            .copied()
            .unwrap_or(RiskClass::Low);
        if risk == RiskClass::Low {
            return Ok(());
        }
        let confirmation = request
            .header(HUMAN_AUTH_HEADER)
            .and_then(parse_human_auth_header);
        let requester_doc = self
            .resolver
            .resolve(requester)
            .map_err(|e| error_response(403, &format!("cannot resolve requester: {e}")))?;
        let gate = PresentedConfirmation(confirmation);
        match authorize_operation(route, risk, &requester_doc, &gate, &self.audit, &self.clock) {
            Decision::Allow => Ok(()),
            Decision::Deny(reason) => Err(error_response(403, &reason.to_string())),
        }
    }

    fn inject_token(&self, mut response: HttpResponse, subject: &DidId) -> HttpResponse {
        let Ok(Value::Object(mut body)) = serde_json::from_slice(&response.body) else {
            return response;
        };
        let Ok(token) = issue_token(
            subject,
            &self.config.did,
            &self.identity.signing_key,
            TOKEN_TTL_SECS,
            &self.clock,
        ) else {
            return response;
        };
        body.insert("token".to_string(), Value::String(token.encode()));
        body.insert("expiresAt".to_string(), json!(token.claims.exp));
        response.body = serde_json::to_vec(&Value::Object(body)).unwrap();
        response
    }

    fn serve_negotiate(&self, request: &HttpRequest, _requester: &DidId) -> HttpResponse {
        let message: NegotiationMessage = match serde_json::from_slice(&request.body) {
            Ok(m) => m,
            Err(e) => return error_response(400, &format!("bad negotiation message: {e}")),
        };
        let ctx = SessionContext {
            capabilities: &self.capabilities,
            evaluator: &DefaultEvaluator,
            handlers: &self.handlers,
        };

        if message.kind == MessageKind::Propose {
            match respond_to_proposal(&message, &ctx, DEFAULT_MAX_ROUNDS) {
                Ok((session, reply)) => {
                    self.remember_agreement(&session, &message);
                    self.negotiations
                        .lock()
                        .unwrap()
                        .insert(session.session_id.clone(), session);
                    HttpResponse::json(200, &serde_json::to_value(&reply).unwrap())
                }
                Err(violation) => error_response(400, &violation.to_string()),
            }
        } else {
            let mut negotiations = self.negotiations.lock().unwrap();
            let Some(session) = negotiations.get_mut(&message.session_id) else {
                return error_response(404, "unknown negotiation session");
            };
            match step_session(session, &message, &ctx) {
                Ok(Some(reply)) => HttpResponse::json(200, &serde_json::to_value(&reply).unwrap()),
                Ok(None) => HttpResponse::json(
                    200,
                    &json!({
                        "sessionId": session.session_id,
                        "phase": format!("{:?}", session.phase).to_lowercase(),
                    }),
                ),
                Err(violation) => error_response(400, &violation.to_string()),
            }
        }
    }

    /// Cache requirement → descriptor as soon as this side accepts, so a
    /// later identical requirement leads with the agreed protocol.
    fn remember_agreement(&self, session: &NegotiationSession, proposal: &NegotiationMessage) {
        let (Some(agreed), Some(requirement)) = (&session.agreed, &proposal.requirement) else {
            return;
        };
        let descriptor = proposal
            .candidates
            .iter()
            .flatten()
            .find(|d| &d.protocol_id == agreed);
        if let Some(descriptor) = descriptor {
            let _ = self
                .cache
                .store(requirement, descriptor, self.clock.now_unix());
        }
    }

    fn serve_handshake(&self, request: &HttpRequest, _requester: &DidId) -> HttpResponse {
        let message: HandshakeMessage = match serde_json::from_slice(&request.body) {
            Ok(m) => m,
            Err(e) => return error_response(400, &format!("bad handshake message: {e}")),
        };
        if message.recipient_did != self.config.did {
            return error_response(404, "recipient is not hosted on this node");
        }
        let initiator_doc = match self.resolver.resolve(&message.sender_did) {
            Ok(doc) => doc,
            Err(e) => return error_response(400, &format!("cannot resolve initiator: {e}")),
        };
        match respond_handshake(&message, &self.identity, &initiator_doc) {
            Ok((reply, session)) => {
                self.e2e_sessions
                    .lock()
                    .unwrap()
                    .insert(hex::encode(session.session_id()), session);
                HttpResponse::json(200, &serde_json::to_value(&reply).unwrap())
            }
            Err(e) => error_response(400, &e.to_string()),
        }
    }

    fn serve_message(&self, request: &HttpRequest, _requester: &DidId) -> HttpResponse {
        let envelope = match anp_core::e2e::Envelope::from_message_body(&request.body) {
            Ok(e) => e,
            Err(e) => return error_response(400, &format!("bad envelope: {e}")),
        };
        let mut sessions = self.e2e_sessions.lock().unwrap();
        let Some(session) = sessions.get_mut(&hex::encode(envelope.session_id)) else {
            return error_response(404, "unknown session");
        };
        match session.decrypt(&envelope) {
            Ok(plaintext) => {
                self.inbox.lock().unwrap().push(InboxEntry {
                    from: envelope.routing.from.clone(),
                    plaintext,
                });
                HttpResponse::json(
                    200,
                    &json!({ "status": "delivered", "sequence": envelope.sequence }),
                )
            }
            Err(e) => error_response(400, &e.to_string()),
        }
    }

    fn serve_register(&self, request: &HttpRequest, requester: &DidId) -> HttpResponse {
        let Some(index) = &self.index else {
            return error_response(404, "this node runs no search index");
        };
        let body: Value = match serde_json::from_slice(&request.body) {
            Ok(v) => v,
            Err(e) => return error_response(400, &format!("bad body: {e}")),
        };
        let Some(ad_url) = body.get("adUrl").and_then(|v| v.as_str()) else {
            return error_response(400, "missing adUrl");
        };
        match index.register(ad_url, requester, self.clock.now_unix()) {
            RegisterOutcome::Accepted => {
                HttpResponse::json(201, &json!({ "status": "registered", "adUrl": ad_url }))
            }
            RegisterOutcome::Duplicate => error_response(409, "duplicate registration"),
            other => error_response(500, &format!("{other:?}")),
        }
    }

    fn serve_search(&self, query: &HashMap<String, String>, _requester: &DidId) -> HttpResponse {
        let Some(index) = &self.index else {
            return error_response(404, "this node runs no search index");
        };
        let terms: Vec<String> = query
            .get("q")
            .map(|q| {
                q.split([' ', '+', ','])
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        let limit: usize = query
            .get("limit")
            .and_then(|l| l.parse().ok())
            .unwrap_or(10);
        let results: Vec<Value> = index
            .query(&terms, limit)
            .into_iter()
            .map(|(ad_url, score)| json!({ "adUrl": ad_url, "score": score }))
            .collect();
        HttpResponse::json(200, &json!({ "results": results }))
    }
}

/// Header value: `key="<fragment>",ts=<unix>,sig="<base64url>"`.
pub fn encode_human_auth_header(confirmation: &HumanConfirmation) -> String {
    use base64::engine::general_purpose::URL_SAFE_NO_PAD;
    use base64::Engine as _;
    format!(
        "key=\"{}\",ts={},sig=\"{}\"",
        confirmation.method_fragment.trim_start_matches('#'),
        confirmation.timestamp,
        URL_SAFE_NO_PAD.encode(&confirmation.signature)
    )
}

pub fn parse_human_auth_header(value: &str) -> Option<HumanConfirmation> {
    use base64::engine::general_purpose::URL_SAFE_NO_PAD;
    use base64::Engine as _;
    let rest = value.strip_prefix("key=\"")?;
    let (fragment, rest) = rest.split_once('"')?;
    let rest = rest.strip_prefix(",ts=")?;
    let (ts, rest) = rest.split_once(",sig=\"")?;
    let timestamp: u64 = ts.parse().ok()?;
    let sig_b64 = rest.strip_suffix('"')?;
    let signature = URL_SAFE_NO_PAD.decode(sig_b64).ok()?;
    Some(HumanConfirmation {
        method_fragment: fragment.to_string(),
        timestamp,
        signature,
    })
}
