//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::OsRng;
use rand::{Rng, RngCore};

use anp_core::auth::{
    sign_request, verify_request, AuthHeader, NonceStore, RejectReason, Verification,
    DEFAULT_SKEW_SECS,
};
use anp_core::description::{
    build_agent_description, sign_description, validate_agent_description, verify_description,
    AdDocument, Capability, CapabilityKind, Contact, DescriptionOutcome, InterfaceDecl,
};
use anp_core::discovery::{build_collection_pages, crawl_domain, crawl_network, CrawlLimits};
use anp_core::e2e::{complete_handshake, initiate_handshake, respond_handshake, Envelope};
use anp_core::identity::{
    build_did_document, generate_keypair, Algorithm, DidDocument, DidId, KeyClass, KeyPair,
    StaticResolver,
};
use anp_core::metaproto::{
    echo_descriptor, propose, propose_test_vectors, respond_to_proposal, reverse_descriptor,
    step_session, CapabilitySet, DefaultEvaluator, FieldSpec, HandlerRegistry, NegotiationCache,
    NegotiationSession, Phase, ProtocolDescriptor, ProtocolHandler, Requirement, SessionContext,
    TestVector, TransportKind, DEFAULT_MAX_ROUNDS,
};
use anp_core::time::SimClock;
use anp_core::wire::{HttpRequest, HttpResponse, Transport, TransportError};

use anp_node::client::AgentClient;
use anp_node::scenario::{end_to_end_scenario, standard_requirement, ScenarioStep};
use anp_node::sim::{connect_network, SimNetwork, SIM_EPOCH};
use anp_node::testutil::{agent_fixture, agent_fixture_linked, node_from};

fn criterion<T>(number: u8, name: &str, run: impl FnOnce() -> Result<T, String>) -> T {
    match run() {
        Ok(value) => {
            println!("acceptance {number} {name:<34} PASS");
            value
        }
        Err(reason) => {
            println!("acceptance {number} {name:<34} FAIL — {reason}");
            panic!("criterion {number} ({name}) failed: {reason}");
        }
    }
}

fn ensure(condition: bool, message: impl Into<String>) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn client_of(net: &SimNetwork, host: &str) -> AgentClient {
    let node = net.node(host).unwrap();
    AgentClient::new(
        node.e2e_identity().clone(),
        node.human_key().cloned(),
        Arc::new(net.client(host)),
        node.clock(),
    )
}

// ── 1. auth round-trip, replay, corruption ──────────────────────────────────

#[test]
fn criterion_1_auth_round_trip_and_replay() {
    criterion(1, "auth round-trip & replay", || {
        let started = Instant::now();
        let clock = SimClock::new(1_000_000);

        // Five signer identities with resolvable documents.
        let identities: Vec<(DidId, KeyPair)> = (0..5)
            .map(|i| {
                let did: DidId = format!("did:wba:agent{i}.example").parse().unwrap();
                let key = generate_keypair(Algorithm::Ed25519, KeyClass::Routine, "key-1");
                (did, key)
            })
            .collect();
        let resolver = StaticResolver::new(identities.iter().map(|(did, key)| {
            build_did_document(did, std::slice::from_ref(key), None, &[], None).unwrap()
        }));
        let nonces = NonceStore::new(DEFAULT_SKEW_SECS);
        let mut rng = rand::thread_rng();

        let methods = ["GET", "POST", "PUT"];
        let mut verified: Vec<(AuthHeader, String, String)> = Vec::new();
        for i in 0..1_000 {
            let (did, key) = &identities[i % identities.len()];
            let method = methods[rng.gen_range(0..methods.len())].to_string();
            let url = format!(
                "https://server{}.example/anp/route{}?n={i}",
                rng.gen_range(0..4),
                rng.gen_range(0..10)
            );
            let header = sign_request(did, key, &method, &url, &clock).unwrap();
            let outcome = verify_request(&header, &method, &url, &resolver, &nonces, &clock);
            ensure(
                outcome == Verification::Accepted(did.clone()),
                format!("cycle {i} rejected: {outcome:?}"),
            )?;
            verified.push((header, method, url));
        }

        for (i, (header, method, url)) in verified.iter().enumerate() {
            let outcome = verify_request(header, method, url, &resolver, &nonces, &clock);
            ensure(
                outcome == Verification::Rejected(RejectReason::ReplayedNonce),
                format!("replay {i} not rejected as replayed-nonce: {outcome:?}"),
            )?;
        }

        let mut accepted = 0usize;
        for trial in 0..10_000 {
            let (header, method, url) = &verified[trial % verified.len()];
            let mut bytes = header.encode().into_bytes();
            let pos = rng.gen_range(0..bytes.len());
            let old = bytes[pos];
            let mut new = old;
            while new == old {
                new = rng.gen();
            }
            bytes[pos] = new;
            let Ok(text) = std::str::from_utf8(&bytes) else {
                continue;
            };
            let Ok(parsed) = AuthHeader::parse(text) else {
                continue;
            };
            if verify_request(&parsed, method, url, &resolver, &nonces, &clock).is_accepted() {
                accepted += 1;
            }
        }
        ensure(
            accepted == 0,
            format!("{accepted} corrupted headers accepted"),
        )?;

        let elapsed = started.elapsed();
        ensure(
            elapsed < Duration::from_secs(30),
            format!("took {elapsed:?}, budget 30s"),
        )?;
        Ok(())
    });
}

// ── 2. single round trip ────────────────────────────────────────────────────

#[test]
fn criterion_2_single_round_trip() {
    criterion(2, "single round trip", || {
        let clock = Arc::new(SimClock::new(SIM_EPOCH));
        let a = node_from(agent_fixture("a.example", &[]), clock.clone());
        let b = node_from(agent_fixture("b.example", &[]), clock.clone());
        let net = connect_network(vec![a, b], &[], clock).map_err(|e| e.to_string())?;
        let client = client_of(&net, "a.example");

        net.clear_log();
        let open = client
            .start_negotiation(
                "b.example",
                standard_requirement(),
                vec![echo_descriptor(), reverse_descriptor()],
                &NegotiationCache::new(),
            )
            .map_err(|e| e.to_string())?;

        let first_exchange = net.exchanges_between("a.example", "b.example");
        let resolutions = net.resolution_count();
        ensure(
            first_exchange == 2,
            format!("first authenticated request took {first_exchange} messages, expected 2"),
        )?;
        ensure(
            resolutions <= 1,
            format!("{resolutions} resolutions, expected ≤ 1"),
        )?;
        ensure(
            client.has_token_for("b.example"),
            "no token with the first response",
        )?;

        let caps = CapabilitySet::new(vec![echo_descriptor(), reverse_descriptor()]);
        let handlers = HandlerRegistry::standard();
        let cache = NegotiationCache::new();
        let session = client
            .continue_negotiation("b.example", open, &caps, &handlers, &cache)
            .map_err(|e| e.to_string())?;
        ensure(
            session.is_live(),
            format!("negotiation ended {:?}", session.phase),
        )?;
        ensure(
            net.resolution_count() == resolutions,
            format!(
                "token-bearing follow-ups performed {} extra resolutions",
                net.resolution_count() - resolutions
            ),
        )?;
        Ok(())
    });
}

// ── 3. proxy opacity ────────────────────────────────────────────────────────

#[test]
fn criterion_3_e2e_proxy_opacity() {
    criterion(3, "e2e proxy opacity", || {
        let clock = Arc::new(SimClock::new(SIM_EPOCH));
        let a = node_from(agent_fixture("a.example", &[]), clock.clone());
        let b = node_from(agent_fixture("b.example", &[]), clock.clone());
        let net = connect_network(vec![a, b], &[("a.example", "b.example")], clock)
            .map_err(|e| e.to_string())?;
        let client = client_of(&net, "a.example");
        let peer_did = net.node("b.example").unwrap().did().clone();
        let mut session = client.handshake(&peer_did).map_err(|e| e.to_string())?;

        let mut rng = rand::thread_rng();
        let mut plaintexts = Vec::with_capacity(1_000);
        for _ in 0..1_000 {
            let mut plaintext = vec![0u8; rng.gen_range(16..=64)];
            OsRng.fill_bytes(&mut plaintext);
            client
                .send_envelope(&mut session, &plaintext, None)
                .map_err(|e| e.to_string())?;
            plaintexts.push(plaintext);
        }

        // Every envelope decrypted correctly at the recipient, in order.
        let inbox = net.node("b.example").unwrap().inbox_snapshot();
        ensure(
            inbox.len() == plaintexts.len(),
            "not all envelopes delivered",
        )?;
        for (entry, plaintext) in inbox.iter().zip(&plaintexts) {
            ensure(
                &entry.plaintext == plaintext,
                "recipient plaintext mismatch",
            )?;
        }

        // No 8-byte plaintext window appears anywhere in proxy-observed bytes.
        let observed = net.proxy_log("a.example", "b.example").unwrap().observed();
        let mut windows: std::collections::HashSet<[u8; 8]> = std::collections::HashSet::new();
        for blob in &observed {
            for window in blob.windows(8) {
                windows.insert(window.try_into().unwrap());
            }
        }
        for (i, plaintext) in plaintexts.iter().enumerate() {
            for window in plaintext.windows(8) {
                let key: [u8; 8] = window.try_into().unwrap();
                ensure(
                    !windows.contains(&key),
                    format!("plaintext {i} leaked an 8-byte window to the proxy"),
                )?;
            }
        }

        // 10,000 corruption trials against a fresh in-memory session pair.
        let (alice, alice_doc, bob, bob_doc) = session_fixture();
        let (msg, pending) = initiate_handshake(&alice, &bob_doc).unwrap();
        let (reply, bob_session) = respond_handshake(&msg, &bob, &alice_doc).unwrap();
        let mut alice_session = complete_handshake(pending, &reply, &bob_doc).unwrap();
        let body = alice_session
            .encrypt(b"corruption target with enough bytes to matter")
            .unwrap()
            .to_message_body();
        let mut survived = 0usize;
        for _ in 0..10_000 {
            let mut corrupted = body.clone();
            let pos = rng.gen_range(0..corrupted.len());
            let mask = rng.gen_range(1..=255u8);
            corrupted[pos] ^= mask;
            let mut receiver = bob_session.clone();
            if let Ok(parsed) = Envelope::from_message_body(&corrupted) {
                if receiver.decrypt(&parsed).is_ok() {
                    survived += 1;
                }
            }
        }
        ensure(
            survived == 0,
            format!("{survived} corrupted envelopes decrypted"),
        )?;
        Ok(())
    });
}

fn session_fixture() -> (
    anp_core::e2e::E2eIdentity,
    DidDocument,
    anp_core::e2e::E2eIdentity,
    DidDocument,
) {
    let build = |domain: &str| {
        let did: DidId = format!("did:wba:{domain}").parse().unwrap();
        let signing = generate_keypair(Algorithm::Ed25519, KeyClass::Routine, "key-1");
        let agreement = generate_keypair(Algorithm::X25519, KeyClass::Routine, "agree-1");
        let doc = build_did_document(
            &did,
            std::slice::from_ref(&signing),
            None,
            std::slice::from_ref(&agreement),
            None,
        )
        .unwrap();
        (
            anp_core::e2e::E2eIdentity {
                did,
                signing_key: signing,
                agreement_key: agreement,
            },
            doc,
        )
    };
    let (alice, alice_doc) = build("alice.example");
    let (bob, bob_doc) = build("bob.example");
    (alice, alice_doc, bob, bob_doc)
}

// ── 4. discovery completeness & pagination ─────────────────────────────────

/// Stub transport serving prebuilt collection pages.
#[derive(Default)]
struct PageServer {
    routes: std::collections::HashMap<String, Vec<u8>>,
}

impl Transport for PageServer {
    fn execute(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        Ok(match self.routes.get(&request.url) {
            Some(body) => HttpResponse::new(200, body.clone()),
            None => HttpResponse::new(404, Vec::new()),
        })
    }
}

#[test]
fn criterion_4_discovery_completeness_and_pagination() {
    criterion(4, "discovery completeness & pagination", || {
        let started = Instant::now();

        // 25 agents over 3 domains (8 + 8 + 9), page size 2, linked a→b→c.
        let clock = Arc::new(SimClock::new(SIM_EPOCH));
        let extras_a: Vec<String> = (0..7).map(|i| format!("agent{i}")).collect();
        let extras_b: Vec<String> = (0..7).map(|i| format!("service{i}")).collect();
        let extras_c: Vec<String> = (0..8).map(|i| format!("tool{i}")).collect();
        fn as_refs(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        let mut fixture_a = agent_fixture_linked("a.example", &as_refs(&extras_a), "b.example");
        let mut fixture_b = agent_fixture_linked("b.example", &as_refs(&extras_b), "c.example");
        let mut fixture_c = agent_fixture_linked("c.example", &as_refs(&extras_c), "c.example");
        for fixture in [&mut fixture_a, &mut fixture_b, &mut fixture_c] {
            fixture.config.page_size = 2;
        }
        let net = connect_network(
            vec![
                node_from(fixture_a, clock.clone()),
                node_from(fixture_b, clock.clone()),
                node_from(fixture_c, clock.clone()),
            ],
            &[],
            clock,
        )
        .map_err(|e| e.to_string())?;

        let oracle = net.all_served_ad_urls();
        ensure(
            oracle.len() == 25,
            format!("fixture serves {} agents, wanted 25", oracle.len()),
        )?;

        let transport = net.client("crawler");
        let report = crawl_network(
            &["a.example".to_string()],
            &transport,
            &CrawlLimits::default(),
        );
        ensure(
            report.errors.is_empty(),
            format!("crawl errors: {:?}", report.errors),
        )?;
        let mut discovered = report.documents_found.clone();
        discovered.sort();
        ensure(
            discovered == oracle,
            format!("discovered {}/{} agents", discovered.len(), oracle.len()),
        )?;

        // Pagination inverse, exhaustively for every N ≤ 50, k ≤ 10.
        for n in 0..=50usize {
            let urls: Vec<String> = (0..n)
                .map(|i| format!("https://pages.example/agents/a{i}/ad.json"))
                .collect();
            for k in 1..=10usize {
                let base = "https://pages.example/.well-known/agent-descriptions";
                let pages = build_collection_pages(&urls, k, base).map_err(|e| e.to_string())?;
                let mut server = PageServer::default();
                for (i, page) in pages.iter().enumerate() {
                    let url = if i == 0 {
                        base.to_string()
                    } else {
                        format!("{base}?page={i}")
                    };
                    server.routes.insert(url, serde_json::to_vec(page).unwrap());
                }
                let report = crawl_domain("pages.example", &server, &CrawlLimits::default());
                ensure(
                    report.documents_found == urls,
                    format!("round-trip failed for N={n} k={k}"),
                )?;
                ensure(report.errors.is_empty(), format!("errors for N={n} k={k}"))?;
            }
        }

        let elapsed = started.elapsed();
        ensure(
            elapsed < Duration::from_secs(10),
            format!("took {elapsed:?}, budget 10s"),
        )?;
        Ok(())
    });
}

// ── 5. negotiation convergence ──────────────────────────────────────────────

struct SuffixHandler(&'static str);

impl ProtocolHandler for SuffixHandler {
    fn handle(&self, input: &str) -> String {
        format!("{input}{}", self.0)
    }
}

/// Six distinct protocols with deterministic behaviors keyed by id.
fn protocol_pool() -> Vec<(ProtocolDescriptor, Arc<dyn ProtocolHandler>)> {
    let mut pool: Vec<(ProtocolDescriptor, Arc<dyn ProtocolHandler>)> = vec![
        (
            echo_descriptor(),
            Arc::new(anp_core::metaproto::EchoHandler),
        ),
        (
            reverse_descriptor(),
            Arc::new(anp_core::metaproto::ReverseHandler),
        ),
    ];
    for suffix in ["!", "?", ".", "…"] {
        let descriptor = ProtocolDescriptor::new(
            TransportKind::HttpJson,
            vec![FieldSpec::required("text", "string")],
            format!("append {suffix:?} to the text field"),
        );
        pool.push((
            descriptor,
            Arc::new(SuffixHandler(match suffix {
                "!" => "!",
                "?" => "?",
                "." => ".",
                _ => "…",
            })),
        ));
    }
    pool
}

/// Relay messages between two in-memory sessions until both terminate.
fn drive_pair(
    requirement: Requirement,
    candidates: Vec<ProtocolDescriptor>,
    a_caps: &CapabilitySet,
    a_handlers: &HandlerRegistry,
    b_caps: &CapabilitySet,
    b_handlers: &HandlerRegistry,
) -> Result<(NegotiationSession, NegotiationSession), String> {
    let cache = NegotiationCache::new();
    let a_ctx = SessionContext {
        capabilities: a_caps,
        evaluator: &DefaultEvaluator,
        handlers: a_handlers,
    };
    let b_ctx = SessionContext {
        capabilities: b_caps,
        evaluator: &DefaultEvaluator,
        handlers: b_handlers,
    };

    let (mut a, proposal) = propose(requirement, candidates, &cache).map_err(|e| e.to_string())?;
    let (mut b, reply) =
        respond_to_proposal(&proposal, &b_ctx, DEFAULT_MAX_ROUNDS).map_err(|e| e.to_string())?;
    let mut to_a = Some(reply);
    let mut vectors_sent = false;

    for _ in 0..40 {
        let mut to_b = None;
        if let Some(message) = to_a.take() {
            to_b = step_session(&mut a, &message, &a_ctx).map_err(|e| e.to_string())?;
        }
        if to_b.is_none() && a.phase == Phase::Testing && !vectors_sent {
            let agreed = a.agreed.clone().ok_or("testing without agreement")?;
            let handler = a_handlers
                .get(&agreed)
                .ok_or("initiator lacks agreed handler")?;
            let vectors = vec![
                TestVector {
                    input: "ping".to_string(),
                    expected: handler.handle("ping"),
                },
                TestVector {
                    input: "".to_string(),
                    expected: handler.handle(""),
                },
            ];
            to_b = Some(propose_test_vectors(&mut a, &vectors).map_err(|e| e.to_string())?);
            vectors_sent = true;
        }
        let Some(message) = to_b else { break };
        to_a = step_session(&mut b, &message, &b_ctx).map_err(|e| e.to_string())?;
        if a.is_failed() && b.is_failed() {
            break;
        }
    }
    Ok((a, b))
}

#[test]
fn criterion_5_negotiation_convergence() {
    criterion(5, "negotiation convergence", || {
        let started = Instant::now();
        let pool = protocol_pool();
        let mut rng = rand::thread_rng();

        for trial in 0..1_000 {
            // Random nonempty subsets for each side.
            let pick = |rng: &mut rand::rngs::ThreadRng| -> Vec<usize> {
                loop {
                    let picked: Vec<usize> =
                        (0..pool.len()).filter(|_| rng.gen_bool(0.5)).collect();
                    if !picked.is_empty() {
                        return picked;
                    }
                }
            };
            let a_set = pick(&mut rng);
            let b_set = pick(&mut rng);

            let descriptors =
                |set: &[usize]| set.iter().map(|&i| pool[i].0.clone()).collect::<Vec<_>>();
            let registry = |set: &[usize]| {
                let mut registry = HandlerRegistry::new();
                for &i in set {
                    registry.register(&pool[i].0, pool[i].1.clone());
                }
                registry
            };

            let a_descriptors = descriptors(&a_set);
            let b_descriptors = descriptors(&b_set);
            let a_caps = CapabilitySet::new(a_descriptors.clone());
            let b_caps = CapabilitySet::new(b_descriptors);
            let a_handlers = registry(&a_set);
            let b_handlers = registry(&b_set);

            // Brute-force oracle: first of A's candidates supported by B.
            let expected = a_descriptors
                .iter()
                .find(|d| b_caps.supports(&d.protocol_id))
                .map(|d| d.protocol_id.clone());

            let (a, b) = drive_pair(
                Requirement::new(format!("trial {trial}")),
                a_descriptors,
                &a_caps,
                &a_handlers,
                &b_caps,
                &b_handlers,
            )?;

            match expected {
                Some(expected_id) => {
                    ensure(
                        a.is_live() && b.is_live(),
                        format!(
                            "trial {trial}: expected live, got a={:?} b={:?}",
                            a.phase, b.phase
                        ),
                    )?;
                    ensure(
                        a.agreed == b.agreed,
                        format!("trial {trial}: sides agreed on different protocols"),
                    )?;
                    ensure(
                        a.agreed.as_deref() == Some(&expected_id[..]),
                        format!("trial {trial}: oracle disagrees with agreed protocol"),
                    )?;
                    ensure(
                        a.round <= 2,
                        format!("trial {trial}: took {} rounds, expected ≤ 2", a.round),
                    )?;
                }
                None => {
                    ensure(
                        a.is_failed() && b.is_failed(),
                        format!(
                            "trial {trial}: disjoint sets must fail, got a={:?} b={:?}",
                            a.phase, b.phase
                        ),
                    )?;
                    ensure(
                        a.round <= a.max_rounds + 1 && b.round <= b.max_rounds + 1,
                        format!("trial {trial}: failed beyond max_rounds"),
                    )?;
                }
            }
        }

        let elapsed = started.elapsed();
        ensure(
            elapsed < Duration::from_secs(60),
            format!("took {elapsed:?}, budget 60s"),
        )?;
        Ok(())
    });
}

// ── 6. negotiation cache ────────────────────────────────────────────────────

#[test]
fn criterion_6_negotiation_cache() {
    criterion(6, "negotiation cache", || {
        let clock = Arc::new(SimClock::new(SIM_EPOCH));
        let a = node_from(agent_fixture("a.example", &[]), clock.clone());
        let mut b = node_from(agent_fixture("b.example", &[]), clock.clone());
        // The responder speaks only the echo protocol; the initiator's
        // preferred (first) candidate is reverse, so the uncached run must
        // cost a counter round.
        b.set_protocols(vec![(
            echo_descriptor(),
            Arc::new(anp_core::metaproto::EchoHandler),
        )]);
        let net = connect_network(vec![a, b], &[], clock).map_err(|e| e.to_string())?;

        let client = client_of(&net, "a.example");
        let caps = CapabilitySet::new(vec![reverse_descriptor(), echo_descriptor()]);
        let handlers = HandlerRegistry::standard();
        let cache = NegotiationCache::new();
        let requirement = Requirement::new("append nothing, just relay text");

        // Uncached: disjoint-first candidate list [reverse].
        let first = client
            .negotiate(
                "b.example",
                requirement.clone(),
                vec![reverse_descriptor()],
                &caps,
                &handlers,
                &cache,
            )
            .map_err(|e| e.to_string())?;
        ensure(
            first.is_live(),
            format!("uncached run ended {:?}", first.phase),
        )?;
        ensure(
            first.round >= 1,
            format!(
                "uncached run took {} counter rounds, expected ≥ 1",
                first.round
            ),
        )?;
        ensure(
            first.agreed.as_deref() == Some(&echo_descriptor().protocol_id[..]),
            "uncached run agreed on an unexpected protocol",
        )?;
        ensure(
            cache.lookup(&requirement).is_some(),
            "agreement was not cached",
        )?;

        // Cached: same candidate ordering, but the cache promotes echo.
        let second = client
            .negotiate(
                "b.example",
                requirement.clone(),
                vec![reverse_descriptor()],
                &caps,
                &handlers,
                &cache,
            )
            .map_err(|e| e.to_string())?;
        ensure(
            second.is_live(),
            format!("cached run ended {:?}", second.phase),
        )?;
        ensure(
            second.round == 0,
            format!(
                "cached run took {} counter rounds, expected 0",
                second.round
            ),
        )?;
        ensure(
            second.agreed.as_deref() == Some(&echo_descriptor().protocol_id[..]),
            "cached descriptor was not chosen",
        )?;
        Ok(())
    });
}

// ── 7. description validation & signing ─────────────────────────────────────

fn random_word(rng: &mut impl Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
        .collect()
}

fn random_document(rng: &mut impl Rng, index: usize) -> (AdDocument, KeyPair, DidDocument) {
    let did: DidId = format!("did:wba:agent{index}.example:agents:x{index}")
        .parse()
        .unwrap();
    let key = generate_keypair(Algorithm::Ed25519, KeyClass::Routine, "key-1");

    let capability_count = rng.gen_range(0..4);
    let mut names = std::collections::BTreeSet::new();
    while names.len() < capability_count {
        let len = rng.gen_range(3..10);
        names.insert(random_word(rng, len));
    }
    let capabilities = names
        .into_iter()
        .map(|name| Capability {
            description: format!("{name} {}", random_word(rng, 6)),
            kind: match rng.gen_range(0..3) {
                0 => CapabilityKind::Information,
                1 => CapabilityKind::Service,
                _ => CapabilityKind::Tool,
            },
            name,
        })
        .collect();
    let interfaces = (0..rng.gen_range(0..3))
        .map(|i| InterfaceDecl {
            protocol: random_word(rng, 8),
            endpoint: format!("https://agent{index}.example/if/{i}"),
            version: "1.0".to_string(),
            input_description: rng.gen_bool(0.5).then(|| random_word(rng, 12)),
            output_description: None,
        })
        .collect();
    let mut doc = build_agent_description(
        &did,
        &format!("{} {}", random_word(rng, 7), random_word(rng, 5)),
        capabilities,
        interfaces,
        rng.gen_bool(0.3).then(|| Contact {
            email: Some(format!("{}@example.com", random_word(rng, 5))),
            url: None,
        }),
    )
    .unwrap();
    if rng.gen_bool(0.4) {
        doc.owner = Some(random_word(rng, 10));
    }
    let did_doc =
        build_did_document(&did, std::slice::from_ref(&key), None, &[], Some(&doc.id)).unwrap();
    (doc, key, did_doc)
}

#[test]
fn criterion_7_description_validation_and_signing() {
    criterion(7, "description validation & signing", || {
        let mut rng = rand::thread_rng();
        let clock = SimClock::new(SIM_EPOCH);

        for index in 0..500 {
            let (doc, key, did_doc) = random_document(&mut rng, index);

            // Serialize/parse round-trip.
            let bytes = serde_json::to_vec(&doc).unwrap();
            let (parsed, violations) = validate_agent_description(&bytes);
            ensure(
                violations.is_empty(),
                format!("doc {index}: {violations:?}"),
            )?;
            ensure(
                parsed.as_ref() == Some(&doc),
                format!("doc {index}: round-trip mismatch"),
            )?;

            // Sign, verify, then verify that any mutation breaks it.
            let method = doc.did.with_fragment("key-1");
            let signed = sign_description(doc, &key, &method, &clock).unwrap();
            let resolver = StaticResolver::new([did_doc]);
            ensure(
                verify_description(&signed, &resolver).is_verified(),
                format!("doc {index}: signature did not verify"),
            )?;

            let mut mutated = signed.clone();
            match rng.gen_range(0..4) {
                0 => mutated.name.push('x'),
                1 => mutated.id.push('x'),
                2 => mutated.owner = Some("intruder".to_string()),
                _ => mutated.capabilities.push(Capability {
                    name: "stowaway".to_string(),
                    description: String::new(),
                    kind: CapabilityKind::Tool,
                }),
            }
            ensure(
                verify_description(&mutated, &resolver)
                    == DescriptionOutcome::Failed(
                        anp_core::description::VerifyFailure::BadSignature,
                    ),
                format!("doc {index}: mutation survived verification"),
            )?;
        }

        // Every required-field deletion is caught; optional ones are not.
        let mut rng2 = rand::thread_rng();
        let (doc, _, _) = random_document(&mut rng2, 9_999);
        let mut doc = doc;
        doc.owner = Some("owner".to_string());
        doc.contact = Some(Contact {
            email: Some("x@example.com".to_string()),
            url: None,
        });
        let value = serde_json::to_value(&doc).unwrap();
        let optional = ["owner", "contact", "proof", "capabilities", "interfaces"];
        for field in value.as_object().unwrap().keys() {
            let mut pruned = value.clone();
            pruned.as_object_mut().unwrap().remove(field);
            let (parsed, violations) =
                validate_agent_description(&serde_json::to_vec(&pruned).unwrap());
            if optional.contains(&field.as_str()) {
                ensure(
                    parsed.is_some() && violations.is_empty(),
                    format!("optional field {field} was flagged"),
                )?;
            } else {
                ensure(
                    parsed.is_none() && !violations.is_empty(),
                    format!("required field {field} deletion went unnoticed"),
                )?;
            }
        }
        Ok(())
    });
}

// ── 8. human-authorization gate ─────────────────────────────────────────────

#[test]
fn criterion_8_human_authorization_gate() {
    criterion(8, "human-authorization gate", || {
        use anp_core::auth::RiskClass;

        let clock = Arc::new(SimClock::new(SIM_EPOCH));
        let a = node_from(agent_fixture("a.example", &[]), clock.clone());
        let mut b_fixture = agent_fixture("b.example", &[]);
        b_fixture.config.index_enabled = true;
        for (route, risk) in [
            ("/anp/negotiate", RiskClass::Low),
            ("/anp/handshake", RiskClass::Low),
            ("/anp/search", RiskClass::Low),
            ("/anp/message", RiskClass::High),
            ("/anp/register", RiskClass::High),
        ] {
            b_fixture.config.risk_table.insert(route.to_string(), risk);
        }
        let risk_table = b_fixture.config.risk_table.clone();
        let b = node_from(b_fixture, clock.clone());
        let net = connect_network(vec![a, b], &[], clock).map_err(|e| e.to_string())?;

        let client = client_of(&net, "a.example");
        let node_b = net.node("b.example").unwrap();
        let peer_did = node_b.did().clone();
        let mut session = client.handshake(&peer_did).map_err(|e| e.to_string())?;
        let mut expected_audit = 0usize;

        for (route, risk) in &risk_table {
            // Request factory per route, fresh payload per call.
            let mut perform =
                |confirmation: Option<&anp_core::auth::HumanConfirmation>| -> Result<u16, String> {
                    let url = format!("https://b.example{route}");
                    let response = match route.as_str() {
                        "/anp/negotiate" => {
                            let (_, message) = propose(
                                Requirement::new(format!("sweep {route}")),
                                vec![echo_descriptor()],
                                &NegotiationCache::new(),
                            )
                            .unwrap();
                            client.request_authed(
                                "POST",
                                &url,
                                serde_json::to_vec(&message).unwrap(),
                                confirmation,
                            )
                        }
                        "/anp/handshake" => {
                            let doc = client.resolver().resolve(&peer_did).unwrap();
                            let (message, _) = initiate_handshake(&client.identity, &doc).unwrap();
                            client.request_authed(
                                "POST",
                                &url,
                                serde_json::to_vec(&message).unwrap(),
                                confirmation,
                            )
                        }
                        "/anp/message" => {
                            let envelope = session.encrypt(b"sweep payload").unwrap();
                            client.request_authed(
                                "POST",
                                &url,
                                envelope.to_message_body(),
                                confirmation,
                            )
                        }
                        "/anp/register" => {
                            let ad_url = format!(
                                "https://a.example/registered/{}/ad.json",
                                rand::thread_rng().gen::<u32>()
                            );
                            client.request_authed(
                                "POST",
                                &url,
                                serde_json::to_vec(&serde_json::json!({ "adUrl": ad_url }))
                                    .unwrap(),
                                confirmation,
                            )
                        }
                        "/anp/search" => client.request_authed(
                            "GET",
                            &format!("{url}?q=relay"),
                            Vec::new(),
                            confirmation,
                        ),
                        other => return Err(format!("unexpected route {other}")),
                    };
                    response.map(|r| r.status).map_err(|e| e.to_string())
                };

            match risk {
                RiskClass::Low => {
                    client.forget_tokens(); // force a bare WBA header
                    let status = perform(None)?;
                    ensure(
                        (200..300).contains(&status),
                        format!("low route {route} rejected a valid WBA request: {status}"),
                    )?;
                }
                RiskClass::High => {
                    let denied = perform(None)?;
                    expected_audit += 1;
                    ensure(
                        denied == 403,
                        format!("high route {route} without confirmation returned {denied}"),
                    )?;
                    let confirmation = client
                        .human_confirmation(route)
                        .ok_or("client holds no human key")?;
                    let allowed = perform(Some(&confirmation))?;
                    expected_audit += 1;
                    ensure(
                        (200..300).contains(&allowed),
                        format!("high route {route} with confirmation returned {allowed}"),
                    )?;
                }
            }
        }

        let audit = node_b.audit_log().snapshot();
        ensure(
            audit.len() == expected_audit,
            format!(
                "audit log has {} records, expected {expected_audit}",
                audit.len()
            ),
        )?;
        for record in &audit {
            if record.allowed {
                ensure(
                    record.signature.is_some(),
                    "allowed high-risk decision lacks a recorded signature",
                )?;
            }
        }
        Ok(())
    });
}

// ── 9. closed-loop scenario ─────────────────────────────────────────────────

#[test]
fn criterion_9_closed_loop_scenario() {
    criterion(9, "closed-loop scenario", || {
        let started = Instant::now();

        let clock = Arc::new(SimClock::new(SIM_EPOCH));
        let a = node_from(
            agent_fixture_linked("a.example", &["alpha"], "b.example"),
            clock.clone(),
        );
        let b = node_from(
            agent_fixture_linked("b.example", &["beta"], "c.example"),
            clock.clone(),
        );
        let mut c_fixture = agent_fixture("c.example", &[]);
        c_fixture.config.index_enabled = true;
        c_fixture.config.refresh_interval = 0;
        let c = node_from(c_fixture, clock.clone());
        let net = connect_network(vec![a, b, c], &[], clock).map_err(|e| e.to_string())?;

        let b_ad = net.node("b.example").unwrap().served_ad_urls()[0].clone();
        let a_ad = net.node("a.example").unwrap().served_ad_urls()[0].clone();
        let script = vec![
            ScenarioStep::Crawl {
                from: "a.example".to_string(),
                seeds: vec!["a.example".to_string()],
            },
            ScenarioStep::FetchAndVerifyAd {
                from: "a.example".to_string(),
                ad_url: b_ad,
            },
            ScenarioStep::Authenticate {
                from: "a.example".to_string(),
                to: "b.example".to_string(),
            },
            ScenarioStep::Negotiate {
                from: "a.example".to_string(),
                to: "b.example".to_string(),
                requirement: standard_requirement(),
            },
            ScenarioStep::Handshake {
                from: "a.example".to_string(),
                to: "b.example".to_string(),
            },
            ScenarioStep::Exchange {
                from: "a.example".to_string(),
                to: "b.example".to_string(),
                payload: br#"{"text":"closed loop payload","scratchpad":"strip me"}"#.to_vec(),
            },
            ScenarioStep::Register {
                from: "a.example".to_string(),
                index: "c.example".to_string(),
                ad_url: a_ad,
            },
            ScenarioStep::Search {
                from: "a.example".to_string(),
                index: "c.example".to_string(),
                terms: vec!["relay".to_string()],
            },
        ];
        let report = end_to_end_scenario(&net, &script);
        print!("{report}");
        ensure(
            report.all_passed(),
            format!("scenario steps failed:\n{report}"),
        )?;
        ensure(report.steps.len() == script.len(), "missing step outcomes")?;

        let elapsed = started.elapsed();
        ensure(
            elapsed < Duration::from_secs(60),
            format!("took {elapsed:?}, budget 60s"),
        )?;
        Ok(())
    });
}
