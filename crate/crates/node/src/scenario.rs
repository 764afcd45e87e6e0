//! Scripted end-to-end runs over the simulated network.
//!
//! A script is a sequence of steps — crawl, fetch and verify a description,
//! authenticate, negotiate, handshake, exchange, register, search — executed
//! in order with per-step outcomes. A failed step marks the agents it
//! involves; later steps touching a marked agent are skipped rather than
//! run against a broken premise.

use std::collections::{HashMap, HashSet};

use anp_core::discovery::{crawl_network, CrawlLimits, RegisterOutcome};
use anp_core::e2e::Session;
use anp_core::metaproto::{
    echo_descriptor, reverse_descriptor, CapabilitySet, HandlerRegistry, NegotiationCache,
    ProtocolDescriptor, Requirement,
};

use crate::client::{AgentClient, OpenNegotiation};
use crate::disclosure::strip_to_schema;
use crate::sim::SimNetwork;

#[derive(Debug, Clone)]
pub enum ScenarioStep {
    /// Crawl the network from seed domains, acting from `from`.
    Crawl { from: String, seeds: Vec<String> },
    /// Fetch an AD document and verify its signature and DID binding.
    FetchAndVerifyAd { from: String, ad_url: String },
    /// First authenticated exchange with `to`: opens a negotiation and
    /// obtains a bearer token in the same round trip.
    Authenticate { from: String, to: String },
    /// Drive negotiation with `to` to live (continuing the session opened by
    /// an earlier Authenticate step when the requirement matches).
    Negotiate {
        from: String,
        to: String,
        requirement: Requirement,
    },
    /// Establish an E2E session with `to`'s primary agent.
    Handshake { from: String, to: String },
    /// Encrypt and deliver a payload over the established session.
    Exchange {
        from: String,
        to: String,
        payload: Vec<u8>,
    },
    /// Register an AD URL with the index node.
    Register {
        from: String,
        index: String,
        ad_url: String,
    },
    /// Refresh the index and query it.
    Search {
        from: String,
        index: String,
        terms: Vec<String>,
    },
}

impl ScenarioStep {
    fn label(&self) -> String {
        match self {
            ScenarioStep::Crawl { from, seeds } => format!("crawl from {from} seeds {seeds:?}"),
            ScenarioStep::FetchAndVerifyAd { ad_url, .. } => format!("verify ad {ad_url}"),
            ScenarioStep::Authenticate { from, to } => format!("authenticate {from} -> {to}"),
            ScenarioStep::Negotiate { from, to, .. } => format!("negotiate {from} -> {to}"),
            ScenarioStep::Handshake { from, to } => format!("handshake {from} -> {to}"),
            ScenarioStep::Exchange { from, to, .. } => format!("exchange {from} -> {to}"),
            ScenarioStep::Register { ad_url, index, .. } => {
                format!("register {ad_url} at {index}")
            }
            ScenarioStep::Search { index, terms, .. } => format!("search {index} for {terms:?}"),
        }
    }

    /// Hostnames this step depends on.
    fn involved(&self) -> Vec<String> {
        match self {
            ScenarioStep::Crawl { from, .. } => vec![from.clone()],
            ScenarioStep::FetchAndVerifyAd { from, ad_url } => {
                let mut hosts = vec![from.clone()];
                if let Ok(url) = url::Url::parse(ad_url) {
                    if let Some(host) = url.host_str() {
                        hosts.push(match url.port() {
                            Some(p) => format!("{host}:{p}"),
                            None => host.to_string(),
                        });
                    }
                }
                hosts
            }
            ScenarioStep::Authenticate { from, to }
            | ScenarioStep::Negotiate { from, to, .. }
            | ScenarioStep::Handshake { from, to }
            | ScenarioStep::Exchange { from, to, .. } => vec![from.clone(), to.clone()],
            ScenarioStep::Register { from, index, .. }
            | ScenarioStep::Search { from, index, .. } => vec![from.clone(), index.clone()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub step: String,
    pub status: StepStatus,
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct ScenarioReport {
    pub steps: Vec<StepOutcome>,
}

impl ScenarioReport {
    pub fn all_passed(&self) -> bool {
        !self.steps.is_empty() && self.steps.iter().all(|s| s.status == StepStatus::Passed)
    }

    pub fn passed_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.status == StepStatus::Passed)
            .count()
    }
}

impl std::fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for outcome in &self.steps {
            let tag = match outcome.status {
                StepStatus::Passed => "pass",
                StepStatus::Failed => "FAIL",
                StepStatus::Skipped => "skip",
            };
            writeln!(f, "[{tag}] {} — {}", outcome.step, outcome.detail)?;
        }
        Ok(())
    }
}

struct ScenarioState {
    clients: HashMap<String, AgentClient>,
    pending: HashMap<(String, String), OpenNegotiation>,
    agreed: HashMap<(String, String), ProtocolDescriptor>,
    sessions: HashMap<(String, String), Session>,
    caches: HashMap<String, NegotiationCache>,
    failed_agents: HashSet<String>,
    discovered: Vec<String>,
}

fn standard_capabilities() -> (CapabilitySet, HandlerRegistry, Vec<ProtocolDescriptor>) {
    let descriptors = vec![echo_descriptor(), reverse_descriptor()];
    (
        CapabilitySet::new(descriptors.clone()),
        HandlerRegistry::standard(),
        descriptors,
    )
}

/// Run a script and report every step's outcome.
pub fn end_to_end_scenario(net: &SimNetwork, script: &[ScenarioStep]) -> ScenarioReport {
    let mut report = ScenarioReport::default();
    let mut state = ScenarioState {
        clients: HashMap::new(),
        pending: HashMap::new(),
        agreed: HashMap::new(),
        sessions: HashMap::new(),
        caches: HashMap::new(),
        failed_agents: HashSet::new(),
        discovered: Vec::new(),
    };

    for step in script {
        let label = step.label();
        if step
            .involved()
            .iter()
            .any(|h| state.failed_agents.contains(h))
        {
            report.steps.push(StepOutcome {
                step: label,
                status: StepStatus::Skipped,
                detail: "depends on a failed agent".to_string(),
            });
            continue;
        }
        let outcome = run_step(net, step, &mut state);
        let (status, detail) = match outcome {
            Ok(detail) => (StepStatus::Passed, detail),
            Err(detail) => {
                for host in step.involved() {
                    state.failed_agents.insert(host);
                }
                (StepStatus::Failed, detail)
            }
        };
        report.steps.push(StepOutcome {
            step: label,
            status,
            detail,
        });
    }
    report
}

fn ensure_client(net: &SimNetwork, state: &mut ScenarioState, host: &str) -> Result<(), String> {
    if !state.clients.contains_key(host) {
        let node = net.node(host).ok_or_else(|| format!("no node at {host}"))?;
        let client = AgentClient::new(
            node.e2e_identity().clone(),
            node.human_key().cloned(),
            std::sync::Arc::new(net.client(host)),
            node.clock(),
        );
        state.clients.insert(host.to_string(), client);
        state.caches.entry(host.to_string()).or_default();
    }
    Ok(())
}

fn run_step(
    net: &SimNetwork,
    step: &ScenarioStep,
    state: &mut ScenarioState,
) -> Result<String, String> {
    let (caps, handlers, candidates) = standard_capabilities();
    match step {
        ScenarioStep::Crawl { from, seeds } => {
            let transport = net.client(from);
            let report = crawl_network(seeds, &transport, &CrawlLimits::default());
            if !report.errors.is_empty() {
                return Err(format!("crawl errors: {:?}", report.errors));
            }
            state.discovered = report.documents_found.clone();
            Ok(format!(
                "{} agents across {} domains",
                report.documents_found.len(),
                report.domains_visited
            ))
        }

        ScenarioStep::FetchAndVerifyAd { from, ad_url } => {
            ensure_client(net, state, from)?;
            let client = &state.clients[from];
            let doc = client
                .fetch_and_verify_ad(ad_url)
                .map_err(|e| e.to_string())?;
            Ok(format!("verified {} ({})", doc.name, doc.did))
        }

        ScenarioStep::Authenticate { from, to } => {
            ensure_client(net, state, from)?;
            let client = &state.clients[from];
            let cache = &state.caches[from];
            let open = client
                .start_negotiation(to, standard_requirement(), candidates, cache)
                .map_err(|e| e.to_string())?;
            if !client.has_token_for(to) {
                return Err("no token returned with first authenticated response".to_string());
            }
            state.pending.insert((from.clone(), to.clone()), open);
            Ok("token acquired on first exchange".to_string())
        }

        ScenarioStep::Negotiate {
            from,
            to,
            requirement,
        } => {
            ensure_client(net, state, from)?;
            let pending = state
                .pending
                .remove(&(from.clone(), to.clone()))
                .filter(|open| &open.requirement == requirement);
            let client = &state.clients[from];
            let cache = &state.caches[from];
            let session = match pending {
                Some(open) => client
                    .continue_negotiation(to, open, &caps, &handlers, cache)
                    .map_err(|e| e.to_string())?,
                None => client
                    .negotiate(to, requirement.clone(), candidates, &caps, &handlers, cache)
                    .map_err(|e| e.to_string())?,
            };
            if !session.is_live() {
                return Err(format!("negotiation ended {:?}", session.phase));
            }
            let agreed_id = session.agreed.clone().unwrap_or_default();
            let descriptor = caps
                .supported
                .iter()
                .find(|d| d.protocol_id == agreed_id)
                .cloned()
                .ok_or("agreed on an unknown descriptor")?;
            state.agreed.insert((from.clone(), to.clone()), descriptor);
            Ok(format!("live on {}", &agreed_id[..12]))
        }

        ScenarioStep::Handshake { from, to } => {
            let peer_did = net
                .node(to)
                .ok_or_else(|| format!("no node at {to}"))?
                .did()
                .clone();
            ensure_client(net, state, from)?;
            let client = &state.clients[from];
            let session = client.handshake(&peer_did).map_err(|e| e.to_string())?;
            state.sessions.insert((from.clone(), to.clone()), session);
            Ok("session established".to_string())
        }

        ScenarioStep::Exchange { from, to, payload } => {
            let key = (from.clone(), to.clone());
            if !state.sessions.contains_key(&key) {
                return Err("no established session".to_string());
            }
            // Apply minimal disclosure when a protocol was negotiated and
            // the payload is structured.
            let (bytes_to_send, stripped) = match (
                state.agreed.get(&key),
                serde_json::from_slice::<serde_json::Value>(payload),
            ) {
                (Some(descriptor), Ok(value)) if value.is_object() => {
                    let (reduced, stripped) = strip_to_schema(&value, &descriptor.message_schema);
                    (serde_json::to_vec(&reduced).unwrap(), stripped)
                }
                _ => (payload.clone(), Vec::new()),
            };
            let client = &state.clients[from];
            let session = state.sessions.get_mut(&key).expect("checked above");
            let sequence = client
                .send_envelope(session, &bytes_to_send, None)
                .map_err(|e| e.to_string())?;
            let delivered = net
                .node(to)
                .ok_or_else(|| format!("no node at {to}"))?
                .inbox_snapshot()
                .iter()
                .any(|entry| entry.plaintext == bytes_to_send);
            if !delivered {
                return Err("payload not present in recipient inbox".to_string());
            }
            let mut detail = format!("delivered sequence {sequence}");
            if !stripped.is_empty() {
                detail.push_str(&format!(", stripped fields {stripped:?}"));
            }
            Ok(detail)
        }

        ScenarioStep::Register {
            from,
            index,
            ad_url,
        } => {
            ensure_client(net, state, from)?;
            let client = &state.clients[from];
            match client.register_with_index(index, ad_url) {
                RegisterOutcome::Accepted => Ok("registered".to_string()),
                other => Err(format!("{other:?}")),
            }
        }

        ScenarioStep::Search { from, index, terms } => {
            net.node(index)
                .ok_or_else(|| format!("no node at {index}"))?
                .refresh_index()
                .ok_or("index node has no index enabled")?;
            ensure_client(net, state, from)?;
            let client = &state.clients[from];
            let results = client.search(index, terms, 10).map_err(|e| e.to_string())?;
            if results.is_empty() {
                return Err("no results".to_string());
            }
            Ok(format!("{} results, top {}", results.len(), results[0].0))
        }
    }
}

/// The requirement the Authenticate step opens with; Negotiate steps using
/// the same requirement continue that session.
pub fn standard_requirement() -> Requirement {
    Requirement {
        description: "exchange short text payloads and get them processed".to_string(),
        inputs: vec![anp_core::metaproto::FieldSpec::required("text", "string")],
        expected_outputs: vec![anp_core::metaproto::FieldSpec::required("text", "string")],
    }
}
