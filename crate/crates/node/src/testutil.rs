//! Fixtures for tests: configured agents with freshly generated keys and
//! mutually bound DID/AD documents.

use std::sync::Arc;

use anp_core::description::{
    build_agent_description, default_ad_url, sign_description, AdDocument, Capability,
    CapabilityKind, InterfaceDecl,
};
use anp_core::identity::{
    build_did_document, generate_keypair, Algorithm, DidDocument, DidId, KeyClass, KeyPair,
};
use anp_core::time::{Clock, SimClock};

use crate::config::{NodeConfig, NodeKeys, ServedAgent};
use crate::service::Node;
use crate::sim::SIM_EPOCH;

pub struct AgentFixture {
    pub config: NodeConfig,
    pub keys: NodeKeys,
}

/// DID for a domain authority, percent-encoding any port.
pub fn did_for_domain(domain: &str) -> DidId {
    format!("did:wba:{}", domain.replace(':', "%3a"))
        .parse()
        .expect("fixture domain is valid")
}

fn build_signed_agent(
    did: &DidId,
    name: &str,
    capabilities: Vec<Capability>,
    interface_domain: &str,
    clock: &dyn Clock,
) -> (DidDocument, AdDocument, NodeKeys) {
    let signing = generate_keypair(Algorithm::Ed25519, KeyClass::Routine, "key-1");
    let agreement = generate_keypair(Algorithm::X25519, KeyClass::Routine, "agree-1");
    let human = generate_keypair(Algorithm::Ed25519, KeyClass::HumanAuthorization, "human-1");

    let interfaces = vec![InterfaceDecl {
        protocol: "anp/negotiate".to_string(),
        endpoint: format!("https://{interface_domain}/anp/negotiate"),
        version: "1.0".to_string(),
        input_description: None,
        output_description: None,
    }];
    let ad = build_agent_description(did, name, capabilities, interfaces, None).unwrap();
    let ad = sign_description(ad, &signing, &did.with_fragment("key-1"), clock).unwrap();

    let did_doc = build_did_document(
        did,
        std::slice::from_ref(&signing),
        Some(&human),
        std::slice::from_ref(&agreement),
        Some(&default_ad_url(did)),
    )
    .unwrap();

    (
        did_doc,
        ad,
        NodeKeys {
            signing,
            agreement,
            human: Some(human),
        },
    )
}

/// A node fixture for `domain` hosting its primary agent plus one extra
/// agent per entry in `extra_agents` (used as both the agent name and its
/// capability term). Interface endpoints point back at the same domain.
pub fn agent_fixture(domain: &str, extra_agents: &[&str]) -> AgentFixture {
    agent_fixture_linked(domain, extra_agents, domain)
}

/// Like [`agent_fixture`], but agent interfaces point at `link_domain`,
/// which is how crawlers hop between domains.
pub fn agent_fixture_linked(
    domain: &str,
    extra_agents: &[&str],
    link_domain: &str,
) -> AgentFixture {
    let clock = SimClock::new(SIM_EPOCH);
    let did = did_for_domain(domain);
    let label = domain
        .split(['.', ':'])
        .next()
        .unwrap_or(domain)
        .to_string();
    let (did_document, ad_document, keys) = build_signed_agent(
        &did,
        &format!("{label}-primary"),
        vec![Capability {
            name: "relay".to_string(),
            description: "text relay service".to_string(),
            kind: CapabilityKind::Service,
        }],
        link_domain,
        &clock,
    );

    let served_agents = extra_agents
        .iter()
        .map(|name| {
            let agent_did: DidId = format!("did:wba:{}:agents:{name}", domain.replace(':', "%3a"))
                .parse()
                .unwrap();
            let (did_doc, ad, _keys) = build_signed_agent(
                &agent_did,
                name,
                vec![Capability {
                    name: (*name).to_string(),
                    description: format!("{name} services"),
                    kind: CapabilityKind::Service,
                }],
                link_domain,
                &clock,
            );
            ServedAgent {
                did_document: did_doc,
                ad_document: ad,
            }
        })
        .collect();

    AgentFixture {
        config: NodeConfig {
            domain: domain.to_string(),
            did,
            key_store_path: None,
            did_document,
            ad_document,
            served_agents,
            page_size: 100,
            risk_table: Default::default(),
            index_enabled: false,
            refresh_interval: 0,
            listen_addr: None,
        },
        keys,
    }
}

/// Build a node from a fixture against a shared clock.
pub fn node_from(fixture: AgentFixture, clock: Arc<SimClock>) -> Node {
    Node::new(fixture.config, fixture.keys, clock).expect("fixture config is valid")
}

/// Convenience: the human-authorization key of a fixture.
pub fn human_key_of(fixture: &AgentFixture) -> KeyPair {
    fixture
        .keys
        .human
        .clone()
        .expect("fixtures carry a human key")
}
