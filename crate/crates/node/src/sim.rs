//! In-memory multi-node network with HTTP semantics.
//!
//! Requests carry the same method, URL, headers and body as over sockets;
//! the only thing missing is the socket. Every exchange is logged (request
//! and response separately), and proxies can be inserted between node pairs
//! to record the exact bytes a forwarder would observe — the vantage point
//! the proxy-opacity checks measure from.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use anp_core::time::SimClock;
use anp_core::wire::{HttpRequest, HttpResponse, Transport, TransportError};

use crate::service::Node;

/// Sim time starts here; an arbitrary fixed epoch keeps runs reproducible.
pub const SIM_EPOCH: u64 = 1_700_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Request,
    Response,
}

#[derive(Debug, Clone)]
pub struct MessageRecord {
    pub from: String,
    pub to: String,
    pub route: String,
    pub bytes: usize,
    pub kind: RecordKind,
}

impl MessageRecord {
    /// DID-document fetches are resolution traffic, accounted separately
    /// from protocol messages.
    pub fn is_resolution(&self) -> bool {
        self.route.ends_with("/did.json")
    }
}

/// Bytes observed by a forwarding hop between two hosts.
#[derive(Clone, Default)]
pub struct ProxyLog {
    observed: Arc<Mutex<Vec<Vec<u8>>>>,
}

impl ProxyLog {
    pub fn observed(&self) -> Vec<Vec<u8>> {
        self.observed.lock().unwrap().clone()
    }

    pub fn total_bytes(&self) -> usize {
        self.observed.lock().unwrap().iter().map(Vec::len).sum()
    }

    fn record(&self, bytes: &[u8]) {
        self.observed.lock().unwrap().push(bytes.to_vec());
    }
}

struct ProxyHop {
    a: String,
    b: String,
    log: ProxyLog,
}

struct SimInner {
    nodes: HashMap<String, Arc<Node>>,
    log: Mutex<Vec<MessageRecord>>,
    proxies: RwLock<Vec<ProxyHop>>,
    clock: Arc<SimClock>,
}

#[derive(Clone)]
pub struct SimNetwork {
    inner: Arc<SimInner>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("duplicate hostname: {0}")]
    DuplicateHostname(String),
}

/// Build the network: every node reaches every other by hostname, and all
/// outbound slots point back into the network. `clock` must be the clock
/// the nodes were built with.
pub fn connect_network(
    nodes: Vec<Node>,
    proxies: &[(&str, &str)],
    clock: Arc<SimClock>,
) -> Result<SimNetwork, SimError> {
    let mut map = HashMap::new();
    for node in nodes {
        let domain = node.domain().to_string();
        if map.contains_key(&domain) {
            return Err(SimError::DuplicateHostname(domain));
        }
        map.insert(domain, Arc::new(node));
    }
    let inner = Arc::new(SimInner {
        nodes: map,
        log: Mutex::new(Vec::new()),
        proxies: RwLock::new(
            proxies
                .iter()
                .map(|(a, b)| ProxyHop {
                    a: a.to_string(),
                    b: b.to_string(),
                    log: ProxyLog::default(),
                })
                .collect(),
        ),
        clock,
    });
    let net = SimNetwork { inner };
    for (domain, node) in &net.inner.nodes {
        node.outbound_slot().set(Arc::new(SimClient {
            inner: net.inner.clone(),
            from: domain.clone(),
        }));
    }
    Ok(net)
}

impl SimNetwork {
    /// Shared controllable clock. Nodes must be built against this same
    /// clock; see `testutil`.
    pub fn clock(&self) -> Arc<SimClock> {
        self.inner.clock.clone()
    }

    pub fn node(&self, hostname: &str) -> Option<Arc<Node>> {
        self.inner.nodes.get(hostname).cloned()
    }

    pub fn hostnames(&self) -> Vec<String> {
        let mut names: Vec<String> = self.inner.nodes.keys().cloned().collect();
        names.sort();
        names
    }

    /// Transport handle for an agent (or an external operator) at `from`.
    pub fn client(&self, from: &str) -> SimClient {
        SimClient {
            inner: self.inner.clone(),
            from: from.to_string(),
        }
    }

    pub fn add_proxy(&self, a: &str, b: &str) -> ProxyLog {
        let log = ProxyLog::default();
        self.inner.proxies.write().unwrap().push(ProxyHop {
            a: a.to_string(),
            b: b.to_string(),
            log: log.clone(),
        });
        log
    }

    pub fn proxy_log(&self, a: &str, b: &str) -> Option<ProxyLog> {
        self.inner
            .proxies
            .read()
            .unwrap()
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .map(|p| p.log.clone())
    }

    pub fn message_log(&self) -> Vec<MessageRecord> {
        self.inner.log.lock().unwrap().clone()
    }

    pub fn clear_log(&self) {
        self.inner.log.lock().unwrap().clear();
    }

    /// Protocol messages (excluding DID resolution) exchanged between two
    /// endpoints, requests and responses both counted.
    pub fn exchanges_between(&self, a: &str, b: &str) -> usize {
        self.message_log()
            .iter()
            .filter(|r| {
                !r.is_resolution() && ((r.from == a && r.to == b) || (r.from == b && r.to == a))
            })
            .count()
    }

    /// DID-document fetch requests observed on the network.
    pub fn resolution_count(&self) -> usize {
        self.message_log()
            .iter()
            .filter(|r| r.kind == RecordKind::Request && r.is_resolution())
            .count()
    }

    /// Oracle for discovery tests: every AD URL served by any node.
    pub fn all_served_ad_urls(&self) -> Vec<String> {
        let mut urls: Vec<String> = self
            .inner
            .nodes
            .values()
            .flat_map(|n| n.served_ad_urls())
            .collect();
        urls.sort();
        urls
    }
}

/// Transport into the network from a named endpoint.
#[derive(Clone)]
pub struct SimClient {
    inner: Arc<SimInner>,
    from: String,
}

impl Transport for SimClient {
    fn execute(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let url =
            url::Url::parse(&request.url).map_err(|e| TransportError::InvalidUrl(e.to_string()))?;
        let host = url
            .host_str()
            .ok_or_else(|| TransportError::InvalidUrl("no host".to_string()))?;
        let authority = match url.port() {
            Some(p) => format!("{host}:{p}"),
            None => host.to_string(),
        };
        let node = self
            .inner
            .nodes
            .get(&authority)
            .ok_or_else(|| TransportError::UnknownHost(authority.clone()))?
            .clone();
        let route = url.path().to_string();

        self.inner.log.lock().unwrap().push(MessageRecord {
            from: self.from.clone(),
            to: authority.clone(),
            route: route.clone(),
            bytes: request.body.len(),
            kind: RecordKind::Request,
        });
        for proxy in self.inner.proxies.read().unwrap().iter() {
            if (proxy.a == self.from && proxy.b == authority)
                || (proxy.a == authority && proxy.b == self.from)
            {
                proxy.log.record(&request.body);
            }
        }

        let response = node.handle_request(&request);

        self.inner.log.lock().unwrap().push(MessageRecord {
            from: authority.clone(),
            to: self.from.clone(),
            route,
            bytes: response.body.len(),
            kind: RecordKind::Response,
        });
        for proxy in self.inner.proxies.read().unwrap().iter() {
            if (proxy.a == self.from && proxy.b == authority)
                || (proxy.a == authority && proxy.b == self.from)
            {
                proxy.log.record(&response.body);
            }
        }
        Ok(response)
    }
}
