//! Real transports: an HTTP server adapter over `handle_request` and a
//! blocking HTTP client for live mode.
//!
//! TLS termination is assumed to happen in front of the node; the listener
//! speaks plain HTTP. For local demos, the client can rewrite `https` to
//! `http` for loopback targets.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use anp_core::wire::{HttpRequest, HttpResponse, Transport, TransportError};

use crate::service::Node;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("bind failure: {0}")]
    Bind(String),
}

pub struct HttpHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    workers: Vec<std::thread::JoinHandle<()>>,
}

impl HttpHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for join in self.workers.drain(..) {
            let _ = join.join();
        }
    }
}

impl Drop for HttpHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Worker threads per listener. A node may call itself while serving (its
/// resolver fetching a DID document it also hosts), so one thread would
/// deadlock.
const HTTP_WORKERS: usize = 4;

/// Serve a node over HTTP until the handle is stopped or dropped.
pub fn serve_http(node: Arc<Node>, addr: &str) -> Result<HttpHandle, ServeError> {
    let server =
        Arc::new(tiny_http::Server::http(addr).map_err(|e| ServeError::Bind(e.to_string()))?);
    let addr = match server.server_addr() {
        tiny_http::ListenAddr::IP(ip) => ip,
        other => return Err(ServeError::Bind(format!("unsupported listener {other:?}"))),
    };
    let stop = Arc::new(AtomicBool::new(false));

    let workers = (0..HTTP_WORKERS)
        .map(|_| {
            let server = server.clone();
            let stop = stop.clone();
            let node = node.clone();
            let domain = node.domain().to_string();
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match server.recv_timeout(Duration::from_millis(100)) {
                        Ok(Some(mut incoming)) => {
                            let mut body = Vec::new();
                            let _ = incoming.as_reader().read_to_end(&mut body);
                            let host = incoming
                                .headers()
                                .iter()
                                .find(|h| h.field.equiv("Host"))
                                .map(|h| h.value.to_string())
                                .unwrap_or_else(|| domain.clone());
                            let request = HttpRequest {
                                method: incoming.method().to_string(),
                                // Reconstruct with https scheme: signatures
                                // cover the canonical URL, and TLS sits in
                                // front of the node.
                                url: format!("https://{host}{}", incoming.url()),
                                headers: incoming
                                    .headers()
                                    .iter()
                                    .map(|h| (h.field.to_string(), h.value.to_string()))
                                    .collect(),
                                body,
                            };
                            let response = node.handle_request(&request);
                            let mut out = tiny_http::Response::from_data(response.body)
                                .with_status_code(response.status);
                            for (name, value) in response.headers {
                                if let Ok(header) =
                                    tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes())
                                {
                                    out = out.with_header(header);
                                }
                            }
                            let _ = incoming.respond(out);
                        }
                        Ok(None) => {}
                        Err(_) => break,
                    }
                }
            })
        })
        .collect();

    Ok(HttpHandle {
        addr,
        stop,
        workers,
    })
}

/// Blocking HTTP client. With `insecure_http`, `https` URLs addressed to
/// loopback hosts are fetched over plain HTTP so local demos work without
/// certificates.
pub struct LiveTransport {
    agent: ureq::Agent,
    insecure_http: bool,
}

impl LiveTransport {
    pub fn new(insecure_http: bool) -> Self {
        Self {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(15))
                .build(),
            insecure_http,
        }
    }

    fn effective_url(&self, url: &str) -> String {
        if !self.insecure_http {
            return url.to_string();
        }
        let Ok(parsed) = url::Url::parse(url) else {
            return url.to_string();
        };
        let loopback = matches!(parsed.host_str(), Some("localhost") | Some("127.0.0.1"));
        if parsed.scheme() == "https" && loopback {
            url.replacen("https://", "http://", 1)
        } else {
            url.to_string()
        }
    }
}

impl Transport for LiveTransport {
    fn execute(&self, request: HttpRequest) -> Result<HttpResponse, TransportError> {
        let url = self.effective_url(&request.url);
        let mut call = self.agent.request(&request.method, &url);
        for (name, value) in &request.headers {
            call = call.set(name, value);
        }
        let result = if request.body.is_empty() && request.method == "GET" {
            call.call()
        } else {
            call.send_bytes(&request.body)
        };
        let response = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(TransportError::Io(e.to_string())),
        };
        let status = response.status();
        let headers: Vec<(String, String)> = response
            .headers_names()
            .iter()
            .filter_map(|name| {
                response
                    .header(name)
                    .map(|value| (name.clone(), value.to_string()))
            })
            .collect();
        let mut body = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut body)
            .map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(HttpResponse {
            status,
            headers,
            body,
        })
    }
}
