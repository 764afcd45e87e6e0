//! `anp` — operator CLI for the Agent Network Protocol node.
//!
//! Exit codes: 0 success, 1 protocol failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use anp_core::description::{
    build_agent_description, default_ad_url, sign_description, validate_agent_description,
    Capability, CapabilityKind, Contact, InterfaceDecl,
};
use anp_core::discovery::{crawl_network, CrawlLimits, RegisterOutcome};
use anp_core::identity::{
    build_did_document, generate_keypair_named, multibase_encode, parse_did, Algorithm, DidId,
    KeyClass, KeyPair,
};
use anp_core::metaproto::{
    echo_descriptor, reverse_descriptor, CapabilitySet, HandlerRegistry, NegotiationCache,
    Requirement,
};
use anp_core::time::SystemClock;
use anp_core::wire::{HttpRequest, Transport};

use anp_node::client::AgentClient;
use anp_node::config::NodeConfig;
use anp_node::http::{serve_http, LiveTransport};
use anp_node::keystore::{KeyStore, PASSPHRASE_ENV};
use anp_node::service::Node;

#[derive(Parser)]
#[command(
    name = "anp",
    version,
    about = "Agent Network Protocol node operator tool"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair into the key store.
    Keygen {
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        /// ed25519 (signing) or x25519 (key agreement).
        #[arg(long, default_value = "ed25519")]
        algorithm: String,
        /// routine or human-authorization.
        #[arg(long, default_value = "routine")]
        class: String,
        #[arg(long)]
        key_id: Option<String>,
    },
    /// DID document operations.
    #[command(subcommand)]
    Did(DidCommand),
    /// Agent description operations.
    #[command(subcommand)]
    Ad(AdCommand),
    /// Serve a node over HTTP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Listen address; overrides the config's listenAddr.
        #[arg(long)]
        addr: Option<String>,
        /// Let the node's own outbound calls (DID resolution, index
        /// crawling) use plain HTTP toward loopback targets.
        #[arg(long)]
        insecure_http: bool,
    },
    /// Crawl the agent network starting from a domain.
    Crawl {
        domain: String,
        #[arg(long)]
        max_agents: Option<usize>,
        /// Allow plain HTTP for loopback targets (local demos).
        #[arg(long)]
        insecure_http: bool,
    },
    /// Register an AD URL with a search-service node.
    Register {
        index_url: String,
        ad_url: String,
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        #[arg(long)]
        did: String,
        #[arg(long)]
        insecure_http: bool,
    },
    /// Query a search-service node.
    Search {
        index_url: String,
        terms: Vec<String>,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        #[arg(long)]
        did: String,
        #[arg(long)]
        insecure_http: bool,
    },
    /// Negotiate a protocol with a peer agent given its AD URL.
    Negotiate {
        peer_ad_url: String,
        /// JSON file with {"description", "inputs", "expectedOutputs"}.
        #[arg(long)]
        requirement: PathBuf,
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        #[arg(long)]
        did: String,
        #[arg(long)]
        insecure_http: bool,
    },
    /// Send an end-to-end encrypted message to a peer DID.
    Send {
        peer_did: String,
        #[arg(long)]
        message: PathBuf,
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        #[arg(long)]
        did: String,
        #[arg(long)]
        insecure_http: bool,
    },
}

#[derive(Subcommand)]
enum DidCommand {
    /// Build a DID document from the key store.
    Init {
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        #[arg(long)]
        domain: String,
        /// Path segments after the domain, repeatable.
        #[arg(long = "path")]
        paths: Vec<String>,
        /// Agent description URL to advertise (defaults to the conventional
        /// URL for the DID).
        #[arg(long)]
        ad_url: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a DID document: from a local file, or fetched from a DID.
    Show {
        target: String,
        #[arg(long)]
        insecure_http: bool,
    },
}

#[derive(Subcommand)]
enum AdCommand {
    /// Build an unsigned agent description.
    Build {
        #[arg(long)]
        did: String,
        #[arg(long)]
        name: String,
        /// NAME:KIND:DESCRIPTION with KIND one of information|service|tool.
        #[arg(long = "capability")]
        capabilities: Vec<String>,
        /// PROTOCOL:VERSION:ENDPOINT
        #[arg(long = "interface")]
        interfaces: Vec<String>,
        #[arg(long)]
        owner: Option<String>,
        #[arg(long)]
        contact_email: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign an agent description with a key from the store.
    Sign {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "./anp-keys")]
        keystore: PathBuf,
        /// Verification method id, e.g. did:wba:example.com#key-1.
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate an agent description file.
    Validate { file: PathBuf },
}

/// Protocol-level failure: exit code 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn passphrase() -> Result<String, Failure> {
    std::env::var(PASSPHRASE_ENV)
        .map_err(|_| Failure(format!("set {PASSPHRASE_ENV} to unlock the key store")))
}

fn write_or_print(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{}", String::from_utf8_lossy(bytes)),
    }
    Ok(())
}

fn live_client(keystore: &PathBuf, did: &str, insecure_http: bool) -> Result<AgentClient, Failure> {
    let did: DidId = parse_did(did)?;
    let store = KeyStore::open(keystore);
    let keys = store.load_node_keys(&passphrase()?)?;
    let identity = anp_core::e2e::E2eIdentity {
        did,
        signing_key: keys.signing,
        agreement_key: keys.agreement,
    };
    Ok(AgentClient::new(
        identity,
        keys.human,
        Arc::new(LiveTransport::new(insecure_http)),
        Arc::new(SystemClock),
    ))
}

fn authority_of(url: &str) -> Result<String, Failure> {
    let parsed = url::Url::parse(url)?;
    let host = parsed
        .host_str()
        .ok_or(Failure("url has no host".to_string()))?;
    Ok(match parsed.port() {
        Some(p) => format!("{host}:{p}"),
        None => host.to_string(),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Keygen {
            keystore,
            algorithm,
            class,
            key_id,
        } => {
            let class = match class.as_str() {
                "routine" => KeyClass::Routine,
                "human-authorization" | "human" => KeyClass::HumanAuthorization,
                other => return Err(Failure(format!("unknown key class {other}"))),
            };
            let key_id = key_id.unwrap_or_else(|| match (algorithm.as_str(), class) {
                ("x25519", _) => "agree-1".to_string(),
                (_, KeyClass::HumanAuthorization) => "human-1".to_string(),
                _ => "key-1".to_string(),
            });
            let key = generate_keypair_named(&algorithm, class, &key_id)?;
            KeyStore::open(&keystore).add_key(&key, &passphrase()?)?;
            println!(
                "{} {} {}",
                key.key_id,
                key.algorithm.name(),
                multibase_encode(&key.public_key)
            );
            Ok(())
        }

        Command::Did(DidCommand::Init {
            keystore,
            domain,
            paths,
            ad_url,
            out,
        }) => {
            let did = DidId::new(domain.replace(':', "%3a"), paths)?;
            let keys = KeyStore::open(&keystore).load_keys(&passphrase()?)?;
            let routine: Vec<KeyPair> = keys
                .iter()
                .filter(|k| k.algorithm == Algorithm::Ed25519 && k.key_class() == KeyClass::Routine)
                .cloned()
                .collect();
            let human = keys
                .iter()
                .find(|k| k.key_class() == KeyClass::HumanAuthorization);
            let agreement: Vec<KeyPair> = keys
                .iter()
                .filter(|k| k.algorithm == Algorithm::X25519)
                .cloned()
                .collect();
            let ad_url = ad_url.unwrap_or_else(|| default_ad_url(&did));
            let doc = build_did_document(&did, &routine, human, &agreement, Some(&ad_url))?;
            write_or_print(out.as_ref(), &doc.to_canonical_json())
        }

        Command::Did(DidCommand::Show {
            target,
            insecure_http,
        }) => {
            let bytes = if std::path::Path::new(&target).exists() {
                std::fs::read(&target)?
            } else {
                let did = parse_did(&target)?;
                let transport = LiveTransport::new(insecure_http);
                let response = transport.execute(HttpRequest::get(did.to_https_url()))?;
                if !response.is_success() {
                    return Err(Failure(format!(
                        "fetch returned status {}",
                        response.status
                    )));
                }
                response.body
            };
            let value: serde_json::Value = serde_json::from_slice(&bytes)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(())
        }

        Command::Ad(AdCommand::Build {
            did,
            name,
            capabilities,
            interfaces,
            owner,
            contact_email,
            out,
        }) => {
            let did = parse_did(&did)?;
            let capabilities = capabilities
                .iter()
                .map(|spec| {
                    let mut parts = spec.splitn(3, ':');
                    let name = parts.next().unwrap_or_default().to_string();
                    let kind = match parts.next().unwrap_or("service") {
                        "information" => CapabilityKind::Information,
                        "tool" => CapabilityKind::Tool,
                        _ => CapabilityKind::Service,
                    };
                    let description = parts.next().unwrap_or_default().to_string();
                    Capability {
                        name,
                        description,
                        kind,
                    }
                })
                .collect();
            let interfaces = interfaces
                .iter()
                .map(|spec| {
                    let mut parts = spec.splitn(3, ':');
                    let protocol = parts.next().unwrap_or_default().to_string();
                    let version = parts.next().unwrap_or("1.0").to_string();
                    let endpoint = parts.next().unwrap_or_default().to_string();
                    InterfaceDecl {
                        protocol,
                        endpoint,
                        version,
                        input_description: None,
                        output_description: None,
                    }
                })
                .collect();
            let contact = contact_email.map(|email| Contact {
                email: Some(email),
                url: None,
            });
            let mut doc = build_agent_description(&did, &name, capabilities, interfaces, contact)?;
            doc.owner = owner;
            write_or_print(out.as_ref(), &serde_json::to_vec_pretty(&doc)?)
        }

        Command::Ad(AdCommand::Sign {
            input,
            keystore,
            method,
            out,
        }) => {
            let raw = std::fs::read(&input)?;
            let (doc, violations) = validate_agent_description(&raw);
            let Some(doc) = doc else {
                return Err(Failure(format!(
                    "input does not validate: {}",
                    violations
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                )));
            };
            let fragment = method.rsplit_once('#').map(|(_, f)| f).unwrap_or(&method);
            let keys = KeyStore::open(&keystore).load_keys(&passphrase()?)?;
            let key = keys
                .iter()
                .find(|k| k.key_id == fragment)
                .ok_or_else(|| Failure(format!("no key {fragment} in store")))?;
            let signed = sign_description(doc, key, &method, &SystemClock)?;
            write_or_print(out.as_ref(), &serde_json::to_vec_pretty(&signed)?)
        }

        Command::Ad(AdCommand::Validate { file }) => {
            let raw = std::fs::read(&file)?;
            let (doc, violations) = validate_agent_description(&raw);
            if doc.is_some() {
                println!("valid");
                Ok(())
            } else {
                for violation in &violations {
                    println!("violation: {violation}");
                }
                Err(Failure(format!("{} violation(s)", violations.len())))
            }
        }

        Command::Serve {
            config,
            addr,
            insecure_http,
        } => {
            let config = NodeConfig::load(&config)?;
            let addr = addr
                .or_else(|| config.listen_addr.clone())
                .unwrap_or_else(|| "127.0.0.1:8642".to_string());
            let store_path = config
                .key_store_path
                .clone()
                .ok_or(Failure("config lacks keyStorePath".to_string()))?;
            let keys = KeyStore::open(&store_path).load_node_keys(&passphrase()?)?;
            let refresh_secs = config.refresh_interval;
            let index_enabled = config.index_enabled;
            let node = Arc::new(Node::new(config, keys, Arc::new(SystemClock))?);
            node.outbound_slot()
                .set(Arc::new(LiveTransport::new(insecure_http)));
            let handle = serve_http(node.clone(), &addr)?;
            eprintln!("serving {} on {}", node.did(), handle.addr());

            if index_enabled && refresh_secs > 0 {
                let refresher = node.clone();
                std::thread::spawn(move || loop {
                    std::thread::sleep(std::time::Duration::from_secs(refresh_secs));
                    if let Some(report) = refresher.refresh_index() {
                        if !report.failed.is_empty() {
                            eprintln!("index refresh failures: {:?}", report.failed);
                        }
                    }
                });
            }

            // Serve until interrupted.
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }

        Command::Crawl {
            domain,
            max_agents,
            insecure_http,
        } => {
            let transport = LiveTransport::new(insecure_http);
            let mut limits = CrawlLimits {
                polite_delay: Some(std::time::Duration::from_secs(1)),
                ..CrawlLimits::default()
            };
            if let Some(max) = max_agents {
                limits.max_agents = max;
            }
            if insecure_http {
                limits.polite_delay = None; // loopback demos need no pacing
            }
            let report = crawl_network(&[domain], &transport, &limits);
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "domainsVisited": report.domains_visited,
                    "pagesFetched": report.pages_fetched,
                    "documentsFound": report.documents_found,
                    "errors": report.errors.iter().map(|(u, e)| serde_json::json!({"url": u, "error": e})).collect::<Vec<_>>(),
                }))?
            );
            if report.documents_found.is_empty() {
                return Err(Failure("no agents discovered".to_string()));
            }
            Ok(())
        }

        Command::Register {
            index_url,
            ad_url,
            keystore,
            did,
            insecure_http,
        } => {
            let client = live_client(&keystore, &did, insecure_http)?;
            let authority = authority_of(&index_url)?;
            match client.register_with_index(&authority, &ad_url) {
                RegisterOutcome::Accepted => {
                    println!("registered");
                    Ok(())
                }
                other => Err(Failure(format!("{other:?}"))),
            }
        }

        Command::Search {
            index_url,
            terms,
            limit,
            keystore,
            did,
            insecure_http,
        } => {
            let client = live_client(&keystore, &did, insecure_http)?;
            let authority = authority_of(&index_url)?;
            let results = client.search(&authority, &terms, limit)?;
            for (ad_url, score) in &results {
                println!("{score}\t{ad_url}");
            }
            if results.is_empty() {
                return Err(Failure("no results".to_string()));
            }
            Ok(())
        }

        Command::Negotiate {
            peer_ad_url,
            requirement,
            keystore,
            did,
            insecure_http,
        } => {
            let client = live_client(&keystore, &did, insecure_http)?;
            let requirement: Requirement = serde_json::from_slice(&std::fs::read(&requirement)?)?;
            let peer_ad = client.fetch_and_verify_ad(&peer_ad_url)?;
            let authority = peer_ad.did.authority();

            let candidates = vec![echo_descriptor(), reverse_descriptor()];
            let capabilities = CapabilitySet::new(candidates.clone());
            let handlers = HandlerRegistry::standard();
            let cache = NegotiationCache::new();
            let session = client.negotiate(
                &authority,
                requirement,
                candidates,
                &capabilities,
                &handlers,
                &cache,
            )?;
            if session.is_live() {
                println!("live {}", session.agreed.unwrap_or_default());
                Ok(())
            } else {
                Err(Failure(format!("negotiation ended {:?}", session.phase)))
            }
        }

        Command::Send {
            peer_did,
            message,
            keystore,
            did,
            insecure_http,
        } => {
            let client = live_client(&keystore, &did, insecure_http)?;
            let peer = parse_did(&peer_did)?;
            let payload = std::fs::read(&message)?;
            let mut session = client.handshake(&peer)?;
            let sequence = client.send_envelope(&mut session, &payload, None)?;
            println!("delivered sequence {sequence}");
            Ok(())
        }
    }
}
