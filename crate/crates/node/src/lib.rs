//! Agent Network Protocol reference node.
//!
//! Wires the `anp-core` protocol stack into a servable node: route handling
//! ([`service`]), configuration and key storage ([`config`], [`keystore`]),
//! protocol drivers ([`client`]), real HTTP adapters ([`http`]), the
//! in-memory simulated network ([`sim`]), and scripted end-to-end runs
//! ([`scenario`]).

pub mod client;
pub mod config;
pub mod disclosure;
pub mod http;
pub mod keystore;
pub mod scenario;
pub mod service;
pub mod sim;
pub mod testutil;

pub use client::{AgentClient, ClientError};
pub use config::{ConfigError, NodeConfig, NodeKeys, ServedAgent};
pub use scenario::{end_to_end_scenario, ScenarioReport, ScenarioStep, StepStatus};
pub use service::{Node, OutboundSlot};
pub use sim::{connect_network, MessageRecord, ProxyLog, RecordKind, SimNetwork};
