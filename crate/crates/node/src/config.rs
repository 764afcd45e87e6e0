//! Node configuration: the documents and policy one domain serves.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use anp_core::auth::RiskClass;
use anp_core::description::AdDocument;
use anp_core::identity::{validate_did_document, DidDocument, DidId, KeyPair};

/// An additional agent hosted on this node's domain. Its documents are
/// served for discovery; only agents with keys on this node can negotiate
/// or hold sessions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ServedAgent {
    pub did_document: DidDocument,
    pub ad_document: AdDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeConfig {
    /// Authority this node answers for, `host` or `host:port`.
    pub domain: String,
    pub did: DidId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_store_path: Option<PathBuf>,
    pub did_document: DidDocument,
    pub ad_document: AdDocument,
    #[serde(default)]
    pub served_agents: Vec<ServedAgent>,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    /// Route → risk class; routes absent from the table are low risk.
    #[serde(default)]
    pub risk_table: BTreeMap<String, RiskClass>,
    #[serde(default)]
    pub index_enabled: bool,
    /// Search-index re-crawl interval, seconds.
    #[serde(default = "default_refresh_interval")]
    pub refresh_interval: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listen_addr: Option<String>,
}

fn default_page_size() -> usize {
    100
}

fn default_refresh_interval() -> u64 {
    15 * 60
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config invalid: {0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
}

impl NodeConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read(path)?;
        let config: NodeConfig = serde_json::from_slice(&raw)?;
        config.validate()?;
        Ok(config)
    }

    /// Enforce the mutual bindings a node relies on: the DID lives on this
    /// domain, every DID document is structurally valid, and each DID
    /// document points at exactly the AD document served next to it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.page_size == 0 {
            return Err(ConfigError::Invalid(
                "pageSize must be at least 1".to_string(),
            ));
        }
        if self.did.authority() != self.domain {
            return Err(ConfigError::Invalid(format!(
                "did {} is not on domain {}",
                self.did, self.domain
            )));
        }
        let mut pairs: Vec<(&DidDocument, &AdDocument)> =
            vec![(&self.did_document, &self.ad_document)];
        pairs.extend(
            self.served_agents
                .iter()
                .map(|a| (&a.did_document, &a.ad_document)),
        );

        for (did_doc, ad_doc) in pairs {
            if did_doc.id.authority() != self.domain {
                return Err(ConfigError::Invalid(format!(
                    "agent {} is not on domain {}",
                    did_doc.id, self.domain
                )));
            }
            let violations = validate_did_document(did_doc);
            if !violations.is_empty() {
                return Err(ConfigError::Invalid(format!(
                    "did document {}: {}",
                    did_doc.id,
                    violations
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                )));
            }
            if ad_doc.did != did_doc.id {
                return Err(ConfigError::Invalid(format!(
                    "ad document {} describes {} but sits next to {}",
                    ad_doc.id, ad_doc.did, did_doc.id
                )));
            }
            match did_doc.agent_description_url() {
                Some(url) if url == ad_doc.id => {}
                Some(url) => {
                    return Err(ConfigError::Invalid(format!(
                        "did document {} advertises {} but the served ad document is {}",
                        did_doc.id, url, ad_doc.id
                    )));
                }
                None => {
                    return Err(ConfigError::Invalid(format!(
                        "did document {} lacks an AgentDescription service entry",
                        did_doc.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Secret keys a node operates with. Loaded from the key store in live mode,
/// injected directly in the sim.
#[derive(Clone)]
pub struct NodeKeys {
    /// Routine Ed25519 key referenced under `authentication`.
    pub signing: KeyPair,
    /// X25519 key referenced under `keyAgreement`.
    pub agreement: KeyPair,
    /// Ed25519 key referenced under `humanAuthorization`, when provisioned.
    pub human: Option<KeyPair>,
}
