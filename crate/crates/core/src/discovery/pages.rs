//! Paginated directory documents served at the well-known path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default directory path under every participating domain.
pub const WELL_KNOWN_PATH: &str = "/.well-known/agent-descriptions";

/// One page of a domain's agent directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionPage {
    #[serde(rename = "@context")]
    pub context: Vec<String>,
    #[serde(rename = "type")]
    pub page_type: String,
    /// URLs of agent description documents, in directory order.
    pub items: Vec<String>,
    /// URL of the following page; absent on the final page.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<u64>,
}

pub const COLLECTION_PAGE_TYPE: &str = "CollectionPage";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PageError {
    #[error("page size must be at least 1")]
    ZeroPageSize,
}

/// Split an ordered URL list into chained pages. Page `i > 0` is addressed as
/// `<base_url>?page=<i>`; an empty directory still produces one (empty) page.
pub fn build_collection_pages(
    ad_urls: &[String],
    page_size: usize,
    base_url: &str,
) -> Result<Vec<CollectionPage>, PageError> {
    if page_size == 0 {
        return Err(PageError::ZeroPageSize);
    }
    let total = ad_urls.len() as u64;
    let context = vec![crate::description::SCHEMA_ORG_CONTEXT.to_string()];

    if ad_urls.is_empty() {
        return Ok(vec![CollectionPage {
            context,
            page_type: COLLECTION_PAGE_TYPE.to_string(),
            items: Vec::new(),
            next: None,
            total: Some(0),
        }]);
    }

    let chunks: Vec<&[String]> = ad_urls.chunks(page_size).collect();
    let count = chunks.len();
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, chunk)| CollectionPage {
            context: context.clone(),
            page_type: COLLECTION_PAGE_TYPE.to_string(),
            items: chunk.to_vec(),
            next: (i + 1 < count).then(|| format!("{base_url}?page={}", i + 1)),
            total: Some(total),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn urls(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| format!("https://example.com/agents/a{i}/ad.json"))
            .collect()
    }

    const BASE: &str = "https://example.com/.well-known/agent-descriptions";

    #[test]
    fn five_urls_page_size_two() {
        let pages = build_collection_pages(&urls(5), 2, BASE).unwrap();
        assert_eq!(pages.len(), 3);
        assert_eq!(pages[0].items.len(), 2);
        assert_eq!(pages[1].items.len(), 2);
        assert_eq!(pages[2].items.len(), 1);
        assert_eq!(
            pages[0].next.as_deref(),
            Some(&format!("{BASE}?page=1")[..])
        );
        assert_eq!(
            pages[1].next.as_deref(),
            Some(&format!("{BASE}?page=2")[..])
        );
        assert_eq!(pages[2].next, None);
        let flattened: Vec<String> = pages.iter().flat_map(|p| p.items.clone()).collect();
        assert_eq!(flattened, urls(5));
    }

    #[test]
    fn empty_directory_is_one_empty_page() {
        let pages = build_collection_pages(&[], 10, BASE).unwrap();
        assert_eq!(pages.len(), 1);
        assert!(pages[0].items.is_empty());
        assert_eq!(pages[0].next, None);
        assert_eq!(pages[0].total, Some(0));
    }

    #[test]
    fn single_page_when_everything_fits() {
        let pages = build_collection_pages(&urls(2), 10, BASE).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(pages[0].next, None);
    }

    #[test]
    fn zero_page_size_is_rejected() {
        assert_eq!(
            build_collection_pages(&urls(1), 0, BASE).unwrap_err(),
            PageError::ZeroPageSize
        );
    }

    #[test]
    fn wire_format() {
        let pages = build_collection_pages(&urls(3), 2, BASE).unwrap();
        let value = serde_json::to_value(&pages[0]).unwrap();
        assert_eq!(value["type"], "CollectionPage");
        assert!(value["@context"].is_array());
        assert!(value["next"].is_string());
        let parsed: CollectionPage = serde_json::from_value(value).unwrap();
        assert_eq!(parsed, pages[0]);
    }
}
