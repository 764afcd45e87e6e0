//! Agent discovery: well-known directories, crawling, and the search index.
//!
//! Active discovery serves and crawls paginated `CollectionPage` directories
//! at `/.well-known/agent-descriptions`; knowing a domain is enough to
//! enumerate its agents and, by harvesting interface endpoints, to walk the
//! network level by level. Passive discovery is a registration API plus a
//! periodic re-crawl that keeps a searchable index fresh.

mod crawl;
mod index;
mod pages;

pub use crawl::{crawl_domain, crawl_network, CrawlLimits, CrawlReport};
pub use index::{
    register, tokenize, IndexEntry, RefreshReport, RegisterOutcome, Registration,
    RegistrationStatus, SearchIndex,
};
pub use pages::{build_collection_pages, CollectionPage, PageError, WELL_KNOWN_PATH};
