//! Active discovery: crawl well-known directories, then walk the network by
//! harvesting domains from agent interface endpoints.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use crate::description::validate_agent_description;
use crate::wire::{HttpRequest, Transport};

use super::pages::{CollectionPage, WELL_KNOWN_PATH};

#[derive(Debug, Clone)]
pub struct CrawlLimits {
    /// Directory pages fetched per domain.
    pub max_pages: usize,
    /// Agent description documents collected across the whole crawl.
    pub max_agents: usize,
    pub timeout: Duration,
    /// Pause between requests to one domain; leave `None` in the sim.
    pub polite_delay: Option<Duration>,
}

impl Default for CrawlLimits {
    fn default() -> Self {
        Self {
            max_pages: 1_000,
            max_agents: 10_000,
            timeout: Duration::from_secs(30),
            polite_delay: None,
        }
    }
}

#[derive(Debug, Default)]
pub struct CrawlReport {
    pub domains_visited: usize,
    pub pages_fetched: usize,
    /// Discovered agent description URLs, in discovery order, duplicate-free.
    pub documents_found: Vec<String>,
    pub errors: Vec<(String, String)>,
}

struct Crawler<'a> {
    transport: &'a dyn Transport,
    limits: &'a CrawlLimits,
    deadline: Instant,
    report: CrawlReport,
    seen_documents: HashSet<String>,
}

impl<'a> Crawler<'a> {
    fn new(transport: &'a dyn Transport, limits: &'a CrawlLimits) -> Self {
        Self {
            transport,
            limits,
            deadline: Instant::now() + limits.timeout,
            report: CrawlReport::default(),
            seen_documents: HashSet::new(),
        }
    }

    fn out_of_budget(&self) -> bool {
        Instant::now() > self.deadline
            || self.report.documents_found.len() >= self.limits.max_agents
    }

    fn be_polite(&self) {
        if let Some(delay) = self.limits.polite_delay {
            std::thread::sleep(delay);
        }
    }

    fn fetch(&mut self, url: &str) -> Option<Vec<u8>> {
        self.be_polite();
        match self.transport.execute(HttpRequest::get(url)) {
            Ok(response) if response.is_success() => Some(response.body),
            Ok(response) => {
                self.report
                    .errors
                    .push((url.to_string(), format!("status {}", response.status)));
                None
            }
            Err(e) => {
                self.report.errors.push((url.to_string(), e.to_string()));
                None
            }
        }
    }

    /// Walk one domain's directory chain. Returns the AD URLs found there.
    fn crawl_directory(&mut self, domain: &str) -> Vec<String> {
        self.report.domains_visited += 1;
        let mut found = Vec::new();
        let mut visited_pages = HashSet::new();
        let mut next_url = format!("https://{domain}{WELL_KNOWN_PATH}");
        let mut pages_this_domain = 0;

        loop {
            if self.out_of_budget() || pages_this_domain >= self.limits.max_pages {
                break;
            }
            if !visited_pages.insert(next_url.clone()) {
                self.report
                    .errors
                    .push((next_url.clone(), "pagination cycle".to_string()));
                break;
            }
            let Some(body) = self.fetch(&next_url) else {
                break;
            };
            pages_this_domain += 1;
            self.report.pages_fetched += 1;

            let page: CollectionPage = match serde_json::from_slice(&body) {
                Ok(p) => p,
                Err(e) => {
                    self.report
                        .errors
                        .push((next_url.clone(), format!("bad page: {e}")));
                    break;
                }
            };
            for item in page.items {
                if self.report.documents_found.len() >= self.limits.max_agents {
                    break;
                }
                if self.seen_documents.insert(item.clone()) {
                    self.report.documents_found.push(item.clone());
                    found.push(item);
                }
            }
            match page.next {
                Some(next) if next.starts_with('/') => {
                    next_url = format!("https://{domain}{next}");
                }
                Some(next) => next_url = next,
                None => break,
            }
        }
        found
    }

    /// Fetch a discovered description and harvest the domains its interface
    /// endpoints point at.
    fn harvest_domains(&mut self, ad_url: &str) -> Vec<String> {
        let Some(body) = self.fetch(ad_url) else {
            return Vec::new();
        };
        let (doc, violations) = validate_agent_description(&body);
        let Some(doc) = doc else {
            let summary = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            self.report.errors.push((
                ad_url.to_string(),
                format!("invalid description: {summary}"),
            ));
            return Vec::new();
        };
        doc.interfaces
            .iter()
            .filter_map(|i| url::Url::parse(&i.endpoint).ok())
            .filter_map(|u| {
                u.host_str().map(|h| match u.port() {
                    Some(p) => format!("{h}:{p}"),
                    None => h.to_string(),
                })
            })
            .collect()
    }
}

/// Enumerate the agents of one domain by following its directory chain.
pub fn crawl_domain(domain: &str, transport: &dyn Transport, limits: &CrawlLimits) -> CrawlReport {
    let mut crawler = Crawler::new(transport, limits);
    crawler.crawl_directory(domain);
    crawler.report
}

/// Traverse the network level by level from seed domains. Every discovered
/// description is fetched once; domains harvested from its interface
/// endpoints join the frontier until limits bind.
pub fn crawl_network(
    seed_domains: &[String],
    transport: &dyn Transport,
    limits: &CrawlLimits,
) -> CrawlReport {
    let mut crawler = Crawler::new(transport, limits);
    let mut visited_domains: HashSet<String> = HashSet::new();
    let mut frontier: VecDeque<String> = seed_domains.iter().cloned().collect();

    while let Some(domain) = frontier.pop_front() {
        if !visited_domains.insert(domain.clone()) {
            continue;
        }
        if crawler.out_of_budget() {
            break;
        }
        let found = crawler.crawl_directory(&domain);
        for ad_url in found {
            for harvested in crawler.harvest_domains(&ad_url) {
                if !visited_domains.contains(&harvested) {
                    frontier.push_back(harvested);
                }
            }
        }
    }
    crawler.report
}
