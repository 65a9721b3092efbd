//! Registry gateway: batched identifier resolution, bibliographic search,
//! and the local retraction snapshot.

pub mod ratelimit;
pub mod replay;
pub mod retraction;
pub mod sim;
pub mod transport;
pub mod upstream;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identifiers::{ArxivId, Doi, IdentifierKind, IdentifierSet, Isbn, Lccn, Pmid};
use crate::manuscript::names::PersonName;
use crate::manuscript::BibliographyEntry;

use ratelimit::{Clock, RateLimiter, RetryPolicy, SystemClock, DEFAULT_REQUESTS_PER_SECOND};
use transport::{HttpRequest, HttpResponse, Transport, TransportError};
use upstream::{Endpoints, ParseError};

pub const OPENALEX_BATCH_SIZE: usize = 200;
pub const S2_BATCH_SIZE: usize = 500;
pub const DEFAULT_PARALLELISM: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetractionKind {
    #[default]
    None,
    ExpressionOfConcern,
    Retracted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetractionStatus {
    pub kind: RetractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl RetractionStatus {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn retracted(notice_date: Option<NaiveDate>, reason: Option<String>) -> Self {
        Self {
            kind: RetractionKind::Retracted,
            notice_date,
            reason,
        }
    }

    pub fn expression_of_concern(notice_date: Option<NaiveDate>, reason: Option<String>) -> Self {
        Self {
            kind: RetractionKind::ExpressionOfConcern,
            notice_date,
            reason,
        }
    }

    pub fn is_retracted(&self) -> bool {
        self.kind == RetractionKind::Retracted
    }

    /// Keep the more severe of two statuses.
    pub fn merge(&mut self, other: &RetractionStatus) {
        let rank = |k: RetractionKind| match k {
            RetractionKind::None => 0,
            RetractionKind::ExpressionOfConcern => 1,
            RetractionKind::Retracted => 2,
        };
        if rank(other.kind) > rank(self.kind) {
            *self = other.clone();
        } else if other.kind == self.kind {
            if self.notice_date.is_none() {
                self.notice_date = other.notice_date;
            }
            if self.reason.is_none() {
                self.reason.clone_from(&other.reason);
            }
        }
    }
}

/// A work as described by a registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub source: String,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<PersonName>,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub venue: Option<String>,
    #[serde(default)]
    pub identifiers: IdentifierSet,
    #[serde(default)]
    pub retraction: RetractionStatus,
    #[serde(default)]
    pub work_type: Option<String>,
}

/// Outcome of resolving one identifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Found(CanonicalRecord),
    NotFound,
    /// The registry could not answer; the identifier is unverifiable, not absent.
    Failed(String),
}

/// Identifiers resolved outside OpenAlex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExternalId {
    Arxiv(ArxivId),
    Pmid(Pmid),
    Isbn(Isbn),
    Lccn(Lccn),
}

impl ExternalId {
    pub fn kind(&self) -> IdentifierKind {
        match self {
            ExternalId::Arxiv(_) => IdentifierKind::Arxiv,
            ExternalId::Pmid(_) => IdentifierKind::Pmid,
            ExternalId::Isbn(_) => IdentifierKind::Isbn,
            ExternalId::Lccn(_) => IdentifierKind::Lccn,
        }
    }

    /// All non-DOI identifiers in a set.
    pub fn from_set(ids: &IdentifierSet) -> Vec<ExternalId> {
        let mut v = Vec::new();
        if let Some(a) = &ids.arxiv {
            v.push(ExternalId::Arxiv(ArxivId {
                id: a.id.clone(),
                version: None,
            }));
        }
        if let Some(p) = &ids.pmid {
            v.push(ExternalId::Pmid(p.clone()));
        }
        if let Some(i) = &ids.isbn {
            v.push(ExternalId::Isbn(i.clone()));
        }
        if let Some(l) = &ids.lccn {
            v.push(ExternalId::Lccn(l.clone()));
        }
        v
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("entry `{key}` has no title to search for")]
    MissingTitle { key: String },
    #[error("search failed: {0}")]
    SearchFailed(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub requests_per_second: f64,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub endpoints: Endpoints,
    /// Contact address sent to registries that ask for one.
    pub mailto: Option<String>,
    pub s2_api_key: Option<String>,
    pub doi_batch_size: usize,
    pub s2_batch_size: usize,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            requests_per_second: DEFAULT_REQUESTS_PER_SECOND,
            parallelism: DEFAULT_PARALLELISM,
            retry: RetryPolicy::default(),
            endpoints: Endpoints::default(),
            mailto: None,
            s2_api_key: None,
            doi_batch_size: OPENALEX_BATCH_SIZE,
            s2_batch_size: S2_BATCH_SIZE,
        }
    }
}

/// Split `items` into consecutive chunks of at most `size`.
pub fn batches<T: Clone>(items: &[T], size: usize) -> Vec<Vec<T>> {
    items.chunks(size.max(1)).map(<[T]>::to_vec).collect()
}

enum Job {
    Dois(Vec<Doi>),
    S2(&'static str, Vec<ExternalId>),
    Isbn(Isbn),
    Lccn(Lccn),
}

pub struct Gateway {
    transport: Box<dyn Transport>,
    options: GatewayOptions,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    pool: rayon::ThreadPool,
}

impl Gateway {
    pub fn new(transport: Box<dyn Transport>, options: GatewayOptions) -> Result<Self, GatewayError> {
        Self::with_clock(transport, options, Arc::new(SystemClock::new()))
    }

    pub fn with_clock(
        transport: Box<dyn Transport>,
        options: GatewayOptions,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, GatewayError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallelism.max(1))
            .build()
            .map_err(|e| GatewayError::Pool(e.to_string()))?;
        Ok(Self {
            transport,
            limiter: RateLimiter::new(options.requests_per_second, clock.clone()),
            options,
            clock,
            pool,
        })
    }

    pub fn options(&self) -> &GatewayOptions {
        &self.options
    }

    /// Send with rate limiting and retries. A transient status that survives
    /// every retry is returned as-is.
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let host = request.host();
        let retry = &self.options.retry;
        let mut attempt = 0;
        loop {
            self.limiter.acquire(&host);
            let outcome = self.transport.execute(request);
            let wait = match &outcome {
                Ok(resp) if resp.is_transient() => Some(resp.retry_after()),
                Err(e) if e.is_retryable() => Some(None),
                _ => None,
            };
            match wait {
                Some(retry_after) if attempt < retry.max_retries => {
                    log::debug!("retrying {} {} (attempt {})", request.method.as_str(), request.url, attempt + 1);
                    self.clock.sleep(retry.delay(attempt, retry_after));
                    attempt += 1;
                }
                _ => return outcome,
            }
        }
    }

    /// Body of a successful response, `None` on 404, error text otherwise.
    fn fetch(&self, request: &HttpRequest) -> Result<Option<String>, String> {
        match self.send(request) {
            Ok(resp) if resp.is_success() => Ok(Some(resp.body)),
            Ok(resp) if resp.status == 404 => Ok(None),
            Ok(resp) => Err(format!("HTTP {} from {}", resp.status, request.host())),
            Err(e) => Err(e.to_string()),
        }
    }

    fn run_job(&self, job: &Job) -> Vec<(IdKey, Lookup)> {
        let ep = &self.options.endpoints;
        match job {
            Job::Dois(dois) => {
                let req = upstream::openalex_dois(ep, self.options.mailto.as_deref(), dois);
                let parsed = self.fetch(&req).and_then(|body| match body {
                    Some(b) => upstream::parse_openalex_list(&b).map_err(|e: ParseError| e.to_string()),
                    None => Ok(Vec::new()),
                });
                match parsed {
                    Ok(records) => {
                        let mut by_doi: BTreeMap<Doi, CanonicalRecord> = BTreeMap::new();
                        for r in records {
                            if let Some(d) = r.identifiers.doi.clone() {
                                by_doi.entry(d).or_insert(r);
                            }
                        }
                        dois.iter()
                            .map(|d| {
                                let l = by_doi.get(d).cloned().map_or(Lookup::NotFound, Lookup::Found);
                                (IdKey::Doi(d.clone()), l)
                            })
                            .collect()
                    }
                    Err(reason) => dois
                        .iter()
                        .map(|d| (IdKey::Doi(d.clone()), Lookup::Failed(reason.clone())))
                        .collect(),
                }
            }
            Job::S2(prefix, ids) => {
                let raw: Vec<String> = ids
                    .iter()
                    .map(|id| match id {
                        ExternalId::Arxiv(a) => a.id.clone(),
                        ExternalId::Pmid(p) => p.as_str().to_owned(),
                        _ => unreachable!("only arXiv and PMID go to the batch endpoint"),
                    })
                    .collect();
                let req = upstream::s2_batch(ep, prefix, &raw, self.options.s2_api_key.as_deref());
                let parsed = self.fetch(&req).and_then(|body| match body {
                    Some(b) => upstream::parse_s2_batch(&b, ids.len()).map_err(|e| e.to_string()),
                    None => Ok(vec![None; ids.len()]),
                });
                match parsed {
                    Ok(records) => ids
                        .iter()
                        .zip(records)
                        .map(|(id, r)| (IdKey::External(id.clone()), r.map_or(Lookup::NotFound, Lookup::Found)))
                        .collect(),
                    Err(reason) => ids
                        .iter()
                        .map(|id| (IdKey::External(id.clone()), Lookup::Failed(reason.clone())))
                        .collect(),
                }
            }
            Job::Isbn(isbn) => {
                let req = upstream::open_library_isbn(ep, isbn);
                let lookup = match self.fetch(&req) {
                    Ok(Some(body)) => match upstream::parse_open_library(&body, isbn) {
                        Ok(r) => r.map_or(Lookup::NotFound, Lookup::Found),
                        Err(e) => Lookup::Failed(e.to_string()),
                    },
                    Ok(None) => Lookup::NotFound,
                    Err(reason) => Lookup::Failed(reason),
                };
                vec![(IdKey::External(ExternalId::Isbn(isbn.clone())), lookup)]
            }
            Job::Lccn(lccn) => {
                let req = upstream::loc_lccn(ep, lccn);
                let lookup = match self.fetch(&req) {
                    Ok(Some(body)) => match upstream::parse_loc(&body, lccn) {
                        Ok(r) => r.map_or(Lookup::NotFound, Lookup::Found),
                        Err(e) => Lookup::Failed(e.to_string()),
                    },
                    Ok(None) => Lookup::NotFound,
                    Err(reason) => Lookup::Failed(reason),
                };
                vec![(IdKey::External(ExternalId::Lccn(lccn.clone())), lookup)]
            }
        }
    }

    fn run_jobs(&self, jobs: Vec<Job>) -> Vec<(IdKey, Lookup)> {
        self.pool
            .install(|| jobs.par_iter().flat_map_iter(|j| self.run_job(j)).collect())
    }

    /// Resolve DOIs through OpenAlex, at most `doi_batch_size` per request.
    pub fn resolve_dois(&self, dois: &[Doi]) -> BTreeMap<Doi, Lookup> {
        let unique: Vec<Doi> = dois.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let jobs = batches(&unique, self.options.doi_batch_size)
            .into_iter()
            .map(Job::Dois)
            .collect();
        self.run_jobs(jobs)
            .into_iter()
            .filter_map(|(k, l)| match k {
                IdKey::Doi(d) => Some((d, l)),
                IdKey::External(_) => None,
            })
            .collect()
    }

    /// Resolve arXiv IDs and PMIDs through Semantic Scholar batches (one
    /// kind per batch), ISBNs through Open Library, and LCCNs through the
    /// Library of Congress.
    pub fn resolve_external(&self, ids: &[ExternalId]) -> BTreeMap<ExternalId, Lookup> {
        let unique: BTreeSet<ExternalId> = ids.iter().cloned().collect();
        let mut arxiv = Vec::new();
        let mut pmid = Vec::new();
        let mut jobs = Vec::new();
        for id in unique {
            match id {
                ExternalId::Arxiv(_) => arxiv.push(id),
                ExternalId::Pmid(_) => pmid.push(id),
                ExternalId::Isbn(i) => jobs.push(Job::Isbn(i)),
                ExternalId::Lccn(l) => jobs.push(Job::Lccn(l)),
            }
        }
        for chunk in batches(&arxiv, self.options.s2_batch_size) {
            jobs.push(Job::S2("ARXIV", chunk));
        }
        for chunk in batches(&pmid, self.options.s2_batch_size) {
            jobs.push(Job::S2("PMID", chunk));
        }
        self.run_jobs(jobs)
            .into_iter()
            .filter_map(|(k, l)| match k {
                IdKey::External(e) => Some((e, l)),
                IdKey::Doi(_) => None,
            })
            .collect()
    }

    /// Search query sent upstream: first author's family name and the title.
    pub fn search_query(entry: &BibliographyEntry) -> Option<String> {
        let title = entry.title.as_deref()?.trim();
        if title.is_empty() {
            return None;
        }
        Some(match entry.first_author_family() {
            Some(f) => format!("{f} {title}"),
            None => title.to_owned(),
        })
    }

    /// Candidate records for an entry without a resolvable identifier.
    /// Registries are tried in order until one returns results. An empty
    /// result after any registry failure is an error: the entry cannot be
    /// judged absent.
    pub fn search(&self, entry: &BibliographyEntry) -> Result<Vec<CanonicalRecord>, GatewayError> {
        let query = Self::search_query(entry).ok_or_else(|| GatewayError::MissingTitle {
            key: entry.key.clone(),
        })?;
        let ep = &self.options.endpoints;
        let mailto = self.options.mailto.as_deref();
        let key = self.options.s2_api_key.as_deref();
        type Parser = fn(&str) -> Result<Vec<CanonicalRecord>, ParseError>;
        let sources: [(HttpRequest, Parser); 3] = [
            (upstream::openalex_search(ep, mailto, &query), upstream::parse_openalex_list),
            (upstream::crossref_search(ep, mailto, &query), upstream::parse_crossref_list),
            (upstream::s2_search(ep, &query, key), upstream::parse_s2_search),
        ];
        let mut failures = Vec::new();
        for (req, parse) in sources {
            match self.fetch(&req) {
                Ok(Some(body)) => match parse(&body) {
                    Ok(mut recs) if !recs.is_empty() => {
                        recs.truncate(upstream::SEARCH_LIMIT);
                        return Ok(recs);
                    }
                    Ok(_) => {}
                    Err(e) => failures.push(e.to_string()),
                },
                Ok(None) => {}
                Err(reason) => failures.push(reason),
            }
        }
        if failures.is_empty() {
            Ok(Vec::new())
        } else {
            Err(GatewayError::SearchFailed(failures.join("; ")))
        }
    }

    /// [`Gateway::search`] over many entries on the worker pool.
    pub fn search_all(
        &self,
        entries: &[&BibliographyEntry],
    ) -> Vec<Result<Vec<CanonicalRecord>, GatewayError>> {
        self.pool
            .install(|| entries.par_iter().map(|e| self.search(e)).collect())
    }
}

enum IdKey {
    Doi(Doi),
    External(ExternalId),
}
