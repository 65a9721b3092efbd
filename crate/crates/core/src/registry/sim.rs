//! In-memory stand-in for the upstream registries. It answers the same URL
//! shapes the gateway sends and renders responses in each registry's JSON
//! format, so the real parsers run end to end without a network.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Mutex;

use serde_json::{json, Value};
use url::Url;

use super::transport::{HttpRequest, HttpResponse, Transport, TransportError};
use super::upstream::Endpoints;
use super::{CanonicalRecord, RetractionKind};
use crate::manuscript::names::PersonName;
use crate::text::normalize_title;

fn display_name(n: &PersonName) -> String {
    match &n.given {
        Some(g) => format!("{g} {}", n.family),
        None => n.family.clone(),
    }
}

pub fn openalex_work(r: &CanonicalRecord) -> Value {
    let mut ids = serde_json::Map::new();
    if let Some(p) = &r.identifiers.pmid {
        ids.insert("pmid".into(), json!(format!("https://pubmed.ncbi.nlm.nih.gov/{p}")));
    }
    json!({
        "doi": r.identifiers.doi.as_ref().map(|d| format!("https://doi.org/{d}")),
        "title": r.title,
        "display_name": r.title,
        "publication_year": r.year,
        "type": r.work_type,
        "is_retracted": r.retraction.kind == RetractionKind::Retracted,
        "ids": ids,
        "authorships": r.authors.iter().map(|a| json!({"author": {"display_name": display_name(a)}})).collect::<Vec<_>>(),
        "primary_location": {"source": r.venue.as_ref().map(|v| json!({"display_name": v}))},
    })
}

pub fn s2_paper(r: &CanonicalRecord) -> Value {
    let mut ext = serde_json::Map::new();
    if let Some(d) = &r.identifiers.doi {
        ext.insert("DOI".into(), json!(d.as_str()));
    }
    if let Some(a) = &r.identifiers.arxiv {
        ext.insert("ArXiv".into(), json!(a.id));
    }
    if let Some(p) = &r.identifiers.pmid {
        ext.insert("PubMed".into(), json!(p.as_str()));
    }
    json!({
        "title": r.title,
        "year": r.year,
        "venue": r.venue.clone().unwrap_or_default(),
        "authors": r.authors.iter().map(|a| json!({"name": display_name(a)})).collect::<Vec<_>>(),
        "externalIds": ext,
        "publicationTypes": r.work_type.as_ref().map(|t| vec![t.clone()]),
    })
}

pub fn crossref_item(r: &CanonicalRecord) -> Value {
    json!({
        "DOI": r.identifiers.doi.as_ref().map(|d| d.as_str().to_owned()),
        "title": [r.title],
        "author": r.authors.iter().map(|a| json!({"given": a.given, "family": a.family})).collect::<Vec<_>>(),
        "issued": {"date-parts": [[r.year]]},
        "container-title": r.venue.iter().collect::<Vec<_>>(),
        "type": r.work_type,
    })
}

pub fn open_library_book(r: &CanonicalRecord) -> Value {
    let mut ids = serde_json::Map::new();
    if let Some(l) = &r.identifiers.lccn {
        ids.insert("lccn".into(), json!([l.as_str()]));
    }
    json!({
        "title": r.title,
        "authors": r.authors.iter().map(|a| json!({"name": display_name(a)})).collect::<Vec<_>>(),
        "publish_date": r.year.map(|y| y.to_string()),
        "publishers": r.venue.iter().map(|v| json!({"name": v})).collect::<Vec<_>>(),
        "identifiers": ids,
    })
}

pub fn loc_item(r: &CanonicalRecord) -> Value {
    json!({"item": {
        "title": r.title,
        "contributor_names": r.authors.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        "date": r.year.map(|y| y.to_string()),
    }})
}

#[derive(Default)]
struct Faults {
    unreachable: HashSet<String>,
    throttled: HashMap<String, usize>,
    server_errors: HashMap<String, usize>,
}

/// Simulated OpenAlex, Semantic Scholar, CrossRef, Open Library, and
/// Library of Congress. Searches return every record sharing a title word
/// with the query, best first, without applying the page size.
pub struct SimulatedRegistry {
    records: Vec<CanonicalRecord>,
    endpoints: Endpoints,
    faults: Mutex<Faults>,
    retry_after_secs: u64,
}

fn host_of(base: &str) -> String {
    Url::parse(base)
        .ok()
        .and_then(|u| u.host_str().map(str::to_owned))
        .unwrap_or_default()
}

impl SimulatedRegistry {
    pub fn new(records: Vec<CanonicalRecord>) -> Self {
        Self {
            records,
            endpoints: Endpoints::default(),
            faults: Mutex::new(Faults::default()),
            retry_after_secs: 1,
        }
    }

    pub fn records(&self) -> &[CanonicalRecord] {
        &self.records
    }

    /// Every request to `host` fails to connect.
    pub fn set_unreachable(&self, host: &str) {
        self.faults.lock().unwrap().unreachable.insert(host.to_owned());
    }

    /// The next `count` requests to `host` get 429 with a Retry-After header.
    pub fn throttle(&self, host: &str, count: usize) {
        self.faults.lock().unwrap().throttled.insert(host.to_owned(), count);
    }

    /// The next `count` requests to `host` get 503.
    pub fn fail_with_server_error(&self, host: &str, count: usize) {
        self.faults.lock().unwrap().server_errors.insert(host.to_owned(), count);
    }

    fn injected_fault(&self, host: &str) -> Option<Result<HttpResponse, TransportError>> {
        let mut f = self.faults.lock().unwrap();
        if f.unreachable.contains(host) {
            return Some(Err(TransportError::Unreachable {
                host: host.to_owned(),
                reason: "connection refused".into(),
            }));
        }
        if let Some(n) = f.throttled.get_mut(host).filter(|n| **n > 0) {
            *n -= 1;
            let mut resp = HttpResponse::json(429, "{\"error\":\"rate limited\"}".into());
            resp.headers.push(("retry-after".into(), self.retry_after_secs.to_string()));
            return Some(Ok(resp));
        }
        if let Some(n) = f.server_errors.get_mut(host).filter(|n| **n > 0) {
            *n -= 1;
            return Some(Ok(HttpResponse::json(503, "{\"error\":\"unavailable\"}".into())));
        }
        None
    }

    fn search(&self, query: &str) -> Vec<&CanonicalRecord> {
        let q: HashSet<String> = normalize_title(query)
            .split_whitespace()
            .filter(|t| t.len() > 2)
            .map(str::to_owned)
            .collect();
        let mut scored: Vec<(usize, usize, &CanonicalRecord)> = self
            .records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                let title = normalize_title(&r.title);
                let hits = title.split_whitespace().filter(|t| q.contains(*t)).count();
                (hits > 0).then_some((hits, i, r))
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, _, r)| r).collect()
    }

    fn openalex(&self, url: &Url) -> HttpResponse {
        let params: BTreeMap<String, String> = url.query_pairs().into_owned().collect();
        let results: Vec<Value> = if let Some(filter) = params.get("filter") {
            let wanted: HashSet<&str> = filter
                .strip_prefix("doi:")
                .unwrap_or("")
                .split('|')
                .collect();
            self.records
                .iter()
                .filter(|r| r.identifiers.doi.as_ref().is_some_and(|d| wanted.contains(d.as_str())))
                .map(openalex_work)
                .collect()
        } else if let Some(q) = params.get("search") {
            self.search(q).into_iter().map(openalex_work).collect()
        } else {
            return HttpResponse::json(400, "{\"error\":\"bad request\"}".into());
        };
        HttpResponse::json(200, json!({"meta": {"count": results.len()}, "results": results}).to_string())
    }

    fn semantic_scholar(&self, url: &Url, body: Option<&str>) -> HttpResponse {
        if url.path().ends_with("/paper/batch") {
            let ids: Vec<String> = body
                .and_then(|b| serde_json::from_str::<Value>(b).ok())
                .and_then(|v| v.get("ids").cloned())
                .and_then(|v| serde_json::from_value(v).ok())
                .unwrap_or_default();
            let out: Vec<Value> = ids
                .iter()
                .map(|raw| {
                    let (prefix, id) = raw.split_once(':').unwrap_or(("", raw));
                    self.records
                        .iter()
                        .find(|r| match prefix {
                            "ARXIV" => r.identifiers.arxiv.as_ref().is_some_and(|a| a.id == id),
                            "PMID" => r.identifiers.pmid.as_ref().is_some_and(|p| p.as_str() == id),
                            _ => false,
                        })
                        .map_or(Value::Null, s2_paper)
                })
                .collect();
            return HttpResponse::json(200, Value::Array(out).to_string());
        }
        let q = url
            .query_pairs()
            .find(|(k, _)| k == "query")
            .map(|(_, v)| v.into_owned())
            .unwrap_or_default();
        let data: Vec<Value> = self.search(&q).into_iter().map(s2_paper).collect();
        HttpResponse::json(200, json!({"total": data.len(), "data": data}).to_string())
    }

    fn crossref(&self, url: &Url) -> HttpResponse {
        let q = url
            .query_pairs()
            .find(|(k, _)| k == "query.bibliographic")
            .map(|(_, v)| v.into_owned())
            .unwrap_or_default();
        let items: Vec<Value> = self.search(&q).into_iter().map(crossref_item).collect();
        HttpResponse::json(200, json!({"status": "ok", "message": {"items": items}}).to_string())
    }

    fn open_library(&self, url: &Url) -> HttpResponse {
        let key = url
            .query_pairs()
            .find(|(k, _)| k == "bibkeys")
            .map(|(_, v)| v.into_owned())
            .unwrap_or_default();
        let isbn = key.strip_prefix("ISBN:").unwrap_or(&key);
        let mut out = serde_json::Map::new();
        if let Some(r) = self
            .records
            .iter()
            .find(|r| r.identifiers.isbn.as_ref().is_some_and(|i| i.as_str() == isbn))
        {
            out.insert(key.clone(), open_library_book(r));
        }
        HttpResponse::json(200, Value::Object(out).to_string())
    }

    fn loc(&self, url: &Url) -> HttpResponse {
        let lccn = url
            .path()
            .trim_start_matches("/item/")
            .trim_end_matches('/')
            .to_owned();
        match self
            .records
            .iter()
            .find(|r| r.identifiers.lccn.as_ref().is_some_and(|l| l.as_str() == lccn))
        {
            Some(r) => HttpResponse::json(200, loc_item(r).to_string()),
            None => HttpResponse::json(404, "{\"status\":404}".into()),
        }
    }
}

impl Transport for SimulatedRegistry {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let url = Url::parse(&request.url).map_err(|e| TransportError::Other(e.to_string()))?;
        let host = url.host_str().unwrap_or_default().to_owned();
        if let Some(fault) = self.injected_fault(&host) {
            return fault;
        }
        let ep = &self.endpoints;
        let resp = if host == host_of(&ep.openalex) {
            self.openalex(&url)
        } else if host == host_of(&ep.semantic_scholar) {
            self.semantic_scholar(&url, request.body.as_deref())
        } else if host == host_of(&ep.crossref) {
            self.crossref(&url)
        } else if host == host_of(&ep.open_library) {
            self.open_library(&url)
        } else if host == host_of(&ep.loc) {
            self.loc(&url)
        } else {
            return Err(TransportError::Unreachable {
                host,
                reason: "unknown host".into(),
            });
        };
        Ok(resp)
    }
}
