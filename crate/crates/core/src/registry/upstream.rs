//! Request construction and response parsing for each upstream registry.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;
use serde_json::Value;
use url::Url;

use super::transport::HttpRequest;
use super::{CanonicalRecord, RetractionStatus};
use crate::identifiers::{ArxivId, Doi, IdentifierSet, Isbn, Lccn, Pmid};
use crate::manuscript::names::PersonName;
use crate::text::collapse_whitespace;

pub const OPENALEX: &str = "openalex";
pub const SEMANTIC_SCHOLAR: &str = "semantic_scholar";
pub const CROSSREF: &str = "crossref";
pub const OPEN_LIBRARY: &str = "open_library";
pub const LOC: &str = "loc";

/// Upper bound on search results kept per query.
pub const SEARCH_LIMIT: usize = 10;

const S2_FIELDS: &str = "title,authors,year,venue,externalIds,publicationTypes";

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]+>").unwrap());
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(1[5-9]\d\d|20\d\d)\b").unwrap());
static LOC_NAME_DATES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r",\s*(?:\d{3,4}|active|approximately|b\.|d\.)[^,]*$").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub openalex: String,
    pub semantic_scholar: String,
    pub crossref: String,
    pub open_library: String,
    pub loc: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Self {
            openalex: "https://api.openalex.org".into(),
            semantic_scholar: "https://api.semanticscholar.org".into(),
            crossref: "https://api.crossref.org".into(),
            open_library: "https://openlibrary.org".into(),
            loc: "https://www.loc.gov".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed {source_name} response: {reason}")]
pub struct ParseError {
    pub source_name: &'static str,
    pub reason: String,
}

fn parse_err(source_name: &'static str, reason: impl ToString) -> ParseError {
    ParseError {
        source_name,
        reason: reason.to_string(),
    }
}

fn url_with(base: &str, path: &str, params: &[(&str, &str)]) -> String {
    let mut url = Url::parse(&format!("{}{}", base.trim_end_matches('/'), path))
        .expect("endpoint base URLs are valid");
    if !params.is_empty() {
        let mut q = url.query_pairs_mut();
        for (k, v) in params {
            q.append_pair(k, v);
        }
    }
    url.into()
}

fn with_mailto<'a>(mut params: Vec<(&'a str, &'a str)>, mailto: Option<&'a str>) -> Vec<(&'a str, &'a str)> {
    if let Some(m) = mailto {
        params.push(("mailto", m));
    }
    params
}

pub fn openalex_dois(ep: &Endpoints, mailto: Option<&str>, dois: &[Doi]) -> HttpRequest {
    let filter = format!(
        "doi:{}",
        dois.iter().map(Doi::as_str).collect::<Vec<_>>().join("|")
    );
    let per_page = dois.len().max(1).to_string();
    let params = with_mailto(vec![("filter", &filter), ("per-page", &per_page)], mailto);
    HttpRequest::get(url_with(&ep.openalex, "/works", &params))
}

pub fn openalex_search(ep: &Endpoints, mailto: Option<&str>, query: &str) -> HttpRequest {
    let limit = SEARCH_LIMIT.to_string();
    let params = with_mailto(vec![("search", query), ("per-page", &limit)], mailto);
    HttpRequest::get(url_with(&ep.openalex, "/works", &params))
}

/// `prefix` is `ARXIV` or `PMID`.
pub fn s2_batch(ep: &Endpoints, prefix: &str, ids: &[String], api_key: Option<&str>) -> HttpRequest {
    let body = serde_json::json!({
        "ids": ids.iter().map(|id| format!("{prefix}:{id}")).collect::<Vec<_>>()
    });
    let req = HttpRequest::post_json(
        url_with(&ep.semantic_scholar, "/graph/v1/paper/batch", &[("fields", S2_FIELDS)]),
        body.to_string(),
    );
    match api_key {
        Some(k) => req.header("x-api-key", k),
        None => req,
    }
}

pub fn s2_search(ep: &Endpoints, query: &str, api_key: Option<&str>) -> HttpRequest {
    let limit = SEARCH_LIMIT.to_string();
    let req = HttpRequest::get(url_with(
        &ep.semantic_scholar,
        "/graph/v1/paper/search",
        &[("query", query), ("limit", &limit), ("fields", S2_FIELDS)],
    ));
    match api_key {
        Some(k) => req.header("x-api-key", k),
        None => req,
    }
}

pub fn crossref_search(ep: &Endpoints, mailto: Option<&str>, query: &str) -> HttpRequest {
    let limit = SEARCH_LIMIT.to_string();
    let params = with_mailto(vec![("query.bibliographic", query), ("rows", &limit)], mailto);
    HttpRequest::get(url_with(&ep.crossref, "/works", &params))
}

pub fn open_library_isbn(ep: &Endpoints, isbn: &Isbn) -> HttpRequest {
    let key = format!("ISBN:{isbn}");
    HttpRequest::get(url_with(
        &ep.open_library,
        "/api/books",
        &[("bibkeys", &key), ("format", "json"), ("jscmd", "data")],
    ))
}

pub fn loc_lccn(ep: &Endpoints, lccn: &Lccn) -> HttpRequest {
    HttpRequest::get(url_with(&ep.loc, &format!("/item/{lccn}/"), &[("fo", "json")]))
}

fn clean_title(raw: &str) -> String {
    collapse_whitespace(&TAG.replace_all(raw, " "))
}

fn non_empty(s: Option<&str>) -> Option<String> {
    s.map(clean_title).filter(|s| !s.is_empty())
}

fn first_year(s: &str) -> Option<i32> {
    YEAR.captures(s).and_then(|c| c[1].parse().ok())
}

// ---- OpenAlex ----

#[derive(Deserialize)]
struct OaList {
    #[serde(default)]
    results: Vec<OaWork>,
}

#[derive(Deserialize)]
struct OaWork {
    doi: Option<String>,
    title: Option<String>,
    display_name: Option<String>,
    publication_year: Option<i32>,
    #[serde(default)]
    authorships: Vec<OaAuthorship>,
    primary_location: Option<OaLocation>,
    #[serde(rename = "type")]
    work_type: Option<String>,
    ids: Option<BTreeMap<String, Value>>,
    #[serde(default)]
    is_retracted: bool,
}

#[derive(Deserialize)]
struct OaAuthorship {
    author: Option<OaAuthor>,
}

#[derive(Deserialize)]
struct OaAuthor {
    display_name: Option<String>,
}

#[derive(Deserialize)]
struct OaLocation {
    source: Option<OaSource>,
}

#[derive(Deserialize)]
struct OaSource {
    display_name: Option<String>,
}

impl OaWork {
    fn into_record(self) -> Option<CanonicalRecord> {
        let title = non_empty(self.title.as_deref().or(self.display_name.as_deref()))?;
        let mut identifiers = IdentifierSet {
            doi: self.doi.as_deref().and_then(Doi::parse),
            ..IdentifierSet::default()
        };
        if let Some(ids) = &self.ids {
            identifiers.pmid = ids.get("pmid").and_then(Value::as_str).and_then(|p| {
                Pmid::parse(p.rsplit('/').find(|s| !s.is_empty()).unwrap_or(p))
            });
        }
        Some(CanonicalRecord {
            source: OPENALEX.into(),
            title,
            authors: self
                .authorships
                .iter()
                .filter_map(|a| a.author.as_ref()?.display_name.as_deref())
                .filter_map(PersonName::parse_display)
                .collect(),
            year: self.publication_year,
            venue: non_empty(
                self.primary_location
                    .as_ref()
                    .and_then(|l| l.source.as_ref())
                    .and_then(|s| s.display_name.as_deref()),
            ),
            identifiers,
            retraction: if self.is_retracted {
                RetractionStatus::retracted(None, None)
            } else {
                RetractionStatus::none()
            },
            work_type: self.work_type,
        })
    }
}

pub fn parse_openalex_list(body: &str) -> Result<Vec<CanonicalRecord>, ParseError> {
    let list: OaList = serde_json::from_str(body).map_err(|e| parse_err(OPENALEX, e))?;
    Ok(list.results.into_iter().filter_map(OaWork::into_record).collect())
}

// ---- Semantic Scholar ----

#[derive(Deserialize)]
struct S2Paper {
    title: Option<String>,
    year: Option<i32>,
    venue: Option<String>,
    #[serde(default)]
    authors: Vec<S2Author>,
    #[serde(rename = "externalIds")]
    external_ids: Option<BTreeMap<String, Value>>,
    #[serde(rename = "publicationTypes")]
    publication_types: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct S2Author {
    name: Option<String>,
}

#[derive(Deserialize)]
struct S2Search {
    #[serde(default)]
    data: Vec<S2Paper>,
}

fn value_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

impl S2Paper {
    fn into_record(self) -> Option<CanonicalRecord> {
        let title = non_empty(self.title.as_deref())?;
        let mut identifiers = IdentifierSet::default();
        if let Some(ext) = &self.external_ids {
            let get = |k: &str| ext.get(k).and_then(value_string);
            identifiers.doi = get("DOI").as_deref().and_then(Doi::parse);
            identifiers.arxiv = get("ArXiv").as_deref().and_then(ArxivId::parse);
            identifiers.pmid = get("PubMed").as_deref().and_then(Pmid::parse);
        }
        Some(CanonicalRecord {
            source: SEMANTIC_SCHOLAR.into(),
            title,
            authors: self
                .authors
                .iter()
                .filter_map(|a| a.name.as_deref())
                .filter_map(PersonName::parse_display)
                .collect(),
            year: self.year,
            venue: non_empty(self.venue.as_deref()),
            identifiers,
            retraction: RetractionStatus::none(),
            work_type: self
                .publication_types
                .and_then(|t| t.into_iter().next())
                .map(|t| t.to_ascii_lowercase()),
        })
    }
}

/// Batch responses align with the request: `null` marks an unknown ID.
pub fn parse_s2_batch(body: &str, expected: usize) -> Result<Vec<Option<CanonicalRecord>>, ParseError> {
    let items: Vec<Option<S2Paper>> =
        serde_json::from_str(body).map_err(|e| parse_err(SEMANTIC_SCHOLAR, e))?;
    if items.len() != expected {
        return Err(parse_err(
            SEMANTIC_SCHOLAR,
            format!("expected {expected} batch results, got {}", items.len()),
        ));
    }
    Ok(items
        .into_iter()
        .map(|p| p.and_then(S2Paper::into_record))
        .collect())
}

pub fn parse_s2_search(body: &str) -> Result<Vec<CanonicalRecord>, ParseError> {
    let s: S2Search = serde_json::from_str(body).map_err(|e| parse_err(SEMANTIC_SCHOLAR, e))?;
    Ok(s.data.into_iter().filter_map(S2Paper::into_record).collect())
}

// ---- CrossRef ----

#[derive(Deserialize)]
struct CrEnvelope {
    message: CrMessage,
}

#[derive(Deserialize)]
struct CrMessage {
    #[serde(default)]
    items: Vec<CrItem>,
}

#[derive(Deserialize)]
struct CrItem {
    #[serde(rename = "DOI")]
    doi: Option<String>,
    #[serde(default)]
    title: Vec<String>,
    #[serde(default)]
    author: Vec<CrAuthor>,
    issued: Option<CrDate>,
    #[serde(rename = "container-title", default)]
    container_title: Vec<String>,
    #[serde(rename = "type")]
    work_type: Option<String>,
}

#[derive(Deserialize)]
struct CrAuthor {
    given: Option<String>,
    family: Option<String>,
    name: Option<String>,
}

#[derive(Deserialize)]
struct CrDate {
    #[serde(rename = "date-parts", default)]
    date_parts: Vec<Vec<Option<i32>>>,
}

impl CrItem {
    fn into_record(self) -> Option<CanonicalRecord> {
        let title = non_empty(self.title.first().map(String::as_str))?;
        Some(CanonicalRecord {
            source: CROSSREF.into(),
            title,
            authors: self
                .author
                .iter()
                .filter_map(|a| match (&a.family, &a.name) {
                    (Some(f), _) => Some(PersonName::new(f.trim(), a.given.as_deref().map(str::trim))),
                    (None, Some(n)) => Some(PersonName::new(n.trim(), None)),
                    _ => None,
                })
                .collect(),
            year: self
                .issued
                .and_then(|d| d.date_parts.first().and_then(|p| p.first().copied().flatten())),
            venue: non_empty(self.container_title.first().map(String::as_str)),
            identifiers: IdentifierSet {
                doi: self.doi.as_deref().and_then(Doi::parse),
                ..IdentifierSet::default()
            },
            retraction: RetractionStatus::none(),
            work_type: self.work_type,
        })
    }
}

pub fn parse_crossref_list(body: &str) -> Result<Vec<CanonicalRecord>, ParseError> {
    let env: CrEnvelope = serde_json::from_str(body).map_err(|e| parse_err(CROSSREF, e))?;
    Ok(env.message.items.into_iter().filter_map(CrItem::into_record).collect())
}

// ---- Open Library ----

#[derive(Deserialize)]
struct OlBook {
    title: Option<String>,
    subtitle: Option<String>,
    #[serde(default)]
    authors: Vec<OlNamed>,
    publish_date: Option<String>,
    #[serde(default)]
    publishers: Vec<OlNamed>,
    identifiers: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Deserialize)]
struct OlNamed {
    name: Option<String>,
}

/// An empty object means the ISBN is unknown.
pub fn parse_open_library(body: &str, isbn: &Isbn) -> Result<Option<CanonicalRecord>, ParseError> {
    let map: BTreeMap<String, OlBook> =
        serde_json::from_str(body).map_err(|e| parse_err(OPEN_LIBRARY, e))?;
    let Some(book) = map.into_values().next() else {
        return Ok(None);
    };
    let Some(mut title) = non_empty(book.title.as_deref()) else {
        return Ok(None);
    };
    if let Some(sub) = non_empty(book.subtitle.as_deref()) {
        title = format!("{title}: {sub}");
    }
    let ids = book.identifiers.unwrap_or_default();
    Ok(Some(CanonicalRecord {
        source: OPEN_LIBRARY.into(),
        title,
        authors: book
            .authors
            .iter()
            .filter_map(|a| a.name.as_deref())
            .filter_map(PersonName::parse_display)
            .collect(),
        year: book.publish_date.as_deref().and_then(first_year),
        venue: non_empty(book.publishers.first().and_then(|p| p.name.as_deref())),
        identifiers: IdentifierSet {
            isbn: Some(isbn.clone()),
            lccn: ids
                .get("lccn")
                .and_then(|v| v.first())
                .and_then(|l| Lccn::parse(l)),
            ..IdentifierSet::default()
        },
        retraction: RetractionStatus::none(),
        work_type: Some("book".into()),
    }))
}

// ---- Library of Congress ----

#[derive(Deserialize)]
struct LocEnvelope {
    item: Option<LocItem>,
}

#[derive(Deserialize)]
struct LocItem {
    title: Option<String>,
    #[serde(default)]
    contributor_names: Vec<String>,
    date: Option<String>,
}

/// Library of Congress titles carry a statement of responsibility after
/// ` / `; contributor names carry trailing life dates.
pub fn parse_loc(body: &str, lccn: &Lccn) -> Result<Option<CanonicalRecord>, ParseError> {
    let env: LocEnvelope = serde_json::from_str(body).map_err(|e| parse_err(LOC, e))?;
    let Some(item) = env.item else {
        return Ok(None);
    };
    let Some(raw_title) = item.title.as_deref() else {
        return Ok(None);
    };
    let title = raw_title
        .split(" / ")
        .next()
        .unwrap_or(raw_title)
        .trim()
        .trim_end_matches(['.', '/', ':', ' '])
        .to_owned();
    if title.is_empty() {
        return Ok(None);
    }
    Ok(Some(CanonicalRecord {
        source: LOC.into(),
        title,
        authors: item
            .contributor_names
            .iter()
            .map(|n| LOC_NAME_DATES.replace(n.trim().trim_end_matches('.'), "").into_owned())
            .filter_map(|n| PersonName::parse_display(&n))
            .collect(),
        year: item.date.as_deref().and_then(first_year),
        venue: None,
        identifiers: IdentifierSet {
            lccn: Some(lccn.clone()),
            ..IdentifierSet::default()
        },
        retraction: RetractionStatus::none(),
        work_type: Some("book".into()),
    }))
}
