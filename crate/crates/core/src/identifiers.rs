//! Structured identifiers: extraction, normalization, check digits, and
//! cross-identifier consistency.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::finding::{check, Finding, Level};
use crate::manuscript::BibliographyEntry;
use crate::matching::title_similarity;
use crate::registry::CanonicalRecord;

/// Titles of two records resolved from one entry must be at least this similar.
pub const CROSS_ID_TITLE_THRESHOLD: f64 = 0.80;

static DOI_SHAPE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^10\.\d{4,9}/\S+$").unwrap());
static DOI_IN_TEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)\b10\.\d{4,9}/[^\s"'<>{}\\]+"#).unwrap());
static ARXIV_NEW: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4}\.\d{4,5})(?:v(\d+))?$").unwrap());
static ARXIV_OLD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([a-z][a-z\-]*(?:\.[a-z]{2})?/\d{7})(?:v(\d+))?$").unwrap());
static ARXIV_IN_TEXT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:arxiv\.org/(?:abs|pdf)/|arxiv:\s*)([a-z\-]+(?:\.[a-z]{2})?/\d{7}|\d{4}\.\d{4,5})(v\d+)?")
        .unwrap()
});
static PMID_IN_TEXT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:pubmed\.ncbi\.nlm\.nih\.gov/|ncbi\.nlm\.nih\.gov/pubmed/|\bpmid:?\s*)(\d{1,9})\b")
        .unwrap()
});
static LCCN_SHAPE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[a-z]{0,3}\d{8}(?:\d{2})?$").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentifierKind {
    Doi,
    Arxiv,
    Pmid,
    Isbn,
    Lccn,
}

impl IdentifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IdentifierKind::Doi => "DOI",
            IdentifierKind::Arxiv => "arXiv ID",
            IdentifierKind::Pmid => "PMID",
            IdentifierKind::Isbn => "ISBN",
            IdentifierKind::Lccn => "LCCN",
        }
    }
}

impl fmt::Display for IdentifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! string_id {
    ($(#[$doc:meta])* $name:ident, $normalize:path) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn parse(raw: &str) -> Option<Self> {
                $normalize(raw).map(Self)
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl TryFrom<String> for $name {
            type Error = String;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                Self::parse(&s).ok_or_else(|| format!("invalid {}: `{s}`", stringify!($name)))
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.0
            }
        }
    };
}

string_id!(
    /// Lowercase DOI without scheme or resolver host.
    Doi,
    normalize_doi
);
string_id!(
    /// PubMed identifier (digits only).
    Pmid,
    normalize_pmid
);
string_id!(
    /// ISBN-10 or ISBN-13 digits with a valid check digit.
    Isbn,
    normalize_isbn
);
string_id!(
    /// Normalized Library of Congress control number.
    Lccn,
    normalize_lccn
);

/// arXiv identifier. `id` is the versionless lookup form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArxivId {
    pub id: String,
    pub version: Option<u32>,
}

impl ArxivId {
    pub fn parse(raw: &str) -> Option<Self> {
        let mut s = raw.trim();
        for prefix in ["https://", "http://"] {
            if let Some(rest) = strip_prefix_ci(s, prefix) {
                s = rest;
            }
        }
        for prefix in ["www.arxiv.org/abs/", "arxiv.org/abs/", "arxiv.org/pdf/", "arxiv:"] {
            if let Some(rest) = strip_prefix_ci(s, prefix) {
                s = rest.trim();
            }
        }
        let s = s.strip_suffix(".pdf").unwrap_or(s);
        let s = s.trim_end_matches('/');
        if let Some(c) = ARXIV_NEW.captures(s) {
            return Some(Self {
                id: c[1].to_owned(),
                version: c.get(2).and_then(|v| v.as_str().parse().ok()),
            });
        }
        let lowered = s.to_ascii_lowercase();
        ARXIV_OLD.captures(&lowered).map(|c| {
            // subject class suffix keeps its conventional case (math.AG)
            let id = match c[1].split_once('/') {
                Some((archive, num)) => match archive.split_once('.') {
                    Some((a, class)) => format!("{a}.{}/{num}", class.to_ascii_uppercase()),
                    None => format!("{archive}/{num}"),
                },
                None => c[1].to_owned(),
            };
            Self {
                id,
                version: c.get(2).and_then(|v| v.as_str().parse().ok()),
            }
        })
    }

    pub fn as_str(&self) -> &str {
        &self.id
    }
}

impl fmt::Display for ArxivId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.version {
            Some(v) => write!(f, "{}v{v}", self.id),
            None => f.write_str(&self.id),
        }
    }
}

impl TryFrom<String> for ArxivId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s).ok_or_else(|| format!("invalid arXiv id: `{s}`"))
    }
}

impl From<ArxivId> for String {
    fn from(v: ArxivId) -> String {
        v.to_string()
    }
}

/// Identifiers attached to one bibliography entry or canonical record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifierSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<Doi>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arxiv: Option<ArxivId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmid: Option<Pmid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isbn: Option<Isbn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lccn: Option<Lccn>,
}

impl IdentifierSet {
    pub fn is_empty(&self) -> bool {
        self.kinds().is_empty()
    }

    /// Kinds present, in resolution priority order.
    pub fn kinds(&self) -> Vec<IdentifierKind> {
        let mut v = Vec::new();
        if self.doi.is_some() {
            v.push(IdentifierKind::Doi);
        }
        if self.arxiv.is_some() {
            v.push(IdentifierKind::Arxiv);
        }
        if self.pmid.is_some() {
            v.push(IdentifierKind::Pmid);
        }
        if self.isbn.is_some() {
            v.push(IdentifierKind::Isbn);
        }
        if self.lccn.is_some() {
            v.push(IdentifierKind::Lccn);
        }
        v
    }

    /// Lookup form of one identifier.
    pub fn value(&self, kind: IdentifierKind) -> Option<String> {
        match kind {
            IdentifierKind::Doi => self.doi.as_ref().map(|d| d.as_str().to_owned()),
            IdentifierKind::Arxiv => self.arxiv.as_ref().map(|a| a.id.clone()),
            IdentifierKind::Pmid => self.pmid.as_ref().map(|p| p.as_str().to_owned()),
            IdentifierKind::Isbn => self.isbn.as_ref().map(|i| i.as_str().to_owned()),
            IdentifierKind::Lccn => self.lccn.as_ref().map(|l| l.as_str().to_owned()),
        }
    }

    /// Fill absent identifiers from `other`.
    pub fn merge_missing(&mut self, other: &IdentifierSet) {
        if self.doi.is_none() {
            self.doi.clone_from(&other.doi);
        }
        if self.arxiv.is_none() {
            self.arxiv.clone_from(&other.arxiv);
        }
        if self.pmid.is_none() {
            self.pmid.clone_from(&other.pmid);
        }
        if self.isbn.is_none() {
            self.isbn.clone_from(&other.isbn);
        }
        if self.lccn.is_none() {
            self.lccn.clone_from(&other.lccn);
        }
    }
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len()
        && s.is_char_boundary(prefix.len())
        && s[..prefix.len()].eq_ignore_ascii_case(prefix)
    {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).ok();
            if let Some(b) = hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8(out).unwrap_or_else(|_| s.to_owned())
}

pub fn normalize_doi(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    for prefix in [
        "https://doi.org/",
        "http://doi.org/",
        "https://dx.doi.org/",
        "http://dx.doi.org/",
        "doi.org/",
        "dx.doi.org/",
        "doi:",
    ] {
        if let Some(rest) = strip_prefix_ci(s, prefix) {
            s = rest.trim();
        }
    }
    let decoded = percent_decode(s).to_lowercase();
    let mut trimmed = decoded.as_str();
    loop {
        let before = trimmed.len();
        trimmed = trimmed.trim_end_matches(['.', ',', ';', ':']);
        // drop a trailing ')' that has no partner inside the DOI
        if trimmed.ends_with(')') && !trimmed.contains('(') {
            trimmed = &trimmed[..trimmed.len() - 1];
        }
        if trimmed.len() == before {
            break;
        }
    }
    DOI_SHAPE.is_match(trimmed).then(|| trimmed.to_owned())
}

pub fn normalize_pmid(raw: &str) -> Option<String> {
    let s = raw.trim();
    let s = strip_prefix_ci(s, "pmid:").unwrap_or(s).trim();
    let s = s.trim_start_matches('0');
    (!s.is_empty() && s.len() <= 9 && s.chars().all(|c| c.is_ascii_digit())).then(|| s.to_owned())
}

pub fn normalize_isbn(raw: &str) -> Option<String> {
    let s = raw.trim();
    let s = strip_prefix_ci(s, "isbn").unwrap_or(s);
    let s = s.trim_start_matches([':', ' ', '-']);
    let compact: String = s
        .chars()
        .filter(|c| !matches!(c, '-' | ' '))
        .map(|c| c.to_ascii_uppercase())
        .collect();
    isbn_checksum_ok(&compact).then_some(compact)
}

/// ISBN-10 (weights 10..1, mod 11, `X` = 10 as check digit) or ISBN-13
/// (weights 1,3 alternating, mod 10).
pub fn isbn_checksum_ok(digits: &str) -> bool {
    let chars: Vec<char> = digits.chars().collect();
    match chars.len() {
        10 => {
            let mut sum = 0u32;
            for (i, c) in chars.iter().enumerate() {
                let v = match c {
                    'X' if i == 9 => 10,
                    c if c.is_ascii_digit() => c.to_digit(10).unwrap(),
                    _ => return false,
                };
                sum += (10 - i as u32) * v;
            }
            sum.is_multiple_of(11)
        }
        13 => {
            let mut sum = 0u32;
            for (i, c) in chars.iter().enumerate() {
                let Some(v) = c.to_digit(10) else { return false };
                sum += if i % 2 == 0 { v } else { 3 * v };
            }
            sum.is_multiple_of(10)
        }
        _ => false,
    }
}

/// LCCN normalization: drop blanks and anything after `/`; a hyphenated
/// serial is left-padded with zeros to six digits.
pub fn normalize_lccn(raw: &str) -> Option<String> {
    let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.split('/').next().unwrap_or("").to_ascii_lowercase();
    let s = match s.split_once('-') {
        Some((prefix, serial)) if serial.chars().all(|c| c.is_ascii_digit()) && serial.len() <= 6 => {
            format!("{prefix}{serial:0>6}")
        }
        Some(_) => return None,
        None => s,
    };
    LCCN_SHAPE.is_match(&s).then_some(s)
}

/// Gather identifiers from dedicated fields, then scavenge url/note/howpublished.
/// Malformed candidates are dropped with an info finding.
pub fn extract_identifiers(entry: &BibliographyEntry) -> (IdentifierSet, Vec<Finding>) {
    let mut ids = IdentifierSet::default();
    let mut notes = Vec::new();
    let field = |name: &str| entry.raw_fields.get(name).map(|v| v.trim()).filter(|v| !v.is_empty());
    let mut reject = |kind: IdentifierKind, value: &str| {
        notes.push(
            Finding::new(
                check::IDENTIFIER_FORMAT,
                Level::Info,
                format!("malformed {kind} `{value}` ignored"),
            )
            .with_context("the value does not match the identifier format or fails its check digit")
            .at(entry.location.clone())
            .for_reference(entry.key.clone()),
        );
    };

    if let Some(v) = field("doi") {
        match Doi::parse(v) {
            Some(d) => ids.doi = Some(d),
            None => reject(IdentifierKind::Doi, v),
        }
    }

    let archive = field("archiveprefix")
        .or_else(|| field("eprinttype"))
        .map(str::to_ascii_lowercase);
    if let Some(v) = field("eprint") {
        match archive.as_deref() {
            None | Some("arxiv") => match ArxivId::parse(v) {
                Some(a) => ids.arxiv = Some(a),
                None => reject(IdentifierKind::Arxiv, v),
            },
            Some("pubmed") => match Pmid::parse(v) {
                Some(p) => ids.pmid = Some(p),
                None => reject(IdentifierKind::Pmid, v),
            },
            Some(_) => {}
        }
    }
    if ids.arxiv.is_none() {
        if let Some(v) = field("arxiv").or_else(|| field("arxivid")) {
            match ArxivId::parse(v) {
                Some(a) => ids.arxiv = Some(a),
                None => reject(IdentifierKind::Arxiv, v),
            }
        }
    }
    if ids.pmid.is_none() {
        if let Some(v) = field("pmid") {
            match Pmid::parse(v) {
                Some(p) => ids.pmid = Some(p),
                None => reject(IdentifierKind::Pmid, v),
            }
        }
    }
    if let Some(v) = field("isbn") {
        // several ISBNs may be listed; keep the first valid one
        let first_valid = v
            .split([',', ';'])
            .find_map(Isbn::parse)
            .or_else(|| v.split_whitespace().find_map(Isbn::parse));
        match first_valid {
            Some(i) => ids.isbn = Some(i),
            None => reject(IdentifierKind::Isbn, v),
        }
    }
    if let Some(v) = field("lccn") {
        match Lccn::parse(v) {
            Some(l) => ids.lccn = Some(l),
            None => reject(IdentifierKind::Lccn, v),
        }
    }

    for name in ["url", "note", "howpublished"] {
        let Some(text) = field(name) else { continue };
        if ids.doi.is_none() {
            ids.doi = DOI_IN_TEXT.find_iter(text).find_map(|m| Doi::parse(m.as_str()));
        }
        if ids.arxiv.is_none() {
            ids.arxiv = ARXIV_IN_TEXT.captures_iter(text).find_map(|c| {
                let full = format!("{}{}", &c[1], c.get(2).map_or("", |v| v.as_str()));
                ArxivId::parse(&full)
            });
        }
        if ids.pmid.is_none() {
            ids.pmid = PMID_IN_TEXT
                .captures_iter(text)
                .find_map(|c| Pmid::parse(&c[1]));
        }
    }
    (ids, notes)
}

/// Compare every pair of records resolved from one entry's identifiers.
/// Each pair whose titles fall below [`CROSS_ID_TITLE_THRESHOLD`] counts
/// as one mismatch.
pub fn cross_id_consistency(
    resolved: &BTreeMap<IdentifierKind, CanonicalRecord>,
) -> (usize, Vec<Finding>) {
    let items: Vec<_> = resolved.iter().collect();
    let mut findings = Vec::new();
    for (i, (kind_a, rec_a)) in items.iter().enumerate() {
        for (kind_b, rec_b) in &items[i + 1..] {
            let sim = title_similarity(&rec_a.title, &rec_b.title);
            if sim < CROSS_ID_TITLE_THRESHOLD {
                findings.push(
                    Finding::new(
                        check::CROSS_ID_CONSISTENCY,
                        Level::Warning,
                        format!(
                            "{kind_a} resolves to \"{}\" but {kind_b} resolves to \"{}\"",
                            rec_a.title, rec_b.title
                        ),
                    )
                    .with_context(format!(
                        "identifiers in one entry should name the same work (title similarity {sim:.2} < {CROSS_ID_TITLE_THRESHOLD:.2})"
                    )),
                );
            }
        }
    }
    (findings.len(), findings)
}
