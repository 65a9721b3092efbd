//! End-to-end check: parse, text checks, reference verification, reliability,
//! and the score.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checks::run_text_checks;
use crate::config::Config;
use crate::finding::{check, sort_findings, Finding, Level, Location};
use crate::identifiers::{cross_id_consistency, IdentifierKind};
use crate::manuscript::{
    find_bibliography, load_bibliography, load_manuscript, BibliographyEntry, ManuscriptError,
};
use crate::matching::{select_best_with, MatchScore};
use crate::registry::replay::ReplayTransport;
use crate::registry::retraction::{RetractionIndex, SNAPSHOT_FILE_NAME};
use crate::registry::transport::{HttpTransport, Transport, DEFAULT_MAX_RESPONSE_BYTES};
use crate::registry::{CanonicalRecord, ExternalId, Gateway, GatewayOptions, Lookup, RetractionKind, RetractionStatus};
use crate::reliability::{
    compare_metadata, emit_reference_findings, is_non_formal, FieldDiff, ReferenceThresholds,
    ReliabilityBreakdown, VerificationTier,
};
use crate::score::{score_manuscript, ContributionProfile, ReferenceAssessment, ScoreError, ScoreReport};
use crate::signals::{SignalsError, SignalsFile};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERRORS: i32 = 1;
pub const EXIT_WARNINGS: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// At most this many keys are listed in an aggregated tool-limitation finding.
const LISTED_KEYS: usize = 20;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manuscript(#[from] ManuscriptError),
    #[error(transparent)]
    Signals(#[from] SignalsError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("invalid PDF manifest {path}: {reason}")]
    PdfManifest { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct CheckInput {
    pub main: PathBuf,
    pub bib: Option<PathBuf>,
    pub signals: Option<SignalsFile>,
    /// Bibliography keys with a local full-text copy.
    pub pdf_manifest: BTreeMap<String, PathBuf>,
}

/// External services available to a run.
pub struct Services {
    /// `None` disables registry access; `gateway_note` says why.
    pub gateway: Option<Gateway>,
    pub gateway_note: Option<String>,
    pub retractions: Result<RetractionIndex, String>,
}

/// Directory of recorded registry responses inside the cache.
pub const REPLAY_DIR_NAME: &str = "replay";
/// Environment variable holding an optional Semantic Scholar API key.
pub const S2_API_KEY_ENV_VAR: &str = "SEMANTIC_SCHOLAR_API_KEY";

impl Services {
    /// Offline runs replay recorded responses from the cache; online runs
    /// query the registries and record every response there.
    pub fn from_config(config: &Config, offline: bool) -> Self {
        Self::from_cache(config, &config.resolve_cache_dir(), offline)
    }

    pub fn from_cache(config: &Config, cache: &Path, offline: bool) -> Self {
        let retractions = RetractionIndex::load(&cache.join(SNAPSHOT_FILE_NAME)).map_err(|e| e.to_string());
        let replay_dir = cache.join(REPLAY_DIR_NAME);
        let options = GatewayOptions {
            requests_per_second: config.rate_limit_rps,
            parallelism: config.parallelism,
            mailto: config.mailto.clone(),
            s2_api_key: std::env::var(S2_API_KEY_ENV_VAR).ok().filter(|k| !k.is_empty()),
            ..GatewayOptions::default()
        };
        let transport: Result<Box<dyn Transport>, String> = if offline {
            if replay_dir.is_dir() {
                Ok(Box::new(ReplayTransport::replay(&replay_dir)))
            } else {
                Err(format!("offline mode and no recorded responses in {}", replay_dir.display()))
            }
        } else {
            let agent = match &config.mailto {
                Some(m) => format!("sciwrite-lint/{} (mailto:{m})", env!("CARGO_PKG_VERSION")),
                None => format!("sciwrite-lint/{}", env!("CARGO_PKG_VERSION")),
            };
            HttpTransport::new(&agent, DEFAULT_MAX_RESPONSE_BYTES)
                .map(|http| Box::new(ReplayTransport::record(&replay_dir, Box::new(http))) as Box<dyn Transport>)
                .map_err(|e| e.to_string())
        };
        let (gateway, gateway_note) = match transport.and_then(|t| Gateway::new(t, options).map_err(|e| e.to_string())) {
            Ok(g) => (Some(g), None),
            Err(note) => (None, Some(note)),
        };
        Services {
            gateway,
            gateway_note,
            retractions,
        }
    }
}

/// Load a `{key: path}` JSON manifest. Relative paths are relative to the
/// manifest's directory.
pub fn load_pdf_manifest(path: &Path) -> Result<BTreeMap<String, PathBuf>, PipelineError> {
    let err = |reason: String| PipelineError::PdfManifest {
        path: path.to_owned(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let raw: BTreeMap<String, PathBuf> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(raw
        .into_iter()
        .map(|(k, p)| {
            let p = if p.is_relative() { base.join(p) } else { p };
            (k, p)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub source: String,
    pub title: String,
    pub year: Option<i32>,
    pub doi: Option<String>,
}

impl From<&CanonicalRecord> for RecordSummary {
    fn from(r: &CanonicalRecord) -> Self {
        Self {
            source: r.source.clone(),
            title: r.title.clone(),
            year: r.year,
            doi: r.identifiers.doi.as_ref().map(|d| d.as_str().to_owned()),
        }
    }
}

/// Verification result for one bibliography entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub key: String,
    pub location: Location,
    /// How the record was found: an identifier kind or `search`.
    pub resolved_by: Option<String>,
    pub record: Option<RecordSummary>,
    pub match_score: Option<MatchScore>,
    pub metadata_diffs: Vec<FieldDiff>,
    pub breakdown: ReliabilityBreakdown,
    /// Why verification could not complete.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub findings: Vec<Finding>,
    pub references: Vec<ReferenceReport>,
    pub report: ScoreReport,
    pub exit_code: i32,
}

pub fn exit_code(findings: &[Finding], fail_on_warnings: bool) -> i32 {
    if findings.iter().any(|f| f.level == Level::Error) {
        EXIT_ERRORS
    } else if fail_on_warnings && findings.iter().any(|f| f.level == Level::Warning) {
        EXIT_WARNINGS
    } else {
        EXIT_CLEAN
    }
}

enum Resolution {
    Found {
        record: CanonicalRecord,
        by: String,
        score: Option<MatchScore>,
    },
    NotFound,
    Failed(String),
}

struct Resolved {
    resolution: Resolution,
    by_kind: BTreeMap<IdentifierKind, CanonicalRecord>,
    unresolved_ids: Vec<(IdentifierKind, String)>,
    id_failures: usize,
}

fn id_kind_name(kind: IdentifierKind) -> &'static str {
    match kind {
        IdentifierKind::Doi => "doi",
        IdentifierKind::Arxiv => "arxiv",
        IdentifierKind::Pmid => "pmid",
        IdentifierKind::Isbn => "isbn",
        IdentifierKind::Lccn => "lccn",
    }
}

/// Identifier lookups, then title search for entries no identifier resolved.
fn resolve_entries(entries: &[&BibliographyEntry], gateway: Option<&Gateway>, note: &str, config: &Config) -> Vec<Resolved> {
    let Some(gw) = gateway else {
        return entries
            .iter()
            .map(|e| Resolved {
                resolution: Resolution::Failed(note.to_owned()),
                by_kind: BTreeMap::new(),
                unresolved_ids: Vec::new(),
                id_failures: e.identifiers.kinds().len(),
            })
            .collect();
    };
    let dois: Vec<_> = entries.iter().filter_map(|e| e.identifiers.doi.clone()).collect();
    let externals: Vec<ExternalId> = entries
        .iter()
        .flat_map(|e| ExternalId::from_set(&e.identifiers))
        .collect();
    let doi_results = if dois.is_empty() { BTreeMap::new() } else { gw.resolve_dois(&dois) };
    let ext_results = if externals.is_empty() {
        BTreeMap::new()
    } else {
        gw.resolve_external(&externals)
    };

    let mut out: Vec<Resolved> = entries
        .iter()
        .map(|e| {
            let mut by_kind = BTreeMap::new();
            let mut unresolved_ids = Vec::new();
            let mut failures = Vec::new();
            let mut lookups: Vec<(IdentifierKind, String, Option<&Lookup>)> = Vec::new();
            if let Some(d) = &e.identifiers.doi {
                lookups.push((IdentifierKind::Doi, d.to_string(), doi_results.get(d)));
            }
            for ext in ExternalId::from_set(&e.identifiers) {
                let value = e.identifiers.value(ext.kind()).unwrap_or_default();
                lookups.push((ext.kind(), value, ext_results.get(&ext)));
            }
            for (kind, value, lookup) in lookups {
                match lookup {
                    Some(Lookup::Found(r)) => {
                        by_kind.insert(kind, r.clone());
                    }
                    Some(Lookup::NotFound) => unresolved_ids.push((kind, value)),
                    Some(Lookup::Failed(reason)) => failures.push(reason.clone()),
                    None => failures.push(format!("{kind} `{value}` was not looked up")),
                }
            }
            let primary = e
                .identifiers
                .kinds()
                .into_iter()
                .find_map(|k| by_kind.get(&k).map(|r| (k, r.clone())));
            let resolution = match primary {
                Some((k, record)) => Resolution::Found {
                    record,
                    by: id_kind_name(k).to_owned(),
                    score: None,
                },
                None => match failures.first() {
                    Some(reason) => Resolution::Failed(reason.clone()),
                    None => Resolution::NotFound,
                },
            };
            Resolved {
                resolution,
                by_kind,
                unresolved_ids,
                id_failures: failures.len(),
            }
        })
        .collect();

    // title search for everything no identifier resolved
    let pending: Vec<usize> = out
        .iter()
        .enumerate()
        .filter(|(_, r)| !matches!(r.resolution, Resolution::Found { .. }))
        .map(|(i, _)| i)
        .collect();
    let searchable: Vec<usize> = pending
        .iter()
        .copied()
        .filter(|&i| Gateway::search_query(entries[i]).is_some())
        .collect();
    let queries: Vec<&BibliographyEntry> = searchable.iter().map(|&i| entries[i]).collect();
    let results = gw.search_all(&queries);
    for (&i, result) in searchable.iter().zip(results) {
        let had_failure = matches!(out[i].resolution, Resolution::Failed(_));
        out[i].resolution = match result {
            Ok(candidates) => match select_best_with(entries[i], &candidates, config.match_threshold) {
                Some(m) => Resolution::Found {
                    record: m.record,
                    by: "search".into(),
                    score: Some(m.score),
                },
                None if had_failure => std::mem::replace(&mut out[i].resolution, Resolution::NotFound),
                None => Resolution::NotFound,
            },
            Err(e) => Resolution::Failed(e.to_string()),
        };
    }
    for &i in &pending {
        if !searchable.contains(&i) && entries[i].identifiers.is_empty() {
            out[i].resolution = Resolution::Failed("entry has neither a title nor an identifier to look up".into());
        }
    }
    out
}

fn tool_limitation(check_id: &str, message: String, keys: &[&str]) -> Finding {
    let mut listed: Vec<&str> = keys.iter().take(LISTED_KEYS).copied().collect();
    if keys.len() > LISTED_KEYS {
        listed.push("...");
    }
    Finding::new(check_id, Level::ToolLimitation, message)
        .with_context(format!("affected references: {}", listed.join(", ")))
}

/// Run every enabled check on one manuscript.
pub fn run_check(input: &CheckInput, config: &Config, services: &Services) -> Result<CheckOutcome, PipelineError> {
    let loaded = load_manuscript(&input.main)?;
    let model = &loaded.model;
    let mut findings: Vec<Finding> = model.notes.clone();

    let bib_path = input.bib.clone().or_else(|| find_bibliography(&input.main, model));
    let entries: Vec<BibliographyEntry> = match &bib_path {
        Some(p) => {
            let parsed = load_bibliography(p)?;
            findings.extend(parsed.warnings);
            parsed.entries
        }
        None => {
            if !model.cite_keys.is_empty() {
                findings.push(
                    Finding::new(check::BIB_PARSE, Level::Warning, "no bibliography file found")
                        .with_context("pass --bib or add \\bibliography{...} to the manuscript"),
                );
            }
            Vec::new()
        }
    };
    let bib_keys: BTreeSet<&str> = entries.iter().map(|e| e.key.as_str()).collect();
    if let Some(s) = &input.signals {
        s.check_keys(&bib_keys)?;
    }

    let cited = model.distinct_cite_keys();
    let cite_all = cited.contains("*");
    let to_verify: Vec<&BibliographyEntry> = entries
        .iter()
        .filter(|e| cite_all || cited.contains(e.key.as_str()))
        .collect();
    let network_wanted = check::NETWORK.iter().any(|id| config.is_enabled(id)) && !to_verify.is_empty();

    let note = services
        .gateway_note
        .clone()
        .unwrap_or_else(|| "registry access is disabled".into());
    let (text_findings, resolved) = std::thread::scope(|s| {
        let text = s.spawn(|| run_text_checks(model, &bib_keys, |id| config.is_enabled(id)));
        let resolved = if network_wanted {
            resolve_entries(&to_verify, services.gateway.as_ref(), &note, config)
        } else {
            Vec::new()
        };
        (text.join().expect("text checks do not panic"), resolved)
    });
    findings.extend(text_findings);

    let thresholds = ReferenceThresholds {
        title_error: config.title_error_threshold,
        unreliable: config.unreliable_threshold,
    };
    let mut references = Vec::new();
    let mut unverifiable: Vec<(&str, String)> = Vec::new();
    let mut cross_id_degraded: Vec<&str> = Vec::new();
    for (entry, res) in to_verify.iter().zip(&resolved) {
        let signals = input.signals.as_ref().and_then(|s| s.reference(&entry.key));
        let (tier, record, by, score, failure) = match &res.resolution {
            Resolution::Found { record, by, score } => {
                let t1 = input.pdf_manifest.get(&entry.key).is_some_and(|p| p.is_file());
                let tier = if t1 { VerificationTier::T1 } else { VerificationTier::T2 };
                (tier, Some(record), Some(by.clone()), *score, None)
            }
            Resolution::NotFound => (VerificationTier::T3, None, None, None, None),
            Resolution::Failed(reason) => {
                unverifiable.push((entry.key.as_str(), reason.clone()));
                (VerificationTier::Unverifiable, None, None, None, Some(reason.clone()))
            }
        };
        if entry.identifiers.kinds().len() >= 2 && res.id_failures > 0 {
            cross_id_degraded.push(&entry.key);
        }

        let mut retraction = record.map(|r| r.retraction.clone()).unwrap_or_else(RetractionStatus::none);
        if let Ok(index) = &services.retractions {
            for doi in [entry.identifiers.doi.as_ref(), record.and_then(|r| r.identifiers.doi.as_ref())]
                .into_iter()
                .flatten()
            {
                retraction.merge(&index.lookup(doi));
            }
        }

        let comparison = record.map(|r| compare_metadata(entry, r, config.title_error_threshold));
        let (cross_id_mismatches, cross_findings) = if res.by_kind.len() >= 2 {
            cross_id_consistency(&res.by_kind)
        } else {
            (0, Vec::new())
        };
        let mut breakdown = ReliabilityBreakdown {
            retraction,
            metadata_mismatches: comparison.as_ref().map_or(0, |c| c.mismatches()),
            cross_id_mismatches: cross_id_mismatches as u32,
            non_formal: is_non_formal(entry, record),
            ..ReliabilityBreakdown::new(tier)
        };
        if let Some(sig) = signals {
            breakdown.consistency = sig.consistency();
            breakdown.oversize = sig.is_oversize(config.oversize_pages);
            breakdown.bib_hallucination_rate = sig.bib_hallucination_rate;
            breakdown.bib_metadata_mismatches = sig.bib_metadata_mismatches.unwrap_or(0);
            breakdown.bib_retractions = sig.bib_retractions.unwrap_or(0);
        }
        let breakdown = breakdown.scored();

        findings.extend(emit_reference_findings(
            &entry.key,
            &entry.location,
            comparison.as_ref(),
            &breakdown,
            &thresholds,
        ));
        // a retraction notice is evidence even when the registries were unreachable
        if tier == VerificationTier::Unverifiable && breakdown.retraction.kind != RetractionKind::None {
            let mut b = breakdown.clone();
            b.tier = VerificationTier::T2;
            b.score = None;
            findings.extend(
                emit_reference_findings(&entry.key, &entry.location, None, &b, &thresholds)
                    .into_iter()
                    .filter(|f| f.check_id == check::RETRACTED_CITE),
            );
        }
        findings.extend(cross_findings.into_iter().map(|f| {
            f.at(entry.location.clone()).for_reference(entry.key.clone())
        }));
        if matches!(res.resolution, Resolution::Found { .. }) {
            for (kind, value) in &res.unresolved_ids {
                findings.push(
                    Finding::new(
                        check::REFERENCE_ACCURACY,
                        Level::Warning,
                        format!("{kind} `{value}` of `{}` does not resolve in any registry", entry.key),
                    )
                    .with_context("the work was found by its other metadata; the identifier is likely wrong")
                    .at(entry.location.clone())
                    .for_reference(entry.key.clone()),
                );
            }
        }

        references.push(ReferenceReport {
            key: entry.key.clone(),
            location: entry.location.clone(),
            resolved_by: by,
            record: record.map(RecordSummary::from),
            match_score: score,
            metadata_diffs: comparison.map(|c| c.diffs).unwrap_or_default(),
            breakdown,
            failure,
        });
    }

    if !unverifiable.is_empty() {
        let keys: Vec<&str> = unverifiable.iter().map(|(k, _)| *k).collect();
        let reason = &unverifiable[0].1;
        for id in [check::REFERENCE_EXISTS, check::REFERENCE_ACCURACY, check::REFERENCE_UNRELIABLE] {
            findings.push(tool_limitation(
                id,
                format!("{} reference(s) could not be verified ({reason})", keys.len()),
                &keys,
            ));
        }
    }
    if !cross_id_degraded.is_empty() {
        findings.push(tool_limitation(
            check::CROSS_ID_CONSISTENCY,
            format!(
                "identifiers of {} reference(s) could not all be resolved",
                cross_id_degraded.len()
            ),
            &cross_id_degraded,
        ));
    }
    if network_wanted {
        match &services.retractions {
            Err(reason) => {
                let keys: Vec<&str> = to_verify.iter().map(|e| e.key.as_str()).collect();
                findings.push(tool_limitation(
                    check::RETRACTED_CITE,
                    format!("retraction snapshot unavailable ({reason}); only registry retraction flags were checked"),
                    &keys,
                ));
            }
            Ok(index) => {
                if let Some(days) = index.age_days().filter(|d| *d > config.snapshot_max_age_days) {
                    findings.push(
                        Finding::new(
                            check::RETRACTED_CITE,
                            Level::Info,
                            format!("retraction snapshot is {days} days old"),
                        )
                        .with_context("download a fresh Retraction Watch export into the cache directory"),
                    );
                }
            }
        }
    }

    let mut findings: Vec<Finding> = findings
        .into_iter()
        .filter(|f| config.is_enabled(&f.check_id))
        .map(|mut f| {
            if f.level != Level::ToolLimitation {
                f.level = config.level_for(&f.check_id, f.level);
            }
            f
        })
        .collect();
    sort_findings(&mut findings);

    let per_reference: Vec<ReferenceAssessment> = references
        .iter()
        .filter_map(|r| {
            let reliability = r.breakdown.score?;
            let sig = input.signals.as_ref().and_then(|s| s.reference(&r.key));
            Some(ReferenceAssessment {
                key: r.key.clone(),
                purpose: sig.and_then(|s| s.purpose),
                claim_score: sig.and_then(|s| s.claim_score),
                reliability,
            })
        })
        .collect();
    let profile = input
        .signals
        .as_ref()
        .and_then(|s| s.contribution.clone())
        .map(|axes| ContributionProfile {
            axes,
            beta: config.beta.clone(),
        });
    let report = score_manuscript(&findings, per_reference, profile.as_ref())?;
    let exit_code = exit_code(&findings, config.fail_on_warnings);
    Ok(CheckOutcome {
        findings,
        references,
        report,
        exit_code,
    })
}
