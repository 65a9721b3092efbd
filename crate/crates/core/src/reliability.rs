//! Per-reference reliability and the reference-level findings.
//!
//! All arithmetic runs on integer millionths so results are exact; the
//! hallucination rate is the only real-valued input and is rounded to the
//! nearest millionth first.

use serde::{Deserialize, Serialize};

use crate::finding::{check, Finding, Level, Location};
use crate::manuscript::BibliographyEntry;
use crate::matching::{author_overlap, title_similarity, venue_signal};
use crate::registry::{CanonicalRecord, RetractionKind, RetractionStatus};

pub const DEFAULT_TITLE_ERROR_THRESHOLD: f64 = 0.80;
pub const DEFAULT_UNRELIABLE_THRESHOLD: f64 = 0.5;
/// Author overlap below this counts as an author mismatch.
pub const AUTHOR_MISMATCH_THRESHOLD: f64 = 0.5;

const UNIT: i64 = 1_000_000;
const BASE_T1: i64 = 900_000;
const BASE_T2: i64 = 700_000;
const BASE_T3: i64 = 300_000;
const PER_METADATA_MISMATCH: i64 = 100_000;
const PER_CROSS_ID_MISMATCH: i64 = 100_000;
const NON_FORMAL: i64 = 200_000;
const PER_CONSISTENCY_WARNING: i64 = 50_000;
const PER_CONSISTENCY_ERROR: i64 = 100_000;
const PER_BIB_MISMATCH: i64 = 50_000;
const PER_BIB_RETRACTION: i64 = 150_000;
const BIB_CAP: i64 = 300_000;

/// Work types treated as non-formal documents.
const NON_FORMAL_TYPES: &[&str] = &[
    "news",
    "newspaper-article",
    "magazine-article",
    "blog",
    "blog-post",
    "webpage",
    "web-page",
    "website",
    "guide",
    "online",
];

const NON_FORMAL_ENTRY_TYPES: &[&str] = &["online", "www", "webpage", "electronic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerificationTier {
    /// Registry-verified with full text available locally.
    T1,
    /// Registry-verified.
    T2,
    /// Not found in any registry.
    T3,
    /// A registry could not answer.
    #[serde(rename = "unverifiable")]
    Unverifiable,
}

impl VerificationTier {
    pub fn as_str(self) -> &'static str {
        match self {
            VerificationTier::T1 => "T1",
            VerificationTier::T2 => "T2",
            VerificationTier::T3 => "T3",
            VerificationTier::Unverifiable => "unverifiable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyCounts {
    pub warnings: u32,
    pub errors: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBreakdown {
    pub tier: VerificationTier,
    pub retraction: RetractionStatus,
    pub metadata_mismatches: u32,
    pub cross_id_mismatches: u32,
    pub non_formal: bool,
    /// Consistency findings inside the cited work, when assessed.
    pub consistency: Option<ConsistencyCounts>,
    pub oversize: bool,
    pub bib_hallucination_rate: Option<f64>,
    pub bib_metadata_mismatches: u32,
    pub bib_retractions: u32,
    /// `None` when the tier is unverifiable.
    pub score: Option<f64>,
}

impl ReliabilityBreakdown {
    pub fn new(tier: VerificationTier) -> Self {
        Self {
            tier,
            retraction: RetractionStatus::none(),
            metadata_mismatches: 0,
            cross_id_mismatches: 0,
            non_formal: false,
            consistency: None,
            oversize: false,
            bib_hallucination_rate: None,
            bib_metadata_mismatches: 0,
            bib_retractions: 0,
            score: None,
        }
    }

    /// Fill in `score` from the other fields.
    pub fn scored(mut self) -> Self {
        self.score = reliability(&self);
        self
    }
}

fn to_real(micros: i64) -> f64 {
    micros as f64 / UNIT as f64
}

fn clamp_unit(micros: i64) -> i64 {
    micros.clamp(0, UNIT)
}

pub fn metadata_micros(b: &ReliabilityBreakdown) -> Option<i64> {
    let base = match b.tier {
        VerificationTier::T1 => BASE_T1,
        VerificationTier::T2 => BASE_T2,
        VerificationTier::T3 => BASE_T3,
        VerificationTier::Unverifiable => return None,
    };
    let mut m = base
        - PER_METADATA_MISMATCH * i64::from(b.metadata_mismatches)
        - PER_CROSS_ID_MISMATCH * i64::from(b.cross_id_mismatches);
    if b.non_formal {
        m -= NON_FORMAL;
    }
    match b.retraction.kind {
        RetractionKind::ExpressionOfConcern => m = m * 3 / 10,
        RetractionKind::Retracted => m = 0,
        RetractionKind::None => {}
    }
    Some(clamp_unit(m))
}

pub fn consistency_micros(b: &ReliabilityBreakdown) -> Option<i64> {
    if b.oversize {
        return Some(UNIT);
    }
    let c = b.consistency?;
    Some(clamp_unit(
        UNIT - PER_CONSISTENCY_WARNING * i64::from(c.warnings)
            - PER_CONSISTENCY_ERROR * i64::from(c.errors),
    ))
}

/// Hallucination rate in millionths, clamped to [0, 1].
pub fn rate_micros(rate: f64) -> i64 {
    if rate.is_nan() {
        return 0;
    }
    clamp_unit((rate * UNIT as f64).round() as i64)
}

pub fn reliability_micros(b: &ReliabilityBreakdown) -> Option<i64> {
    let metadata = metadata_micros(b)?;
    if b.retraction.kind == RetractionKind::Retracted {
        return Some(0);
    }
    let blended = match consistency_micros(b) {
        Some(c) => (6 * c + 4 * metadata) / 10,
        None => metadata,
    };
    let deductions = b.bib_hallucination_rate.map_or(0, rate_micros).min(BIB_CAP)
        + (PER_BIB_MISMATCH * i64::from(b.bib_metadata_mismatches)).min(BIB_CAP)
        + (PER_BIB_RETRACTION * i64::from(b.bib_retractions)).min(BIB_CAP);
    Some(clamp_unit(blended - deductions))
}

pub fn metadata_score(b: &ReliabilityBreakdown) -> Option<f64> {
    metadata_micros(b).map(to_real)
}

pub fn consistency_score(b: &ReliabilityBreakdown) -> Option<f64> {
    consistency_micros(b).map(to_real)
}

/// R(r) in [0, 1]; `None` for unverifiable references.
pub fn reliability(b: &ReliabilityBreakdown) -> Option<f64> {
    reliability_micros(b).map(to_real)
}

/// One field that disagrees between the bibliography and the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub field: String,
    pub entry: String,
    pub registry: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataComparison {
    pub title_sim: f64,
    pub diffs: Vec<FieldDiff>,
}

impl MetadataComparison {
    pub fn mismatches(&self) -> u32 {
        self.diffs.len() as u32
    }
}

fn names(list: &[crate::manuscript::names::PersonName]) -> String {
    list.iter()
        .map(|n| n.family.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Field-level comparison. A field only disagrees when both sides carry it.
pub fn compare_metadata(
    entry: &BibliographyEntry,
    record: &CanonicalRecord,
    title_error_threshold: f64,
) -> MetadataComparison {
    let mut diffs = Vec::new();
    let title_sim = entry
        .title
        .as_deref()
        .map_or(1.0, |t| title_similarity(t, &record.title));
    if let Some(t) = &entry.title {
        if title_sim < title_error_threshold {
            diffs.push(FieldDiff {
                field: "title".into(),
                entry: t.clone(),
                registry: record.title.clone(),
            });
        }
    }
    if !entry.authors.is_empty()
        && !record.authors.is_empty()
        && author_overlap(&entry.authors, &record.authors) < AUTHOR_MISMATCH_THRESHOLD
    {
        diffs.push(FieldDiff {
            field: "author".into(),
            entry: names(&entry.authors),
            registry: names(&record.authors),
        });
    }
    if let (Some(a), Some(b)) = (entry.year, record.year) {
        if (a - b).abs() >= 2 {
            diffs.push(FieldDiff {
                field: "year".into(),
                entry: a.to_string(),
                registry: b.to_string(),
            });
        }
    }
    if let (Some(a), Some(b)) = (&entry.venue, &record.venue) {
        if venue_signal(Some(a), Some(b)) < 1.0 {
            diffs.push(FieldDiff {
                field: "venue".into(),
                entry: a.clone(),
                registry: b.clone(),
            });
        }
    }
    MetadataComparison { title_sim, diffs }
}

/// News, blog posts, web pages, and guides.
pub fn is_non_formal(entry: &BibliographyEntry, record: Option<&CanonicalRecord>) -> bool {
    let entry_type = entry.entry_type.to_ascii_lowercase();
    NON_FORMAL_ENTRY_TYPES.contains(&entry_type.as_str())
        || record
            .and_then(|r| r.work_type.as_deref())
            .is_some_and(|t| NON_FORMAL_TYPES.contains(&t.to_ascii_lowercase().as_str()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceThresholds {
    pub title_error: f64,
    pub unreliable: f64,
}

impl Default for ReferenceThresholds {
    fn default() -> Self {
        Self {
            title_error: DEFAULT_TITLE_ERROR_THRESHOLD,
            unreliable: DEFAULT_UNRELIABLE_THRESHOLD,
        }
    }
}

fn describe_retraction(status: &RetractionStatus) -> String {
    let mut parts = Vec::new();
    if let Some(d) = status.notice_date {
        parts.push(format!("notice dated {d}"));
    }
    if let Some(r) = &status.reason {
        parts.push(format!("reason: {r}"));
    }
    parts.join("; ")
}

/// Findings for one verified or missing reference. Unverifiable references
/// produce nothing here; the pipeline reports them as tool limitations.
pub fn emit_reference_findings(
    key: &str,
    location: &Location,
    comparison: Option<&MetadataComparison>,
    b: &ReliabilityBreakdown,
    thresholds: &ReferenceThresholds,
) -> Vec<Finding> {
    let mut out = Vec::new();
    let finding = |id: &str, level: Level, message: String| {
        Finding::new(id, level, message)
            .at(location.clone())
            .for_reference(key)
    };
    match b.tier {
        VerificationTier::Unverifiable => return out,
        VerificationTier::T3 => out.push(
            finding(
                check::REFERENCE_EXISTS,
                Level::Error,
                format!("reference `{key}` was not found in any registry"),
            )
            .with_context(
                "searched OpenAlex, CrossRef, Semantic Scholar, Open Library, and the Library of Congress by identifier and by title",
            ),
        ),
        VerificationTier::T1 | VerificationTier::T2 => {}
    }

    if let Some(cmp) = comparison.filter(|c| !c.diffs.is_empty()) {
        let level = if cmp.title_sim < thresholds.title_error {
            Level::Error
        } else {
            Level::Warning
        };
        let diff = cmp
            .diffs
            .iter()
            .map(|d| format!("{}: \"{}\" vs registry \"{}\"", d.field, d.entry, d.registry))
            .collect::<Vec<_>>()
            .join("; ");
        out.push(
            finding(
                check::REFERENCE_ACCURACY,
                level,
                format!("metadata for `{key}` differs from the registry record ({diff})"),
            )
            .with_context(format!("title similarity {:.2}", cmp.title_sim)),
        );
    }

    match b.retraction.kind {
        RetractionKind::Retracted => out.push(
            finding(
                check::RETRACTED_CITE,
                Level::Error,
                format!("reference `{key}` has been retracted"),
            )
            .with_context(describe_retraction(&b.retraction)),
        ),
        RetractionKind::ExpressionOfConcern => out.push(
            finding(
                check::RETRACTED_CITE,
                Level::Warning,
                format!("reference `{key}` carries an expression of concern"),
            )
            .with_context(describe_retraction(&b.retraction)),
        ),
        RetractionKind::None => {}
    }

    if let Some(score) = b.score.filter(|s| *s < thresholds.unreliable) {
        out.push(
            finding(
                check::REFERENCE_UNRELIABLE,
                Level::Warning,
                format!("reference `{key}` has low reliability ({score:.2})"),
            )
            .with_context(format!(
                "tier {}, {} metadata mismatch(es), {} cross-identifier mismatch(es){}",
                b.tier.as_str(),
                b.metadata_mismatches,
                b.cross_id_mismatches,
                if b.non_formal { ", non-formal source" } else { "" }
            )),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manuscript::names::PersonName;
    use proptest::prelude::*;

    fn bd(tier: VerificationTier) -> ReliabilityBreakdown {
        ReliabilityBreakdown::new(tier)
    }

    #[test]
    fn metadata_examples() {
        assert_eq!(metadata_score(&bd(VerificationTier::T1)), Some(0.9));
        let mut b = bd(VerificationTier::T2);
        b.metadata_mismatches = 2;
        assert_eq!(metadata_score(&b), Some(0.5));
        let mut b = bd(VerificationTier::T1);
        b.retraction = RetractionStatus::expression_of_concern(None, None);
        assert_eq!(metadata_score(&b), Some(0.27));
        b.retraction = RetractionStatus::retracted(None, None);
        b.metadata_mismatches = 0;
        assert_eq!(metadata_score(&b), Some(0.0));
        assert_eq!(metadata_score(&bd(VerificationTier::Unverifiable)), None);
    }

    #[test]
    fn consistency_examples() {
        let mut b = bd(VerificationTier::T2);
        assert_eq!(consistency_score(&b), None);
        b.consistency = Some(ConsistencyCounts { warnings: 2, errors: 1 });
        assert_eq!(consistency_score(&b), Some(0.8));
        b.oversize = true;
        assert_eq!(consistency_score(&b), Some(1.0));
    }

    #[test]
    fn reliability_examples() {
        // metadata 0.7 (T2), consistency 0.9 (2 warnings)
        let mut b = bd(VerificationTier::T2);
        b.consistency = Some(ConsistencyCounts { warnings: 2, errors: 0 });
        assert_eq!(reliability(&b), Some(0.82));

        let mut b = bd(VerificationTier::T1);
        b.bib_hallucination_rate = Some(0.5);
        assert_eq!(reliability(&b), Some(0.6));

        let mut b = bd(VerificationTier::T1);
        b.consistency = Some(ConsistencyCounts { warnings: 0, errors: 0 });
        // 0.6 * 1.0 + 0.4 * 0.9
        assert_eq!(reliability(&b), Some(0.96));
    }

    fn entry() -> BibliographyEntry {
        let mut e = BibliographyEntry::new("smith2015", "article", Location::new("refs.bib", 3));
        e.title = Some("Deep residual learning for image recognition".into());
        e.authors = vec![PersonName::new("He", Some("Kaiming")), PersonName::new("Zhang", Some("Xiangyu"))];
        e.year = Some(2015);
        e.venue = Some("CVPR".into());
        e
    }

    fn record() -> CanonicalRecord {
        CanonicalRecord {
            source: "test".into(),
            title: "Deep Residual Learning for Image Recognition".into(),
            authors: vec![PersonName::new("He", Some("Kaiming")), PersonName::new("Zhang", Some("Xiangyu"))],
            year: Some(2016),
            venue: Some("CVPR".into()),
            identifiers: Default::default(),
            retraction: RetractionStatus::none(),
            work_type: Some("article".into()),
        }
    }

    #[test]
    fn year_off_by_one_is_not_a_mismatch_but_three_is() {
        let cmp = compare_metadata(&entry(), &record(), 0.8);
        assert_eq!(cmp.mismatches(), 0);
        let mut r = record();
        r.year = Some(2018);
        let cmp = compare_metadata(&entry(), &r, 0.8);
        assert_eq!(cmp.mismatches(), 1);
        assert_eq!(cmp.diffs[0].field, "year");

        let b = ReliabilityBreakdown {
            metadata_mismatches: 1,
            ..bd(VerificationTier::T2)
        }
        .scored();
        let f = emit_reference_findings("smith2015", &Location::new("refs.bib", 3), Some(&cmp), &b, &Default::default());
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].check_id, check::REFERENCE_ACCURACY);
        assert_eq!(f[0].level, Level::Warning);
        assert!(f[0].message.contains("year: \"2015\" vs registry \"2018\""));
    }

    #[test]
    fn wrong_title_is_an_error() {
        let mut r = record();
        r.title = "A completely different paper about protein folding".into();
        let cmp = compare_metadata(&entry(), &r, 0.8);
        let b = ReliabilityBreakdown {
            metadata_mismatches: cmp.mismatches(),
            ..bd(VerificationTier::T2)
        }
        .scored();
        let f = emit_reference_findings("k", &Location::new("refs.bib", 1), Some(&cmp), &b, &Default::default());
        assert_eq!(f[0].level, Level::Error);
    }

    #[test]
    fn retracted_converges_with_unreliable() {
        let b = ReliabilityBreakdown {
            retraction: RetractionStatus::retracted(None, Some("Fabrication".into())),
            ..bd(VerificationTier::T2)
        }
        .scored();
        assert_eq!(b.score, Some(0.0));
        let f = emit_reference_findings("k", &Location::new("refs.bib", 1), None, &b, &Default::default());
        let ids: Vec<_> = f.iter().map(|f| (f.check_id.as_str(), f.level)).collect();
        assert_eq!(
            ids,
            [(check::RETRACTED_CITE, Level::Error), (check::REFERENCE_UNRELIABLE, Level::Warning)]
        );
    }

    #[test]
    fn missing_reference_is_an_error() {
        let b = bd(VerificationTier::T3).scored();
        let f = emit_reference_findings("k", &Location::new("refs.bib", 1), None, &b, &Default::default());
        assert_eq!(f[0].check_id, check::REFERENCE_EXISTS);
        assert_eq!(f[0].level, Level::Error);
        assert!(emit_reference_findings(
            "k",
            &Location::new("refs.bib", 1),
            None,
            &bd(VerificationTier::Unverifiable),
            &Default::default()
        )
        .is_empty());
    }

    #[test]
    fn non_formal_detection() {
        let mut r = record();
        r.work_type = Some("blog-post".into());
        assert!(is_non_formal(&entry(), Some(&r)));
        let mut e = entry();
        e.entry_type = "online".into();
        assert!(is_non_formal(&e, None));
        assert!(!is_non_formal(&entry(), Some(&record())));
    }

    fn arb_breakdown() -> impl Strategy<Value = ReliabilityBreakdown> {
        (
            prop_oneof![
                Just(VerificationTier::T1),
                Just(VerificationTier::T2),
                Just(VerificationTier::T3)
            ],
            0u32..6,
            0u32..4,
            any::<bool>(),
            prop::option::of((0u32..25, 0u32..12)),
            any::<bool>(),
            prop::option::of(0.0f64..=1.0),
            0u32..10,
            0u32..4,
            0u8..3,
        )
            .prop_map(|(tier, mm, cx, nf, cons, over, rate, bm, br, ret)| ReliabilityBreakdown {
                tier,
                retraction: match ret {
                    0 => RetractionStatus::none(),
                    1 => RetractionStatus::expression_of_concern(None, None),
                    _ => RetractionStatus::retracted(None, None),
                },
                metadata_mismatches: mm,
                cross_id_mismatches: cx,
                non_formal: nf,
                consistency: cons.map(|(warnings, errors)| ConsistencyCounts { warnings, errors }),
                oversize: over,
                bib_hallucination_rate: rate,
                bib_metadata_mismatches: bm,
                bib_retractions: br,
                score: None,
            })
    }

    proptest! {
        #[test]
        fn clamped_and_retraction_dominates(b in arb_breakdown()) {
            let r = reliability(&b).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            if b.retraction.is_retracted() {
                prop_assert_eq!(r, 0.0);
            }
        }

        #[test]
        fn deductions_never_raise_score(b in arb_breakdown(), which in 0u8..8) {
            let before = reliability_micros(&b).unwrap();
            let mut worse = b.clone();
            match which {
                0 => worse.metadata_mismatches += 1,
                1 => worse.cross_id_mismatches += 1,
                2 => worse.non_formal = true,
                3 => if let Some(c) = worse.consistency.as_mut() { c.warnings += 1 },
                4 => if let Some(c) = worse.consistency.as_mut() { c.errors += 1 },
                5 => worse.bib_metadata_mismatches += 1,
                6 => worse.bib_retractions += 1,
                _ => if worse.retraction.kind == RetractionKind::None {
                    worse.retraction = RetractionStatus::expression_of_concern(None, None)
                },
            }
            prop_assert!(reliability_micros(&worse).unwrap() <= before);
        }

        #[test]
        fn blend_boundary(b in arb_breakdown()) {
            let mut b = b;
            b.consistency = None;
            b.oversize = false;
            if !b.retraction.is_retracted() {
                let m = metadata_micros(&b).unwrap();
                let d = b.bib_hallucination_rate.map_or(0, rate_micros).min(300_000)
                    + (50_000 * i64::from(b.bib_metadata_mismatches)).min(300_000)
                    + (150_000 * i64::from(b.bib_retractions)).min(300_000);
                prop_assert_eq!(reliability_micros(&b).unwrap(), (m - d).clamp(0, 1_000_000));
            }
        }
    }
}
