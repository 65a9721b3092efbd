//! Metadata degradation scenarios and the matching benchmark.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::finding::Location;
use crate::manuscript::{BibliographyEntry, PersonName};
use crate::matching::select_best_with;
use crate::registry::CanonicalRecord;
use crate::text::fold_diacritics;

/// Truncation depths, cycled across fixtures.
pub const TRUNCATION_PERCENTS: [usize; 3] = [20, 40, 60];

const WRONG_VENUES: &[&str] = &[
    "Journal of Applied Ichthyology",
    "Annals of Medieval Studies",
    "Quarterly Review of Soil Chemistry",
];

const VENUE_ABBREVIATIONS: &[(&str, &str)] = &[
    ("Proceedings", "Proc."),
    ("Journal", "J."),
    ("Conference", "Conf."),
    ("Transactions", "Trans."),
    ("International", "Int."),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Baseline with no mutation; not one of the seventeen.
    Identity,
    TruncateTitle,
    SwapTitleWords,
    DropOneAuthor,
    InitializeGivenNames,
    ReverseAuthorName,
    StripDiacritics,
    #[serde(rename = "year_off_by_1")]
    YearOffBy1,
    #[serde(rename = "year_off_by_3")]
    YearOffBy3,
    #[serde(rename = "year_off_by_7")]
    YearOffBy7,
    DropYear,
    DropVenue,
    WrongVenue,
    DropAllAuthors,
    #[serde(rename = "title_typo_1")]
    TitleTypo1,
    #[serde(rename = "title_typo_3")]
    TitleTypo3,
    AbbreviateVenue,
    DropTitleWord,
}

impl Scenario {
    pub const ALL: [Scenario; 17] = [
        Scenario::TruncateTitle,
        Scenario::SwapTitleWords,
        Scenario::DropOneAuthor,
        Scenario::InitializeGivenNames,
        Scenario::ReverseAuthorName,
        Scenario::StripDiacritics,
        Scenario::YearOffBy1,
        Scenario::YearOffBy3,
        Scenario::YearOffBy7,
        Scenario::DropYear,
        Scenario::DropVenue,
        Scenario::WrongVenue,
        Scenario::DropAllAuthors,
        Scenario::TitleTypo1,
        Scenario::TitleTypo3,
        Scenario::AbbreviateVenue,
        Scenario::DropTitleWord,
    ];

    /// 1..=17; the identity baseline is 0.
    pub fn id(self) -> usize {
        Self::ALL.iter().position(|s| *s == self).map_or(0, |i| i + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Identity => "identity",
            Scenario::TruncateTitle => "truncate_title",
            Scenario::SwapTitleWords => "swap_title_words",
            Scenario::DropOneAuthor => "drop_one_author",
            Scenario::InitializeGivenNames => "initialize_given_names",
            Scenario::ReverseAuthorName => "reverse_author_name",
            Scenario::StripDiacritics => "strip_diacritics",
            Scenario::YearOffBy1 => "year_off_by_1",
            Scenario::YearOffBy3 => "year_off_by_3",
            Scenario::YearOffBy7 => "year_off_by_7",
            Scenario::DropYear => "drop_year",
            Scenario::DropVenue => "drop_venue",
            Scenario::WrongVenue => "wrong_venue",
            Scenario::DropAllAuthors => "drop_all_authors",
            Scenario::TitleTypo1 => "title_typo_1",
            Scenario::TitleTypo3 => "title_typo_3",
            Scenario::AbbreviateVenue => "abbreviate_venue",
            Scenario::DropTitleWord => "drop_title_word",
        }
    }
}

/// The candidate set for one benchmark fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingFixture {
    pub truth: CanonicalRecord,
    pub decoys: Vec<CanonicalRecord>,
}

/// An identifier-less bibliography entry carrying the record's metadata.
pub fn entry_from_record(record: &CanonicalRecord, key: &str) -> BibliographyEntry {
    let mut e = BibliographyEntry::new(key, "article", Location::new("bench.bib", 1));
    e.title = Some(record.title.clone());
    e.authors = record.authors.clone();
    e.year = record.year;
    e.venue = record.venue.clone();
    e
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn typo(title: &str, n: usize, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = title.chars().collect();
    let letters: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_ascii_alphabetic()).collect();
    for &i in letters.choose_multiple(rng, n) {
        let old = chars[i].to_ascii_lowercase();
        let mut new = old;
        while new == old {
            new = char::from(b'a' + rng.random_range(0..26u8));
        }
        chars[i] = new;
    }
    chars.into_iter().collect()
}

fn initials(given: &str) -> String {
    given
        .split_whitespace()
        .filter_map(|t| t.chars().next())
        .map(|c| format!("{c}."))
        .collect::<Vec<_>>()
        .join(" ")
}

fn shift_year(e: &mut BibliographyEntry, by: i32, rng: &mut ChaCha8Rng) {
    let sign = if rng.random_bool(0.5) { 1 } else { -1 };
    e.year = e.year.map(|y| y + sign * by);
}

/// Apply one scenario. `fixture_index` picks the truncation depth.
pub fn degrade(
    entry: &BibliographyEntry,
    scenario: Scenario,
    fixture_index: usize,
    rng: &mut ChaCha8Rng,
) -> BibliographyEntry {
    let mut e = entry.clone();
    let title = e.title.clone().unwrap_or_default();
    let tw = words(&title);
    match scenario {
        Scenario::Identity => {}
        Scenario::TruncateTitle => {
            let pct = TRUNCATION_PERCENTS[fixture_index % TRUNCATION_PERCENTS.len()];
            let drop = (tw.len() * pct).div_ceil(100).min(tw.len().saturating_sub(1));
            e.title = Some(tw[..tw.len() - drop].join(" "));
        }
        Scenario::SwapTitleWords => {
            if tw.len() >= 2 {
                let i = rng.random_range(0..tw.len() - 1);
                let mut w = tw.clone();
                w.swap(i, i + 1);
                e.title = Some(w.join(" "));
            }
        }
        Scenario::DropOneAuthor => {
            if e.authors.len() >= 2 {
                let i = rng.random_range(0..e.authors.len());
                e.authors.remove(i);
            }
        }
        Scenario::InitializeGivenNames => {
            for a in &mut e.authors {
                a.given = a.given.as_deref().map(initials);
            }
        }
        Scenario::ReverseAuthorName => {
            let named: Vec<usize> = (0..e.authors.len()).filter(|&i| e.authors[i].given.is_some()).collect();
            if let Some(&i) = named.choose(rng) {
                let a = &e.authors[i];
                e.authors[i] = PersonName::new(a.given.clone().unwrap_or_default(), Some(&a.family));
            }
        }
        Scenario::StripDiacritics => {
            for a in &mut e.authors {
                a.family = fold_diacritics(&a.family);
                a.given = a.given.as_deref().map(fold_diacritics);
            }
        }
        Scenario::YearOffBy1 => shift_year(&mut e, 1, rng),
        Scenario::YearOffBy3 => shift_year(&mut e, 3, rng),
        Scenario::YearOffBy7 => shift_year(&mut e, 7, rng),
        Scenario::DropYear => e.year = None,
        Scenario::DropVenue => e.venue = None,
        Scenario::WrongVenue => {
            let v = WRONG_VENUES.choose(rng).copied().unwrap_or("Elsewhere");
            e.venue = Some(v.to_owned());
        }
        Scenario::DropAllAuthors => e.authors.clear(),
        Scenario::TitleTypo1 => e.title = Some(typo(&title, 1, rng)),
        Scenario::TitleTypo3 => e.title = Some(typo(&title, 3, rng)),
        Scenario::AbbreviateVenue => {
            e.venue = e.venue.as_deref().map(|v| {
                VENUE_ABBREVIATIONS
                    .iter()
                    .fold(v.to_owned(), |acc, (full, abbr)| acc.replace(full, abbr))
            });
        }
        Scenario::DropTitleWord => {
            if tw.len() >= 3 {
                let i = rng.random_range(1..tw.len());
                let mut w = tw.clone();
                w.remove(i);
                e.title = Some(w.join(" "));
            }
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: Scenario,
    pub fixture: usize,
    pub selected_correctly: bool,
    /// Composite of the selected candidate, if any cleared the threshold.
    pub composite: Option<f64>,
    /// Composite of the true record against the degraded entry.
    pub truth_composite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub id: usize,
    pub success_rate: f64,
    pub mean_truth_composite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub scenarios: Vec<ScenarioSummary>,
    /// Scenarios selected correctly per fixture, averaged over fixtures.
    pub mean_scenarios_correct: f64,
}

fn rng_for(seed: u64, fixture: usize, scenario: Scenario) -> ChaCha8Rng {
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((fixture as u64) << 8)
        .wrapping_add(scenario.id() as u64);
    ChaCha8Rng::seed_from_u64(mix)
}

/// Candidates in a seeded order so the truth is not always first.
fn candidates(fixture: &MatchingFixture, rng: &mut ChaCha8Rng) -> Vec<CanonicalRecord> {
    let mut all = fixture.decoys.clone();
    let at = rng.random_range(0..=all.len());
    all.insert(at, fixture.truth.clone());
    all
}

/// Degrade each fixture's true record under each scenario and select among
/// truth plus decoys.
pub fn run_matching_benchmark(
    fixtures: &[MatchingFixture],
    scenarios: &[Scenario],
    threshold: f64,
    seed: u64,
) -> BenchmarkReport {
    let mut rows: Vec<BenchmarkRow> = fixtures
        .par_iter()
        .enumerate()
        .flat_map_iter(|(fi, fx)| {
            let base = entry_from_record(&fx.truth, "bench");
            scenarios.iter().map(move |&sc| {
                let mut rng = rng_for(seed, fi, sc);
                let entry = degrade(&base, sc, fi, &mut rng);
                let cands = candidates(fx, &mut rng);
                let selected = select_best_with(&entry, &cands, threshold);
                BenchmarkRow {
                    scenario: sc,
                    fixture: fi,
                    selected_correctly: selected.as_ref().is_some_and(|m| m.record == fx.truth),
                    composite: selected.map(|m| m.score.composite),
                    truth_composite: crate::matching::score(&entry, &fx.truth).composite,
                }
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.scenario.id(), r.fixture));

    let mut by_scenario: BTreeMap<usize, (Scenario, usize, f64, usize)> = BTreeMap::new();
    for r in &rows {
        let s = by_scenario.entry(r.scenario.id()).or_insert((r.scenario, 0, 0.0, 0));
        s.1 += usize::from(r.selected_correctly);
        s.2 += r.truth_composite;
        s.3 += 1;
    }
    let summaries: Vec<ScenarioSummary> = by_scenario
        .into_iter()
        .map(|(id, (scenario, ok, comp, n))| ScenarioSummary {
            scenario,
            id,
            success_rate: ok as f64 / n as f64,
            mean_truth_composite: comp / n as f64,
        })
        .collect();
    let mean = if fixtures.is_empty() {
        0.0
    } else {
        rows.iter().filter(|r| r.selected_correctly && r.scenario != Scenario::Identity).count() as f64
            / fixtures.len() as f64
    };
    BenchmarkReport {
        rows,
        scenarios: summaries,
        mean_scenarios_correct: mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identifiers::IdentifierSet;
    use crate::matching::DEFAULT_MATCH_THRESHOLD;
    use crate::registry::RetractionStatus;

    fn record(title: &str, authors: &[(&str, &str)], year: i32, venue: &str) -> CanonicalRecord {
        CanonicalRecord {
            source: "fixture".into(),
            title: title.into(),
            authors: authors.iter().map(|(f, g)| PersonName::new(*f, Some(g))).collect(),
            year: Some(year),
            venue: Some(venue.into()),
            identifiers: IdentifierSet::default(),
            retraction: RetractionStatus::none(),
            work_type: None,
        }
    }

    fn fixture() -> MatchingFixture {
        MatchingFixture {
            truth: record(
                "Sparse spectral methods for turbulent boundary layer closure",
                &[("Núñez", "María José"), ("Okafor", "Chidi")],
                2014,
                "Journal of Computational Physics",
            ),
            decoys: vec![
                record("Adaptive meshing for viscous flows", &[("Núñez", "María José")], 2014, "Journal of Computational Physics"),
                record("Sparse spectral methods for image denoising", &[("Lee", "Ann")], 2016, "Pattern Recognition"),
            ],
        }
    }

    #[test]
    fn scenario_ids_are_one_to_seventeen() {
        let ids: Vec<usize> = Scenario::ALL.iter().map(|s| s.id()).collect();
        assert_eq!(ids, (1..=17).collect::<Vec<_>>());
        assert_eq!(Scenario::Identity.id(), 0);
    }

    #[test]
    fn each_mutation_touches_only_its_field() {
        let base = entry_from_record(&fixture().truth, "k");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for sc in Scenario::ALL {
            let d = degrade(&base, sc, 1, &mut rng);
            let title = d.title != base.title;
            let authors = d.authors != base.authors;
            let year = d.year != base.year;
            let venue = d.venue != base.venue;
            let expected = match sc {
                Scenario::TruncateTitle
                | Scenario::SwapTitleWords
                | Scenario::TitleTypo1
                | Scenario::TitleTypo3
                | Scenario::DropTitleWord => (true, false, false, false),
                Scenario::DropOneAuthor
                | Scenario::InitializeGivenNames
                | Scenario::ReverseAuthorName
                | Scenario::StripDiacritics
                | Scenario::DropAllAuthors => (false, true, false, false),
                Scenario::YearOffBy1 | Scenario::YearOffBy3 | Scenario::YearOffBy7 | Scenario::DropYear => {
                    (false, false, true, false)
                }
                Scenario::DropVenue | Scenario::WrongVenue | Scenario::AbbreviateVenue => (false, false, false, true),
                Scenario::Identity => unreachable!(),
            };
            assert_eq!((title, authors, year, venue), expected, "{sc:?}");
        }
    }

    #[test]
    fn identity_and_year_plateau() {
        let report = run_matching_benchmark(
            &[fixture()],
            &[Scenario::Identity, Scenario::YearOffBy1, Scenario::YearOffBy7],
            DEFAULT_MATCH_THRESHOLD,
            5,
        );
        let row = |s: Scenario| report.rows.iter().find(|r| r.scenario == s).unwrap().clone();
        assert!(row(Scenario::Identity).selected_correctly);
        assert_eq!(row(Scenario::Identity).composite, Some(1.0));
        assert!(row(Scenario::YearOffBy1).selected_correctly);
        assert_eq!(row(Scenario::YearOffBy1).composite, Some(1.0));
        let far = row(Scenario::YearOffBy7);
        assert!(!far.selected_correctly);
        assert_eq!(far.composite, None);
        assert_eq!(far.truth_composite, 0.0);
    }

    #[test]
    fn benchmark_is_deterministic() {
        let a = run_matching_benchmark(&[fixture(), fixture()], &Scenario::ALL, DEFAULT_MATCH_THRESHOLD, 9);
        let b = run_matching_benchmark(&[fixture(), fixture()], &Scenario::ALL, DEFAULT_MATCH_THRESHOLD, 9);
        assert_eq!(a, b);
    }
}
