//! Seeded generators for the evaluation corpus and matching fixtures, and
//! their JSON persistence.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::degrade::MatchingFixture;
use super::inject::TexDocument;
use crate::identifiers::IdentifierSet;
use crate::manuscript::PersonName;
use crate::registry::{CanonicalRecord, RetractionStatus};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid fixture file {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

const TITLE_WORDS: &[&str] = &[
    "adaptive", "sparse", "spectral", "stochastic", "robust", "bayesian", "neural", "graph", "kernel",
    "variational", "convex", "distributed", "hierarchical", "latent", "causal", "temporal", "quantum",
    "protein", "genomic", "climate", "ocean", "seismic", "urban", "traffic", "market", "policy",
    "inference", "estimation", "learning", "optimization", "sampling", "segmentation", "retrieval",
    "forecasting", "alignment", "compression", "verification", "synthesis", "detection", "control",
    "networks", "models", "dynamics", "structure", "signals", "surfaces", "populations", "systems",
    "boundary", "turbulent", "cellular", "molecular", "regional", "multiscale", "nonparametric",
];

const FAMILIES: &[&str] = &[
    "Okafor", "Lindqvist", "Tanaka", "Moreau", "Kowalski", "Haddad", "Fischer", "Ramírez", "Nguyen",
    "O'Brien", "Petrov", "Sørensen", "Müller", "Brontë", "Øvergaard", "Çelik", "Dvořák", "Ibáñez",
    "Chatterjee", "Abernathy", "Wójcik", "Mendonça", "Kaczmarek", "Yilmaz", "Rossi",
];

/// Surnames with diacritics; every generated author list includes one.
const ACCENTED_FAMILIES: &[&str] = &["Ramírez", "Sørensen", "Müller", "Brontë", "Çelik", "Dvořák", "Ibáñez", "Wójcik", "Mendonça"];

const GIVENS: &[&str] = &[
    "Ana", "Björn", "Chidi", "Daniela", "Émile", "Farah", "Giulia", "Hiroshi", "Ingrid", "José Luis",
    "Katarzyna", "Lars", "María José", "Nikolai", "Olusegun", "Priya", "Renée", "Søren", "Tomás", "Yuki",
];

const VENUES: &[&str] = &[
    "Journal of Computational Physics",
    "Proceedings of the International Conference on Machine Learning",
    "Transactions on Signal Processing",
    "Journal of the Royal Statistical Society",
    "Proceedings of the National Conference on Hydrology",
    "International Journal of Remote Sensing",
    "Conference on Uncertainty in Artificial Intelligence",
    "Transactions on Pattern Analysis and Machine Intelligence",
];

fn title(rng: &mut ChaCha8Rng, len: usize) -> String {
    let w: Vec<&str> = TITLE_WORDS.choose_multiple(rng, len).copied().collect();
    let mut t = w.join(" ");
    if let Some(first) = t.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    t
}

fn authors(rng: &mut ChaCha8Rng, n: usize) -> Vec<PersonName> {
    let mut out = vec![PersonName::new(
        *ACCENTED_FAMILIES.choose(rng).expect("nonempty"),
        Some(GIVENS.choose(rng).expect("nonempty")),
    )];
    while out.len() < n {
        let p = PersonName::new(*FAMILIES.choose(rng).expect("nonempty"), Some(GIVENS.choose(rng).expect("nonempty")));
        if !out.iter().any(|a| a.family == p.family) {
            out.push(p);
        }
    }
    out.shuffle(rng);
    out
}

fn record(title: String, authors: Vec<PersonName>, year: i32, venue: &str) -> CanonicalRecord {
    CanonicalRecord {
        source: "fixture".into(),
        title,
        authors,
        year: Some(year),
        venue: Some(venue.to_owned()),
        identifiers: IdentifierSet::default(),
        retraction: RetractionStatus::none(),
        work_type: None,
    }
}

/// `n` fixtures, each a true record with nine decoys. Decoys share the
/// first author, the venue and year, or part of the title with the truth.
pub fn generate_matching_fixtures(n: usize, seed: u64) -> Vec<MatchingFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(7..=10);
            let n_auth = rng.random_range(2..=5);
            let year = rng.random_range(1995..=2022);
            let venue = *VENUES.choose(&mut rng).expect("nonempty");
            let truth = record(title(&mut rng, len), authors(&mut rng, n_auth), year, venue);
            let tw: Vec<String> = truth.title.split(' ').map(str::to_owned).collect();
            let decoys = (0..9)
                .map(|d| match d % 3 {
                    // same first author, unrelated title
                    0 => {
                        let mut a = authors(&mut rng, 3);
                        a[0] = truth.authors[0].clone();
                        let l = rng.random_range(6..=9);
                        record(title(&mut rng, l), a, year + rng.random_range(-2..=2), venue)
                    }
                    // same venue and year
                    1 => {
                        let l = rng.random_range(6..=9);
                        let a = rng.random_range(2..=4);
                        record(title(&mut rng, l), authors(&mut rng, a), year, venue)
                    }
                    // first half of the title in common
                    _ => {
                        let keep = tw.len() / 2;
                        let extra = title(&mut rng, tw.len() - keep).to_lowercase();
                        let t = format!("{} {extra}", tw[..keep].join(" "));
                        let a = rng.random_range(2..=4);
                        let v = *VENUES.choose(&mut rng).expect("nonempty");
                        record(t, authors(&mut rng, a), year + rng.random_range(-3..=3), v)
                    }
                })
                .collect();
            MatchingFixture { truth, decoys }
        })
        .collect()
}

/// `n` small, clean LaTeX documents with bibliographies. None produces a
/// text-check finding.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<TexDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let keys: Vec<String> = (0..6)
                .map(|k| {
                    let fam = FAMILIES[(i * 7 + k * 3) % FAMILIES.len()];
                    let stem: String = fam.chars().filter(char::is_ascii_alphabetic).collect::<String>().to_lowercase();
                    format!("{stem}{}{}", 2000 + rng.random_range(0..24), char::from(b'a' + k as u8))
                })
                .collect();
            let mut bib = String::new();
            for k in &keys {
                let len = rng.random_range(5..=8);
                let _ = writeln!(
                    bib,
                    "@article{{{k},\n  title = {{{}}},\n  author = {{{} and {}}},\n  journal = {{{}}},\n  year = {{{}}}\n}}\n",
                    title(&mut rng, len),
                    FAMILIES.choose(&mut rng).expect("nonempty"),
                    FAMILIES.choose(&mut rng).expect("nonempty"),
                    VENUES.choose(&mut rng).expect("nonempty"),
                    rng.random_range(1995..=2023)
                );
            }
            let mut tex = String::from("\\documentclass{article}\n\\usepackage{graphicx}\n\\begin{document}\n");
            let sections = ["intro", "method", "results", "discussion"];
            for (s, name) in sections.iter().enumerate() {
                let _ = writeln!(tex, "\\section{{{}}}\\label{{sec:{name}}}", name.to_uppercase());
                for p in 0..3 {
                    let key = &keys[(s * 3 + p) % keys.len()];
                    let words = title(&mut rng, 8).to_lowercase();
                    let _ = writeln!(tex, "The {words} approach follows prior work \\cite{{{key}}}.");
                    let back = sections[(s + p) % sections.len()];
                    let _ = writeln!(tex, "Details appear in Section~\\ref{{sec:{back}}} of this paper.");
                }
                if s == 2 {
                    tex.push_str("Figure~\\ref{fig:main} summarizes the outcome.\n");
                    tex.push_str("\\begin{figure}\n\\centering\n\\caption{Main result.}\n\\label{fig:main}\n\\end{figure}\n");
                }
                tex.push('\n');
            }
            tex.push_str("\\bibliographystyle{plain}\n\\bibliography{refs}\n\\end{document}\n");
            TexDocument {
                name: format!("doc{:02}.tex", i + 1),
                tex,
                bib,
            }
        })
        .collect()
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FixtureError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FixtureError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, FixtureError> {
    let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FixtureError::Json {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::inject::lint_document;

    #[test]
    fn corpus_is_clean_and_seeded() {
        let corpus = generate_corpus(4, 11);
        assert_eq!(corpus, generate_corpus(4, 11));
        for doc in &corpus {
            assert_eq!(lint_document(doc), vec![], "{}", doc.name);
        }
    }

    #[test]
    fn fixtures_have_nine_decoys_and_accented_authors() {
        let fx = generate_matching_fixtures(3, 2);
        for f in &fx {
            assert_eq!(f.decoys.len(), 9);
            assert!(f.truth.authors.iter().any(|a| !a.family.is_ascii()));
            assert!(f.decoys.iter().all(|d| d.title != f.truth.title));
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fx.json");
        let fx = generate_matching_fixtures(2, 3);
        save_json(&p, &fx).unwrap();
        let back: Vec<MatchingFixture> = load_json(&p).unwrap();
        assert_eq!(back, fx);
    }
}
