//! Synthetic error injection and recall measurement for the text checks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::run_text_checks;
use crate::finding::{check, Finding, Level, Location};
use crate::manuscript::{parse_bibtex, parse_latex};

/// A LaTeX document with its bibliography, both held in memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TexDocument {
    pub name: String,
    pub tex: String,
    pub bib: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    FakeCite,
    BrokenRef,
}

impl InjectionKind {
    pub fn check_id(self) -> &'static str {
        match self {
            InjectionKind::FakeCite => check::DANGLING_CITE,
            InjectionKind::BrokenRef => check::DANGLING_REF,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InjectionKind::FakeCite => "fake_cite",
            InjectionKind::BrokenRef => "broken_ref",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub kind: InjectionKind,
    pub injected_token: String,
    pub location: Location,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injected {
    pub corpus: Vec<TexDocument>,
    pub truth: Vec<InjectionRecord>,
    /// Documents left unchanged because they offer no insertion point.
    pub skipped: Vec<String>,
}

/// Lint one in-memory document with the text checks.
pub fn lint_document(doc: &TexDocument) -> Vec<Finding> {
    let model = parse_latex(&doc.tex, Path::new(&doc.name));
    let bib = parse_bibtex(&doc.bib, Path::new(&format!("{}.bib", doc.name)));
    let keys: BTreeSet<&str> = bib.entries.iter().map(|e| e.key.as_str()).collect();
    run_text_checks(&model, &keys, |_| true)
}

/// Lines between `\begin{document}` and `\end{document}` holding plain prose:
/// not a command line, no comment, not inside a float or verbatim block.
fn insertion_lines(tex: &str) -> Vec<usize> {
    let mut in_body = !tex.contains("\\begin{document}");
    let mut depth = 0usize;
    let mut out = Vec::new();
    for (i, line) in tex.lines().enumerate() {
        let t = line.trim();
        if t.starts_with("\\begin{document}") {
            in_body = true;
            continue;
        }
        if t.starts_with("\\end{document}") {
            break;
        }
        if t.starts_with("\\begin{") {
            depth += 1;
        }
        if t.starts_with("\\end{") {
            depth = depth.saturating_sub(1);
            continue;
        }
        if in_body && depth == 0 && !t.is_empty() && !t.starts_with('\\') && !line.contains('%') {
            out.push(i);
        }
    }
    out
}

fn existing_tokens(doc: &TexDocument) -> BTreeSet<String> {
    let model = parse_latex(&doc.tex, Path::new(&doc.name));
    let bib = parse_bibtex(&doc.bib, Path::new("x.bib"));
    model
        .labels
        .iter()
        .map(|l| l.label.clone())
        .chain(model.refs.iter().map(|r| r.label.clone()))
        .chain(model.cite_keys.iter().map(|c| c.key.clone()))
        .chain(bib.entries.iter().map(|e| e.key.clone()))
        .collect()
}

fn fresh_token(rng: &mut ChaCha8Rng, kind: InjectionKind, taken: &BTreeSet<String>, source: &str) -> String {
    loop {
        let stem: String = (0..8)
            .map(|_| char::from(b'a' + rng.random_range(0..26u8)))
            .collect();
        let token = match kind {
            InjectionKind::FakeCite => format!("{stem}{}", rng.random_range(1990..2030)),
            InjectionKind::BrokenRef => format!("sec:{stem}"),
        };
        if !taken.contains(&token) && !source.contains(&token) {
            return token;
        }
    }
}

/// Insert `n_per_doc` errors into each document, alternating fake citations
/// and broken cross-references. Line numbers of the original text are kept.
pub fn inject_errors(corpus: &[TexDocument], n_per_doc: usize, seed: u64) -> Injected {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Injected::default();
    for doc in corpus {
        let points = insertion_lines(&doc.tex);
        if n_per_doc == 0 {
            out.corpus.push(doc.clone());
            continue;
        }
        if points.is_empty() {
            out.skipped.push(doc.name.clone());
            out.corpus.push(doc.clone());
            continue;
        }
        let mut taken = existing_tokens(doc);
        let mut lines: Vec<String> = doc.tex.lines().map(str::to_owned).collect();
        let mut chosen = points.clone();
        chosen.shuffle(&mut rng);
        for i in 0..n_per_doc {
            let kind = if i % 2 == 0 {
                InjectionKind::FakeCite
            } else {
                InjectionKind::BrokenRef
            };
            let line = chosen[i % chosen.len()];
            let token = fresh_token(&mut rng, kind, &taken, &doc.tex);
            taken.insert(token.clone());
            let snippet = match kind {
                InjectionKind::FakeCite => format!(" as shown by \\cite{{{token}}}"),
                InjectionKind::BrokenRef => format!(" (see Section~\\ref{{{token}}})"),
            };
            lines[line].push_str(&snippet);
            out.truth.push(InjectionRecord {
                kind,
                injected_token: token,
                location: Location::new(doc.name.as_str(), line + 1),
            });
        }
        let mut tex = lines.join("\n");
        if doc.tex.ends_with('\n') {
            tex.push('\n');
        }
        out.corpus.push(TexDocument {
            name: doc.name.clone(),
            tex,
            bib: doc.bib.clone(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindRecall {
    pub injected: usize,
    pub detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub injected: usize,
    pub detected: usize,
    /// Error and warning findings not explained by an injection.
    pub false_positives: usize,
    pub recall: f64,
    /// `None` when there are no findings to judge.
    pub precision: Option<f64>,
    pub per_kind: BTreeMap<InjectionKind, KindRecall>,
}

fn explains(record: &InjectionRecord, f: &Finding) -> bool {
    f.check_id == record.kind.check_id()
        && f.location.as_ref().is_some_and(|l| {
            l.file == record.location.file && l.line == record.location.line
        })
        && (f.reference_key.as_deref() == Some(record.injected_token.as_str())
            || f.message.contains(&format!("`{}`", record.injected_token)))
}

/// Match findings against the ground truth. Only error and warning findings
/// are judged.
pub fn measure_recall(findings: &[Finding], truth: &[InjectionRecord]) -> RecallReport {
    let judged: Vec<&Finding> = findings
        .iter()
        .filter(|f| matches!(f.level, Level::Error | Level::Warning))
        .collect();
    let mut per_kind: BTreeMap<InjectionKind, KindRecall> = BTreeMap::new();
    let mut detected = 0;
    for r in truth {
        let k = per_kind.entry(r.kind).or_default();
        k.injected += 1;
        if judged.iter().any(|f| explains(r, f)) {
            k.detected += 1;
            detected += 1;
        }
    }
    let true_positives = judged
        .iter()
        .filter(|f| truth.iter().any(|r| explains(r, f)))
        .count();
    let false_positives = judged.len() - true_positives;
    RecallReport {
        injected: truth.len(),
        detected,
        false_positives,
        recall: if truth.is_empty() {
            0.0
        } else {
            detected as f64 / truth.len() as f64
        },
        precision: (!judged.is_empty()).then(|| true_positives as f64 / judged.len() as f64),
        per_kind,
    }
}

/// Inject, lint every mutated document, and measure recall.
pub fn run_injection(corpus: &[TexDocument], n_per_doc: usize, seed: u64) -> (Injected, RecallReport) {
    let injected = inject_errors(corpus, n_per_doc, seed);
    let findings: Vec<Finding> = injected.corpus.iter().flat_map(lint_document).collect();
    let report = measure_recall(&findings, &injected.truth);
    (injected, report)
}
