//! Deterministic text checks over the manuscript model.

use std::collections::BTreeSet;

use crate::finding::{check, sort_findings, Finding, Level};
use crate::manuscript::ManuscriptModel;
use crate::matching::levenshtein;

/// Suggestions are offered within this edit distance.
const SUGGESTION_DISTANCE: usize = 2;

fn closest<'a>(token: &str, candidates: &BTreeSet<&'a str>) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (levenshtein(token, c), *c))
        .filter(|(d, _)| *d <= SUGGESTION_DISTANCE)
        .min()
        .map(|(_, c)| c)
}

/// `\cite` keys without a bibliography entry, one finding per occurrence.
pub fn dangling_cites(model: &ManuscriptModel, bib_keys: &BTreeSet<&str>) -> Vec<Finding> {
    model
        .cite_keys
        .iter()
        .filter(|c| c.key != "*" && !bib_keys.contains(c.key.as_str()))
        .map(|c| {
            let f = Finding::new(
                check::DANGLING_CITE,
                Level::Error,
                format!("citation key `{}` has no bibliography entry", c.key),
            )
            .at(c.location.clone())
            .for_reference(c.key.clone());
            match closest(&c.key, bib_keys) {
                Some(s) => f.with_context(format!("did you mean `{s}`?")),
                None => f.with_context("no entry with this key exists in the bibliography"),
            }
        })
        .collect()
}

/// Cross-references to labels that are never defined.
pub fn dangling_refs(model: &ManuscriptModel) -> Vec<Finding> {
    let labels: BTreeSet<&str> = model.labels.iter().map(|l| l.label.as_str()).collect();
    model
        .refs
        .iter()
        .filter(|r| !labels.contains(r.label.as_str()))
        .map(|r| {
            let f = Finding::new(
                check::DANGLING_REF,
                Level::Error,
                format!("reference to undefined label `{}`", r.label),
            )
            .at(r.location.clone());
            match closest(&r.label, &labels) {
                Some(s) => f.with_context(format!("did you mean `{s}`?")),
                None => f.with_context("no \\label with this name exists"),
            }
        })
        .collect()
}

/// Labeled figures that are never cross-referenced.
pub fn unreferenced_figures(model: &ManuscriptModel) -> Vec<Finding> {
    let refs = model.ref_set();
    model
        .figures
        .iter()
        .filter_map(|fig| {
            let label = fig.label.as_deref()?;
            (!refs.contains(label)).then(|| {
                Finding::new(
                    check::UNREFERENCED_FIGURE,
                    Level::Warning,
                    format!("figure `{label}` is never referenced in the text"),
                )
                .with_context("every figure should be discussed where the reader needs it")
                .at(fig.location.clone())
            })
        })
        .collect()
}

/// Run the enabled text checks and return sorted findings.
pub fn run_text_checks(
    model: &ManuscriptModel,
    bib_keys: &BTreeSet<&str>,
    enabled: impl Fn(&str) -> bool,
) -> Vec<Finding> {
    let mut out = Vec::new();
    if enabled(check::DANGLING_CITE) {
        out.extend(dangling_cites(model, bib_keys));
    }
    if enabled(check::DANGLING_REF) {
        out.extend(dangling_refs(model));
    }
    if enabled(check::UNREFERENCED_FIGURE) {
        out.extend(unreferenced_figures(model));
    }
    sort_findings(&mut out);
    out
}
