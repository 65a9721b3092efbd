//! Structural model of a LaTeX manuscript and its BibTeX bibliography.

mod bibtex;
mod latex;
pub mod names;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finding::{check, Finding, Level, Location};
use crate::identifiers::IdentifierSet;

pub use bibtex::{parse_bibtex, BibParse};
pub use latex::parse_latex;
pub use names::PersonName;

#[derive(Debug, Error)]
pub enum ManuscriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported input {0}: expected a .tex or .bib file (PDF input is not supported)")]
    UnsupportedInput(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Figure,
    Table,
    Section,
    Equation,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub key: String,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub label: String,
    pub kind: LabelKind,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossRef {
    pub label: String,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Figure {
    pub label: Option<String>,
    pub caption_present: bool,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Include {
    pub target: String,
    pub location: Location,
}

/// Citations, labels, cross-references and figures extracted from LaTeX.
///
/// `cite_keys` keeps document order and multiplicity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptModel {
    pub cite_keys: Vec<Citation>,
    pub labels: Vec<Label>,
    pub refs: Vec<CrossRef>,
    pub figures: Vec<Figure>,
    pub includes: Vec<Include>,
    /// Names given to `\bibliography{}` / `\addbibresource{}`.
    pub bibliographies: Vec<String>,
    /// Tool-limitation notes raised while parsing.
    pub notes: Vec<Finding>,
}

impl ManuscriptModel {
    pub fn label_set(&self) -> HashSet<&str> {
        self.labels.iter().map(|l| l.label.as_str()).collect()
    }

    pub fn ref_set(&self) -> HashSet<&str> {
        self.refs.iter().map(|r| r.label.as_str()).collect()
    }

    pub fn distinct_cite_keys(&self) -> BTreeSet<&str> {
        self.cite_keys.iter().map(|c| c.key.as_str()).collect()
    }

    /// Append another model (an `\input` file) after this one.
    pub fn extend(&mut self, other: ManuscriptModel) {
        self.cite_keys.extend(other.cite_keys);
        self.labels.extend(other.labels);
        self.refs.extend(other.refs);
        self.figures.extend(other.figures);
        self.includes.extend(other.includes);
        self.bibliographies.extend(other.bibliographies);
        self.notes.extend(other.notes);
    }
}

/// One parsed bibliography item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BibliographyEntry {
    pub key: String,
    pub entry_type: String,
    pub title: Option<String>,
    pub authors: Vec<PersonName>,
    pub year: Option<i32>,
    pub venue: Option<String>,
    /// Field values exactly as written, macros expanded, outer delimiters removed.
    pub raw_fields: std::collections::BTreeMap<String, String>,
    pub identifiers: IdentifierSet,
    pub location: Location,
}

impl BibliographyEntry {
    pub fn new(key: impl Into<String>, entry_type: impl Into<String>, location: Location) -> Self {
        Self {
            key: key.into(),
            entry_type: entry_type.into(),
            title: None,
            authors: Vec::new(),
            year: None,
            venue: None,
            raw_fields: Default::default(),
            identifiers: IdentifierSet::default(),
            location,
        }
    }

    pub fn first_author_family(&self) -> Option<&str> {
        self.authors.first().map(|a| a.family.as_str())
    }
}

/// Source text of one file, decoded.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
}

/// Read a text file as UTF-8, falling back to Latin-1 with an info note.
pub fn read_source(path: &Path) -> Result<(String, Option<Finding>), ManuscriptError> {
    let bytes = fs::read(path).map_err(|source| ManuscriptError::Io {
        path: path.to_owned(),
        source,
    })?;
    match String::from_utf8(bytes) {
        Ok(s) => Ok((s, None)),
        Err(e) => {
            let text: String = e.into_bytes().iter().map(|&b| b as char).collect();
            let check_id = if path.extension().is_some_and(|e| e == "bib") {
                check::BIB_PARSE
            } else {
                check::LATEX_PARSE
            };
            let note = Finding::new(check_id, Level::Info, "file is not valid UTF-8; decoded as Latin-1")
                .with_context("non-ASCII characters may be misread")
                .at(Location::new(path, 1));
            Ok((text, Some(note)))
        }
    }
}

pub fn ensure_extension(path: &Path, ext: &str) -> Result<(), ManuscriptError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case(ext) => Ok(()),
        _ => Err(ManuscriptError::UnsupportedInput(path.to_owned())),
    }
}

/// A manuscript loaded from disk with its `\input`/`\include` files.
#[derive(Debug, Clone)]
pub struct LoadedManuscript {
    pub model: ManuscriptModel,
    pub sources: Vec<SourceFile>,
}

const MAX_INCLUDE_DEPTH: usize = 8;

/// Parse the main file and follow `\input`/`\include`, resolving paths
/// relative to the main file's directory. Cycles are broken with a warning.
pub fn load_manuscript(main: &Path) -> Result<LoadedManuscript, ManuscriptError> {
    ensure_extension(main, "tex")?;
    let root_dir = main.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut loaded = LoadedManuscript {
        model: ManuscriptModel::default(),
        sources: Vec::new(),
    };
    let mut visited = HashSet::new();
    load_recursive(main, &root_dir, 0, &mut visited, &mut loaded)?;
    Ok(loaded)
}

fn load_recursive(
    path: &Path,
    root_dir: &Path,
    depth: usize,
    visited: &mut HashSet<PathBuf>,
    out: &mut LoadedManuscript,
) -> Result<(), ManuscriptError> {
    let canonical = fs::canonicalize(path).unwrap_or_else(|_| path.to_owned());
    visited.insert(canonical);
    let (text, note) = read_source(path)?;
    let mut model = parse_latex(&text, path);
    if let Some(n) = note {
        model.notes.push(n);
    }
    let includes = model.includes.clone();
    out.model.extend(model);
    out.sources.push(SourceFile {
        path: path.to_owned(),
        text,
    });

    for inc in includes {
        let Some(target) = resolve_include(root_dir, &inc.target) else {
            out.model.notes.push(
                Finding::new(
                    check::LATEX_PARSE,
                    Level::ToolLimitation,
                    format!("included file `{}` not found", inc.target),
                )
                .with_context("its citations and labels were not checked")
                .at(inc.location.clone()),
            );
            continue;
        };
        let canonical = fs::canonicalize(&target).unwrap_or_else(|_| target.clone());
        if visited.contains(&canonical) {
            out.model.notes.push(
                Finding::new(
                    check::LATEX_PARSE,
                    Level::Warning,
                    format!("include cycle: `{}` is already being processed", inc.target),
                )
                .with_context("the repeated include was skipped")
                .at(inc.location.clone()),
            );
            continue;
        }
        if depth + 1 > MAX_INCLUDE_DEPTH {
            out.model.notes.push(
                Finding::new(
                    check::LATEX_PARSE,
                    Level::ToolLimitation,
                    format!("include depth limit reached at `{}`", inc.target),
                )
                .at(inc.location.clone()),
            );
            continue;
        }
        load_recursive(&target, root_dir, depth + 1, visited, out)?;
    }
    Ok(())
}

fn resolve_include(root_dir: &Path, target: &str) -> Option<PathBuf> {
    let direct = root_dir.join(target);
    let with_ext = root_dir.join(format!("{target}.tex"));
    if Path::new(target).extension().is_none() && with_ext.is_file() {
        Some(with_ext)
    } else if direct.is_file() {
        Some(direct)
    } else {
        None
    }
}

/// Locate the bibliography file named by `\bibliography{}` next to the main file.
pub fn find_bibliography(main: &Path, model: &ManuscriptModel) -> Option<PathBuf> {
    let dir = main.parent().unwrap_or(Path::new(""));
    model.bibliographies.iter().find_map(|name| {
        let p = if name.ends_with(".bib") {
            dir.join(name)
        } else {
            dir.join(format!("{name}.bib"))
        };
        p.is_file().then_some(p)
    })
}

/// Load and parse a `.bib` file.
pub fn load_bibliography(path: &Path) -> Result<BibParse, ManuscriptError> {
    ensure_extension(path, "bib")?;
    let (text, note) = read_source(path)?;
    let mut parsed = parse_bibtex(&text, path);
    if let Some(n) = note {
        parsed.warnings.insert(0, n);
    }
    Ok(parsed)
}
