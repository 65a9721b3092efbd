//! Findings emitted by every check, and the registered check catalog.

use std::cmp::Ordering;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// A position in a source file. Lines are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub file: PathBuf,
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Location {
    pub fn new(file: impl Into<PathBuf>, line: usize) -> Self {
        debug_assert!(line >= 1, "lines are 1-based");
        Self {
            file: file.into(),
            line: line.max(1),
            column: None,
        }
    }

    pub fn with_column(mut self, column: usize) -> Self {
        self.column = Some(column);
        self
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file.display(), self.line)
    }
}

/// Severity of a finding.
///
/// `Info` and `ToolLimitation` describe the tool, not the manuscript, and
/// never enter the integrity score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Error,
    Warning,
    Info,
    ToolLimitation,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Error => "error",
            Level::Warning => "warning",
            Level::Info => "info",
            Level::ToolLimitation => "tool_limitation",
        }
    }

    /// Whether a finding at this level is evidence about the manuscript.
    pub fn is_manuscript_evidence(self) -> bool {
        matches!(self, Level::Error | Level::Warning)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "error" => Ok(Level::Error),
            "warning" | "warn" => Ok(Level::Warning),
            "info" => Ok(Level::Info),
            "tool_limitation" => Ok(Level::ToolLimitation),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

/// Registered check identifiers.
pub mod check {
    pub const DANGLING_CITE: &str = "dangling-cite";
    pub const DANGLING_REF: &str = "dangling-ref";
    pub const UNREFERENCED_FIGURE: &str = "unreferenced-figure";
    pub const REFERENCE_EXISTS: &str = "reference-exists";
    pub const REFERENCE_ACCURACY: &str = "reference-accuracy";
    pub const RETRACTED_CITE: &str = "retracted-cite";
    pub const REFERENCE_UNRELIABLE: &str = "reference-unreliable";
    pub const CROSS_ID_CONSISTENCY: &str = "cross-id-consistency";
    pub const LATEX_PARSE: &str = "latex-parse";
    pub const BIB_PARSE: &str = "bib-parse";
    pub const IDENTIFIER_FORMAT: &str = "identifier-format";
    pub const SIGNALS: &str = "signals";

    /// Every check id a finding may carry.
    pub const CATALOG: &[&str] = &[
        DANGLING_CITE,
        DANGLING_REF,
        UNREFERENCED_FIGURE,
        REFERENCE_EXISTS,
        REFERENCE_ACCURACY,
        RETRACTED_CITE,
        REFERENCE_UNRELIABLE,
        CROSS_ID_CONSISTENCY,
        LATEX_PARSE,
        BIB_PARSE,
        IDENTIFIER_FORMAT,
        SIGNALS,
    ];

    /// Checks that need registry access.
    pub const NETWORK: &[&str] = &[
        REFERENCE_EXISTS,
        REFERENCE_ACCURACY,
        RETRACTED_CITE,
        REFERENCE_UNRELIABLE,
        CROSS_ID_CONSISTENCY,
    ];

    pub fn is_registered(id: &str) -> bool {
        CATALOG.contains(&id)
    }
}

/// One check result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub check_id: String,
    pub level: Level,
    /// What was found.
    pub message: String,
    /// Why it matters, or supporting detail.
    #[serde(default)]
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_key: Option<String>,
}

impl Finding {
    pub fn new(check_id: &str, level: Level, message: impl Into<String>) -> Self {
        debug_assert!(check::is_registered(check_id), "unregistered check id {check_id}");
        Self {
            check_id: check_id.to_owned(),
            level,
            message: message.into(),
            context: String::new(),
            location: None,
            reference_key: None,
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = context.into();
        self
    }

    pub fn at(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    pub fn at_opt(mut self, location: Option<Location>) -> Self {
        self.location = location;
        self
    }

    pub fn for_reference(mut self, key: impl Into<String>) -> Self {
        self.reference_key = Some(key.into());
        self
    }
}

/// Stable order: file, then level (errors first), then line and check id.
/// Findings without a location go last.
pub fn compare_findings(a: &Finding, b: &Finding) -> Ordering {
    let file_key = |f: &Finding| {
        f.location
            .as_ref()
            .map(|l| (0u8, l.file.clone()))
            .unwrap_or((1, PathBuf::new()))
    };
    let pos_key = |f: &Finding| {
        f.location
            .as_ref()
            .map(|l| (l.line, l.column.unwrap_or(0)))
            .unwrap_or((0, 0))
    };
    file_key(a)
        .cmp(&file_key(b))
        .then_with(|| a.level.cmp(&b.level))
        .then_with(|| pos_key(a).cmp(&pos_key(b)))
        .then_with(|| a.check_id.cmp(&b.check_id))
        .then_with(|| a.reference_key.cmp(&b.reference_key))
        .then_with(|| a.message.cmp(&b.message))
}

pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(compare_findings);
}
