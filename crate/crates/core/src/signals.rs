//! Externally computed signals: claim scores, citation purposes, consistency
//! counts inside cited works, bibliography quality of cited works, and the
//! contribution axes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reliability::ConsistencyCounts;
use crate::score::{Axis, CitationPurpose};

pub const SIGNALS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SignalsError {
    #[error("cannot read signals file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid signals file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported signals schema version {0}")]
    Version(u32),
    #[error("signals for unknown reference key(s): {}", .0.join(", "))]
    UnknownReferences(Vec<String>),
    #[error("signal `{field}` for `{key}` must lie in [0, 1], got {value}")]
    OutOfRange { key: String, field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSignals {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<CitationPurpose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency_warnings: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency_errors: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversize: Option<bool>,
    /// Page count of the cited work; compared against the oversize threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bib_hallucination_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bib_metadata_mismatches: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bib_retractions: Option<u32>,
}

impl ReferenceSignals {
    pub fn consistency(&self) -> Option<ConsistencyCounts> {
        if self.consistency_warnings.is_none() && self.consistency_errors.is_none() {
            return None;
        }
        Some(ConsistencyCounts {
            warnings: self.consistency_warnings.unwrap_or(0),
            errors: self.consistency_errors.unwrap_or(0),
        })
    }

    pub fn is_oversize(&self, oversize_pages: u32) -> bool {
        self.oversize.unwrap_or(false) || self.page_count.is_some_and(|p| p > oversize_pages)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsFile {
    pub schema_version: u32,
    #[serde(default)]
    pub references: BTreeMap<String, ReferenceSignals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contribution: Option<BTreeMap<Axis, f64>>,
}

impl SignalsFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, SignalsError> {
        let s: SignalsFile = serde_json::from_str(text).map_err(|source| SignalsError::Parse {
            path: path.to_owned(),
            source,
        })?;
        if s.schema_version != SIGNALS_SCHEMA_VERSION {
            return Err(SignalsError::Version(s.schema_version));
        }
        s.validate_ranges()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SignalsError> {
        let text = fs::read_to_string(path).map_err(|source| SignalsError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    fn validate_ranges(&self) -> Result<(), SignalsError> {
        let unit = |key: &str, field: &'static str, v: Option<f64>| match v {
            Some(v) if !(0.0..=1.0).contains(&v) => Err(SignalsError::OutOfRange {
                key: key.to_owned(),
                field,
                value: v,
            }),
            _ => Ok(()),
        };
        for (key, r) in &self.references {
            unit(key, "claim_score", r.claim_score)?;
            unit(key, "bib_hallucination_rate", r.bib_hallucination_rate)?;
        }
        for (axis, v) in self.contribution.iter().flatten() {
            unit(axis.as_str(), "contribution", Some(*v))?;
        }
        Ok(())
    }

    /// Reject signals for keys that are not in the bibliography.
    pub fn check_keys(&self, bib_keys: &BTreeSet<&str>) -> Result<(), SignalsError> {
        let unknown: Vec<String> = self
            .references
            .keys()
            .filter(|k| !bib_keys.contains(k.as_str()))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(SignalsError::UnknownReferences(unknown))
        }
    }

    pub fn reference(&self, key: &str) -> Option<&ReferenceSignals> {
        self.references.get(key)
    }
}
