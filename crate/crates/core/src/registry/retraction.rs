//! Local Retraction Watch snapshot.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime};

use chrono::NaiveDate;
use thiserror::Error;

use super::{RetractionKind, RetractionStatus};
use crate::identifiers::Doi;

pub const SNAPSHOT_FILE_NAME: &str = "retraction_watch.csv";

#[derive(Debug, Error)]
pub enum RetractionError {
    #[error("retraction snapshot not found at {0}")]
    Missing(PathBuf),
    #[error("cannot read retraction snapshot {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("retraction snapshot {path} lacks column `{column}`")]
    MissingColumn { path: PathBuf, column: &'static str },
}

#[derive(Debug, Default, Clone)]
pub struct RetractionIndex {
    by_doi: HashMap<Doi, RetractionStatus>,
    age: Option<Duration>,
}

fn severity(kind: RetractionKind) -> u8 {
    match kind {
        RetractionKind::None => 0,
        RetractionKind::ExpressionOfConcern => 1,
        RetractionKind::Retracted => 2,
    }
}

fn parse_nature(s: &str) -> RetractionKind {
    let s = s.trim().to_ascii_lowercase();
    if s == "retraction" || s == "retracted" {
        RetractionKind::Retracted
    } else if s.contains("concern") {
        RetractionKind::ExpressionOfConcern
    } else {
        RetractionKind::None
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let day = s.split_whitespace().next()?;
    NaiveDate::parse_from_str(day, "%m/%d/%Y")
        .or_else(|_| NaiveDate::parse_from_str(day, "%Y-%m-%d"))
        .ok()
}

fn clean_reason(s: &str) -> Option<String> {
    let parts: Vec<&str> = s
        .split(';')
        .map(|p| p.trim().trim_start_matches('+').trim())
        .filter(|p| !p.is_empty())
        .collect();
    (!parts.is_empty()).then(|| parts.join("; "))
}

impl RetractionIndex {
    pub fn from_reader<R: std::io::Read>(reader: R, path: &Path) -> Result<Self, RetractionError> {
        let csv_err = |source| RetractionError::Csv {
            path: path.to_owned(),
            source,
        };
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let col = |name: &'static str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or(RetractionError::MissingColumn {
                    path: path.to_owned(),
                    column: name,
                })
        };
        let doi_col = col("OriginalPaperDOI")?;
        let nature_col = col("RetractionNature")?;
        let date_col = col("RetractionDate").ok();
        let reason_col = col("Reason").ok();

        let mut by_doi: HashMap<Doi, RetractionStatus> = HashMap::new();
        for row in rdr.records() {
            let row = row.map_err(csv_err)?;
            let Some(doi) = row.get(doi_col).and_then(Doi::parse) else {
                continue;
            };
            let kind = parse_nature(row.get(nature_col).unwrap_or(""));
            if kind == RetractionKind::None {
                continue;
            }
            let status = RetractionStatus {
                kind,
                notice_date: date_col.and_then(|c| row.get(c)).and_then(parse_date),
                reason: reason_col.and_then(|c| row.get(c)).and_then(clean_reason),
            };
            match by_doi.get(&doi) {
                Some(prev) if severity(prev.kind) >= severity(kind) => {}
                _ => {
                    by_doi.insert(doi, status);
                }
            }
        }
        Ok(Self { by_doi, age: None })
    }

    pub fn load(path: &Path) -> Result<Self, RetractionError> {
        let file = File::open(path).map_err(|_| RetractionError::Missing(path.to_owned()))?;
        let age = file
            .metadata()
            .and_then(|m| m.modified())
            .ok()
            .and_then(|m| SystemTime::now().duration_since(m).ok());
        let mut index = Self::from_reader(file, path)?;
        index.age = age;
        Ok(index)
    }

    pub fn lookup(&self, doi: &Doi) -> RetractionStatus {
        self.by_doi.get(doi).cloned().unwrap_or_else(RetractionStatus::none)
    }

    pub fn len(&self) -> usize {
        self.by_doi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_doi.is_empty()
    }

    /// Time since the snapshot file was last modified.
    pub fn age(&self) -> Option<Duration> {
        self.age
    }

    pub fn age_days(&self) -> Option<u64> {
        self.age.map(|a| a.as_secs() / 86_400)
    }
}
