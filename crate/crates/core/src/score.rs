//! The SciLint score: integrity × weighted referencing quality × contribution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finding::{Finding, Level};

/// Default per-axis contribution weight.
pub const DEFAULT_BETA: f64 = 0.2;
pub const BOLD_PROBLEM_SOLVING_BELOW: f64 = 0.1;
pub const BOLD_PROGRESSIVENESS_ABOVE: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("contribution axes and weights disagree: {0}")]
    AxisMismatch(String),
    #[error("{what} must lie in [0, 1], got {value}")]
    OutOfRange { what: String, value: f64 },
    #[error("contribution weights must be nonnegative and sum to at most 1, got sum {0}")]
    BadBeta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationPurpose {
    Evidence,
    Contrast,
    Method,
    Definition,
    Example,
    Attribution,
    Tool,
    Context,
}

impl CitationPurpose {
    pub const ALL: [CitationPurpose; 8] = [
        CitationPurpose::Evidence,
        CitationPurpose::Contrast,
        CitationPurpose::Method,
        CitationPurpose::Definition,
        CitationPurpose::Example,
        CitationPurpose::Attribution,
        CitationPurpose::Tool,
        CitationPurpose::Context,
    ];

    pub fn weight(self) -> f64 {
        match self {
            CitationPurpose::Evidence => 1.0,
            CitationPurpose::Contrast => 0.9,
            CitationPurpose::Method => 0.8,
            CitationPurpose::Definition => 0.7,
            CitationPurpose::Example => 0.6,
            CitationPurpose::Attribution => 0.5,
            CitationPurpose::Tool => 0.4,
            CitationPurpose::Context => 0.2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CitationPurpose::Evidence => "evidence",
            CitationPurpose::Contrast => "contrast",
            CitationPurpose::Method => "method",
            CitationPurpose::Definition => "definition",
            CitationPurpose::Example => "example",
            CitationPurpose::Attribution => "attribution",
            CitationPurpose::Tool => "tool",
            CitationPurpose::Context => "context",
        }
    }
}

impl FromStr for CitationPurpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown citation purpose `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAssessment {
    pub key: String,
    pub purpose: Option<CitationPurpose>,
    /// Claim verification score V; `None` when claims were not checked.
    pub claim_score: Option<f64>,
    /// Reliability R.
    pub reliability: f64,
}

impl ReferenceAssessment {
    pub fn weight(&self) -> f64 {
        self.purpose.map_or(1.0, CitationPurpose::weight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Empirical,
    Progressiveness,
    Unification,
    ProblemSolving,
    Severity,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::Empirical,
        Axis::Progressiveness,
        Axis::Unification,
        Axis::ProblemSolving,
        Axis::Severity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Empirical => "empirical",
            Axis::Progressiveness => "progressiveness",
            Axis::Unification => "unification",
            Axis::ProblemSolving => "problem_solving",
            Axis::Severity => "severity",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn default_beta() -> BTreeMap<Axis, f64> {
    Axis::ALL.into_iter().map(|a| (a, DEFAULT_BETA)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionProfile {
    pub axes: BTreeMap<Axis, f64>,
    pub beta: BTreeMap<Axis, f64>,
}

impl ContributionProfile {
    pub fn new(axes: BTreeMap<Axis, f64>) -> Self {
        Self {
            axes,
            beta: default_beta(),
        }
    }

    /// Axes in the order empirical, progressiveness, unification,
    /// problem_solving, severity.
    pub fn from_values(values: [f64; 5]) -> Self {
        Self::new(Axis::ALL.into_iter().zip(values).collect())
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let axes: Vec<Axis> = self.axes.keys().copied().collect();
        let betas: Vec<Axis> = self.beta.keys().copied().collect();
        if axes != betas {
            return Err(ScoreError::AxisMismatch(format!(
                "axes {{{}}} vs weights {{{}}}",
                axes.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", "),
                betas.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        for (a, v) in &self.axes {
            check_unit(&format!("axis {a}"), *v)?;
        }
        let sum: f64 = self.beta.values().sum();
        if self.beta.values().any(|b| b.is_nan() || *b < 0.0) || sum > 1.0 + 1e-9 {
            return Err(ScoreError::BadBeta(sum));
        }
        Ok(())
    }

    fn axis(&self, a: Axis) -> f64 {
        self.axes.get(&a).copied().unwrap_or(0.0)
    }
}

fn check_unit(what: &str, value: f64) -> Result<(), ScoreError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ScoreError::OutOfRange {
            what: what.to_owned(),
            value,
        })
    }
}

/// Fraction of manuscript findings that are not errors. Info and
/// tool-limitation findings are ignored.
pub fn integrity(findings: &[Finding]) -> f64 {
    let evidence: Vec<&Finding> = findings
        .iter()
        .filter(|f| f.level.is_manuscript_evidence())
        .collect();
    if evidence.is_empty() {
        return 1.0;
    }
    let errors = evidence.iter().filter(|f| f.level == Level::Error).count();
    (evidence.len() - errors) as f64 / evidence.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencingQuality {
    pub value: f64,
    /// Sum of purpose weights; low totals mean the paper cites without arguing.
    pub weight_sum: f64,
    /// False when there were no scorable references; `value` is then 1.0.
    pub applicable: bool,
}

/// Sum in sorted order so the result does not depend on reference order.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().fold(0.0, |a, b| a + b)
}

/// Σ w·V·R / Σ w. Missing purpose weighs 1.0; missing V counts as 1.0.
pub fn referencing_quality(assessments: &[ReferenceAssessment]) -> ReferencingQuality {
    let weight_sum = sorted_sum(assessments.iter().map(ReferenceAssessment::weight).collect());
    if assessments.is_empty() || weight_sum <= 0.0 {
        return ReferencingQuality {
            value: 1.0,
            weight_sum,
            applicable: false,
        };
    }
    let weighted = sorted_sum(
        assessments
            .iter()
            .map(|a| a.weight() * a.claim_score.unwrap_or(1.0) * a.reliability)
            .collect(),
    );
    ReferencingQuality {
        value: (weighted / weight_sum).clamp(0.0, 1.0),
        weight_sum,
        applicable: true,
    }
}

/// Contribution dampening for bold claims, in [0.50, 0.75].
pub fn bold_damp(progressiveness: f64) -> f64 {
    (0.75 - 0.5 * (progressiveness - 0.5)).clamp(0.50, 0.75)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub value: f64,
    pub assessed: bool,
    pub bold_penalty_applied: bool,
}

pub fn contribution(profile: Option<&ContributionProfile>) -> Result<Contribution, ScoreError> {
    let Some(p) = profile else {
        return Ok(Contribution {
            value: 1.0,
            assessed: false,
            bold_penalty_applied: false,
        });
    };
    p.validate()?;
    let base: f64 = p.axes.iter().map(|(a, v)| p.beta[a] * v).sum();
    let prog = p.axis(Axis::Progressiveness);
    let bold = p.axis(Axis::ProblemSolving) < BOLD_PROBLEM_SOLVING_BELOW && prog > BOLD_PROGRESSIVENESS_ABOVE;
    let value = if bold { base * bold_damp(prog) } else { base };
    Ok(Contribution {
        value,
        assessed: true,
        bold_penalty_applied: bold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub integrity: f64,
    pub referencing_quality: ReferencingQuality,
    pub contribution: Contribution,
    pub score: f64,
    pub per_reference: Vec<ReferenceAssessment>,
}

pub fn scilint(
    integrity: f64,
    referencing_quality: ReferencingQuality,
    contribution: Contribution,
    per_reference: Vec<ReferenceAssessment>,
) -> ScoreReport {
    let score = integrity * referencing_quality.value * contribution.value;
    ScoreReport {
        integrity,
        referencing_quality,
        contribution,
        score,
        per_reference,
    }
}

/// Score a manuscript from its findings, reference assessments, and optional
/// contribution profile.
pub fn score_manuscript(
    findings: &[Finding],
    per_reference: Vec<ReferenceAssessment>,
    profile: Option<&ContributionProfile>,
) -> Result<ScoreReport, ScoreError> {
    for a in &per_reference {
        check_unit(&format!("reliability of `{}`", a.key), a.reliability)?;
        if let Some(v) = a.claim_score {
            check_unit(&format!("claim score of `{}`", a.key), v)?;
        }
    }
    let c = contribution(profile)?;
    Ok(scilint(
        integrity(findings),
        referencing_quality(&per_reference),
        c,
        per_reference,
    ))
}
