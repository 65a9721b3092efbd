//! Terminal and structured (JSON) renderings of a check run.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::finding::{Finding, Level};
use crate::pipeline::ReferenceReport;
use crate::score::ScoreReport;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub errors: usize,
    pub warnings: usize,
    pub info: usize,
    pub tool_limitations: usize,
}

impl Summary {
    pub fn of(findings: &[Finding]) -> Self {
        let mut s = Self::default();
        for f in findings {
            match f.level {
                Level::Error => s.errors += 1,
                Level::Warning => s.warnings += 1,
                Level::Info => s.info += 1,
                Level::ToolLimitation => s.tool_limitations += 1,
            }
        }
        s
    }
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}, {}, {} info, {}",
            plural(self.errors, "error", "errors"),
            plural(self.warnings, "warning", "warnings"),
            self.info,
            plural(self.tool_limitations, "tool limitation", "tool limitations"),
        )
    }
}

/// Findings in the given order, then a summary and the score block.
pub fn render_terminal(findings: &[Finding], report: &ScoreReport) -> String {
    let mut out = String::new();
    for f in findings {
        let loc = f
            .location
            .as_ref()
            .map_or_else(|| "-".to_owned(), |l| l.to_string());
        let _ = writeln!(out, "{} {} {} {}", f.level.as_str().to_uppercase(), f.check_id, loc, f.message);
        if !f.context.is_empty() {
            let _ = writeln!(out, "    {}", f.context);
        }
    }
    if !findings.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "{}", Summary::of(findings));
    let _ = writeln!(out, "integrity            {:.3}", report.integrity);
    let rq = &report.referencing_quality;
    if rq.applicable {
        let _ = writeln!(out, "referencing quality  {:.3}", rq.value);
    } else {
        let _ = writeln!(out, "referencing quality  {:.3} (no scored references)", rq.value);
    }
    let c = &report.contribution;
    let note = match (c.assessed, c.bold_penalty_applied) {
        (false, _) => " (not assessed)",
        (true, true) => " (bold-claims damp applied)",
        (true, false) => "",
    };
    let _ = writeln!(out, "contribution         {:.3}{note}", c.value);
    let _ = writeln!(out, "score                {:.3}", report.score);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredOutput {
    pub schema_version: u32,
    pub findings: Vec<Finding>,
    pub references: Vec<ReferenceReport>,
    pub score: ScoreReport,
    pub summary: Summary,
}

impl StructuredOutput {
    pub fn new(findings: &[Finding], references: &[ReferenceReport], report: &ScoreReport) -> Self {
        Self {
            schema_version: OUTPUT_SCHEMA_VERSION,
            findings: findings.to_vec(),
            references: references.to_vec(),
            score: report.clone(),
            summary: Summary::of(findings),
        }
    }
}

/// Pretty JSON with a trailing newline. Maps are ordered, so identical
/// inputs give identical bytes.
pub fn render_structured(findings: &[Finding], references: &[ReferenceReport], report: &ScoreReport) -> String {
    let doc = StructuredOutput::new(findings, references, report);
    let mut s = serde_json::to_string_pretty(&doc).expect("output serializes");
    s.push('\n');
    s
}
