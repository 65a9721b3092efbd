//! Lightweight LaTeX scanner: citations, labels, cross-references, figures.
//!
//! This is not a TeX engine. Comments and verbatim-like environments are
//! blanked first, then control sequences are read one at a time.

use std::path::Path;

use super::{Citation, CrossRef, Figure, Include, Label, LabelKind, ManuscriptModel};
use crate::finding::{check, Finding, Level, Location};

const CITE_COMMANDS: &[&str] = &[
    "cite",
    "citep",
    "citet",
    "citealp",
    "citealt",
    "citeauthor",
    "citeyear",
    "citeyearpar",
    "citenum",
    "Cite",
    "Citep",
    "Citet",
    "Citealp",
    "Citealt",
    "Citeauthor",
    "nocite",
    "parencite",
    "Parencite",
    "textcite",
    "Textcite",
    "autocite",
    "Autocite",
    "footcite",
];

/// Commands whose argument is one label.
const REF_COMMANDS: &[&str] = &["ref", "eqref", "autoref", "pageref", "nameref", "Autoref"];

/// cleveref commands, which accept comma-separated label lists.
const CREF_COMMANDS: &[&str] = &["cref", "Cref", "cpageref", "Cpageref"];

const SECTION_COMMANDS: &[&str] = &[
    "part",
    "chapter",
    "section",
    "subsection",
    "subsubsection",
    "paragraph",
    "subparagraph",
];

const FIGURE_ENVS: &[&str] = &["figure", "figure*", "wrapfigure", "SCfigure"];
const SUBFIGURE_ENVS: &[&str] = &["subfigure", "subfloat"];
const TABLE_ENVS: &[&str] = &["table", "table*", "sidewaystable", "wraptable"];
const EQUATION_ENVS: &[&str] = &[
    "equation",
    "equation*",
    "align",
    "align*",
    "gather",
    "gather*",
    "multline",
    "multline*",
    "eqnarray",
    "eqnarray*",
    "flalign",
    "flalign*",
    "alignat",
    "alignat*",
];
const VERBATIM_ENVS: &[&str] = &[
    "verbatim",
    "verbatim*",
    "Verbatim",
    "lstlisting",
    "minted",
    "comment",
];

/// Key arguments longer than this are treated as runaway braces.
const MAX_KEY_ARG: usize = 2000;

struct Env {
    name: String,
    figure_index: Option<usize>,
}

struct FigureDraft {
    direct_label: Option<String>,
    nested_label: Option<String>,
}

struct Scanner<'a> {
    chars: Vec<char>,
    line_starts: Vec<usize>,
    file: &'a Path,
    pos: usize,
    model: ManuscriptModel,
    envs: Vec<Env>,
    figure_drafts: Vec<FigureDraft>,
    /// Position just after the most recent sectioning command.
    section_end: Option<usize>,
}

/// Parse one LaTeX source file. Never fails: malformed constructs are
/// skipped with a tool-limitation note on the model.
pub fn parse_latex(source: &str, file: &Path) -> ManuscriptModel {
    let chars = blank_comments(source);
    let mut line_starts = vec![0];
    for (i, c) in chars.iter().enumerate() {
        if *c == '\n' {
            line_starts.push(i + 1);
        }
    }
    let mut scanner = Scanner {
        chars,
        line_starts,
        file,
        pos: 0,
        model: ManuscriptModel::default(),
        envs: Vec::new(),
        figure_drafts: Vec::new(),
        section_end: None,
    };
    scanner.run();
    scanner.finish()
}

/// Replace everything after an unescaped `%` on each line with spaces.
fn blank_comments(source: &str) -> Vec<char> {
    let mut out: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut in_comment = false;
    while i < out.len() {
        let c = out[i];
        if c == '\n' {
            in_comment = false;
        } else if in_comment {
            out[i] = ' ';
        } else if c == '\\' {
            i += 2;
            continue;
        } else if c == '%' {
            in_comment = true;
            out[i] = ' ';
        }
        i += 1;
    }
    out
}

impl<'a> Scanner<'a> {
    fn location(&self, pos: usize) -> Location {
        let line_idx = match self.line_starts.binary_search(&pos) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Location::new(self.file, line_idx + 1).with_column(pos - self.line_starts[line_idx] + 1)
    }

    fn note(&mut self, pos: usize, message: String) {
        let loc = self.location(pos);
        self.model.notes.push(
            Finding::new(check::LATEX_PARSE, Level::ToolLimitation, message)
                .with_context("the construct was skipped; references inside it were not checked")
                .at(loc),
        );
    }

    fn run(&mut self) {
        while self.pos < self.chars.len() {
            if self.chars[self.pos] != '\\' {
                self.pos += 1;
                continue;
            }
            let start = self.pos;
            self.pos += 1;
            let name = self.read_command_name();
            if name.is_empty() {
                // control symbol such as \% or \\
                self.pos += 1;
                continue;
            }
            self.dispatch(&name, start);
        }
    }

    fn read_command_name(&mut self) -> String {
        let begin = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        self.chars[begin..self.pos].iter().collect()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_after_ws(&self) -> Option<char> {
        self.chars[self.pos..].iter().copied().find(|c| !c.is_whitespace())
    }

    fn skip_star(&mut self) {
        if self.chars.get(self.pos) == Some(&'*') {
            self.pos += 1;
        }
    }

    /// Read a balanced group opened by `open` at the current position
    /// (after whitespace). Returns the inner text, or `None` if unterminated.
    fn read_group(&mut self, open: char, close: char) -> Option<String> {
        self.skip_ws();
        if self.chars.get(self.pos) != Some(&open) {
            return None;
        }
        let mut depth = 0usize;
        let begin = self.pos + 1;
        let mut i = self.pos;
        while i < self.chars.len() {
            let c = self.chars[i];
            if c == '\\' {
                i += 2;
                continue;
            }
            if c == open && (open != '[' || depth == 0) {
                depth += 1;
            } else if c == '{' && open == '[' {
                // braces inside an optional argument hide brackets
                let mut bd = 1;
                i += 1;
                while i < self.chars.len() && bd > 0 {
                    match self.chars[i] {
                        '{' => bd += 1,
                        '}' => bd -= 1,
                        _ => {}
                    }
                    i += 1;
                }
                continue;
            } else if c == close {
                depth -= 1;
                if depth == 0 {
                    let inner: String = self.chars[begin..i].iter().collect();
                    self.pos = i + 1;
                    return Some(inner);
                }
            }
            i += 1;
        }
        None
    }

    /// Skip up to `max` optional `[...]` arguments.
    fn skip_optional_args(&mut self, max: usize) -> bool {
        for _ in 0..max {
            if self.peek_after_ws() != Some('[') {
                break;
            }
            if self.read_group('[', ']').is_none() {
                return false;
            }
        }
        true
    }

    /// Read the mandatory key argument of a citation/label/ref command.
    fn read_key_arg(&mut self, name: &str, start: usize) -> Option<String> {
        if !self.skip_optional_args(2) {
            self.note(start, format!("unterminated optional argument to \\{name}"));
            return None;
        }
        if self.peek_after_ws() != Some('{') {
            return None;
        }
        let save = self.pos;
        match self.read_group('{', '}') {
            Some(arg) if arg.len() <= MAX_KEY_ARG && !arg.contains("\n\n") && !arg.contains('\\') => {
                Some(arg)
            }
            Some(_) | None => {
                self.pos = save + 1;
                self.note(start, format!("malformed braces in \\{name} argument"));
                None
            }
        }
    }

    fn dispatch(&mut self, name: &str, start: usize) {
        if CITE_COMMANDS.contains(&name) {
            self.skip_star();
            if let Some(arg) = self.read_key_arg(name, start) {
                let loc = self.location(start);
                for key in split_keys(&arg) {
                    if key == "*" {
                        continue;
                    }
                    self.model.cite_keys.push(Citation {
                        key,
                        location: loc.clone(),
                    });
                }
            }
        } else if REF_COMMANDS.contains(&name) || CREF_COMMANDS.contains(&name) {
            self.skip_star();
            if let Some(arg) = self.read_key_arg(name, start) {
                let loc = self.location(start);
                let labels = if CREF_COMMANDS.contains(&name) {
                    split_keys(&arg)
                } else {
                    vec![arg.trim().to_owned()]
                };
                for label in labels.into_iter().filter(|l| !l.is_empty()) {
                    self.model.refs.push(CrossRef {
                        label,
                        location: loc.clone(),
                    });
                }
            }
        } else if name == "label" {
            if let Some(arg) = self.read_key_arg(name, start) {
                self.add_label(arg.trim().to_owned(), start);
            }
        } else if name == "begin" {
            self.begin_env(start);
        } else if name == "end" {
            self.end_env(start);
        } else if name == "caption" || name == "captionof" {
            self.mark_caption();
        } else if SECTION_COMMANDS.contains(&name) {
            self.skip_star();
            if self.skip_optional_args(1) && self.read_group('{', '}').is_some() {
                self.section_end = Some(self.pos);
            }
        } else if name == "input" || name == "include" || name == "subfile" {
            if self.peek_after_ws() == Some('{') {
                match self.read_group('{', '}') {
                    Some(arg) => {
                        let loc = self.location(start);
                        self.model.includes.push(Include {
                            target: arg.trim().to_owned(),
                            location: loc,
                        });
                    }
                    None => self.note(start, format!("malformed braces in \\{name} argument")),
                }
            }
        } else if name == "bibliography" || name == "addbibresource" {
            self.skip_optional_args(1);
            if let Some(arg) = self.read_group('{', '}') {
                self.model.bibliographies.extend(split_keys(&arg));
            }
        } else if name == "verb" || name == "lstinline" {
            self.skip_verb();
        }
    }

    fn skip_verb(&mut self) {
        self.skip_star();
        let Some(&delim) = self.chars.get(self.pos) else {
            return;
        };
        if delim == '{' || delim.is_alphabetic() || delim.is_whitespace() {
            return;
        }
        let mut i = self.pos + 1;
        while i < self.chars.len() && self.chars[i] != delim && self.chars[i] != '\n' {
            i += 1;
        }
        self.pos = (i + 1).min(self.chars.len());
    }

    fn add_label(&mut self, label: String, start: usize) {
        if label.is_empty() {
            return;
        }
        let kind = self.label_kind(start);
        // the innermost figure environment claims the label
        if let Some((depth_from_top, fig)) = self
            .envs
            .iter()
            .rev()
            .enumerate()
            .find_map(|(d, e)| e.figure_index.map(|f| (d, f)))
        {
            let draft = &mut self.figure_drafts[fig];
            if depth_from_top == 0 {
                draft.direct_label.get_or_insert_with(|| label.clone());
            } else {
                draft.nested_label.get_or_insert_with(|| label.clone());
            }
        }
        let loc = self.location(start);
        self.model.labels.push(Label {
            label,
            kind,
            location: loc,
        });
    }

    fn label_kind(&self, start: usize) -> LabelKind {
        for env in self.envs.iter().rev() {
            let n = env.name.as_str();
            if FIGURE_ENVS.contains(&n) || SUBFIGURE_ENVS.contains(&n) {
                return LabelKind::Figure;
            }
            if TABLE_ENVS.contains(&n) {
                return LabelKind::Table;
            }
            if EQUATION_ENVS.contains(&n) {
                return LabelKind::Equation;
            }
            if n != "document" {
                return LabelKind::Other;
            }
        }
        match self.section_end {
            Some(end) if self.chars[end..start].iter().all(|c| c.is_whitespace()) => {
                LabelKind::Section
            }
            _ => LabelKind::Other,
        }
    }

    fn begin_env(&mut self, start: usize) {
        let Some(name) = self.read_group('{', '}') else {
            self.note(start, "malformed \\begin".to_owned());
            return;
        };
        let name = name.trim().to_owned();
        if VERBATIM_ENVS.contains(&name.as_str()) {
            self.skip_verbatim_env(&name, start);
            return;
        }
        let figure_index = if FIGURE_ENVS.contains(&name.as_str()) {
            let loc = self.location(start);
            self.model.figures.push(Figure {
                label: None,
                caption_present: false,
                location: loc,
            });
            self.figure_drafts.push(FigureDraft {
                direct_label: None,
                nested_label: None,
            });
            Some(self.model.figures.len() - 1)
        } else {
            None
        };
        self.envs.push(Env { name, figure_index });
    }

    fn skip_verbatim_env(&mut self, name: &str, start: usize) {
        let terminator: Vec<char> = format!("\\end{{{name}}}").chars().collect();
        let found = self.chars[self.pos..]
            .windows(terminator.len())
            .position(|w| w == terminator.as_slice());
        match found {
            Some(off) => self.pos += off + terminator.len(),
            None => {
                self.note(start, format!("unterminated {name} environment"));
                self.pos = self.chars.len();
            }
        }
    }

    fn end_env(&mut self, start: usize) {
        let Some(name) = self.read_group('{', '}') else {
            self.note(start, "malformed \\end".to_owned());
            return;
        };
        let name = name.trim();
        let Some(idx) = self.envs.iter().rposition(|e| e.name == name) else {
            if name != "document" {
                self.note(start, format!("\\end{{{name}}} without matching \\begin"));
            }
            return;
        };
        if idx + 1 != self.envs.len() {
            self.note(start, format!("\\end{{{name}}} closes unbalanced environments"));
        }
        for env in self.envs.drain(idx..) {
            if let Some(fig) = env.figure_index {
                let draft = &self.figure_drafts[fig];
                self.model.figures[fig].label =
                    draft.direct_label.clone().or_else(|| draft.nested_label.clone());
            }
        }
    }

    fn mark_caption(&mut self) {
        if let Some(env) = self.envs.last() {
            if let Some(fig) = env.figure_index {
                self.model.figures[fig].caption_present = true;
            }
        }
    }

    fn finish(mut self) -> ManuscriptModel {
        // close environments left open at end of file
        for env in self.envs.drain(..) {
            if let Some(fig) = env.figure_index {
                let draft = &self.figure_drafts[fig];
                self.model.figures[fig].label =
                    draft.direct_label.clone().or_else(|| draft.nested_label.clone());
            }
        }
        self.model
    }
}

fn split_keys(arg: &str) -> Vec<String> {
    arg.split(',')
        .map(|k| k.trim().to_owned())
        .filter(|k| !k.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> ManuscriptModel {
        parse_latex(src, Path::new("main.tex"))
    }

    fn keys(m: &ManuscriptModel) -> Vec<&str> {
        m.cite_keys.iter().map(|c| c.key.as_str()).collect()
    }

    #[test]
    fn single_citation_with_line() {
        let m = parse("line one\nline two\n\\cite{smith2020}\n");
        assert_eq!(keys(&m), ["smith2020"]);
        assert_eq!(m.cite_keys[0].location.line, 3);
        assert_eq!(m.cite_keys[0].location.column, Some(1));
    }

    #[test]
    fn multi_key_split_and_natbib_variants() {
        let m = parse(r"\cite{a,b} \citep[see][p.~3]{c} \citet*{d} \Cite{ e , f }");
        assert_eq!(keys(&m), ["a", "b", "c", "d", "e", "f"]);
    }

    #[test]
    fn multiplicity_preserved() {
        let m = parse(r"\cite{a} text \cite{a} \citep{a,b}");
        assert_eq!(keys(&m), ["a", "a", "a", "b"]);
    }

    #[test]
    fn unknown_cite_like_macros_ignored() {
        let m = parse(r"\mycite{x} \citation{y} \cite{z}");
        assert_eq!(keys(&m), ["z"]);
    }

    #[test]
    fn comments_are_ignored() {
        let m = parse("% \\cite{gone}\ntext 50\\% done \\cite{kept} % \\ref{gone}\n\\\\% \\label{gone}\n");
        assert_eq!(keys(&m), ["kept"]);
        assert!(m.refs.is_empty());
        assert!(m.labels.is_empty());
    }

    #[test]
    fn citation_spanning_lines() {
        let m = parse("\\cite{a,\n  b}");
        assert_eq!(keys(&m), ["a", "b"]);
        assert_eq!(m.cite_keys[1].location.line, 1);
    }

    #[test]
    fn figure_with_label_and_caption() {
        let src = "\\begin{figure}[t]\n\\centering\n\\caption{A plot}\n\\label{fig:x}\n\\end{figure}\n";
        let m = parse(src);
        assert_eq!(m.figures.len(), 1);
        assert_eq!(m.figures[0].label.as_deref(), Some("fig:x"));
        assert!(m.figures[0].caption_present);
        assert_eq!(m.figures[0].location.line, 1);
        assert_eq!(m.labels[0].kind, LabelKind::Figure);
    }

    #[test]
    fn figure_without_caption_or_label() {
        let m = parse("\\begin{figure*}\\includegraphics{x}\\end{figure*}");
        assert_eq!(m.figures.len(), 1);
        assert_eq!(m.figures[0].label, None);
        assert!(!m.figures[0].caption_present);
    }

    #[test]
    fn subfigure_labels_fall_back_for_parent() {
        let src = r"\begin{figure}\begin{subfigure}{.5\linewidth}\caption{a}\label{fig:a}\end{subfigure}\end{figure}";
        let m = parse(src);
        assert_eq!(m.figures[0].label.as_deref(), Some("fig:a"));
        assert!(!m.figures[0].caption_present);
    }

    #[test]
    fn label_kinds_from_environment() {
        let src = "\\section{Intro}\n\\label{sec:intro}\n\\begin{table}\\label{tab:t}\\end{table}\n\\begin{equation}x\\label{eq:e}\\end{equation}\n\\begin{theorem}\\label{thm:a}\\end{theorem}\ntext \\label{loose}";
        let m = parse(src);
        let kinds: Vec<_> = m.labels.iter().map(|l| (l.label.as_str(), l.kind)).collect();
        assert_eq!(
            kinds,
            [
                ("sec:intro", LabelKind::Section),
                ("tab:t", LabelKind::Table),
                ("eq:e", LabelKind::Equation),
                ("thm:a", LabelKind::Other),
                ("loose", LabelKind::Other),
            ]
        );
    }

    #[test]
    fn ref_family() {
        let m = parse(r"\ref{a} \eqref{b} \autoref{c} \cref{d,e} \Cref{f} \pageref{g}");
        let labels: Vec<_> = m.refs.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c", "d", "e", "f", "g"]);
    }

    #[test]
    fn malformed_braces_are_noted_not_fatal() {
        let m = parse("\\cite{broken\n\nmore text \\cite{ok}");
        assert_eq!(keys(&m), ["ok"]);
        assert_eq!(m.notes.len(), 1);
        assert_eq!(m.notes[0].level, Level::ToolLimitation);

        let m = parse("\\cite{never closed");
        assert!(m.cite_keys.is_empty());
        assert_eq!(m.notes.len(), 1);
    }

    #[test]
    fn verbatim_content_is_skipped() {
        let m = parse("\\begin{verbatim}\n\\cite{no}\n\\end{verbatim}\n\\verb|\\cite{no}| \\cite{yes}");
        assert_eq!(keys(&m), ["yes"]);
    }

    #[test]
    fn includes_and_bibliography_recorded() {
        let m = parse("\\input{sections/intro}\n\\bibliography{refs,extra}");
        assert_eq!(m.includes[0].target, "sections/intro");
        assert_eq!(m.bibliographies, ["refs", "extra"]);
    }

    #[test]
    fn parsing_is_deterministic() {
        let src = "\\cite{a}\\begin{figure}\\label{f}\\end{figure}\\ref{f}";
        let a = serde_json::to_string(&parse(src)).unwrap();
        let b = serde_json::to_string(&parse(src)).unwrap();
        assert_eq!(a, b);
    }
}
