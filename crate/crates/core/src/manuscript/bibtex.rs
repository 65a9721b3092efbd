//! BibTeX parser with `@string` expansion and per-entry error recovery.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use super::names::split_author_list;
use super::BibliographyEntry;
use crate::finding::{check, Finding, Level, Location};
use crate::identifiers::extract_identifiers;
use crate::text::latex_to_text;

/// Result of parsing one `.bib` source.
#[derive(Debug, Clone, Default)]
pub struct BibParse {
    pub entries: Vec<BibliographyEntry>,
    pub warnings: Vec<Finding>,
}

impl BibParse {
    pub fn keys(&self) -> HashSet<&str> {
        self.entries.iter().map(|e| e.key.as_str()).collect()
    }
}

#[derive(Debug)]
struct Unterminated;

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line_starts: Vec<usize>,
    file: &'a Path,
    macros: HashMap<String, String>,
}

/// Parse BibTeX source into entries. Duplicate keys keep the first entry;
/// unterminated entries are skipped. Both produce `bib-parse` warnings.
pub fn parse_bibtex(source: &str, file: &Path) -> BibParse {
    let chars: Vec<char> = source.chars().collect();
    let mut line_starts = vec![0];
    for (i, c) in chars.iter().enumerate() {
        if *c == '\n' {
            line_starts.push(i + 1);
        }
    }
    let mut parser = Parser {
        chars,
        pos: 0,
        line_starts,
        file,
        macros: default_macros(),
    };
    let mut out = BibParse::default();
    let mut seen = HashSet::new();

    while let Some(at) = parser.find_next_at() {
        parser.pos = at + 1;
        let entry_type = parser.read_ident().to_ascii_lowercase();
        parser.skip_ws();
        let open = match parser.peek() {
            Some('{') => '}',
            Some('(') => ')',
            _ => continue,
        };
        parser.pos += 1;
        let loc = parser.location(at);
        match entry_type.as_str() {
            "comment" => {
                // an unterminated comment stops at the next entry, which is then parsed
                let _ = if open == '}' {
                    parser.pos -= 1;
                    parser.skip_balanced()
                } else {
                    parser.skip_until_close(open)
                };
            }
            "preamble" => {
                if parser.skip_until_close(open).is_err() {
                    out.warnings.push(unterminated(&loc, "@preamble"));
                }
            }
            "string" => {
                if let Err(Unterminated) = parser.parse_string_def(open) {
                    out.warnings.push(unterminated(&loc, "@string"));
                }
            }
            "" => {}
            _ => match parser.parse_entry(open) {
                Ok((key, fields)) => {
                    if key.is_empty() {
                        out.warnings.push(
                            Finding::new(check::BIB_PARSE, Level::Warning, "entry without a citation key")
                                .with_context("the entry was skipped")
                                .at(loc),
                        );
                        continue;
                    }
                    if !seen.insert(key.clone()) {
                        out.warnings.push(
                            Finding::new(
                                check::BIB_PARSE,
                                Level::Warning,
                                format!("duplicate bibliography key `{key}`"),
                            )
                            .with_context("the first definition is used; later ones are ignored")
                            .at(loc)
                            .for_reference(key),
                        );
                        continue;
                    }
                    let (entry, notes) = build_entry(key, entry_type, fields, loc);
                    out.warnings.extend(notes);
                    out.entries.push(entry);
                }
                Err(Unterminated) => {
                    out.warnings.push(unterminated(&loc, &format!("@{entry_type}")));
                }
            },
        }
    }
    out
}

fn unterminated(loc: &Location, what: &str) -> Finding {
    Finding::new(check::BIB_PARSE, Level::Warning, format!("unterminated {what} entry"))
        .with_context("the remainder of the entry was skipped")
        .at(loc.clone())
}

fn default_macros() -> HashMap<String, String> {
    let months = [
        "january", "february", "march", "april", "may", "june", "july", "august", "september",
        "october", "november", "december",
    ];
    months
        .iter()
        .map(|m| (m[..3].to_owned(), capitalize(m)))
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl<'a> Parser<'a> {
    fn location(&self, pos: usize) -> Location {
        let idx = match self.line_starts.binary_search(&pos) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        Location::new(self.file, idx + 1)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn find_next_at(&self) -> Option<usize> {
        self.chars[self.pos.min(self.chars.len())..]
            .iter()
            .position(|&c| c == '@')
            .map(|off| self.pos + off)
    }

    /// True when `pos` starts a line that opens a new entry (`@type{`).
    fn entry_start_at(&self, pos: usize) -> bool {
        if self.chars.get(pos) != Some(&'@') {
            return false;
        }
        let line_start = pos == 0 || self.chars[..pos].iter().rev().take_while(|c| **c != '\n').all(|c| c.is_whitespace());
        if !line_start {
            return false;
        }
        let mut i = pos + 1;
        let begin = i;
        while i < self.chars.len() && self.chars[i].is_ascii_alphabetic() {
            i += 1;
        }
        while i < self.chars.len() && self.chars[i].is_whitespace() {
            i += 1;
        }
        i > begin && matches!(self.chars.get(i), Some('{') | Some('('))
    }

    fn read_ident(&mut self) -> String {
        let begin = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_alphanumeric() || "_-:./+'".contains(c))
        {
            self.pos += 1;
        }
        self.chars[begin..self.pos].iter().collect()
    }

    /// Skip a `{...}` group starting at the current position.
    fn skip_balanced(&mut self) -> Result<(), Unterminated> {
        self.read_braced().map(|_| ())
    }

    fn skip_until_close(&mut self, close: char) -> Result<(), Unterminated> {
        let mut depth = 0i32;
        while let Some(c) = self.peek() {
            self.pos += 1;
            match c {
                '{' => depth += 1,
                '}' if depth > 0 => depth -= 1,
                c if c == close && depth == 0 => return Ok(()),
                _ => {}
            }
        }
        Err(Unterminated)
    }

    /// Read `{...}` with nesting; returns inner text. Stops with an error
    /// at end of input or when a new entry begins on a fresh line.
    fn read_braced(&mut self) -> Result<String, Unterminated> {
        debug_assert_eq!(self.peek(), Some('{'));
        let begin = self.pos + 1;
        let mut depth = 0i32;
        while let Some(c) = self.peek() {
            match c {
                '\\' => {
                    self.pos += 2;
                    continue;
                }
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = self.chars[begin..self.pos].iter().collect();
                        self.pos += 1;
                        return Ok(inner);
                    }
                }
                '@' if self.entry_start_at(self.pos) => return Err(Unterminated),
                _ => {}
            }
            self.pos += 1;
        }
        Err(Unterminated)
    }

    fn read_quoted(&mut self) -> Result<String, Unterminated> {
        debug_assert_eq!(self.peek(), Some('"'));
        self.pos += 1;
        let begin = self.pos;
        let mut depth = 0i32;
        while let Some(c) = self.peek() {
            match c {
                '\\' => {
                    self.pos += 2;
                    continue;
                }
                '{' => depth += 1,
                '}' => depth -= 1,
                '"' if depth == 0 => {
                    let inner = self.chars[begin..self.pos].iter().collect();
                    self.pos += 1;
                    return Ok(inner);
                }
                '@' if self.entry_start_at(self.pos) => return Err(Unterminated),
                _ => {}
            }
            self.pos += 1;
        }
        Err(Unterminated)
    }

    /// Value: pieces joined by `#`; each piece braced, quoted, a number, or a macro.
    fn read_value(&mut self) -> Result<String, Unterminated> {
        let mut value = String::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('{') => value.push_str(&self.read_braced()?),
                Some('"') => value.push_str(&self.read_quoted()?),
                Some(c) if c.is_alphanumeric() => {
                    let ident = self.read_ident();
                    if ident.chars().all(|c| c.is_ascii_digit()) {
                        value.push_str(&ident);
                    } else {
                        let expanded = self.macros.get(&ident.to_ascii_lowercase()).cloned();
                        value.push_str(&expanded.unwrap_or(ident));
                    }
                }
                Some(_) => return Ok(value),
                None => return Err(Unterminated),
            }
            self.skip_ws();
            if self.peek() == Some('#') {
                self.pos += 1;
            } else {
                return Ok(value);
            }
        }
    }

    fn parse_string_def(&mut self, close: char) -> Result<(), Unterminated> {
        self.skip_ws();
        let name = self.read_ident().to_ascii_lowercase();
        self.skip_ws();
        if self.peek() != Some('=') {
            return self.skip_until_close(close);
        }
        self.pos += 1;
        let value = self.read_value()?;
        self.macros.insert(name, value);
        self.skip_until_close(close)
    }

    fn parse_entry(&mut self, close: char) -> Result<(String, Vec<(String, String)>), Unterminated> {
        self.skip_ws();
        let key_begin = self.pos;
        while self
            .peek()
            .is_some_and(|c| c != ',' && c != close && !c.is_whitespace())
        {
            if self.entry_start_at(self.pos) {
                return Err(Unterminated);
            }
            self.pos += 1;
        }
        let key: String = self.chars[key_begin..self.pos].iter().collect();
        let mut fields = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(Unterminated),
                Some(',') => {
                    self.pos += 1;
                    continue;
                }
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok((key, fields));
                }
                Some('@') if self.entry_start_at(self.pos) => return Err(Unterminated),
                Some(_) => {}
            }
            let name = self.read_ident().to_ascii_lowercase();
            if name.is_empty() {
                // stray character; resynchronise on the next separator
                self.pos += 1;
                continue;
            }
            self.skip_ws();
            if self.peek() != Some('=') {
                continue;
            }
            self.pos += 1;
            let value = self.read_value()?;
            fields.push((name, value));
        }
    }
}

fn build_entry(
    key: String,
    entry_type: String,
    fields: Vec<(String, String)>,
    location: Location,
) -> (BibliographyEntry, Vec<Finding>) {
    let mut entry = BibliographyEntry::new(key, entry_type, location);
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (name, value) in fields {
        // first occurrence of a field wins
        raw.entry(name).or_insert(value);
    }
    entry.title = raw
        .get("title")
        .map(|t| latex_to_text(t))
        .filter(|t| !t.is_empty());
    entry.authors = raw
        .get("author")
        .or_else(|| raw.get("editor"))
        .map(|a| split_author_list(a))
        .unwrap_or_default();
    entry.year = raw
        .get("year")
        .or_else(|| raw.get("date"))
        .and_then(|y| parse_year(y));
    entry.venue = ["journal", "journaltitle", "booktitle"]
        .iter()
        .find_map(|f| raw.get(*f))
        .map(|v| latex_to_text(v))
        .filter(|v| !v.is_empty());
    entry.raw_fields = raw;
    let (ids, notes) = extract_identifiers(&entry);
    entry.identifiers = ids;
    (entry, notes)
}

fn parse_year(s: &str) -> Option<i32> {
    let digits: Vec<char> = s.chars().collect();
    digits.windows(4).enumerate().find_map(|(i, w)| {
        let before_ok = i == 0 || !digits[i - 1].is_ascii_digit();
        let after_ok = digits.get(i + 4).is_none_or(|c| !c.is_ascii_digit());
        if before_ok && after_ok && w.iter().all(char::is_ascii_digit) {
            w.iter().collect::<String>().parse().ok()
        } else {
            None
        }
    })
}
