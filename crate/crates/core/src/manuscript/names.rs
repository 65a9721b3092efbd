//! Personal names as (family, given) pairs.

use serde::{Deserialize, Serialize};

use crate::text::latex_to_text;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonName {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
}

impl PersonName {
    pub fn new(family: impl Into<String>, given: Option<&str>) -> Self {
        Self {
            family: family.into(),
            given: given.map(str::to_owned).filter(|g| !g.is_empty()),
        }
    }

    /// Parse a BibTeX name: `von Last, Jr, First`, `von Last, First`, or
    /// `First von Last`. Braced groups are single tokens.
    pub fn parse_bibtex(raw: &str) -> Option<Self> {
        let parts = split_top_level(raw, |c| c == ',');
        let parts: Vec<&str> = parts.iter().map(|p| p.trim()).collect();
        match parts.as_slice() {
            [] => None,
            [single] => Self::parse_first_last(single),
            [last, first] => Some(Self::new(clean(last), Some(&clean(first)))),
            [last, _jr, first, ..] => Some(Self::new(clean(last), Some(&clean(first)))),
        }
        .filter(|n| !n.family.is_empty())
    }

    fn parse_first_last(raw: &str) -> Option<Self> {
        let tokens = split_top_level(raw, char::is_whitespace);
        let tokens: Vec<&str> = tokens.iter().map(|t| t.trim()).filter(|t| !t.is_empty()).collect();
        match tokens.len() {
            0 => None,
            1 => Some(Self::new(clean(tokens[0]), None)),
            n => {
                // von particle: first lowercase token before the last one
                let von = tokens[..n - 1]
                    .iter()
                    .position(|t| starts_lowercase(t))
                    .unwrap_or(n - 1);
                let given = tokens[..von].join(" ");
                let family = tokens[von..].join(" ");
                Some(Self::new(clean(&family), Some(&clean(&given))))
            }
        }
    }

    /// Parse a plain display name as returned by registries ("Jane Q. Doe"
    /// or "Doe, Jane").
    pub fn parse_display(raw: &str) -> Option<Self> {
        Self::parse_bibtex(raw)
    }
}

impl std::fmt::Display for PersonName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.given {
            Some(g) => write!(f, "{}, {}", self.family, g),
            None => f.write_str(&self.family),
        }
    }
}

fn clean(s: &str) -> String {
    latex_to_text(s)
}

fn starts_lowercase(token: &str) -> bool {
    if token.starts_with('{') {
        return false;
    }
    token
        .chars()
        .find(|c| c.is_alphabetic())
        .is_some_and(char::is_lowercase)
}

/// Split on `sep` outside braces.
pub(crate) fn split_top_level(s: &str, sep: impl Fn(char) -> bool) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            _ if depth == 0 && sep(c) => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Split a BibTeX author field on ` and ` outside braces. `others` is dropped.
pub fn split_author_list(field: &str) -> Vec<PersonName> {
    let mut names = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = field.as_bytes();
    let lower = field.to_ascii_lowercase();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' => depth += 1,
            b'}' => depth -= 1,
            c if depth == 0 && c.is_ascii_whitespace() => {
                let rest = &lower[i..];
                let trimmed = rest.trim_start();
                let skipped = rest.len() - trimmed.len();
                if trimmed.starts_with("and")
                    && trimmed[3..].starts_with(|c: char| c.is_ascii_whitespace())
                {
                    names.push(&field[start..i]);
                    i += skipped + 3;
                    start = i;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    names.push(&field[start..]);
    names
        .into_iter()
        .map(str::trim)
        .filter(|n| !n.is_empty() && !n.eq_ignore_ascii_case("others"))
        .filter_map(PersonName::parse_bibtex)
        .collect()
}
