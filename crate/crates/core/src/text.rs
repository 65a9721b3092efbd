//! Small text helpers shared by the parsers and the matching engine.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Convert a BibTeX field value to plain text: accent macros become Unicode,
/// braces and simple formatting commands disappear, whitespace collapses.
pub fn latex_to_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let chars: Vec<char> = raw.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '{' | '}' => i += 1,
            '~' => {
                out.push(' ');
                i += 1;
            }
            '\\' => {
                i += 1;
                let Some(&next) = chars.get(i) else { break };
                if let Some(mark) = accent_mark(next) {
                    // \'e, \'{e}, \' e, {\'{e}}
                    i += 1;
                    if next.is_ascii_alphabetic() {
                        // letter accents (\c, \v, \u, \H) need a separator
                        while chars.get(i) == Some(&' ') {
                            i += 1;
                        }
                    }
                    let mut braced = false;
                    if chars.get(i) == Some(&'{') {
                        braced = true;
                        i += 1;
                    }
                    let base = match chars.get(i) {
                        Some('\\') if matches!(chars.get(i + 1), Some('i') | Some('j')) => {
                            i += 2;
                            if chars[i - 1] == 'i' {
                                'i'
                            } else {
                                'j'
                            }
                        }
                        Some(&b) => {
                            i += 1;
                            b
                        }
                        None => break,
                    };
                    if braced && chars.get(i) == Some(&'}') {
                        i += 1;
                    }
                    out.push(base);
                    out.push(mark);
                    continue;
                }
                if next.is_ascii_alphabetic() {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_alphabetic() {
                        i += 1;
                    }
                    let name: String = chars[start..i].iter().collect();
                    if let Some(s) = named_symbol(&name) {
                        out.push_str(s);
                        // control words swallow one following space
                        if chars.get(i) == Some(&' ') && !s.is_empty() {
                            i += 1;
                        }
                    }
                    // formatting commands like \emph{...}: drop the name, keep the argument
                } else {
                    // escaped specials: \& \% \$ \_ \# \{ \}
                    out.push(next);
                    i += 1;
                }
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    collapse_whitespace(&out.nfc().collect::<String>())
}

fn accent_mark(c: char) -> Option<char> {
    Some(match c {
        '\'' => '\u{301}',
        '`' => '\u{300}',
        '^' => '\u{302}',
        '"' => '\u{308}',
        '~' => '\u{303}',
        '=' => '\u{304}',
        '.' => '\u{307}',
        'c' => '\u{327}',
        'v' => '\u{30C}',
        'u' => '\u{306}',
        'H' => '\u{30B}',
        'k' => '\u{328}',
        'r' => '\u{30A}',
        _ => return None,
    })
}

fn named_symbol(name: &str) -> Option<&'static str> {
    Some(match name {
        "o" => "ø",
        "O" => "Ø",
        "l" => "ł",
        "L" => "Ł",
        "ss" => "ß",
        "ae" => "æ",
        "AE" => "Æ",
        "oe" => "œ",
        "OE" => "Œ",
        "aa" => "å",
        "AA" => "Å",
        "i" => "i",
        "j" => "j",
        "and" => "and",
        "textendash" => "–",
        "textemdash" => "—",
        _ => return None,
    })
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Remove diacritics (é → e) and map the few letters NFD leaves intact.
pub fn fold_diacritics(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.nfd() {
        if is_combining_mark(c) {
            continue;
        }
        match c {
            'ø' => out.push('o'),
            'Ø' => out.push('O'),
            'ł' => out.push('l'),
            'Ł' => out.push('L'),
            'ß' => out.push_str("ss"),
            'æ' => out.push_str("ae"),
            'Æ' => out.push_str("AE"),
            'œ' => out.push_str("oe"),
            'Œ' => out.push_str("OE"),
            'đ' => out.push('d'),
            'Đ' => out.push('D'),
            'ı' => out.push('i'),
            _ => out.push(c),
        }
    }
    out
}

/// Case-fold, replace punctuation with spaces, collapse whitespace.
pub fn normalize_title(s: &str) -> String {
    let lowered = s.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    collapse_whitespace(&cleaned)
}

/// Normalization used for personal names: diacritics folded, lowercase,
/// letters only.
pub fn normalize_name(s: &str) -> String {
    fold_diacritics(s)
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
