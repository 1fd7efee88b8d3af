//! Lightweight structural scanning over regex text.
//!
//! This is not a regex parser. It tracks just enough state — escapes,
//! character classes, group depth — for the validator, the profiler, and the
//! renderer to locate alternation boundaries, groups, and classes without
//! interpreting semantics. Fragments stay opaque.

/// Per-character structural context.
///
/// Conventions:
/// - the escaping backslash is emitted with `escaped: false`; the character
///   it escapes carries `escaped: true`;
/// - `in_class` is true for everything between an opening `[` and its
///   closing `]`, including the closing bracket but not the opening one;
/// - `depth` is the group depth: both parens of a group carry the outer
///   depth, characters between them carry depth + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CharInfo {
    pub at: usize,
    pub ch: char,
    pub escaped: bool,
    pub in_class: bool,
    pub depth: u32,
}

/// Scans `s` into structural per-character records.
pub(crate) fn analyze(s: &str) -> Vec<CharInfo> {
    let mut out = Vec::with_capacity(s.len());
    let mut escaped = false;
    let mut in_class = false;
    // Byte offset where the current class body begins; ']' at that offset is
    // a literal member, per the usual first-position rule.
    let mut class_body_start = 0usize;
    let mut depth = 0u32;
    for (at, ch) in s.char_indices() {
        if escaped {
            out.push(CharInfo { at, ch, escaped: true, in_class, depth });
            escaped = false;
            continue;
        }
        match ch {
            '\\' => {
                out.push(CharInfo { at, ch, escaped: false, in_class, depth });
                escaped = true;
            }
            '[' if !in_class => {
                out.push(CharInfo { at, ch, escaped: false, in_class: false, depth });
                in_class = true;
                class_body_start = at + 1;
            }
            '^' if in_class && at == class_body_start => {
                out.push(CharInfo { at, ch, escaped: false, in_class: true, depth });
                // ']' right after a leading '^' is still literal.
                class_body_start = at + 1;
            }
            ']' if in_class && at > class_body_start => {
                out.push(CharInfo { at, ch, escaped: false, in_class: true, depth });
                in_class = false;
            }
            '(' if !in_class => {
                out.push(CharInfo { at, ch, escaped: false, in_class: false, depth });
                depth += 1;
            }
            ')' if !in_class => {
                depth = depth.saturating_sub(1);
                out.push(CharInfo { at, ch, escaped: false, in_class: false, depth });
            }
            _ => {
                out.push(CharInfo { at, ch, escaped: false, in_class, depth });
            }
        }
    }
    out
}

/// Splits `s` into top-level alternatives: spans between unescaped `|`
/// characters at group depth zero outside character classes. Returns
/// `(byte_start, text)` pairs; an empty alternative yields an empty text.
pub(crate) fn split_top_level(s: &str) -> Vec<(usize, &str)> {
    let info = analyze(s);
    let mut parts = Vec::new();
    let mut start = 0usize;
    for c in &info {
        if c.ch == '|' && !c.escaped && !c.in_class && c.depth == 0 {
            parts.push((start, &s[start..c.at]));
            start = c.at + 1;
        }
    }
    parts.push((start, &s[start..]));
    parts
}

/// True when an alternative is inert: it begins with the `(?!x)x` token and
/// therefore can never match.
pub(crate) fn is_inert_alternative(alt: &str) -> bool {
    alt.starts_with(crate::INERT_TOKEN)
}
