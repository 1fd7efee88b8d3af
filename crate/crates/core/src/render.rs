//! Turns a [`RegexDocument`](crate::model::RegexDocument) into portable
//! regex strings and converts between the live and stored escape forms.
//!
//! Two renderings exist. The compact form is a single-line alternation of
//! all clauses, for machines. The annotated form embeds section labels and
//! the document version as inert alternatives and breaks the pattern into
//! lines a reviewer can scan; it matches exactly the same texts because
//! every annotation is an alternative that can never match.
//!
//! The stored form doubles every backslash so patterns survive copy/paste
//! through shells, spreadsheets, and SQL string literals unmangled. Live
//! form is what the engine compiles.

use thiserror::Error;

use crate::model::{Clause, RegexDocument};
use crate::scan;
use crate::INERT_TOKEN;

/// Smallest usable annotated line width; narrower layouts would break on
/// nearly every unit.
pub const MIN_LINE_WIDTH: usize = 20;

/// Layout options for [`render_annotated`].
#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Emit the annotated (labeled, multi-line) form instead of compact.
    pub annotated: bool,
    /// Soft target for annotated line length, in characters. Values below
    /// [`MIN_LINE_WIDTH`] are raised to it. A single clause longer than the
    /// width still stays on one line: breaks never land inside a clause.
    pub max_line_width: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { annotated: true, max_line_width: 100 }
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("RENDER_INVALID: rendered regex fails to compile: {detail}")]
    RenderInvalid { detail: String },
    #[error("LABEL_CHARSET: label {label:?} contains characters outside [a-z0-9_]")]
    LabelCharset { label: String },
    #[error("EMPTY_SET: bipartite word sets must be nonempty")]
    EmptySet,
}

#[derive(Debug, Error)]
pub enum EscapeError {
    #[error("ODD_BACKSLASH at byte {at}: lone backslash in stored regex")]
    OddBackslash { at: usize },
}

// ---- escape forms ----

/// Converts a live regex to stored form by doubling every backslash.
pub fn escape_for_store(regex: &str) -> String {
    regex.replace('\\', "\\\\")
}

/// Converts a stored regex back to live form by halving backslash pairs.
///
/// A lone backslash means the stored text was hand-edited or truncated;
/// that is an error, not something to paper over.
pub fn unescape_from_store(stored: &str) -> Result<String, EscapeError> {
    let mut out = String::with_capacity(stored.len());
    let bytes = stored.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            if bytes.get(i + 1) == Some(&b'\\') {
                out.push('\\');
                i += 2;
            } else {
                return Err(EscapeError::OddBackslash { at: i });
            }
        } else {
            let ch = stored[i..].chars().next().expect("in-bounds char");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    Ok(out)
}

/// Maps a byte offset in a live regex to the corresponding byte offset in
/// its stored form: each backslash before the position widens by one byte.
pub fn live_to_stored_offset(live: &str, live_at: usize) -> usize {
    live_at + live.as_bytes()[..live_at.min(live.len())].iter().filter(|&&b| b == b'\\').count()
}

// ---- clause fragments ----

/// Renders one keyword clause: guards around the core, with an optional
/// negative-lookahead exclusion list between core and suffix guard.
pub fn build_keyword(core: &str, exclusions: &[String], prefix_guard: &str, suffix_guard: &str) -> String {
    let mut out = String::new();
    out.push_str(prefix_guard);
    out.push_str(core);
    if !exclusions.is_empty() {
        out.push_str("(?!(");
        out.push_str(&exclusions.join("|"));
        out.push_str("))");
    }
    out.push_str(suffix_guard);
    out
}

/// Renders one bipartite clause: any word of `set_a` within `max_gap`
/// characters of any word of `set_b`, reluctantly, in one or both orders.
pub fn build_bipartite(
    set_a: &[String],
    set_b: &[String],
    max_gap: u32,
    ordered_both_ways: bool,
) -> Result<String, RenderError> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(RenderError::EmptySet);
    }
    let a = set_a.join("|");
    let b = set_b.join("|");
    let mut out = format!("({}).{{0,{}}}?({})", a, max_gap, b);
    if ordered_both_ways {
        out.push_str(&format!("|({}).{{0,{}}}?({})", b, max_gap, a));
    }
    Ok(out)
}

/// Renders a clause to its live fragment, before alternation wrapping.
pub fn build_clause(clause: &Clause) -> Result<String, RenderError> {
    match clause {
        Clause::Literal { pattern } => Ok(pattern.clone()),
        Clause::Keyword { core, exclusions, prefix_guard, suffix_guard } => {
            Ok(build_keyword(core, exclusions, prefix_guard, suffix_guard))
        }
        Clause::Bipartite { set_a, set_b, max_gap, ordered_both_ways } => {
            build_bipartite(set_a, set_b, *max_gap, *ordered_both_ways)
        }
    }
}

// ---- document renderings ----

/// Renders the single-line machine form: every clause wrapped in a plain
/// group, all groups joined by `|` in document order.
pub fn render_compact(doc: &RegexDocument) -> Result<String, RenderError> {
    let mut parts = Vec::new();
    for section in &doc.sections {
        for clause in &section.clauses {
            parts.push(format!("({})", build_clause(clause)?));
        }
    }
    let out = parts.join("|");
    compile_check(&out)?;
    Ok(out)
}

/// Renders the reviewable multi-line form.
///
/// Layout rules: the version marker `(?!x)x_version_<n>` is the first
/// alternative; each section's clauses are preceded by `(?!x)x_<label>`,
/// which always starts a fresh line; a line break is only ever emitted by
/// appending a bare inert token that absorbs the newline, and every
/// continuation line starts with `|`. Stripping all whitespace and inert
/// alternatives from the result leaves exactly the compact rendering's
/// alternation set, which is why match behavior is identical.
pub fn render_annotated(doc: &RegexDocument, opts: &RenderOptions) -> Result<String, RenderError> {
    let width = opts.max_line_width.max(MIN_LINE_WIDTH);

    enum Unit {
        Label(String),
        Clause(String),
    }
    let mut units = vec![Unit::Label(format!("{}_version_{}", INERT_TOKEN, doc.version))];
    for section in &doc.sections {
        if !section.label.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
            return Err(RenderError::LabelCharset { label: section.label.clone() });
        }
        units.push(Unit::Label(format!("{}_{}", INERT_TOKEN, section.label)));
        for clause in &section.clauses {
            units.push(Unit::Clause(format!("({})", build_clause(clause)?)));
        }
    }

    // The break sequence "|(?!x)x\n" costs the current line one separator
    // plus the token; reserve that much when deciding whether a unit fits.
    let break_cost = 1 + INERT_TOKEN.chars().count();
    let mut out = String::new();
    let mut line_chars = 0usize;
    for (i, unit) in units.iter().enumerate() {
        let (text, force_break) = match unit {
            Unit::Label(t) => (t, i > 0),
            Unit::Clause(t) => (t, false),
        };
        let unit_chars = text.chars().count();
        if i > 0 {
            if force_break || line_chars + 1 + unit_chars + break_cost > width {
                out.push('|');
                out.push_str(INERT_TOKEN);
                out.push_str("\n|");
                line_chars = 1;
            } else {
                out.push('|');
                line_chars += 1;
            }
        }
        out.push_str(text);
        line_chars += unit_chars;
    }
    compile_check(&out)?;
    Ok(out)
}

/// Renders with `opts.annotated` choosing the form.
pub fn render(doc: &RegexDocument, opts: &RenderOptions) -> Result<String, RenderError> {
    if opts.annotated {
        render_annotated(doc, opts)
    } else {
        render_compact(doc)
    }
}

fn compile_check(live: &str) -> Result<(), RenderError> {
    crate::matcher::engine_compile(live)
        .map(|_| ())
        .map_err(|detail| RenderError::RenderInvalid { detail })
}

/// Strips inert alternatives and line breaks from an annotated rendering,
/// recovering the alternation set of the compact form. Used by tests and by
/// the profiler, which must not report dead annotation text as chunks.
pub fn strip_inert(rendered: &str) -> String {
    let joined: String = rendered.split('\n').collect();
    let alts: Vec<&str> = scan::split_top_level(&joined)
        .into_iter()
        .filter(|(_, alt)| !scan::is_inert_alternative(alt))
        .map(|(_, alt)| alt)
        .collect();
    alts.join("|")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_document;

    fn two_literal_doc() -> RegexDocument {
        parse_document(
            r#"{"topic":"t","language":"en","tier":"tier1","version":3,"sections":[
                {"label":"main","clauses":[{"kind":"literal","pattern":"foo"},{"kind":"literal","pattern":"bar"}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn compact_wraps_and_joins() {
        assert_eq!(render_compact(&two_literal_doc()).unwrap(), "(foo)|(bar)");
    }

    #[test]
    fn keyword_fragment_layout() {
        assert_eq!(
            build_keyword("corona", &["ry".into(), "do".into(), r"\W{0,3}beer".into()], "", ""),
            r"corona(?!(ry|do|\W{0,3}beer))"
        );
        assert_eq!(
            build_keyword("c[o0]vi[dt]", &[], r"(\b|\d|_|#)", r"(\b|\d|_)"),
            r"(\b|\d|_|#)c[o0]vi[dt](\b|\d|_)"
        );
    }

    #[test]
    fn bipartite_singletons() {
        assert_eq!(
            build_bipartite(&["corona".into()], &["virus".into()], 80, true).unwrap(),
            "(corona).{0,80}?(virus)|(virus).{0,80}?(corona)"
        );
        assert_eq!(
            build_bipartite(&["a".into()], &["b".into()], 5, false).unwrap(),
            "(a).{0,5}?(b)"
        );
        assert!(matches!(build_bipartite(&[], &["b".into()], 5, true), Err(RenderError::EmptySet)));
    }

    #[test]
    fn escape_round_trip() {
        let live = r"\b[ck]ovid\d";
        let stored = escape_for_store(live);
        assert_eq!(stored, r"\\b[ck]ovid\\d");
        assert_eq!(unescape_from_store(&stored).unwrap(), live);
        assert_eq!(escape_for_store("corona"), "corona");
        assert_eq!(unescape_from_store(r"a\\\\b").unwrap(), r"a\\b");
    }

    #[test]
    fn lone_backslash_is_an_error() {
        match unescape_from_store(r"a\bc") {
            Err(EscapeError::OddBackslash { at }) => assert_eq!(at, 1),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn offsets_map_live_to_stored() {
        let live = r"a\d\wb";
        assert_eq!(live_to_stored_offset(live, 0), 0);
        assert_eq!(live_to_stored_offset(live, 1), 1);
        assert_eq!(live_to_stored_offset(live, 3), 4);
        assert_eq!(live_to_stored_offset(live, 5), 7);
    }

    #[test]
    fn annotated_layout_rules_hold() {
        let doc = two_literal_doc();
        let out = render_annotated(&doc, &RenderOptions { annotated: true, max_line_width: 20 }).unwrap();
        let lines: Vec<&str> = out.split('\n').collect();
        assert!(lines.len() > 1, "narrow width must force breaks: {:?}", out);
        for (i, line) in lines.iter().enumerate() {
            if i + 1 < lines.len() {
                assert!(line.ends_with(crate::INERT_TOKEN), "break without inert token: {:?}", line);
            }
            if i > 0 {
                assert!(line.starts_with('|'), "continuation without '|': {:?}", line);
            }
        }
        assert!(out.starts_with("(?!x)x_version_3"));
        assert!(out.contains("(?!x)x_main"));
    }

    #[test]
    fn strip_inert_recovers_compact() {
        let doc = two_literal_doc();
        let annotated = render_annotated(&doc, &RenderOptions::default()).unwrap();
        assert_eq!(strip_inert(&annotated), render_compact(&doc).unwrap());
    }

    #[test]
    fn inert_token_matches_nothing() {
        let re = fancy_regex::Regex::new(crate::INERT_TOKEN).unwrap();
        assert!(re.find("xxxx").unwrap().is_none());
        assert!(re.find("").unwrap().is_none());
    }

    #[test]
    fn render_invalid_on_broken_clause() {
        let doc = parse_document(
            r#"{"topic":"t","language":"en","tier":"tier1","version":1,"sections":[
                {"label":"main","clauses":[{"kind":"literal","pattern":"foo("}]}]}"#,
        )
        .unwrap();
        assert!(matches!(render_compact(&doc), Err(RenderError::RenderInvalid { .. })));
    }
}
