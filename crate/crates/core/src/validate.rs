//! Pre-submit static checks on stored regex strings and documents.
//!
//! Every problem is a [`Finding`], never a hard failure: the caller gets
//! the complete list and decides what blocks. ERROR findings block
//! publication; WARNINGs are readability advice.
//!
//! The checks target the bug classes that actually bite in production:
//! backslashes that lost their doubling in transit, alternatives left
//! empty by editing (`||` matches everything), syntax that one deployment
//! surface silently reinterprets, and regressions against the document's
//! own example texts.

use serde::{Deserialize, Serialize};

use crate::matcher;
use crate::model::RegexDocument;
use crate::render;
use crate::scan;

// ---- findings ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Code {
    OddBackslash,
    EmptyAlternative,
    CompileFail,
    BannedSyntax,
    TestFail,
    RtlUnwrapped,
}

/// One validation result. `location` is a byte offset into the checked
/// stored string, or a test index for TEST_FAIL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: Code,
    pub location: usize,
    pub message: String,
}

impl Finding {
    fn error(code: Code, location: usize, message: String) -> Self {
        Finding { severity: Severity::Error, code, location, message }
    }
    fn warning(code: Code, location: usize, message: String) -> Self {
        Finding { severity: Severity::Warning, code, location, message }
    }
}

/// True when any finding in the list blocks publication.
pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

// ---- banned syntax ----

/// A syntax ban: either one of the builtin construct detectors or a
/// literal substring from a banlist file.
#[derive(Debug, Clone, PartialEq, Eq)]
enum BanRule {
    Lookbehind,
    Possessive,
    Recursion,
    InlineFlags,
    Literal(String),
}

/// The set of constructs a regex may not use. The default list bans what
/// common deployment surfaces (SQL, PHP, Java, Python) disagree on:
/// lookbehind, possessive quantifiers, recursion, and inline flag groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BanList {
    rules: Vec<BanRule>,
}

impl Default for BanList {
    fn default() -> Self {
        BanList {
            rules: vec![BanRule::Lookbehind, BanRule::Possessive, BanRule::Recursion, BanRule::InlineFlags],
        }
    }
}

impl BanList {
    /// Parses a banlist file: one rule per line. The keywords
    /// `lookbehind`, `possessive`, `recursion`, and `inline_flags` select
    /// the builtin detectors; any other nonempty line is a literal
    /// substring to ban. Blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Self {
        let mut rules = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rules.push(match line {
                "lookbehind" => BanRule::Lookbehind,
                "possessive" => BanRule::Possessive,
                "recursion" => BanRule::Recursion,
                "inline_flags" => BanRule::InlineFlags,
                lit => BanRule::Literal(lit.to_string()),
            });
        }
        BanList { rules }
    }
}

/// One banned-syntax occurrence in a live regex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BanHit {
    /// Byte offset in the live string.
    pub at: usize,
    /// What was found, for the message.
    pub needle: String,
}

/// Scans a live regex for banned constructs. Escaped characters and
/// character-class contents never trigger the structural detectors.
pub fn scan_banned(live: &str, banlist: &BanList) -> Vec<BanHit> {
    let info = scan::analyze(live);
    let significant = |i: usize| -> bool { !info[i].escaped && !info[i].in_class };
    let mut hits: Vec<BanHit> = Vec::new();
    for rule in &banlist.rules {
        match rule {
            BanRule::Lookbehind => {
                for w in find_raw(live, "(?<=").into_iter().chain(find_raw(live, "(?<!")) {
                    if significant(char_index_at(&info, w)) {
                        hits.push(BanHit { at: w, needle: live[w..w + 4].to_string() });
                    }
                }
            }
            BanRule::Possessive => {
                for (i, c) in info.iter().enumerate() {
                    if matches!(c.ch, '*' | '+' | '?' | '}')
                        && significant(i)
                        && info.get(i + 1).map(|n| n.ch) == Some('+')
                    {
                        hits.push(BanHit { at: c.at, needle: format!("{}+", c.ch) });
                    }
                }
            }
            BanRule::Recursion => {
                for needle in ["(?R", "(?P>", "(?&"] {
                    for w in find_raw(live, needle) {
                        if significant(char_index_at(&info, w)) {
                            hits.push(BanHit { at: w, needle: needle.to_string() });
                        }
                    }
                }
                // "(?<digit>" is a subroutine call in some dialects.
                for (i, c) in info.iter().enumerate() {
                    if c.ch == '('
                        && significant(i)
                        && info.get(i + 1).map(|n| n.ch) == Some('?')
                        && info.get(i + 2).map(|n| n.ch.is_ascii_digit()) == Some(true)
                    {
                        hits.push(BanHit { at: c.at, needle: "(?digit".to_string() });
                    }
                }
                for w in find_raw(live, "\\g<") {
                    let idx = char_index_at(&info, w);
                    if !info[idx].escaped && !info[idx].in_class {
                        hits.push(BanHit { at: w, needle: "\\g<".to_string() });
                    }
                }
            }
            BanRule::InlineFlags => {
                for (i, c) in info.iter().enumerate() {
                    if c.ch != '(' || !significant(i) || info.get(i + 1).map(|n| n.ch) != Some('?') {
                        continue;
                    }
                    let mut j = i + 2;
                    while info.get(j).map(|n| n.ch.is_ascii_alphabetic() || n.ch == '-') == Some(true) {
                        j += 1;
                    }
                    if j > i + 2 && matches!(info.get(j).map(|n| n.ch), Some(':') | Some(')')) {
                        let end = info[j].at + 1;
                        hits.push(BanHit { at: c.at, needle: live[c.at..end].to_string() });
                    }
                }
            }
            BanRule::Literal(lit) => {
                for w in find_raw(live, lit) {
                    if !info[char_index_at(&info, w)].escaped {
                        hits.push(BanHit { at: w, needle: lit.clone() });
                    }
                }
            }
        }
    }
    hits.sort_by(|a, b| a.at.cmp(&b.at).then_with(|| a.needle.cmp(&b.needle)));
    hits.dedup_by_key(|h| h.at);
    hits
}

fn find_raw(haystack: &str, needle: &str) -> Vec<usize> {
    if needle.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(p) = haystack[from..].find(needle) {
        out.push(from + p);
        from += p + 1;
    }
    out
}

/// Index into the analysis vector of the character starting at byte `at`.
fn char_index_at(info: &[scan::CharInfo], at: usize) -> usize {
    info.iter().position(|c| c.at == at).expect("offset from the same string")
}

// ---- stored-string validation ----

/// Validates a stored (doubled-backslash) regex string.
///
/// When lone backslashes are present, only those findings are returned:
/// the string cannot be unescaped, so later checks would run on garbage.
pub fn validate_stored(stored: &str, banlist: &BanList) -> Vec<Finding> {
    let odd = odd_backslashes(stored);
    if !odd.is_empty() {
        return odd;
    }
    let live = render::unescape_from_store(stored).expect("no lone backslashes remain");
    let mut findings = live_checks(&live, banlist);
    findings.sort_by_key(|f| f.location);
    findings
}

fn odd_backslashes(stored: &str) -> Vec<Finding> {
    let mut findings = Vec::new();
    let bytes = stored.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            if bytes.get(i + 1) == Some(&b'\\') {
                i += 2;
            } else {
                findings.push(Finding::error(
                    Code::OddBackslash,
                    i,
                    format!("lone backslash at byte {}; stored regexes double every backslash", i),
                ));
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    findings
}

/// The checks that operate on the live form. Locations are mapped back to
/// stored-form offsets, since that is the string the caller handed in.
fn live_checks(live: &str, banlist: &BanList) -> Vec<Finding> {
    let mut findings = Vec::new();
    let to_stored = |at: usize| render::live_to_stored_offset(live, at);

    for hit in scan_banned(live, banlist) {
        findings.push(Finding::error(
            Code::BannedSyntax,
            to_stored(hit.at),
            format!("banned construct {:?}", hit.needle),
        ));
    }

    for (at, pair) in empty_alternatives(live) {
        findings.push(Finding::error(
            Code::EmptyAlternative,
            to_stored(at),
            format!("empty alternative {:?} matches everywhere", pair),
        ));
    }

    if let Err(detail) = matcher::engine_compile(live) {
        findings.push(Finding::error(Code::CompileFail, 0, format!("regex does not compile: {}", detail)));
    }

    for (at, alt) in scan::split_top_level(live) {
        if !scan::is_inert_alternative(alt)
            && crate::model::first_strong_is_rtl(alt)
            && !alt_fully_wrapped(alt)
        {
            findings.push(Finding::warning(
                Code::RtlUnwrapped,
                to_stored(at),
                "RTL clause is not parenthesized; bidi reordering makes the rendered pattern unreadable".into(),
            ));
        }
    }

    findings
}

/// Occurrences of the empty-alternative patterns `||`, `(|`, `|)` at any
/// nesting depth, skipping escaped characters and class contents.
fn empty_alternatives(live: &str) -> Vec<(usize, &'static str)> {
    let info = scan::analyze(live);
    let mut out = Vec::new();
    for i in 0..info.len().saturating_sub(1) {
        let a = &info[i];
        let b = &info[i + 1];
        if a.escaped || a.in_class || b.escaped || b.in_class {
            continue;
        }
        if b.at != a.at + a.ch.len_utf8() {
            continue;
        }
        let pair = match (a.ch, b.ch) {
            ('|', '|') => "||",
            ('(', '|') => "(|",
            ('|', ')') => "|)",
            _ => continue,
        };
        out.push((a.at, pair));
    }
    out
}

fn alt_fully_wrapped(alt: &str) -> bool {
    if !alt.starts_with('(') {
        return false;
    }
    let info = scan::analyze(alt);
    for c in &info {
        if c.ch == ')' && !c.escaped && !c.in_class && c.depth == 0 {
            return c.at == alt.len() - 1;
        }
    }
    false
}

// ---- document validation ----

/// Validates a document: renders it, runs every stored-string check on the
/// rendering, then replays the document's own test suite.
///
/// String findings come first, ordered by location; test findings follow
/// in suite order with `location` holding the index into the failing list.
pub fn validate_document(doc: &RegexDocument, banlist: &BanList) -> Vec<Finding> {
    let live = match render::render_compact(doc) {
        Ok(live) => live,
        Err(e) => {
            return vec![Finding::error(Code::CompileFail, 0, e.to_string())];
        }
    };
    let mut findings = live_checks(&live, banlist);
    findings.sort_by_key(|f| f.location);

    if let Ok(m) = matcher::compile(&live, matcher::Customization::default()) {
        for (i, text) in doc.tests.must_match.iter().enumerate() {
            if !m.classify(text).matched {
                findings.push(Finding::error(
                    Code::TestFail,
                    i,
                    format!("must_match[{}] {:?} did not match", i, text),
                ));
            }
        }
        for (i, text) in doc.tests.must_not_match.iter().enumerate() {
            if m.classify(text).matched {
                findings.push(Finding::error(
                    Code::TestFail,
                    i,
                    format!("must_not_match[{}] {:?} matched", i, text),
                ));
            }
        }
    }
    findings
}
