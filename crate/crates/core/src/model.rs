//! Structured source representation of a topic regex.
//!
//! A document is the machine-editable form of one large regex: metadata,
//! ordered sections of clauses, and a test suite. The rendered regex (see
//! [`crate::render`]) embeds section labels and the version as inert text;
//! the document keeps them as plain fields so tooling never has to parse
//! comments back out of a pattern.
//!
//! # Canonical form
//!
//! `serialize_document` emits canonical JSON: stable key order, two-space
//! indent, LF endings, trailing newline, all defaults resolved. Parsing
//! canonicalizes fragments (RTL keywords get wrapped in parentheses), so
//! `parse ∘ serialize` is the identity on valid documents and
//! `serialize ∘ parse` is the identity on canonical bytes.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::scan;

/// Default prefix guard for keyword clauses: word boundary, digit,
/// underscore, or hashtag.
pub const DEFAULT_PREFIX_GUARD: &str = r"(\b|\d|_|#)";
/// Default suffix guard for keyword clauses.
pub const DEFAULT_SUFFIX_GUARD: &str = r"(\b|\d|_)";
/// Default character gap for bipartite clauses.
pub const DEFAULT_MAX_GAP: u32 = 80;
/// Upper bound on bipartite gaps; larger gaps merge unrelated phrases and
/// slow matching down.
pub const MAX_GAP_LIMIT: u32 = 1000;

// ---- types ----

/// Precision/recall tier of a published regex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Tier1,
    Tier2,
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tier::Tier1 => f.write_str("tier1"),
            Tier::Tier2 => f.write_str("tier2"),
        }
    }
}

impl std::str::FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tier1" => Ok(Tier::Tier1),
            "tier2" => Ok(Tier::Tier2),
            other => Err(format!("unknown tier {:?}, expected tier1 or tier2", other)),
        }
    }
}

/// One top-level alternative of the rendered regex.
///
/// Fragments are live-form (single backslashes) and treated as opaque
/// strings except where counting or profiling needs structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Clause {
    /// A raw regex fragment used verbatim.
    Literal { pattern: String },
    /// One word with optional spelling variants, boundary guards, and a
    /// negative-lookahead exclusion list.
    Keyword {
        core: String,
        #[serde(default)]
        exclusions: Vec<String>,
        #[serde(default = "default_prefix_guard")]
        prefix_guard: String,
        #[serde(default = "default_suffix_guard")]
        suffix_guard: String,
    },
    /// Any word from `set_a` within `max_gap` characters of any word from
    /// `set_b`, in one or both orders.
    Bipartite {
        set_a: Vec<String>,
        set_b: Vec<String>,
        #[serde(default = "default_max_gap")]
        max_gap: u32,
        #[serde(default = "default_true")]
        ordered_both_ways: bool,
    },
}

fn default_prefix_guard() -> String {
    DEFAULT_PREFIX_GUARD.to_string()
}
fn default_suffix_guard() -> String {
    DEFAULT_SUFFIX_GUARD.to_string()
}
fn default_max_gap() -> u32 {
    DEFAULT_MAX_GAP
}
fn default_true() -> bool {
    true
}

/// A labeled group of unrelated clauses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub label: String,
    pub clauses: Vec<Clause>,
}

/// Known matching and non-matching examples, run by the validator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    #[serde(default)]
    pub must_match: Vec<String>,
    #[serde(default)]
    pub must_not_match: Vec<String>,
}

/// A complete topic regex source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexDocument {
    pub topic: String,
    pub language: String,
    pub tier: Tier,
    pub version: u32,
    pub sections: Vec<Section>,
    #[serde(default)]
    pub tests: TestSuite,
}

// ---- errors ----

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("MALFORMED_DOCUMENT: {detail}")]
    MalformedDocument { detail: String },
    #[error("INVARIANT_VIOLATION: {detail}")]
    InvariantViolation { detail: String },
}

#[derive(Debug, Error)]
pub enum VariantError {
    #[error("UNBOUNDED_FRAGMENT at byte {at}: {what}")]
    Unbounded { at: usize, what: String },
}

// ---- parse / serialize ----

/// Parses a document from its JSON form, checks every type invariant, and
/// canonicalizes fragments.
pub fn parse_document(input: &str) -> Result<RegexDocument, ModelError> {
    let mut doc: RegexDocument =
        serde_json::from_str(input).map_err(|e| ModelError::MalformedDocument {
            detail: format!("line {}, column {}: {}", e.line(), e.column(), e),
        })?;
    canonicalize(&mut doc);
    check_invariants(&doc)?;
    Ok(doc)
}

/// Serializes a document to canonical JSON bytes. The document is
/// canonicalized first, so programmatically built documents serialize the
/// same as parsed ones.
pub fn serialize_document(doc: &RegexDocument) -> String {
    let mut canon = doc.clone();
    canonicalize(&mut canon);
    let mut s = serde_json::to_string_pretty(&canon).expect("document serialization");
    s.push('\n');
    s
}

/// Wraps RTL-script keywords in parentheses. Rendering joins fragments with
/// regex operators whose visual order bidi reordering scrambles; parentheses
/// around each RTL word keep the rendered pattern reviewable.
fn canonicalize(doc: &mut RegexDocument) {
    for section in &mut doc.sections {
        for clause in &mut section.clauses {
            match clause {
                Clause::Keyword { core, .. } => wrap_if_rtl(core),
                Clause::Bipartite { set_a, set_b, .. } => {
                    set_a.iter_mut().for_each(wrap_if_rtl);
                    set_b.iter_mut().for_each(wrap_if_rtl);
                }
                Clause::Literal { .. } => {}
            }
        }
    }
}

fn wrap_if_rtl(frag: &mut String) {
    if first_strong_is_rtl(frag) && !fully_wrapped(frag) {
        *frag = format!("({})", frag);
    }
}

/// True when the fragment's first strong character is from an RTL script.
pub(crate) fn first_strong_is_rtl(frag: &str) -> bool {
    for ch in frag.chars() {
        if is_rtl_char(ch) {
            return true;
        }
        if ch.is_alphabetic() {
            return false;
        }
    }
    false
}

/// Strong RTL characters: Hebrew, Arabic, Syriac, Thaana, NKo, Samaritan,
/// Mandaic blocks and their presentation/extension ranges.
pub(crate) fn is_rtl_char(c: char) -> bool {
    matches!(
        c as u32,
        0x0590..=0x08FF
            | 0xFB1D..=0xFDFF
            | 0xFE70..=0xFEFF
            | 0x10800..=0x10FFF
            | 0x1E800..=0x1EEFF
    )
}

/// True when the whole fragment is one parenthesized group.
fn fully_wrapped(frag: &str) -> bool {
    if !frag.starts_with('(') {
        return false;
    }
    let info = scan::analyze(frag);
    for c in &info {
        if c.ch == ')' && !c.escaped && !c.in_class && c.depth == 0 {
            return c.at == frag.len() - 1;
        }
    }
    false
}

fn check_invariants(doc: &RegexDocument) -> Result<(), ModelError> {
    let violation = |detail: String| Err(ModelError::InvariantViolation { detail });
    if doc.topic.is_empty() {
        return violation("topic must be nonempty".into());
    }
    if doc.language.is_empty() {
        return violation("language must be nonempty".into());
    }
    if doc.version < 1 {
        return violation("version must be a positive integer".into());
    }
    if doc.sections.is_empty() {
        return violation("document must have at least one section".into());
    }
    let mut seen_labels = BTreeSet::new();
    for section in &doc.sections {
        if section.label.is_empty()
            || !section.label.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        {
            return violation(format!(
                "section label {:?} must be nonempty and drawn from [a-z0-9_]+",
                section.label
            ));
        }
        if !seen_labels.insert(&section.label) {
            return violation(format!("duplicate section label {:?}", section.label));
        }
        if section.clauses.is_empty() {
            return violation(format!("section {:?} has no clauses", section.label));
        }
        for clause in &section.clauses {
            check_clause(clause, &section.label)?;
        }
    }
    let matches: BTreeSet<&String> = doc.tests.must_match.iter().collect();
    for t in &doc.tests.must_not_match {
        if matches.contains(t) {
            return violation(format!("test text {:?} appears in both must_match and must_not_match", t));
        }
    }
    Ok(())
}

fn check_clause(clause: &Clause, label: &str) -> Result<(), ModelError> {
    let violation = |detail: String| Err(ModelError::InvariantViolation { detail });
    match clause {
        Clause::Literal { pattern } => {
            if pattern.is_empty() {
                return violation(format!("empty literal pattern in section {:?}", label));
            }
        }
        Clause::Keyword { core, exclusions, prefix_guard, suffix_guard } => {
            if core.is_empty() {
                return violation(format!("empty keyword core in section {:?}", label));
            }
            for (name, frag) in [("core", core), ("prefix_guard", prefix_guard), ("suffix_guard", suffix_guard)] {
                if has_top_level_alternation(frag) {
                    return violation(format!(
                        "keyword {} {:?} in section {:?} has a top-level '|'; wrap it in a group",
                        name, frag, label
                    ));
                }
            }
            for ex in exclusions {
                if ex.is_empty() {
                    return violation(format!("empty exclusion in section {:?}", label));
                }
                if has_top_level_alternation(ex) {
                    return violation(format!(
                        "exclusion {:?} in section {:?} has a top-level '|'; wrap it in a group",
                        ex, label
                    ));
                }
            }
        }
        Clause::Bipartite { set_a, set_b, max_gap, .. } => {
            if set_a.is_empty() || set_b.is_empty() {
                return violation(format!("bipartite clause in section {:?} has an empty word set", label));
            }
            if *max_gap > MAX_GAP_LIMIT {
                return violation(format!(
                    "bipartite max_gap {} in section {:?} exceeds the limit {}",
                    max_gap, label, MAX_GAP_LIMIT
                ));
            }
            for frag in set_a.iter().chain(set_b) {
                if frag.is_empty() {
                    return violation(format!("empty bipartite word fragment in section {:?}", label));
                }
                if has_top_level_alternation(frag) {
                    return violation(format!(
                        "bipartite fragment {:?} in section {:?} has a top-level '|'; wrap it in a group",
                        frag, label
                    ));
                }
            }
        }
    }
    Ok(())
}

fn has_top_level_alternation(frag: &str) -> bool {
    scan::split_top_level(frag).len() > 1
}

// ---- variant counting ----

/// Enumeration cap. Real word fragments stay in the tens of thousands; a
/// fragment that exceeds this is reported as unbounded rather than ground
/// through.
const ENUM_CAP: usize = 1_000_000;

/// Counts the distinct literal strings a finite-language fragment denotes.
///
/// Supported syntax: literal characters, escaped literals, `\d` (counted as
/// the ten ASCII digits), character classes with ranges, `?` on single
/// atoms, groups, and alternation. Duplicates collapse: `[aa]` counts 1.
/// Anything that makes the language infinite or falls outside this subset
/// is an `UNBOUNDED_FRAGMENT` error.
pub fn count_variants(fragment: &str) -> Result<u64, VariantError> {
    let mut p = VariantParser { s: fragment, pos: 0 };
    let set = p.alternation()?;
    if p.pos != p.s.len() {
        return Err(VariantError::Unbounded {
            at: p.pos,
            what: format!("unexpected {:?}", p.peek_char().map(String::from).unwrap_or_default()),
        });
    }
    Ok(set.len() as u64)
}

struct VariantParser<'a> {
    s: &'a str,
    pos: usize,
}

type VariantSet = BTreeSet<String>;

impl<'a> VariantParser<'a> {
    fn peek_char(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn err(&self, at: usize, what: &str) -> VariantError {
        VariantError::Unbounded { at, what: what.to_string() }
    }

    fn alternation(&mut self) -> Result<VariantSet, VariantError> {
        let mut set = self.concatenation()?;
        while self.peek_char() == Some('|') {
            self.bump();
            let rhs = self.concatenation()?;
            set.extend(rhs);
            if set.len() > ENUM_CAP {
                return Err(self.err(self.pos, "variant enumeration exceeds the cap"));
            }
        }
        Ok(set)
    }

    fn concatenation(&mut self) -> Result<VariantSet, VariantError> {
        let mut acc: VariantSet = BTreeSet::new();
        acc.insert(String::new());
        while let Some(c) = self.peek_char() {
            if c == '|' || c == ')' {
                break;
            }
            let at = self.pos;
            let mut atom = self.atom()?;
            match self.peek_char() {
                Some('?') => {
                    self.bump();
                    atom.insert(String::new());
                }
                Some(q @ ('*' | '+' | '{')) => {
                    return Err(self.err(self.pos, &format!("quantifier {:?} is not finite", q)));
                }
                _ => {}
            }
            if acc.len().saturating_mul(atom.len()) > ENUM_CAP {
                return Err(self.err(at, "variant enumeration exceeds the cap"));
            }
            let mut next = BTreeSet::new();
            for prefix in &acc {
                for suffix in &atom {
                    next.insert(format!("{}{}", prefix, suffix));
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<VariantSet, VariantError> {
        let at = self.pos;
        let c = self.bump().expect("caller checked nonempty");
        match c {
            '(' => {
                if self.peek_char() == Some('?') {
                    return Err(self.err(at, "group operators are not part of the finite subset"));
                }
                let set = self.alternation()?;
                match self.bump() {
                    Some(')') => Ok(set),
                    _ => Err(self.err(at, "unclosed group")),
                }
            }
            '[' => self.class(at),
            '\\' => {
                let e = self.bump().ok_or_else(|| self.err(at, "dangling backslash"))?;
                match e {
                    'd' => Ok(('0'..='9').map(String::from).collect()),
                    'w' | 's' | 'W' | 'S' | 'D' | 'b' | 'B' | 'g' | 'A' | 'z' | 'Z' => {
                        Err(self.err(at, &format!("\\{} is not part of the finite subset", e)))
                    }
                    _ => Ok(std::iter::once(String::from(e)).collect()),
                }
            }
            '?' | '*' | '+' | '{' => Err(self.err(at, "quantifier without a preceding atom")),
            '.' | '^' | '$' | ')' => Err(self.err(at, &format!("{:?} is not part of the finite subset", c))),
            other => Ok(std::iter::once(String::from(other)).collect()),
        }
    }

    fn class(&mut self, open_at: usize) -> Result<VariantSet, VariantError> {
        if self.peek_char() == Some('^') {
            return Err(self.err(open_at, "negated classes are not finite"));
        }
        let mut members: Vec<char> = Vec::new();
        let mut set: VariantSet = BTreeSet::new();
        let mut first = true;
        loop {
            let at = self.pos;
            let c = self.bump().ok_or_else(|| self.err(open_at, "unclosed character class"))?;
            let member = match c {
                ']' if !first => {
                    for m in members {
                        set.insert(String::from(m));
                    }
                    return Ok(set);
                }
                '\\' => {
                    let e = self.bump().ok_or_else(|| self.err(at, "dangling backslash in class"))?;
                    match e {
                        'd' => {
                            set.extend(('0'..='9').map(String::from));
                            first = false;
                            continue;
                        }
                        'w' | 's' | 'W' | 'S' | 'D' => {
                            return Err(self.err(at, &format!("\\{} in a class is not part of the finite subset", e)))
                        }
                        lit => lit,
                    }
                }
                lit => lit,
            };
            first = false;
            // A '-' between two members denotes a range.
            if self.peek_char() == Some('-') && !self.s[self.pos + 1..].starts_with(']') && self.pos + 1 < self.s.len()
            {
                self.bump();
                let hi_at = self.pos;
                let hi = match self.bump().ok_or_else(|| self.err(open_at, "unclosed character class"))? {
                    '\\' => self.bump().ok_or_else(|| self.err(hi_at, "dangling backslash in class"))?,
                    h => h,
                };
                if (hi as u32) < (member as u32) {
                    return Err(self.err(hi_at, "invalid class range"));
                }
                if (hi as u32 - member as u32) as usize > ENUM_CAP {
                    return Err(self.err(hi_at, "class range exceeds the enumeration cap"));
                }
                for cp in (member as u32)..=(hi as u32) {
                    if let Some(ch) = char::from_u32(cp) {
                        set.insert(String::from(ch));
                    }
                }
            } else {
                members.push(member);
            }
            if set.len() + members.len() > ENUM_CAP {
                return Err(self.err(open_at, "variant enumeration exceeds the cap"));
            }
        }
    }
}
