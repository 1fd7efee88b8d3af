//! Compiles a live regex plus per-deployment customization into an
//! immutable matcher, and classifies texts with explanatory snippets.
//!
//! Classification is deliberately transparent: the report carries the
//! actual matched snippets so a reviewer can see why a text was labeled,
//! sorted shortest-first because short snippets are the easiest to judge.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use thiserror::Error;

/// Backtracking budget per scan. The authored patterns use reluctant
/// bounded gaps, so real scans stay far below this; the limit only guards
/// against pathological author input.
const BACKTRACK_LIMIT: usize = 10_000_000;

// ---- types ----

/// Per-deployment matching adjustments, applied around one shared regex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Customization {
    /// Match only the first k lines of each text.
    pub first_k_lines: Option<u32>,
    /// Match only the first k whitespace-separated words of each text.
    pub first_k_words: Option<u32>,
    /// Regexes whose matches are removed from the text before matching.
    pub strip_patterns: Vec<String>,
    /// Regexes that veto the whole text when they match it.
    pub negative_regexes: Vec<String>,
    /// Regexes that drop individual snippets they match.
    pub discount_snippet_patterns: Vec<String>,
    /// Maximum number of snippets kept in a report.
    pub snippet_cap: usize,
}

impl Default for Customization {
    fn default() -> Self {
        Customization {
            first_k_lines: None,
            first_k_words: None,
            strip_patterns: Vec::new(),
            negative_regexes: Vec::new(),
            discount_snippet_patterns: Vec::new(),
            snippet_cap: 30,
        }
    }
}

impl Customization {
    fn check(&self) -> Result<(), MatcherError> {
        if self.snippet_cap < 1 {
            return Err(MatcherError::InvalidCustomization {
                detail: "snippet_cap must be at least 1".into(),
            });
        }
        if self.first_k_lines.is_some() && self.first_k_words.is_some() {
            return Err(MatcherError::InvalidCustomization {
                detail: "at most one of first_k_lines and first_k_words may be set".into(),
            });
        }
        Ok(())
    }
}

/// An immutable compiled topic matcher, safe to share across threads.
pub struct CompiledTopicMatcher {
    live_pattern: String,
    main: fancy_regex::Regex,
    strip: Vec<fancy_regex::Regex>,
    negative: Vec<fancy_regex::Regex>,
    discount: Vec<fancy_regex::Regex>,
    customization: Customization,
    source_fingerprint: String,
}

/// The outcome of classifying one text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matched: bool,
    /// Deduplicated matched snippets, shortest first, capped. Kept even
    /// when vetoed so a reviewer can see what the veto suppressed.
    pub snippets: Vec<String>,
    /// True when a negative regex fired; forces `matched` to false.
    pub vetoed: bool,
}

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("COMPILE_FAIL: {detail}")]
    CompileFail { detail: String },
    #[error("invalid customization: {detail}")]
    InvalidCustomization { detail: String },
}

// ---- compilation ----

/// Compiles a live regex with the engine settings every caller must share.
/// Returns the engine's message on failure.
pub(crate) fn engine_compile(live: &str) -> Result<fancy_regex::Regex, String> {
    fancy_regex::RegexBuilder::new(live)
        .backtrack_limit(BACKTRACK_LIMIT)
        .build()
        .map_err(|e| e.to_string())
}

/// Compiles a live regex and its customization into a reusable matcher.
///
/// The portability dialect is enforced here, not just syntax: constructs
/// the engine accepts but some deployment surfaces break on (lookbehind,
/// possessive quantifiers, recursion, inline flags) are rejected.
pub fn compile(regex: &str, customization: Customization) -> Result<CompiledTopicMatcher, MatcherError> {
    customization.check()?;
    if let Some(hit) = crate::validate::scan_banned(regex, &crate::validate::BanList::default()).first() {
        return Err(MatcherError::CompileFail {
            detail: format!("banned construct {:?} at byte {}", hit.needle, hit.at),
        });
    }
    let main = engine_compile(regex).map_err(|detail| MatcherError::CompileFail { detail })?;
    let compile_list = |patterns: &[String], what: &str| -> Result<Vec<fancy_regex::Regex>, MatcherError> {
        patterns
            .iter()
            .map(|p| {
                engine_compile(p).map_err(|detail| MatcherError::CompileFail {
                    detail: format!("{} {:?}: {}", what, p, detail),
                })
            })
            .collect()
    };
    let strip = compile_list(&customization.strip_patterns, "strip pattern")?;
    let negative = compile_list(&customization.negative_regexes, "negative regex")?;
    let discount = compile_list(&customization.discount_snippet_patterns, "discount pattern")?;
    let source_fingerprint = fingerprint_of(regex);
    Ok(CompiledTopicMatcher {
        live_pattern: regex.to_string(),
        main,
        strip,
        negative,
        discount,
        customization,
        source_fingerprint,
    })
}

/// Stable content hash of a live regex string.
pub fn fingerprint_of(live: &str) -> String {
    let mut h = Sha256::new();
    h.update(live.as_bytes());
    format!("{:x}", h.finalize())
}

// ---- preprocessing ----

/// Applies the text-side customization: case fold, strip patterns (each
/// pattern's occurrences removed left to right, patterns in list order),
/// then truncation to the first k lines or words.
///
/// Truncation cuts the original bytes rather than re-joining tokens, so a
/// truncated text is always a prefix of the untruncated one.
pub fn preprocess(text: &str, customization: &Customization) -> String {
    let strip: Vec<fancy_regex::Regex> =
        customization.strip_patterns.iter().filter_map(|p| engine_compile(p).ok()).collect();
    apply_preprocess(text, &strip, customization)
}

fn apply_preprocess(text: &str, strip: &[fancy_regex::Regex], customization: &Customization) -> String {
    let mut out = text.to_lowercase();
    for re in strip {
        out = remove_all(re, &out);
    }
    if let Some(k) = customization.first_k_lines {
        truncate_to_lines(&mut out, k as usize);
    } else if let Some(k) = customization.first_k_words {
        truncate_to_words(&mut out, k as usize);
    }
    out
}

fn remove_all(re: &fancy_regex::Regex, text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (a, b) in scan_spans(re, text) {
        out.push_str(&text[last..a]);
        last = b;
    }
    out.push_str(&text[last..]);
    out
}

fn truncate_to_lines(text: &mut String, k: usize) {
    let mut seen = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            seen += 1;
            if seen == k {
                text.truncate(i);
                return;
            }
        }
    }
}

fn truncate_to_words(text: &mut String, k: usize) {
    if k == 0 {
        text.clear();
        return;
    }
    let mut words_ended = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_word {
                words_ended += 1;
                if words_ended == k {
                    text.truncate(i);
                    return;
                }
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
}

// ---- classification ----

/// Non-overlapping leftmost match spans. An engine error (backtrack budget
/// exhausted) stops the scan; spans found so far are kept.
fn scan_spans(re: &fancy_regex::Regex, text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for m in re.find_iter(text) {
        match m {
            Ok(m) => out.push((m.start(), m.end())),
            Err(_) => break,
        }
    }
    out
}

fn ok_is_match(re: &fancy_regex::Regex, text: &str) -> bool {
    re.is_match(text).unwrap_or(false)
}

impl CompiledTopicMatcher {
    pub fn pattern(&self) -> &str {
        &self.live_pattern
    }

    pub fn customization(&self) -> &Customization {
        &self.customization
    }

    pub fn fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    /// This matcher's preprocessing, as applied before every scan.
    pub fn preprocess(&self, text: &str) -> String {
        apply_preprocess(text, &self.strip, &self.customization)
    }

    /// Match spans of the main regex over an already-preprocessed text.
    pub fn match_spans(&self, preprocessed: &str) -> Vec<(usize, usize)> {
        scan_spans(&self.main, preprocessed)
    }

    /// Classifies a text and explains the decision.
    pub fn classify(&self, text: &str) -> MatchReport {
        let pre = self.preprocess(text);
        let mut seen = BTreeSet::new();
        let mut snippets: Vec<String> = Vec::new();
        for (a, b) in self.match_spans(&pre) {
            let snippet = &pre[a..b];
            if seen.insert(snippet.to_string()) {
                snippets.push(snippet.to_string());
            }
        }
        snippets.retain(|s| !self.discount.iter().any(|re| ok_is_match(re, s)));
        let vetoed = self.negative.iter().any(|re| ok_is_match(re, &pre));
        let matched = !vetoed && !snippets.is_empty();
        // Stable sort: equal-length snippets keep first-seen order.
        snippets.sort_by_key(|s| s.chars().count());
        snippets.truncate(self.customization.snippet_cap);
        MatchReport { matched, snippets, vetoed }
    }

    /// Boolean-only matching with early termination. Agrees with
    /// `classify(text).matched` on every input; skips snippet collection.
    pub fn is_match(&self, text: &str) -> bool {
        let pre = self.preprocess(text);
        if self.negative.iter().any(|re| ok_is_match(re, &pre)) {
            return false;
        }
        if self.discount.is_empty() {
            return matches!(self.main.find(&pre), Ok(Some(_)));
        }
        for m in self.main.find_iter(&pre) {
            match m {
                Ok(m) => {
                    if !self.discount.iter().any(|re| ok_is_match(re, m.as_str())) {
                        return true;
                    }
                }
                Err(_) => return false,
            }
        }
        false
    }
}
