//! Structural regex profiling and distillation: break a regex into
//! chunks, ablate each chunk by substituting an unmatchable literal,
//! measure per-corpus recall loss, and suggest removals under a budget.
//!
//! Ablation asks "what would this fragment's absence cost?" without any
//! semantic analysis: replace the fragment with [`crate::ABLATION_LITERAL`]
//! everywhere it occurs, re-match the corpus, and count what changed. All
//! instances of identical text are blanked at once, because duplicated
//! fragments cover for each other and per-instance numbers would lie.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::discovery::Corpus;
use crate::matcher::{self, CompiledTopicMatcher, Customization};
use crate::scan;
use crate::ABLATION_LITERAL;

// ---- types ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChunkKind {
    Clause,
    Group,
    CharClass,
    LiteralWord,
    QuantifiedGap,
}

/// One ablatable fragment: an exact substring with every byte span where
/// that same text occurs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    pub kind: ChunkKind,
    /// Non-overlapping byte spans, ascending; each span's content equals
    /// `text`.
    pub occurrences: Vec<(usize, usize)>,
    /// True when any occurrence sits inside a lookaround assertion (or is
    /// one). Such chunks guard precision and are exempt from distillation.
    pub in_lookahead: bool,
}

/// Loss and gain per corpus for one ablated chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub chunk: Chunk,
    /// corpus name → % of baseline-matched weight lost after ablation.
    pub loss_pct: BTreeMap<String, f64>,
    /// corpus name → % of baseline-matched weight newly matched (possible
    /// when the chunk sat inside a negative lookahead).
    pub gain_pct: BTreeMap<String, f64>,
    pub max_loss: f64,
    /// True when the ablated regex failed to compile; numbers are absent
    /// but the row is kept so nothing vanishes silently.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    /// Rows sorted by descending max_loss (skipped rows last).
    pub rows: Vec<ProfileRow>,
    /// Corpora with zero baseline matches, excluded from the columns.
    pub skipped_corpora: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub final_regex: String,
    pub suggested_removals: Vec<Chunk>,
    /// Loss of the final regex vs the input regex on the calibration
    /// corpus, measured by a fresh re-match of both.
    pub final_loss_pct: f64,
}

#[derive(Debug, Error)]
pub enum ProfilerError {
    #[error("COMPILE_FAIL: {detail}")]
    CompileFail { detail: String },
    #[error("ABLATION_INVALID: {detail}")]
    AblationInvalid { detail: String },
    #[error("EMPTY_BASELINE: the regex matches nothing in any supplied corpus")]
    EmptyBaseline,
    #[error("loss budget must be a finite value >= 0, got {got}")]
    InvalidBudget { got: f64 },
}

// ---- decomposition ----

/// Breaks a regex into ablatable chunks: top-level alternatives, groups,
/// character classes, literal words (with class-bearing word units and
/// their literal-plus-class pairs), and quantified wildcards. Identical
/// texts are merged into one chunk carrying every occurrence span. Inert
/// `(?!x)x…` alternatives and their contents are excluded, so annotated
/// renderings profile the same as compact ones.
pub fn decompose(regex: &str) -> Result<Vec<Chunk>, ProfilerError> {
    matcher::engine_compile(regex).map_err(|detail| ProfilerError::CompileFail { detail })?;
    let info = scan::analyze(regex);
    let alternatives = scan::split_top_level(regex);
    let inert: Vec<(usize, usize)> = alternatives
        .iter()
        .filter(|(_, alt)| scan::is_inert_alternative(alt))
        .map(|(at, alt)| (*at, *at + alt.len()))
        .collect();
    let in_inert = |s: usize, e: usize| inert.iter().any(|&(a, b)| a <= s && e <= b);

    let mut raw: Vec<(String, ChunkKind, (usize, usize))> = Vec::new();
    let mut push = |text: &str, kind: ChunkKind, span: (usize, usize)| {
        if !text.is_empty() && !in_inert(span.0, span.1) {
            raw.push((text.to_string(), kind, span));
        }
    };

    // (a) top-level alternatives
    for (at, alt) in &alternatives {
        if !scan::is_inert_alternative(alt) {
            push(alt, ChunkKind::Clause, (*at, *at + alt.len()));
        }
    }

    // (b) parenthesized groups, with their lookaround extents on the side
    let mut lookarounds: Vec<(usize, usize)> = Vec::new();
    for (i, c) in info.iter().enumerate() {
        if c.ch == '(' && !c.escaped && !c.in_class {
            if let Some(end) = group_end(&info, i) {
                push(&regex[c.at..end], ChunkKind::Group, (c.at, end));
                if regex[c.at..end].starts_with("(?!") || regex[c.at..end].starts_with("(?=") {
                    lookarounds.push((c.at, end));
                }
            }
        }
    }

    // (c) character classes
    let mut classes: Vec<(usize, usize)> = Vec::new();
    for (i, c) in info.iter().enumerate() {
        if c.ch == '[' && !c.escaped && !c.in_class {
            let mut j = i + 1;
            while j < info.len() && info[j].in_class {
                j += 1;
            }
            let end = if j < info.len() { info[j].at } else { regex.len() };
            // info[j] is the first char after the class; the closing
            // bracket is the last in_class char.
            push(&regex[c.at..end], ChunkKind::CharClass, (c.at, end));
            classes.push((c.at, end));
        }
    }

    // (e) quantified wildcards
    let mut quant_braces: Vec<(usize, usize)> = brace_quantifiers(regex, &info);
    quant_braces.sort_unstable();
    for (i, c) in info.iter().enumerate() {
        if c.ch == '.' && !c.escaped && !c.in_class {
            if let Some(end) = quantifier_end(regex, &info, i, &quant_braces) {
                push(&regex[c.at..end], ChunkKind::QuantifiedGap, (c.at, end));
            }
        }
    }

    // (d) literal word units
    for unit in word_units(regex, &info, &classes, &quant_braces) {
        let n_lit = unit.elements.iter().filter(|e| !e.is_class).count();
        let n_class = unit.elements.len() - n_lit;
        let has_quant = unit.elements.iter().any(|e| e.quantified);
        let span = (unit.start, unit.end);
        if n_lit == 0 {
            continue;
        }
        if n_class == 0 && !has_quant {
            // Pure literal run: the whole unit is the word.
            push(&regex[unit.start..unit.end], ChunkKind::LiteralWord, span);
            continue;
        }
        // Mixed unit: the full spelling-variant word, its literal+class
        // pairs, and interior literal runs of 3+ characters.
        if unit.elements.len() >= 2 {
            push(&regex[unit.start..unit.end], ChunkKind::LiteralWord, span);
        }
        for w in unit.elements.windows(2) {
            if !w[0].is_class && !w[0].quantified && w[1].is_class {
                push(&regex[w[0].start..w[1].end], ChunkKind::CharClass, (w[0].start, w[1].end));
            }
        }
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut run: Option<(usize, usize)> = None;
        for e in &unit.elements {
            if !e.is_class && !e.quantified {
                run = Some((run.map(|(s, _)| s).unwrap_or(e.start), e.end));
            } else if let Some(r) = run.take() {
                runs.push(r);
            }
        }
        runs.extend(run);
        for (s, e) in runs {
            if regex[s..e].chars().count() >= 3 {
                push(&regex[s..e], ChunkKind::LiteralWord, (s, e));
            }
        }
    }

    // Merge identical texts; structural kinds win over word kinds.
    let mut merged: BTreeMap<String, Chunk> = BTreeMap::new();
    for (text, kind, span) in raw {
        let entry = merged.entry(text.clone()).or_insert_with(|| Chunk {
            text,
            kind,
            occurrences: Vec::new(),
            in_lookahead: false,
        });
        if kind_priority(kind) < kind_priority(entry.kind) {
            entry.kind = kind;
        }
        entry.occurrences.push(span);
    }
    let mut chunks: Vec<Chunk> = merged
        .into_values()
        .map(|mut c| {
            c.occurrences.sort_unstable();
            c.occurrences.dedup();
            // Same-text spans cannot overlap by construction; keep the
            // invariant hard if a future rule breaks that.
            let mut last_end = 0;
            c.occurrences.retain(|&(s, e)| {
                let keep = s >= last_end;
                if keep {
                    last_end = e;
                }
                keep
            });
            c.in_lookahead = c
                .occurrences
                .iter()
                .any(|&(s, e)| lookarounds.iter().any(|&(a, b)| a <= s && e <= b));
            c
        })
        .collect();
    chunks.sort_by(|a, b| a.occurrences[0].cmp(&b.occurrences[0]).then_with(|| a.text.cmp(&b.text)));
    Ok(chunks)
}

fn kind_priority(kind: ChunkKind) -> u8 {
    match kind {
        ChunkKind::Clause => 0,
        ChunkKind::Group => 1,
        ChunkKind::QuantifiedGap => 2,
        ChunkKind::CharClass => 3,
        ChunkKind::LiteralWord => 4,
    }
}

/// Byte offset just past the ')' matching the '(' at info index `open`.
fn group_end(info: &[scan::CharInfo], open: usize) -> Option<usize> {
    let mut depth = 0u32;
    for c in &info[open..] {
        if c.escaped || c.in_class {
            continue;
        }
        match c.ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(c.at + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Spans of `{m}`/`{m,n}`-shaped brace quantifiers, whose digits must not
/// be mistaken for literal words.
fn brace_quantifiers(regex: &str, info: &[scan::CharInfo]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for c in info {
        if c.ch != '{' || c.escaped || c.in_class {
            continue;
        }
        if let Some(rel) = regex[c.at..].find('}') {
            let inner = &regex[c.at + 1..c.at + rel];
            let mut commas = 0;
            let shape_ok = !inner.is_empty()
                && inner.chars().all(|ch| {
                    if ch == ',' {
                        commas += 1;
                        true
                    } else {
                        ch.is_ascii_digit()
                    }
                })
                && commas <= 1
                && inner.chars().next() != Some(',');
            if shape_ok {
                out.push((c.at, c.at + rel + 1));
            }
        }
    }
    out
}

/// End offset of the quantifier run following the '.' at info index `i`,
/// or None when the dot is unquantified.
fn quantifier_end(
    regex: &str,
    info: &[scan::CharInfo],
    i: usize,
    quant_braces: &[(usize, usize)],
) -> Option<usize> {
    let next = info.get(i + 1)?;
    let mut end = match next.ch {
        '{' => quant_braces.iter().find(|&&(s, _)| s == next.at).map(|&(_, e)| e)?,
        '?' | '*' | '+' => next.at + 1,
        _ => return None,
    };
    if regex[end..].starts_with('?') {
        end += 1;
    }
    Some(end)
}

struct Element {
    start: usize,
    end: usize,
    is_class: bool,
    quantified: bool,
}

struct Unit {
    start: usize,
    end: usize,
    elements: Vec<Element>,
}

/// Maximal runs of adjacent word elements: literal word characters and
/// character classes, each with an optional '?'. Quantifier-brace digits
/// are not word characters.
fn word_units(
    regex: &str,
    info: &[scan::CharInfo],
    classes: &[(usize, usize)],
    quant_braces: &[(usize, usize)],
) -> Vec<Unit> {
    let in_spans = |at: usize, spans: &[(usize, usize)]| spans.iter().any(|&(s, e)| s <= at && at < e);
    let mut units: Vec<Unit> = Vec::new();
    let mut current: Vec<Element> = Vec::new();
    let mut i = 0;
    while i < info.len() {
        let c = &info[i];
        let element = if let Some(&(s, e)) = classes.iter().find(|&&(s, _)| s == c.at) {
            // Advance past the whole class.
            let mut j = i;
            while j < info.len() && info[j].at < e {
                j += 1;
            }
            i = j;
            Some(Element { start: s, end: e, is_class: true, quantified: false })
        } else if !c.escaped
            && !c.in_class
            && (c.ch.is_alphanumeric() || c.ch == '_' || c.ch == '#')
            && !in_spans(c.at, quant_braces)
        {
            i += 1;
            Some(Element {
                start: c.at,
                end: c.at + c.ch.len_utf8(),
                is_class: false,
                quantified: false,
            })
        } else {
            i += 1;
            None
        };
        match element {
            Some(mut e) => {
                if i < info.len() && info[i].ch == '?' && !info[i].escaped && !info[i].in_class {
                    e.end = info[i].at + 1;
                    e.quantified = true;
                    i += 1;
                }
                let adjacent = current.last().map(|p: &Element| p.end == e.start).unwrap_or(true);
                if !adjacent {
                    flush_unit(&mut current, &mut units);
                }
                current.push(e);
            }
            None => flush_unit(&mut current, &mut units),
        }
    }
    flush_unit(&mut current, &mut units);
    let _ = regex;
    units
}

fn flush_unit(current: &mut Vec<Element>, units: &mut Vec<Unit>) {
    if current.is_empty() {
        return;
    }
    let elements = std::mem::take(current);
    units.push(Unit { start: elements[0].start, end: elements.last().unwrap().end, elements });
}

// ---- ablation ----

/// Replaces every occurrence of the chunk with the unmatchable literal and
/// checks the result still compiles.
pub fn ablate(regex: &str, chunk: &Chunk) -> Result<String, ProfilerError> {
    for &(s, e) in &chunk.occurrences {
        if regex.get(s..e) != Some(chunk.text.as_str()) {
            return Err(ProfilerError::AblationInvalid {
                detail: format!("span {}..{} does not contain {:?}; chunk is stale", s, e, chunk.text),
            });
        }
    }
    let mut out = regex.to_string();
    for &(s, e) in chunk.occurrences.iter().rev() {
        out.replace_range(s..e, ABLATION_LITERAL);
    }
    matcher::engine_compile(&out)
        .map_err(|detail| ProfilerError::AblationInvalid { detail })?;
    Ok(out)
}

// ---- profiling ----

fn matched_mask(m: &CompiledTopicMatcher, c: &Corpus) -> Vec<bool> {
    c.docs.iter().map(|d| m.is_match(&d.text)).collect()
}

struct CorpusBaseline<'a> {
    corpus: &'a Corpus,
    mask: Vec<bool>,
    weight: u64,
}

fn loss_gain(base: &CorpusBaseline, after: &[bool]) -> (f64, f64) {
    let mut lost = 0u64;
    let mut gained = 0u64;
    for (i, doc) in base.corpus.docs.iter().enumerate() {
        match (base.mask[i], after[i]) {
            (true, false) => lost += doc.weight,
            (false, true) => gained += doc.weight,
            _ => {}
        }
    }
    let denom = base.weight as f64;
    (lost as f64 / denom * 100.0, gained as f64 / denom * 100.0)
}

/// Ablates every chunk and reports per-corpus loss and gain against the
/// unablated baseline. Corpora where the regex matches nothing are
/// reported and skipped; it is an error only if that leaves no corpus.
pub fn profile(regex: &str, corpora: &[Corpus]) -> Result<ProfileReport, ProfilerError> {
    let base = matcher::compile(regex, Customization::default())
        .map_err(|e| ProfilerError::CompileFail { detail: e.to_string() })?;
    let mut warnings = Vec::new();
    let mut skipped_corpora = Vec::new();
    let mut baselines: Vec<CorpusBaseline> = Vec::new();
    for corpus in corpora {
        if corpus.docs.iter().any(|d| d.text.to_lowercase().contains(ABLATION_LITERAL)) {
            warnings.push(format!(
                "corpus {:?} contains the ablation literal {:?}; loss numbers may be skewed",
                corpus.name, ABLATION_LITERAL
            ));
        }
        let mask = matched_mask(&base, corpus);
        let weight: u64 =
            corpus.docs.iter().zip(&mask).filter(|(_, m)| **m).map(|(d, _)| d.weight).sum();
        if weight == 0 {
            skipped_corpora.push(corpus.name.clone());
        } else {
            baselines.push(CorpusBaseline { corpus, mask, weight });
        }
    }
    if baselines.is_empty() {
        return Err(ProfilerError::EmptyBaseline);
    }

    // Chunk ablations are independent; run them in parallel and let the
    // final sort fix the order, so worker count never shows.
    let mut rows: Vec<ProfileRow> = decompose(regex)?
        .into_par_iter()
        .map(|chunk| {
            let mut row = ProfileRow {
                chunk,
                loss_pct: BTreeMap::new(),
                gain_pct: BTreeMap::new(),
                max_loss: 0.0,
                skipped: false,
            };
            let ablated = ablate(regex, &row.chunk).and_then(|r| {
                matcher::compile(&r, Customization::default())
                    .map_err(|e| ProfilerError::AblationInvalid { detail: e.to_string() })
            });
            match ablated {
                Ok(m) => {
                    for b in &baselines {
                        let after = matched_mask(&m, b.corpus);
                        let (loss, gain) = loss_gain(b, &after);
                        row.loss_pct.insert(b.corpus.name.clone(), loss);
                        row.gain_pct.insert(b.corpus.name.clone(), gain);
                        row.max_loss = row.max_loss.max(loss);
                    }
                }
                Err(_) => row.skipped = true,
            }
            row
        })
        .collect();
    rows.sort_by(|a, b| {
        a.skipped
            .cmp(&b.skipped)
            .then_with(|| b.max_loss.total_cmp(&a.max_loss))
            .then_with(|| a.chunk.text.cmp(&b.chunk.text))
    });
    Ok(ProfileReport { rows, skipped_corpora, warnings })
}

// ---- distillation ----

/// Greedily removes the cheapest chunk, one at a time with a full
/// re-profile after each removal, stopping before cumulative loss on the
/// calibration corpus would exceed the budget.
///
/// Lookaround-resident chunks are never candidates (they guard precision,
/// which the calibration corpus cannot price), and neither is anything
/// containing a previous ablation's literal. A budget of exactly 0 means
/// distillation is off: even free removals are kept.
pub fn distill(regex: &str, calibration: &Corpus, loss_budget_pct: f64) -> Result<DistillReport, ProfilerError> {
    if !loss_budget_pct.is_finite() || loss_budget_pct < 0.0 {
        return Err(ProfilerError::InvalidBudget { got: loss_budget_pct });
    }
    let base = matcher::compile(regex, Customization::default())
        .map_err(|e| ProfilerError::CompileFail { detail: e.to_string() })?;
    let mask = matched_mask(&base, calibration);
    let weight: u64 =
        calibration.docs.iter().zip(&mask).filter(|(_, m)| **m).map(|(d, _)| d.weight).sum();
    if weight == 0 {
        return Err(ProfilerError::EmptyBaseline);
    }
    let baseline = CorpusBaseline { corpus: calibration, mask, weight };

    let mut current = regex.to_string();
    let mut removals: Vec<Chunk> = Vec::new();
    if loss_budget_pct > 0.0 {
        loop {
            let mut best: Option<(f64, Chunk, String)> = None;
            for chunk in decompose(&current)? {
                if chunk.in_lookahead || chunk.text.contains(ABLATION_LITERAL) {
                    continue;
                }
                let Ok(ablated) = ablate(&current, &chunk) else { continue };
                let Ok(m) = matcher::compile(&ablated, Customization::default()) else { continue };
                // Cumulative loss: `current` already embeds prior removals,
                // so this measures against the original baseline.
                let after = matched_mask(&m, calibration);
                let (loss, _) = loss_gain(&baseline, &after);
                let better = match &best {
                    None => true,
                    Some((b, c, _)) => {
                        loss < *b || (loss == *b && chunk.text < c.text)
                    }
                };
                if better {
                    best = Some((loss, chunk, ablated));
                }
            }
            match best {
                Some((loss, chunk, ablated)) if loss <= loss_budget_pct => {
                    current = ablated;
                    removals.push(chunk);
                }
                _ => break,
            }
        }
    }

    let final_m = matcher::compile(&current, Customization::default())
        .map_err(|e| ProfilerError::CompileFail { detail: e.to_string() })?;
    let after = matched_mask(&final_m, calibration);
    let (final_loss_pct, _) = loss_gain(&baseline, &after);
    Ok(DistillReport { final_regex: current, suggested_removals: removals, final_loss_pct })
}
