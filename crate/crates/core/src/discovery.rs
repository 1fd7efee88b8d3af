//! Corpus ingestion and the keyword-discovery battery: frequent words,
//! adjacent co-occurrence, frequency-ratio ranking, n-grams, and
//! regex-vs-regex diff reports.
//!
//! All statistics are weighted document frequencies: a token counts once
//! per document (texts repeat; spam repeats harder), multiplied by the
//! document's weight. Every ranking is deterministic — descending value,
//! lexicographic tiebreak — so runs are reproducible and parallel drivers
//! cannot reorder results.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

use crate::matcher::CompiledTopicMatcher;

// ---- corpus ----

/// Noisy human label on a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Positive,
    Negative,
}

/// One text with a stable id, a repeat-count weight, and an optional label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub weight: u64,
    pub label: Option<Label>,
}

/// An immutable set of documents under one name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub docs: Vec<Document>,
}

impl Corpus {
    /// Builds an unlabeled corpus with unit weights; ids are 1-based
    /// positions, same as `ingest` assigns.
    pub fn from_texts(name: &str, texts: &[&str]) -> Corpus {
        Corpus {
            name: name.to_string(),
            docs: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document {
                    id: (i + 1).to_string(),
                    text: t.to_string(),
                    weight: 1,
                    label: None,
                })
                .collect(),
        }
    }

    /// Total weight across all documents.
    pub fn total_weight(&self) -> u64 {
        self.docs.iter().map(|d| d.weight).sum()
    }
}

/// Corpus file layouts accepted by `ingest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    /// One document per line, weight 1, unlabeled. Empty lines are empty
    /// documents: line numbers must stay aligned with the source file.
    Txt,
    /// Three tab-separated columns per line: text, weight, label
    /// ("1" positive, "0" negative, "-" unlabeled).
    Tsv,
}

impl std::str::FromStr for IngestFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "txt" => Ok(IngestFormat::Txt),
            "tsv" => Ok(IngestFormat::Tsv),
            other => Err(format!("unknown corpus format {:?}, expected txt or tsv", other)),
        }
    }
}

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("IO_ERROR: {detail}")]
    IoError { detail: String },
    #[error("MALFORMED_ROW at row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error("EMPTY_SELECTION: no documents to analyze")]
    EmptySelection,
    #[error("n-grams are supported for n in {{2, 3}}, got {n}")]
    UnsupportedNgram { n: usize },
}

/// Reads a corpus file. Document ids are 1-based row numbers; the corpus
/// name is the file's name.
pub fn ingest(path: &Path, format: IngestFormat) -> Result<Corpus, DiscoveryError> {
    let raw = std::fs::read_to_string(path).map_err(|e| DiscoveryError::IoError {
        detail: format!("{}: {}", path.display(), e),
    })?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut docs = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let row = i + 1;
        let doc = match format {
            IngestFormat::Txt => Document {
                id: row.to_string(),
                text: line.to_string(),
                weight: 1,
                label: None,
            },
            IngestFormat::Tsv => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(DiscoveryError::MalformedRow {
                        row,
                        detail: format!("expected 3 tab-separated fields, got {}", fields.len()),
                    });
                }
                let weight: u64 = fields[1].parse().map_err(|_| DiscoveryError::MalformedRow {
                    row,
                    detail: format!("weight {:?} is not a positive integer", fields[1]),
                })?;
                if weight < 1 {
                    return Err(DiscoveryError::MalformedRow {
                        row,
                        detail: "weight must be at least 1".into(),
                    });
                }
                let label = match fields[2] {
                    "1" => Some(Label::Positive),
                    "0" => Some(Label::Negative),
                    "-" => None,
                    other => {
                        return Err(DiscoveryError::MalformedRow {
                            row,
                            detail: format!("label {:?} must be 1, 0, or -", other),
                        })
                    }
                };
                Document { id: row.to_string(), text: fields[0].to_string(), weight, label }
            }
        };
        docs.push(doc);
    }
    Ok(Corpus { name, docs })
}

// ---- tokenization ----

/// Byte spans of tokens in `text` without case folding: maximal runs of
/// Unicode letters, digits, and underscore, with a directly preceding `#`
/// absorbed into the token.
pub(crate) fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    let mut pending_hash: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() || c == '_' {
            if start.is_none() {
                start = Some(pending_hash.take().unwrap_or(i));
            }
        } else {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
            pending_hash = if c == '#' { Some(i) } else { None };
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Case-folded tokens of a text.
pub fn tokenize(text: &str) -> Vec<String> {
    let folded = text.to_lowercase();
    token_spans(&folded).into_iter().map(|(a, b)| folded[a..b].to_string()).collect()
}

// ---- ranking helpers ----

fn rank_counts(counts: BTreeMap<String, u64>, k: usize) -> Vec<(String, u64)> {
    let mut rows: Vec<(String, u64)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k);
    rows
}

fn selected_docs<'a>(
    c: &'a Corpus,
    filter: Option<&CompiledTopicMatcher>,
) -> Result<Vec<&'a Document>, DiscoveryError> {
    // Parallel filter keeps corpus order: the indexed collect reassembles
    // results by position, so worker count never shows in the output.
    let docs: Vec<&Document> = match filter {
        Some(m) => c.docs.par_iter().filter(|d| m.is_match(&d.text)).collect(),
        None => c.docs.iter().collect(),
    };
    if docs.is_empty() {
        return Err(DiscoveryError::EmptySelection);
    }
    Ok(docs)
}

// ---- statistics ----

/// Most frequent tokens across the (optionally filtered) corpus, by
/// weighted document frequency.
pub fn top_words(
    c: &Corpus,
    filter: Option<&CompiledTopicMatcher>,
    k: usize,
) -> Result<Vec<(String, u64)>, DiscoveryError> {
    let docs = selected_docs(c, filter)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for doc in docs {
        let unique: BTreeSet<String> = tokenize(&doc.text).into_iter().collect();
        for token in unique {
            *counts.entry(token).or_insert(0) += doc.weight;
        }
    }
    Ok(rank_counts(counts, k))
}

/// Tokens appearing within `window` tokens of a seed match, by weighted
/// document frequency. Tokens overlapping the match itself are excluded.
pub fn cooccurring_words(
    c: &Corpus,
    seed: &CompiledTopicMatcher,
    window: usize,
    k: usize,
) -> Result<Vec<(String, u64)>, DiscoveryError> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut any_match = false;
    for doc in &c.docs {
        let pre = seed.preprocess(&doc.text);
        let matches = seed.match_spans(&pre);
        if matches.is_empty() {
            continue;
        }
        any_match = true;
        let spans = token_spans(&pre);
        let mut nearby: BTreeSet<&str> = BTreeSet::new();
        for &(ma, mb) in &matches {
            // Last token ending at or before the match, first token
            // starting at or after it; straddlers count as neither.
            let before_end = spans.partition_point(|&(_, e)| e <= ma);
            let after_start = spans.partition_point(|&(s, _)| s < mb);
            for &(a, b) in &spans[before_end.saturating_sub(window)..before_end] {
                nearby.insert(&pre[a..b]);
            }
            for &(a, b) in spans.iter().skip(after_start).take(window) {
                nearby.insert(&pre[a..b]);
            }
        }
        for token in nearby {
            *counts.entry(token.to_string()).or_insert(0) += doc.weight;
        }
    }
    if !any_match {
        return Err(DiscoveryError::EmptySelection);
    }
    Ok(rank_counts(counts, k))
}

/// Tokens ranked by how much likelier they are in `target` than in
/// `background`, with add-one smoothing:
/// `((df_t+1)/(N_t+1)) / ((df_b+1)/(N_b+1))` where df is weighted document
/// frequency and N is total corpus weight. The ranking domain is the union
/// of both vocabularies.
pub fn ratio_ranked_words(
    target: &Corpus,
    background: &Corpus,
    k: usize,
) -> Result<Vec<(String, f64)>, DiscoveryError> {
    if target.docs.is_empty() || background.docs.is_empty() {
        return Err(DiscoveryError::EmptySelection);
    }
    let df = |c: &Corpus| -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for doc in &c.docs {
            let unique: BTreeSet<String> = tokenize(&doc.text).into_iter().collect();
            for token in unique {
                *counts.entry(token).or_insert(0) += doc.weight;
            }
        }
        counts
    };
    let df_t = df(target);
    let df_b = df(background);
    let n_t = target.total_weight() as f64;
    let n_b = background.total_weight() as f64;
    let vocabulary: BTreeSet<&String> = df_t.keys().chain(df_b.keys()).collect();
    let mut rows: Vec<(String, f64)> = vocabulary
        .into_iter()
        .map(|token| {
            let t = (*df_t.get(token).unwrap_or(&0) as f64 + 1.0) / (n_t + 1.0);
            let b = (*df_b.get(token).unwrap_or(&0) as f64 + 1.0) / (n_b + 1.0);
            (token.clone(), t / b)
        })
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k);
    Ok(rows)
}

/// Most frequent within-document token n-grams (n = 2 or 3), weighted
/// document frequency, n-gram written as space-joined tokens.
pub fn top_ngrams(
    c: &Corpus,
    n: usize,
    filter: Option<&CompiledTopicMatcher>,
    k: usize,
) -> Result<Vec<(String, u64)>, DiscoveryError> {
    if !(2..=3).contains(&n) {
        return Err(DiscoveryError::UnsupportedNgram { n });
    }
    let docs = selected_docs(c, filter)?;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for doc in docs {
        let tokens = tokenize(&doc.text);
        let unique: BTreeSet<String> = tokens.windows(n).map(|w| w.join(" ")).collect();
        for gram in unique {
            *counts.entry(gram).or_insert(0) += doc.weight;
        }
    }
    Ok(rank_counts(counts, k))
}

// ---- regex-vs-regex diff ----

/// What changes when a candidate regex replaces the current one on a
/// corpus: weighted totals of newly matched and lost documents, plus the
/// heaviest example texts of each, aggregated by identical text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub new_total: u64,
    pub lost_total: u64,
    pub new_top: Vec<(String, u64)>,
    pub lost_top: Vec<(String, u64)>,
}

pub fn diff_matches(
    old: &CompiledTopicMatcher,
    new: &CompiledTopicMatcher,
    c: &Corpus,
    k: usize,
) -> DiffReport {
    let mut new_total = 0u64;
    let mut lost_total = 0u64;
    let mut new_texts: BTreeMap<String, u64> = BTreeMap::new();
    let mut lost_texts: BTreeMap<String, u64> = BTreeMap::new();
    for doc in &c.docs {
        let was = old.is_match(&doc.text);
        let is = new.is_match(&doc.text);
        if is && !was {
            new_total += doc.weight;
            *new_texts.entry(doc.text.clone()).or_insert(0) += doc.weight;
        } else if was && !is {
            lost_total += doc.weight;
            *lost_texts.entry(doc.text.clone()).or_insert(0) += doc.weight;
        }
    }
    DiffReport {
        new_total,
        lost_total,
        new_top: rank_counts(new_texts, k),
        lost_top: rank_counts(lost_texts, k),
    }
}
