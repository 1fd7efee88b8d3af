//! Quantitative evaluation: confusion metrics against labels, safe-regex
//! confirmation, recall-gain estimation between regex versions, and
//! matching-time benchmarks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

use crate::discovery::{Corpus, Document, Label};
use crate::matcher::CompiledTopicMatcher;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("UNLABELED_DOC: document {id:?} has no label")]
    UnlabeledDoc { id: String },
    #[error("EMPTY_SELECTION: no documents in scope")]
    EmptySelection,
    #[error("ZERO_BASE: the base matcher matches nothing in this corpus")]
    ZeroBase,
    #[error("invalid argument: {detail}")]
    InvalidArg { detail: String },
}

// ---- confusion metrics ----

/// Weighted confusion counts and the derived metrics. A metric whose
/// denominator is zero is absent, never reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub tp: u64,
    pub fp: u64,
    pub r#fn: u64,
    pub tn: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

impl ConfusionReport {
    /// Derives the metrics from raw counts.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionReport {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        ConfusionReport {
            tp,
            fp,
            r#fn: fn_,
            tn,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }
}

/// Scores a matcher against a fully labeled corpus.
pub fn confusion_eval(m: &CompiledTopicMatcher, c: &Corpus) -> Result<ConfusionReport, EvalError> {
    // Label check first, serially, so the reported id does not depend on
    // worker scheduling.
    if let Some(doc) = c.docs.iter().find(|d| d.label.is_none()) {
        return Err(EvalError::UnlabeledDoc { id: doc.id.clone() });
    }
    let (tp, fp, fn_, tn) = c
        .docs
        .par_iter()
        .map(|doc| {
            let matched = m.is_match(&doc.text);
            match (matched, doc.label.unwrap()) {
                (true, Label::Positive) => (doc.weight, 0, 0, 0),
                (true, Label::Negative) => (0, doc.weight, 0, 0),
                (false, Label::Positive) => (0, 0, doc.weight, 0),
                (false, Label::Negative) => (0, 0, 0, doc.weight),
            }
        })
        .reduce(|| (0, 0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3));
    Ok(ConfusionReport::from_counts(tp, fp, fn_, tn))
}

// ---- safe confirmation ----

/// Which documents a safe-confirmation run considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfirmScope {
    /// Only documents the main matcher already matches.
    MatchedByMain,
    /// The whole corpus.
    All,
}

impl std::str::FromStr for ConfirmScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matched" | "matched-by-main" => Ok(ConfirmScope::MatchedByMain),
            "all" => Ok(ConfirmScope::All),
            other => Err(format!("unknown scope {:?}, expected matched or all", other)),
        }
    }
}

/// How much of the considered set a high-precision regex confirms
/// automatically, and which documents remain for manual review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeConfirmReport {
    /// Weighted count of documents in scope.
    pub considered: u64,
    /// Weighted count of scope documents also matched by the safe regex.
    pub auto_confirmed: u64,
    pub fraction: f64,
    /// Ids of the unconfirmed documents, in corpus order.
    pub residual_ids: Vec<String>,
}

pub fn safe_confirm(
    m: &CompiledTopicMatcher,
    safe: &CompiledTopicMatcher,
    c: &Corpus,
    scope: ConfirmScope,
) -> Result<SafeConfirmReport, EvalError> {
    let mut considered = 0u64;
    let mut auto_confirmed = 0u64;
    let mut residual_ids = Vec::new();
    for doc in &c.docs {
        let in_scope = match scope {
            ConfirmScope::All => true,
            ConfirmScope::MatchedByMain => m.is_match(&doc.text),
        };
        if !in_scope {
            continue;
        }
        considered += doc.weight;
        if safe.is_match(&doc.text) {
            auto_confirmed += doc.weight;
        } else {
            residual_ids.push(doc.id.clone());
        }
    }
    if considered == 0 {
        return Err(EvalError::EmptySelection);
    }
    Ok(SafeConfirmReport {
        considered,
        auto_confirmed,
        fraction: auto_confirmed as f64 / considered as f64,
        residual_ids,
    })
}

// ---- recall gain ----

/// Weighted match-count ratio of an improved regex over its base.
///
/// This is not labeled recall: it assumes both regexes hold high precision
/// on this corpus, which the caller must justify. The CLI prints that
/// caveat with the number.
pub fn recall_gain(
    base: &CompiledTopicMatcher,
    improved: &CompiledTopicMatcher,
    c: &Corpus,
) -> Result<f64, EvalError> {
    let weight_of = |m: &CompiledTopicMatcher| -> u64 {
        c.docs.iter().filter(|d| m.is_match(&d.text)).map(|d| d.weight).sum()
    };
    let base_w = weight_of(base);
    if base_w == 0 {
        return Err(EvalError::ZeroBase);
    }
    Ok(weight_of(improved) as f64 / base_w as f64)
}

/// Display form for a gain ratio: percent change below 2x ("+68.4%"),
/// multiplier at or above ("×9.6").
pub fn format_gain(ratio: f64) -> String {
    if ratio < 2.0 {
        format!("{:+.1}%", (ratio - 1.0) * 100.0)
    } else {
        let r = format!("{:.2}", ratio);
        let r = r.trim_end_matches('0').trim_end_matches('.');
        format!("×{}", r)
    }
}

// ---- two-classifier sampling ----

/// Documents matched by at least one of two classifiers, for downstream
/// human labeling. The two matchers are typically a regex and an imported
/// model's decisions replayed as a trivial regex over its output column.
pub fn sample_positives<'c>(
    a: &CompiledTopicMatcher,
    b: &CompiledTopicMatcher,
    c: &'c Corpus,
) -> Vec<&'c Document> {
    c.docs.iter().filter(|d| a.is_match(&d.text) || b.is_match(&d.text)).collect()
}

// ---- benchmarking ----

/// Timing samples pooled by text length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingBucket {
    pub text_chars: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub buckets: Vec<TimingBucket>,
}

/// Full-report and boolean-only timings, measured separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub full: TimingReport,
    pub early_termination: TimingReport,
}

/// Times `classify` and `is_match` over the given texts, single-threaded.
/// Each text gets one discarded warm-up call plus `reps` measured calls;
/// texts of equal length share a bucket.
pub fn bench(m: &CompiledTopicMatcher, texts: &[String], reps: usize) -> Result<BenchReport, EvalError> {
    if reps < 3 {
        return Err(EvalError::InvalidArg { detail: format!("reps must be at least 3, got {}", reps) });
    }
    let time_mode = |early: bool| -> TimingReport {
        let mut samples: std::collections::BTreeMap<usize, Vec<f64>> = std::collections::BTreeMap::new();
        for text in texts {
            let chars = text.chars().count();
            // Warm-up: first call pays cache and allocator setup.
            if early {
                std::hint::black_box(m.is_match(text));
            } else {
                std::hint::black_box(m.classify(text));
            }
            let bucket = samples.entry(chars).or_default();
            for _ in 0..reps {
                let t0 = Instant::now();
                if early {
                    std::hint::black_box(m.is_match(text));
                } else {
                    std::hint::black_box(m.classify(text));
                }
                bucket.push(t0.elapsed().as_secs_f64() * 1000.0);
            }
        }
        let buckets = samples
            .into_iter()
            .map(|(text_chars, xs)| {
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                TimingBucket { text_chars, mean_ms: mean, std_ms: var.sqrt(), reps: xs.len() }
            })
            .collect();
        TimingReport { buckets }
    };
    Ok(BenchReport { full: time_mode(false), early_termination: time_mode(true) })
}
