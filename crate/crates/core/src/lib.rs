//! Topic-classification regexes as maintained artifacts: structured sources,
//! rendering with inert annotations, static validation, explained matching,
//! keyword discovery, ablation profiling, and a versioned registry.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`model`] — structured regex documents (sections, clauses, tests) and
//!    their canonical JSON form.
//! 2. [`render`] — compilation of documents to portable regex strings,
//!    compact or annotated, plus live/stored escape conversion.
//! 3. [`validate`] — pre-submit checks on documents and stored strings.
//! 4. [`matcher`] — compiled matchers returning explanatory snippets.
//! 5. [`discovery`] — corpora, tokenization, and keyword statistics.
//! 6. [`eval`] — confusion metrics, safe-regex confirmation, recall gain,
//!    and latency benchmarking.
//! 7. [`profiler`] — chunk ablation profiling and budgeted distillation.
//! 8. [`registry`] — append-only file store of published regexes.
//!
//! Everything here is deterministic: rankings break ties lexicographically,
//! corpus scans are order-independent, and no operation's output depends on
//! worker count.

pub mod discovery;
pub mod eval;
pub mod matcher;
pub mod model;
pub mod profiler;
pub mod registry;
pub mod render;
pub mod synth;
pub mod validate;

mod scan;

/// The inert token: a lookahead that forbids the very "x" it then requires,
/// so any alternative starting with it can never match. Annotated renderings
/// use it to embed labels, version tags, and line breaks inside a regex.
pub const INERT_TOKEN: &str = "(?!x)x";

/// Replacement literal used by ablation profiling. Assumed absent from
/// corpora; the profiler warns when it appears.
pub const ABLATION_LITERAL: &str = "foobar123";
