//! topickit command line: author, validate, match, mine, profile, and
//! distribute topic-classification regexes.
//!
//! Exit codes: 0 clean result, 1 findings or a negative result (no
//! matches, validation errors, refused publish), 2 usage or I/O errors.
//! All analysis output is deterministic and independent of --jobs.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use topickit_core::discovery::{self, Corpus, IngestFormat};
use topickit_core::eval::{self, ConfirmScope};
use topickit_core::matcher::{self, CompiledTopicMatcher, Customization};
use topickit_core::model::{parse_document, RegexDocument, Tier};
use topickit_core::profiler;
use topickit_core::registry::{concat_entries, Registry, RegistryError, DEFAULT_MAX_CONCAT};
use topickit_core::render::{self, escape_for_store, unescape_from_store, RenderOptions};
use topickit_core::validate::{self, BanList};

const FORMATS_HELP: &str = "\
FILE FORMATS
  document (.json)   {topic, language, tier: \"tier1\"|\"tier2\", version, sections, tests}
                     sections: [{label, clauses}]; clause kinds: \"literal\" {pattern},
                     \"keyword\" {core, exclusions?, prefix_guard?, suffix_guard?},
                     \"bipartite\" {set_a, set_b, max_gap?, ordered_both_ways?}.
                     Regex fragments use single backslashes.
  regex file         one pattern in stored form (every backslash doubled);
                     one trailing newline is ignored.
  corpus (.txt)      one document per line, weight 1, unlabeled.
  corpus (.tsv)      text<TAB>weight<TAB>label per line; label 1 / 0 / -.
  customization      JSON: {first_k_lines?, first_k_words?, strip_patterns?,
                     negative_regexes?, discount_snippet_patterns?, snippet_cap?}.
  banlist            one rule per line: lookbehind | possessive | recursion |
                     inline_flags | a literal substring; # starts a comment.
  registry           JSON file from --registry, else $TOPICKIT_REGISTRY,
                     else ./registry.json.";

#[derive(Parser)]
#[command(
    name = "topickit",
    version,
    about = "Author, validate, match, mine, profile, and publish topic regexes",
    after_help = FORMATS_HELP,
    after_long_help = FORMATS_HELP
)]
struct Cli {
    /// Output format for reports: json or tsv
    #[arg(long, global = true, default_value = "json", value_parser = parse_format)]
    format: Format,
    /// Worker threads for corpus scans; results do not depend on it
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..=512))]
    jobs: u16,
    /// Registry file (overrides $TOPICKIT_REGISTRY and ./registry.json)
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Tsv,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "json" => Ok(Format::Json),
        "tsv" => Ok(Format::Tsv),
        other => Err(format!("unknown format {other:?}, expected json or tsv")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a document or stored regex; print findings, exit 1 on errors
    Validate(ValidateArgs),
    /// Render a document to its regex text
    Render(RenderArgs),
    /// Classify every corpus document with snippet explanations
    Match(MatchArgs),
    /// Report what a new regex version gains and loses on a corpus
    Diff(DiffArgs),
    /// Mine keywords: frequent words, co-occurrences, ratios, n-grams
    Discover(DiscoverArgs),
    /// Score a regex: confusion metrics, safe-confirm, recall gain
    Eval(EvalArgs),
    /// Time matching across text-length buckets
    Bench(BenchArgs),
    /// Rank regex chunks by what ablating them would lose
    Profile(ProfileArgs),
    /// Greedily remove cheap chunks under a recall-loss budget
    Distill(DistillArgs),
    /// Publish a regex version to the registry
    Publish(PublishArgs),
    /// Fetch a published entry
    Fetch(FetchArgs),
    /// List all published entries
    List,
    /// Combine per-language regexes into one pattern
    Concat(ConcatArgs),
}

// ---- error plumbing ----

/// An error plus the exit code it deserves. Anything arriving through `?`
/// from I/O or parsing defaults to 2; domain-negative results use
/// `domain` to exit 1.
struct Failure {
    exit: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { exit: 2, error: e.into() }
    }
}

fn domain<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure { exit: 1, error: e.into() }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs as usize).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot build worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.exit)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let out = Out { format: cli.format };
    match cli.command {
        Command::Validate(args) => cmd_validate(args, &out),
        Command::Render(args) => cmd_render(args),
        Command::Match(args) => cmd_match(args, &out, &cli.registry),
        Command::Diff(args) => cmd_diff(args, &out),
        Command::Discover(args) => cmd_discover(args, &out),
        Command::Eval(args) => cmd_eval(args, &out),
        Command::Bench(args) => cmd_bench(args, &out),
        Command::Profile(args) => cmd_profile(args, &out),
        Command::Distill(args) => cmd_distill(args, &out),
        Command::Publish(args) => cmd_publish(args, &out, &cli.registry),
        Command::Fetch(args) => cmd_fetch(args, &out, &cli.registry),
        Command::List => cmd_list(&out, &cli.registry),
        Command::Concat(args) => cmd_concat(args, &cli.registry),
    }
}

// ---- shared I/O helpers ----

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::from)
}

/// Reads a stored-form regex file and unescapes it to live form. One
/// trailing newline is tolerated; interior newlines belong to the
/// pattern (annotated renderings span lines).
fn read_live_regex(path: &Path) -> Result<String, Failure> {
    let raw = read_file(path)?;
    let stored = raw.strip_suffix('\n').unwrap_or(&raw);
    let stored = stored.strip_suffix('\r').unwrap_or(stored);
    unescape_from_store(stored)
        .map_err(|e| domain(anyhow!("{}: {}", path.display(), e)))
}

fn read_document(path: &Path) -> Result<RegexDocument, Failure> {
    let raw = read_file(path)?;
    parse_document(&raw).map_err(|e| domain(anyhow!("{}: {}", path.display(), e)))
}

fn read_corpus(path: &Path) -> Result<Corpus, Failure> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => IngestFormat::Tsv,
        _ => IngestFormat::Txt,
    };
    discovery::ingest(path, format).map_err(|e| match e {
        discovery::DiscoveryError::IoError { .. } => Failure::from(anyhow!("{}", e)),
        other => domain(anyhow!("{}: {}", path.display(), other)),
    })
}

fn read_customization(path: &Option<PathBuf>) -> Result<Customization, Failure> {
    match path {
        None => Ok(Customization::default()),
        Some(p) => {
            let raw = read_file(p)?;
            serde_json::from_str(&raw).map_err(|e| domain(anyhow!("{}: {}", p.display(), e)))
        }
    }
}

fn compile_matcher(live: &str, customization: Customization) -> Result<CompiledTopicMatcher, Failure> {
    matcher::compile(live, customization).map_err(domain)
}

fn registry_at(flag: &Option<PathBuf>) -> Registry {
    let path = flag
        .clone()
        .or_else(|| std::env::var_os("TOPICKIT_REGISTRY").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("./registry.json"));
    Registry::new(path)
}

fn registry_failure(e: RegistryError) -> Failure {
    match e {
        RegistryError::Io { .. } | RegistryError::Corrupted { .. } => Failure::from(anyhow!("{}", e)),
        other => domain(anyhow!("{}", other)),
    }
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Writes a (id, text, snippets) TSV for spreadsheet review.
fn write_review_bundle(
    path: &Path,
    rows: impl Iterator<Item = (String, String, Vec<String>)>,
) -> Result<(), Failure> {
    let mut out = String::from("id\ttext\tsnippets\n");
    for (id, text, snippets) in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            tsv_field(&id),
            tsv_field(&text),
            tsv_field(&snippets.join("; "))
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display())).map_err(Failure::from)
}

struct Out {
    format: Format,
}

impl Out {
    fn report<T: Serialize>(&self, value: &T, tsv_rows: Vec<Vec<String>>) {
        match self.format {
            Format::Json => {
                println!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
            }
            Format::Tsv => {
                for row in tsv_rows {
                    println!("{}", row.join("\t"));
                }
            }
        }
    }

    fn lines<T: Serialize>(&self, items: &[T], tsv_row: impl Fn(&T) -> Vec<String>) {
        match self.format {
            Format::Json => {
                for item in items {
                    println!("{}", serde_json::to_string(item).expect("serializable line"));
                }
            }
            Format::Tsv => {
                for item in items {
                    println!("{}", tsv_row(item).join("\t"));
                }
            }
        }
    }
}

fn count_rows(rows: &[(String, u64)]) -> Vec<Vec<String>> {
    rows.iter().map(|(t, n)| vec![tsv_field(t), n.to_string()]).collect()
}

#[derive(Serialize)]
struct TokenCount<'a> {
    token: &'a str,
    count: u64,
}

fn count_report(out: &Out, rows: &[(String, u64)]) {
    let objs: Vec<TokenCount> =
        rows.iter().map(|(t, n)| TokenCount { token: t, count: *n }).collect();
    out.report(&objs, count_rows(rows));
}

// ---- validate ----

#[derive(Args)]
struct ValidateArgs {
    /// Document JSON file to validate end to end (rendering + tests)
    #[arg(long, conflicts_with = "stored", required_unless_present = "stored")]
    doc: Option<PathBuf>,
    /// Stored-form regex file to validate as-is
    #[arg(long)]
    stored: Option<PathBuf>,
    /// Banlist file replacing the default banned-construct list
    #[arg(long)]
    banlist: Option<PathBuf>,
}

fn cmd_validate(args: ValidateArgs, out: &Out) -> CmdResult {
    let banlist = match &args.banlist {
        None => BanList::default(),
        Some(p) => BanList::from_lines(&read_file(p)?),
    };
    let findings = if let Some(doc_path) = &args.doc {
        let doc = read_document(doc_path)?;
        validate::validate_document(&doc, &banlist)
    } else {
        let raw = read_file(args.stored.as_ref().expect("clap enforces one source"))?;
        let stored = raw.strip_suffix('\n').unwrap_or(&raw);
        validate::validate_stored(stored, &banlist)
    };
    out.lines(&findings, |f| {
        vec![
            format!("{:?}", f.severity).to_uppercase(),
            serde_json::to_value(f.code).unwrap().as_str().unwrap().to_string(),
            f.location.to_string(),
            tsv_field(&f.message),
        ]
    });
    if validate::has_errors(&findings) {
        Ok(1)
    } else {
        Ok(0)
    }
}

// ---- render ----

#[derive(Args)]
struct RenderArgs {
    /// Document JSON file to render
    #[arg(long)]
    doc: PathBuf,
    /// Render the compact form (default: annotated with labels)
    #[arg(long)]
    compact: bool,
    /// Annotated line width
    #[arg(long, default_value_t = 100)]
    width: usize,
    /// Emit stored form (doubled backslashes) instead of live form
    #[arg(long)]
    stored: bool,
}

fn cmd_render(args: RenderArgs) -> CmdResult {
    let doc = read_document(&args.doc)?;
    let opts = RenderOptions { annotated: !args.compact, max_line_width: args.width };
    let live = render::render(&doc, &opts).map_err(domain)?;
    if args.stored {
        println!("{}", escape_for_store(&live));
    } else {
        println!("{}", live);
    }
    Ok(0)
}

// ---- match ----

#[derive(Args)]
struct MatchArgs {
    /// Stored-form regex file (alternative: a registry key)
    #[arg(long, conflicts_with_all = ["topic", "language", "tier"], required_unless_present = "topic")]
    regex: Option<PathBuf>,
    /// Registry key: topic
    #[arg(long, requires = "language", requires = "tier")]
    topic: Option<String>,
    /// Registry key: language
    #[arg(long)]
    language: Option<String>,
    /// Registry key: tier (tier1 or tier2)
    #[arg(long, value_parser = Tier::from_str)]
    tier: Option<Tier>,
    /// Registry key: pin a version (default: latest)
    #[arg(long)]
    version: Option<u32>,
    /// Corpus file (.txt or .tsv)
    #[arg(long)]
    corpus: PathBuf,
    /// Customization JSON file
    #[arg(long)]
    customization: Option<PathBuf>,
    /// Also write matched docs as a review TSV (id, text, snippets)
    #[arg(long)]
    review_bundle: Option<PathBuf>,
}

#[derive(Serialize)]
struct MatchLine {
    doc_id: String,
    matched: bool,
    vetoed: bool,
    snippets: Vec<String>,
}

fn resolve_regex(
    regex: &Option<PathBuf>,
    topic: &Option<String>,
    language: &Option<String>,
    tier: &Option<Tier>,
    version: Option<u32>,
    registry_flag: &Option<PathBuf>,
) -> Result<String, Failure> {
    if let Some(path) = regex {
        return read_live_regex(path);
    }
    let registry = registry_at(registry_flag);
    let entry = registry
        .fetch(
            topic.as_deref().expect("clap enforces the key"),
            language.as_deref().expect("clap enforces the key"),
            tier.expect("clap enforces the key"),
            version,
        )
        .map_err(registry_failure)?;
    entry.live_regex().map_err(registry_failure)
}

fn cmd_match(args: MatchArgs, out: &Out, registry_flag: &Option<PathBuf>) -> CmdResult {
    let live = resolve_regex(&args.regex, &args.topic, &args.language, &args.tier, args.version, registry_flag)?;
    let customization = read_customization(&args.customization)?;
    let m = compile_matcher(&live, customization)?;
    let corpus = read_corpus(&args.corpus)?;
    let lines: Vec<MatchLine> = corpus
        .docs
        .par_iter()
        .map(|doc| {
            let report = m.classify(&doc.text);
            MatchLine {
                doc_id: doc.id.clone(),
                matched: report.matched,
                vetoed: report.vetoed,
                snippets: report.snippets,
            }
        })
        .collect();
    out.lines(&lines, |l| {
        vec![
            tsv_field(&l.doc_id),
            l.matched.to_string(),
            l.vetoed.to_string(),
            tsv_field(&l.snippets.join("; ")),
        ]
    });
    if let Some(bundle) = &args.review_bundle {
        write_review_bundle(
            bundle,
            lines
                .iter()
                .zip(&corpus.docs)
                .filter(|(l, _)| l.matched)
                .map(|(l, d)| (l.doc_id.clone(), d.text.clone(), l.snippets.clone())),
        )?;
    }
    if lines.iter().any(|l| l.matched) {
        Ok(0)
    } else {
        Ok(1)
    }
}

// ---- diff ----

#[derive(Args)]
struct DiffArgs {
    /// Stored-form regex file for the old version
    #[arg(long)]
    old: PathBuf,
    /// Stored-form regex file for the new version
    #[arg(long)]
    new: PathBuf,
    /// Corpus file (.txt or .tsv)
    #[arg(long)]
    corpus: PathBuf,
    /// How many example texts to list per side
    #[arg(long, default_value_t = 20)]
    top_k: usize,
}

fn cmd_diff(args: DiffArgs, out: &Out) -> CmdResult {
    let old = compile_matcher(&read_live_regex(&args.old)?, Customization::default())?;
    let new = compile_matcher(&read_live_regex(&args.new)?, Customization::default())?;
    let corpus = read_corpus(&args.corpus)?;
    let report = discovery::diff_matches(&old, &new, &corpus, args.top_k);
    let mut rows = vec![
        vec!["new_total".to_string(), report.new_total.to_string()],
        vec!["lost_total".to_string(), report.lost_total.to_string()],
    ];
    rows.extend(report.new_top.iter().map(|(t, n)| {
        vec!["new".to_string(), tsv_field(t), n.to_string()]
    }));
    rows.extend(report.lost_top.iter().map(|(t, n)| {
        vec!["lost".to_string(), tsv_field(t), n.to_string()]
    }));
    out.report(&report, rows);
    Ok(0)
}

// ---- discover ----

#[derive(Args)]
struct DiscoverArgs {
    #[command(subcommand)]
    action: DiscoverAction,
}

#[derive(Subcommand)]
enum DiscoverAction {
    /// Most frequent words, optionally only in regex-matched docs
    Words {
        /// Corpus file (.txt or .tsv)
        #[arg(long)]
        corpus: PathBuf,
        /// Stored-form regex file restricting to matched docs
        #[arg(long)]
        regex: Option<PathBuf>,
        /// Rows to return
        #[arg(long, default_value_t = 50)]
        top_k: usize,
    },
    /// Words adjacent to seed-regex matches
    Cooccur {
        /// Corpus file (.txt or .tsv)
        #[arg(long)]
        corpus: PathBuf,
        /// Stored-form seed regex file
        #[arg(long)]
        regex: PathBuf,
        /// Tokens to take on each side of a match
        #[arg(long, default_value_t = 2)]
        window: usize,
        /// Rows to return
        #[arg(long, default_value_t = 50)]
        top_k: usize,
    },
    /// Words ranked by target-vs-background frequency ratio
    Ratio {
        /// Target corpus, e.g. false negatives (.txt or .tsv)
        #[arg(long)]
        corpus: PathBuf,
        /// Background corpus, e.g. all texts (.txt or .tsv)
        #[arg(long)]
        background: PathBuf,
        /// Rows to return
        #[arg(long, default_value_t = 50)]
        top_k: usize,
    },
    /// Most frequent word bigrams or trigrams
    Ngrams {
        /// Corpus file (.txt or .tsv)
        #[arg(long)]
        corpus: PathBuf,
        /// n-gram size: 2 or 3
        #[arg(long)]
        n: usize,
        /// Stored-form regex file restricting to matched docs
        #[arg(long)]
        regex: Option<PathBuf>,
        /// Rows to return
        #[arg(long, default_value_t = 50)]
        top_k: usize,
    },
}

fn optional_matcher(path: &Option<PathBuf>) -> Result<Option<CompiledTopicMatcher>, Failure> {
    match path {
        None => Ok(None),
        Some(p) => Ok(Some(compile_matcher(&read_live_regex(p)?, Customization::default())?)),
    }
}

fn cmd_discover(args: DiscoverArgs, out: &Out) -> CmdResult {
    match args.action {
        DiscoverAction::Words { corpus, regex, top_k } => {
            let c = read_corpus(&corpus)?;
            let filter = optional_matcher(&regex)?;
            let rows = discovery::top_words(&c, filter.as_ref(), top_k).map_err(domain)?;
            count_report(out, &rows);
        }
        DiscoverAction::Cooccur { corpus, regex, window, top_k } => {
            let c = read_corpus(&corpus)?;
            let seed = compile_matcher(&read_live_regex(&regex)?, Customization::default())?;
            let rows = discovery::cooccurring_words(&c, &seed, window, top_k).map_err(domain)?;
            count_report(out, &rows);
        }
        DiscoverAction::Ratio { corpus, background, top_k } => {
            let target = read_corpus(&corpus)?;
            let bg = read_corpus(&background)?;
            let rows = discovery::ratio_ranked_words(&target, &bg, top_k).map_err(domain)?;
            #[derive(Serialize)]
            struct TokenRatio<'a> {
                token: &'a str,
                ratio: f64,
            }
            let objs: Vec<TokenRatio> =
                rows.iter().map(|(t, r)| TokenRatio { token: t, ratio: *r }).collect();
            let tsv = rows.iter().map(|(t, r)| vec![tsv_field(t), format!("{:.6}", r)]).collect();
            out.report(&objs, tsv);
        }
        DiscoverAction::Ngrams { corpus, n, regex, top_k } => {
            let c = read_corpus(&corpus)?;
            let filter = optional_matcher(&regex)?;
            let rows = discovery::top_ngrams(&c, n, filter.as_ref(), top_k).map_err(domain)?;
            count_report(out, &rows);
        }
    }
    Ok(0)
}

// ---- eval ----

#[derive(Args)]
struct EvalArgs {
    #[command(subcommand)]
    action: EvalAction,
}

#[derive(Subcommand)]
enum EvalAction {
    /// Confusion metrics against a labeled corpus
    Confusion {
        /// Stored-form regex file
        #[arg(long)]
        regex: PathBuf,
        /// Labeled corpus (.tsv with labels)
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Auto-confirm matches with a 100%-precision safe regex
    Confirm {
        /// Stored-form regex file for the main matcher
        #[arg(long)]
        regex: PathBuf,
        /// Stored-form regex file for the safe matcher
        #[arg(long)]
        safe: PathBuf,
        /// Corpus file (.txt or .tsv)
        #[arg(long)]
        corpus: PathBuf,
        /// Documents to consider: matched (by the main regex) or all
        #[arg(long, default_value = "matched", value_parser = ConfirmScope::from_str)]
        scope: ConfirmScope,
        /// Write residual (unconfirmed) docs as a review TSV
        #[arg(long)]
        review_bundle: Option<PathBuf>,
    },
    /// Matched-set growth of an improved regex over a base one
    Gain {
        /// Stored-form regex file for the baseline
        #[arg(long)]
        base: PathBuf,
        /// Stored-form regex file for the improved version
        #[arg(long)]
        improved: PathBuf,
        /// Corpus file (.txt or .tsv)
        #[arg(long)]
        corpus: PathBuf,
    },
}

fn cmd_eval(args: EvalArgs, out: &Out) -> CmdResult {
    match args.action {
        EvalAction::Confusion { regex, corpus } => {
            let m = compile_matcher(&read_live_regex(&regex)?, Customization::default())?;
            let c = read_corpus(&corpus)?;
            let report = eval::confusion_eval(&m, &c).map_err(domain)?;
            let mut rows = vec![
                vec!["tp".to_string(), report.tp.to_string()],
                vec!["fp".to_string(), report.fp.to_string()],
                vec!["fn".to_string(), report.r#fn.to_string()],
                vec!["tn".to_string(), report.tn.to_string()],
            ];
            for (name, v) in [
                ("accuracy", report.accuracy),
                ("precision", report.precision),
                ("recall", report.recall),
            ] {
                if let Some(v) = v {
                    rows.push(vec![name.to_string(), format!("{:.6}", v)]);
                }
            }
            out.report(&report, rows);
            Ok(0)
        }
        EvalAction::Confirm { regex, safe, corpus, scope, review_bundle } => {
            let m = compile_matcher(&read_live_regex(&regex)?, Customization::default())?;
            let safe_m = compile_matcher(&read_live_regex(&safe)?, Customization::default())?;
            let c = read_corpus(&corpus)?;
            let report = eval::safe_confirm(&m, &safe_m, &c, scope).map_err(domain)?;
            let rows = vec![
                vec!["considered".to_string(), report.considered.to_string()],
                vec!["auto_confirmed".to_string(), report.auto_confirmed.to_string()],
                vec!["fraction".to_string(), format!("{:.6}", report.fraction)],
                vec!["residual".to_string(), report.residual_ids.join("; ")],
            ];
            if let Some(bundle) = &review_bundle {
                write_review_bundle(
                    bundle,
                    c.docs.iter().filter(|d| report.residual_ids.contains(&d.id)).map(|d| {
                        (d.id.clone(), d.text.clone(), m.classify(&d.text).snippets)
                    }),
                )?;
            }
            out.report(&report, rows);
            Ok(0)
        }
        EvalAction::Gain { base, improved, corpus } => {
            let base_m = compile_matcher(&read_live_regex(&base)?, Customization::default())?;
            let improved_m = compile_matcher(&read_live_regex(&improved)?, Customization::default())?;
            let c = read_corpus(&corpus)?;
            let ratio = eval::recall_gain(&base_m, &improved_m, &c).map_err(domain)?;
            #[derive(Serialize)]
            struct GainReport {
                ratio: f64,
                display: String,
                note: &'static str,
            }
            let report = GainReport {
                ratio,
                display: eval::format_gain(ratio),
                note: "match-count ratio, not labeled recall; trustworthy only while both regexes stay high-precision",
            };
            let rows = vec![
                vec!["ratio".to_string(), format!("{:.6}", report.ratio)],
                vec!["display".to_string(), report.display.clone()],
                vec!["note".to_string(), report.note.to_string()],
            ];
            out.report(&report, rows);
            Ok(0)
        }
    }
}

// ---- bench ----

#[derive(Args)]
struct BenchArgs {
    /// Stored-form regex file
    #[arg(long)]
    regex: PathBuf,
    /// Corpus file; docs are bucketed by character length
    #[arg(long)]
    corpus: PathBuf,
    /// Timed repetitions per text (minimum 3)
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Customization JSON file
    #[arg(long)]
    customization: Option<PathBuf>,
}

fn cmd_bench(args: BenchArgs, out: &Out) -> CmdResult {
    let customization = read_customization(&args.customization)?;
    let m = compile_matcher(&read_live_regex(&args.regex)?, customization)?;
    let corpus = read_corpus(&args.corpus)?;
    let texts: Vec<String> = corpus.docs.iter().map(|d| d.text.clone()).collect();
    let report = eval::bench(&m, &texts, args.reps).map_err(|e| Failure::from(anyhow!("{}", e)))?;
    let mut rows = Vec::new();
    for (mode, timing) in [("full", &report.full), ("early_termination", &report.early_termination)] {
        for b in &timing.buckets {
            rows.push(vec![
                mode.to_string(),
                b.text_chars.to_string(),
                format!("{:.3}", b.mean_ms),
                format!("{:.3}", b.std_ms),
                b.reps.to_string(),
            ]);
        }
    }
    out.report(&report, rows);
    Ok(0)
}

// ---- profile ----

#[derive(Args)]
struct ProfileArgs {
    /// Stored-form regex file
    #[arg(long)]
    regex: PathBuf,
    /// Corpus file; repeat for one loss column per corpus
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
}

fn cmd_profile(args: ProfileArgs, out: &Out) -> CmdResult {
    let live = read_live_regex(&args.regex)?;
    let mut corpora = Vec::new();
    for path in &args.corpus {
        corpora.push(read_corpus(path)?);
    }
    let mut names: Vec<&str> = corpora.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(anyhow!("corpus names must be unique; rename one of the files").into());
    }
    let report = profiler::profile(&live, &corpora).map_err(domain)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut rows = Vec::new();
    let columns: Vec<&Corpus> =
        corpora.iter().filter(|c| !report.skipped_corpora.contains(&c.name)).collect();
    let mut header = vec!["chunk".to_string()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    header.push("max_loss".to_string());
    rows.push(header);
    for row in &report.rows {
        let mut cells = vec![tsv_field(&row.chunk.text)];
        if row.skipped {
            cells.extend(std::iter::repeat("skipped".to_string()).take(columns.len() + 1));
        } else {
            cells.extend(columns.iter().map(|c| format!("{:.3}", row.loss_pct[&c.name])));
            cells.push(format!("{:.3}", row.max_loss));
        }
        rows.push(cells);
    }
    out.report(&report, rows);
    Ok(0)
}

// ---- distill ----

#[derive(Args)]
struct DistillArgs {
    /// Stored-form regex file
    #[arg(long)]
    regex: PathBuf,
    /// Calibration corpus file (.txt or .tsv)
    #[arg(long)]
    corpus: PathBuf,
    /// Maximum calibration recall loss, in percent
    #[arg(long)]
    budget: f64,
}

fn cmd_distill(args: DistillArgs, out: &Out) -> CmdResult {
    let live = read_live_regex(&args.regex)?;
    let corpus = read_corpus(&args.corpus)?;
    let report = profiler::distill(&live, &corpus, args.budget).map_err(|e| match e {
        profiler::ProfilerError::InvalidBudget { .. } => Failure::from(anyhow!("{}", e)),
        other => domain(other),
    })?;
    let mut rows: Vec<Vec<String>> = report
        .suggested_removals
        .iter()
        .map(|c| {
            vec![
                "removed".to_string(),
                serde_json::to_value(c.kind).unwrap().as_str().unwrap().to_string(),
                tsv_field(&c.text),
            ]
        })
        .collect();
    rows.push(vec!["final_loss_pct".to_string(), format!("{:.6}", report.final_loss_pct)]);
    rows.push(vec!["final_regex".to_string(), tsv_field(&report.final_regex)]);
    out.report(&report, rows);
    Ok(0)
}

// ---- registry commands ----

#[derive(Args)]
struct PublishArgs {
    /// Document JSON file; publishes its annotated rendering
    #[arg(long, conflicts_with = "regex", required_unless_present = "regex")]
    doc: Option<PathBuf>,
    /// Stored-form regex file to publish as-is
    #[arg(long, requires = "topic", requires = "language", requires = "tier", requires = "version")]
    regex: Option<PathBuf>,
    /// Topic key (taken from the document when --doc is used)
    #[arg(long)]
    topic: Option<String>,
    /// Language key (taken from the document when --doc is used)
    #[arg(long)]
    language: Option<String>,
    /// Tier key (taken from the document when --doc is used)
    #[arg(long, value_parser = Tier::from_str)]
    tier: Option<Tier>,
    /// Version (taken from the document when --doc is used)
    #[arg(long)]
    version: Option<u32>,
    /// Publish the compact rendering instead of the annotated one
    #[arg(long)]
    compact: bool,
    /// Annotated line width
    #[arg(long, default_value_t = 100)]
    width: usize,
}

fn cmd_publish(args: PublishArgs, out: &Out, registry_flag: &Option<PathBuf>) -> CmdResult {
    let registry = registry_at(registry_flag);
    let (topic, language, tier, version, stored) = if let Some(doc_path) = &args.doc {
        let doc = read_document(doc_path)?;
        let opts = RenderOptions { annotated: !args.compact, max_line_width: args.width };
        let live = render::render(&doc, &opts).map_err(domain)?;
        (doc.topic, doc.language, doc.tier, doc.version, escape_for_store(&live))
    } else {
        let raw = read_file(args.regex.as_ref().expect("clap enforces one source"))?;
        let stored = raw.strip_suffix('\n').unwrap_or(&raw).to_string();
        (
            args.topic.clone().expect("clap enforces the key"),
            args.language.clone().expect("clap enforces the key"),
            args.tier.expect("clap enforces the key"),
            args.version.expect("clap enforces the key"),
            stored,
        )
    };
    let version = registry
        .publish(&topic, &language, tier, version, &stored)
        .map_err(registry_failure)?;
    #[derive(Serialize)]
    struct Published {
        topic: String,
        language: String,
        tier: Tier,
        version: u32,
        fingerprint: String,
        registry: String,
    }
    let entry = registry.fetch(&topic, &language, tier, Some(version)).map_err(registry_failure)?;
    let report = Published {
        topic,
        language,
        tier,
        version,
        fingerprint: entry.fingerprint,
        registry: registry.path().display().to_string(),
    };
    let rows = vec![vec![
        report.topic.clone(),
        report.language.clone(),
        report.tier.to_string(),
        report.version.to_string(),
        report.fingerprint.clone(),
    ]];
    out.report(&report, rows);
    Ok(0)
}

#[derive(Args)]
struct FetchArgs {
    /// Topic key
    #[arg(long)]
    topic: String,
    /// Language key
    #[arg(long)]
    language: String,
    /// Tier key (tier1 or tier2)
    #[arg(long, value_parser = Tier::from_str)]
    tier: Tier,
    /// Pin a version (default: latest)
    #[arg(long)]
    version: Option<u32>,
    /// Also write the stored regex to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_fetch(args: FetchArgs, out: &Out, registry_flag: &Option<PathBuf>) -> CmdResult {
    let registry = registry_at(registry_flag);
    let entry = registry
        .fetch(&args.topic, &args.language, args.tier, args.version)
        .map_err(registry_failure)?;
    if let Some(path) = &args.out {
        fs::write(path, format!("{}\n", entry.stored_regex))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let rows = vec![vec![
        entry.topic.clone(),
        entry.language.clone(),
        entry.tier.to_string(),
        entry.version.to_string(),
        entry.published_at.clone(),
        entry.fingerprint.clone(),
        tsv_field(&entry.stored_regex),
    ]];
    out.report(&entry, rows);
    Ok(0)
}

fn cmd_list(out: &Out, registry_flag: &Option<PathBuf>) -> CmdResult {
    let registry = registry_at(registry_flag);
    let entries = registry.list().map_err(registry_failure)?;
    let rows = entries
        .iter()
        .map(|e| {
            vec![
                e.topic.clone(),
                e.language.clone(),
                e.tier.to_string(),
                e.version.to_string(),
                e.published_at.clone(),
                e.fingerprint.clone(),
            ]
        })
        .collect();
    out.report(&entries, rows);
    Ok(0)
}

#[derive(Args)]
struct ConcatArgs {
    /// Topic key
    #[arg(long)]
    topic: String,
    /// Languages to combine, primary first; repeat the flag
    #[arg(long, required = true)]
    language: Vec<String>,
    /// Tier key (tier1 or tier2)
    #[arg(long, value_parser = Tier::from_str)]
    tier: Tier,
    /// Maximum languages to combine
    #[arg(long, default_value_t = DEFAULT_MAX_CONCAT)]
    max: usize,
}

fn cmd_concat(args: ConcatArgs, registry_flag: &Option<PathBuf>) -> CmdResult {
    let registry = registry_at(registry_flag);
    let mut entries = Vec::new();
    for language in &args.language {
        entries.push(
            registry.fetch(&args.topic, language, args.tier, None).map_err(registry_failure)?,
        );
    }
    let combined = concat_entries(&entries, args.max).map_err(registry_failure)?;
    println!("{}", combined);
    Ok(0)
}
