//! Acceptance suite: thirteen end-to-end checks, one test each, covering
//! variant counting, bipartite coverage, exclusion semantics, annotated
//! rendering equivalence, validator bug detection, the snippet contract,
//! profiler and distiller oracles, evaluation metrics, discovery, timing,
//! and job-count determinism of the CLI.
//!
//! Tests share one gate so the timing-sensitive ones never compete for
//! cores with their neighbors.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use topickit_core::discovery::{self, Corpus, Document, Label};
use topickit_core::eval::{self, ConfirmScope, ConfusionReport};
use topickit_core::matcher::{compile, Customization};
use topickit_core::model::{count_variants, serialize_document};
use topickit_core::profiler::{self, Chunk};
use topickit_core::render::{self, RenderOptions};
use topickit_core::synth::{self, PlantedBug};
use topickit_core::validate::{self, BanList, Severity};

static GATE: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn default_matcher(live: &str) -> topickit_core::matcher::CompiledTopicMatcher {
    compile(live, Customization::default()).unwrap_or_else(|e| panic!("{live:?}: {e}"))
}

// ---- 1: variant counting ----

#[test]
fn criterion_01_variant_count_is_48_within_a_second() {
    let _g = serial();
    let t0 = Instant::now();
    let n = count_variants("[ck][ao0]?r[ao0]n[ao]").unwrap();
    let elapsed = t0.elapsed();
    assert_eq!(n, 48);
    assert!(elapsed < Duration::from_secs(1), "took {:?}", elapsed);
}

// ---- 2: bipartite coverage oracle ----

// Independent expansions of the two keyword sets, written as plain loops
// so they share no code with the variant counter.
fn corona_variants() -> Vec<String> {
    let mut out = Vec::new();
    for c in ["c", "k"] {
        for o1 in ["", "a", "o", "0"] {
            for o2 in ["a", "o", "0"] {
                for tail in ["a", "o"] {
                    out.push(format!("{c}{o1}r{o2}n{tail}"));
                }
            }
        }
    }
    out
}

fn virus_variants() -> Vec<String> {
    let mut out = Vec::new();
    for v1 in ["a", "i"] {
        for opt_i in ["", "i"] {
            for v2 in ["a", "o", "u"] {
                out.push(format!("v{v1}{opt_i}r{v2}s"));
            }
        }
    }
    out
}

// Interstitial letters chosen so no keyword variant can arise inside a
// gap or across its edges: no r/n/c/v/d/0 (both keyword sets need them)
// and no f/l/u (the letters of "flu").
const GAP_LETTERS: &[u8] = b"bghjkmpqstwxyz";

fn gap_text(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| *GAP_LETTERS.choose(rng).unwrap() as char).collect()
}

#[test]
fn criterion_02_bipartite_covers_every_pair_within_gap() {
    let _g = serial();
    let frags_a = ["[ck][ao0]?r[ao0]n[ao]".to_string(), "c[o0]vid".to_string()];
    let frags_b = ["v[ai]i?r[aou]s".to_string(), "flu".to_string()];
    let n: u64 = frags_a.iter().map(|f| count_variants(f).unwrap()).sum();
    let m: u64 = frags_b.iter().map(|f| count_variants(f).unwrap()).sum();
    assert_eq!(n, 50);
    assert_eq!(m, 13);

    let mut set_a = corona_variants();
    set_a.extend(["covid".to_string(), "c0vid".to_string()]);
    let mut set_b = virus_variants();
    set_b.push("flu".to_string());
    assert_eq!(set_a.len() as u64, n, "expansion disagrees with the counter");
    assert_eq!(set_b.len() as u64, m, "expansion disagrees with the counter");

    let live = render::build_bipartite(&frags_a, &frags_b, 80, true).unwrap();
    let matcher = default_matcher(&live);

    let mut rng = synth::rng(2);
    let mut checked = 0usize;
    for a in &set_a {
        for b in &set_b {
            let len = rng.gen_range(0..=80);
            let g = gap_text(&mut rng, len);
            assert!(matcher.is_match(&format!("{a}{g}{b}")), "{a}..{b} gap {len}");
            let len = rng.gen_range(0..=80);
            let g = gap_text(&mut rng, len);
            assert!(matcher.is_match(&format!("{b}{g}{a}")), "{b}..{a} gap {len}");
            checked += 2;
        }
    }
    assert_eq!(checked, 1300);

    // One character past the window must not match.
    for _ in 0..100 {
        let a = set_a.choose(&mut rng).unwrap();
        let b = set_b.choose(&mut rng).unwrap();
        let g = gap_text(&mut rng, 81);
        let text = if rng.gen_bool(0.5) { format!("{a}{g}{b}") } else { format!("{b}{g}{a}") };
        assert!(!matcher.is_match(&text), "81-char gap matched: {text}");
    }
}

// ---- 3: exclusion semantics ----

#[test]
fn criterion_03_lookahead_exclusions_block_derailing_suffixes() {
    let _g = serial();
    let matcher = default_matcher(r"corona(?!(ry|do|[ct]ion|\W{0,3}beer|dal))");
    assert!(matcher.is_match("coronavirus"));
    for text in ["coronary", "coronation", "corona beer", "coronadal"] {
        assert!(!matcher.is_match(text), "{text:?} must be vetoed");
    }
}

// ---- 4: annotated rendering is behaviorally invisible ----

#[test]
fn criterion_04_annotated_and_compact_classify_identically() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = synth::rng(4);
    let shared: Vec<String> = (0..100)
        .map(|_| {
            let n = rng.gen_range(6..=14);
            synth::noise_text(&mut rng, n)
        })
        .collect();
    let opts = RenderOptions::default();
    for seed in 0..1000 {
        let doc = synth::document(seed);
        let compact = render::render_compact(&doc).unwrap();
        let annotated = render::render_annotated(&doc, &opts).unwrap();
        let mc = default_matcher(&compact);
        let ma = default_matcher(&annotated);
        for text in shared
            .iter()
            .chain(&doc.tests.must_match)
            .chain(&doc.tests.must_not_match)
        {
            let rc = mc.classify(text);
            assert_eq!(rc, ma.classify(text), "seed {seed} text {text:?}");
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {:?}", elapsed);
}

// ---- 5: validator catches planted bugs ----

#[test]
fn criterion_05_validator_flags_every_planted_bug_and_no_clean_doc() {
    let _g = serial();
    let banlist = BanList::default();
    let mut planted = 0;
    for seed in 0..5u64 {
        for bug in PlantedBug::ALL {
            planted += 1;
            let mut doc = synth::document(seed + 50);
            let findings = if bug == PlantedBug::TestFail {
                synth::sabotage_tests(&mut doc);
                validate::validate_document(&doc, &banlist)
            } else {
                let stored = render::escape_for_store(&render::render_compact(&doc).unwrap());
                let mut rng = synth::rng(seed * 31 + bug as u64);
                let bad = synth::sabotage_stored(&mut rng, &stored, bug);
                validate::validate_stored(&bad, &banlist)
            };
            let code = bug.expected_code();
            assert!(
                findings.iter().any(|f| f.code == code && f.severity == Severity::Error),
                "seed {seed} bug {bug:?} undetected; findings: {findings:?}"
            );
        }
    }
    assert!(planted >= 20);

    for seed in 100..120 {
        let doc = synth::document(seed);
        let findings = validate::validate_document(&doc, &banlist);
        assert!(!validate::has_errors(&findings), "clean doc {seed} flagged: {findings:?}");
    }
}

// ---- 6: snippet contract ----

#[test]
fn criterion_06_snippet_contract_holds_over_100k_trials() {
    let _g = serial();
    let mut rng = synth::rng(6);
    let mut trials = 0usize;
    for seed in 0..200u64 {
        let doc = synth::document(seed);
        let matcher = default_matcher(&render::render_compact(&doc).unwrap());
        for _ in 0..500 {
            let text = match rng.gen_range(0..10) {
                0..=4 => {
                    let n = rng.gen_range(4..=16);
                    synth::noise_text(&mut rng, n)
                }
                5..=6 => {
                    let i = rng.gen_range(0..doc.tests.must_match.len());
                    let n = rng.gen_range(2..=8);
                    let noise = synth::noise_text(&mut rng, n);
                    synth::plant(&mut rng, &noise, &doc.tests.must_match[i])
                }
                7..=8 => {
                    let n = rng.gen_range(2..=8);
                    let noise = synth::noise_text(&mut rng, n);
                    let one = synth::plant(&mut rng, &noise, &doc.tests.must_match[0]);
                    let last = doc.tests.must_match.len() - 1;
                    synth::plant(&mut rng, &one, &doc.tests.must_match[last])
                }
                _ => {
                    let i = rng.gen_range(0..doc.tests.must_not_match.len());
                    let n = rng.gen_range(2..=8);
                    let noise = synth::noise_text(&mut rng, n);
                    synth::plant(&mut rng, &noise, &doc.tests.must_not_match[i])
                }
            };
            trials += 1;
            let report = matcher.classify(&text);
            assert!(report.snippets.len() <= 30, "cap violated on {text:?}");
            for pair in report.snippets.windows(2) {
                assert!(
                    pair[0].chars().count() <= pair[1].chars().count(),
                    "snippet order violated: {:?}",
                    report.snippets
                );
            }
            let pre = matcher.preprocess(&text);
            for snippet in &report.snippets {
                assert!(pre.contains(snippet.as_str()), "{snippet:?} not in preprocessed text");
                assert!(matcher.is_match(snippet), "{snippet:?} does not match on its own");
            }
        }
    }
    assert_eq!(trials, 100_000);
}

// ---- 7: profile equals a full-rematch recount ----

fn splice_out(regex: &str, chunk: &Chunk) -> String {
    let mut s = regex.to_string();
    for &(a, b) in chunk.occurrences.iter().rev() {
        s.replace_range(a..b, "foobar123");
    }
    s
}

#[test]
fn criterion_07_profile_loss_and_gain_match_independent_recount() {
    let _g = serial();
    let tokens: &[&str] = &["covid", "c0vid", "corona", "c0rona", "covit"];
    for (regex, seed) in [(r"(\b|\d|_|#)c[o0]vi[dt](\b|\d|_)", 71u64), ("covid|c[o0]rona", 72)] {
        let chunks = profiler::decompose(regex).unwrap();
        assert!(chunks.len() <= 10, "{regex}: {} chunks", chunks.len());

        let mut calib = synth::labeled_corpus(seed, 10_000, tokens, 0.2);
        calib.name = "calib".into();
        for (i, doc) in calib.docs.iter_mut().enumerate() {
            doc.weight = (i % 4 + 1) as u64;
        }
        let mut check = synth::labeled_corpus(seed + 1, 1_000, tokens, 0.3);
        check.name = "check".into();
        let corpora = [calib, check];

        let report = profiler::profile(regex, &corpora).unwrap();
        assert!(report.skipped_corpora.is_empty());
        assert_eq!(report.rows.len(), chunks.len());

        let baseline_m = default_matcher(regex);
        for row in &report.rows {
            let ablated = splice_out(regex, &row.chunk);
            if row.skipped {
                assert!(compile(&ablated, Customization::default()).is_err());
                continue;
            }
            let m = default_matcher(&ablated);
            let mut max_loss = f64::MIN;
            for corpus in &corpora {
                let mut base_w = 0u64;
                let mut lost = 0u64;
                let mut gained = 0u64;
                for doc in &corpus.docs {
                    let was = baseline_m.is_match(&doc.text);
                    let is = m.is_match(&doc.text);
                    if was {
                        base_w += doc.weight;
                        if !is {
                            lost += doc.weight;
                        }
                    } else if is {
                        gained += doc.weight;
                    }
                }
                assert!(base_w > 0);
                let want_loss = lost as f64 / base_w as f64 * 100.0;
                let want_gain = gained as f64 / base_w as f64 * 100.0;
                assert_eq!(row.loss_pct[&corpus.name], want_loss, "{regex} chunk {:?}", row.chunk.text);
                assert_eq!(row.gain_pct[&corpus.name], want_gain, "{regex} chunk {:?}", row.chunk.text);
                max_loss = max_loss.max(want_loss);
            }
            assert_eq!(row.max_loss, max_loss, "{regex} chunk {:?}", row.chunk.text);
        }
    }
}

// ---- 8: distillation stays under budget, keeps joint coverage ----

fn planted_corpus(name: &str, groups: &[(&str, usize)], noise_docs: usize, seed: u64) -> Corpus {
    let mut rng = synth::rng(seed);
    let mut docs = Vec::new();
    for (token, n) in groups {
        for _ in 0..*n {
            let words = rng.gen_range(4..=9);
            let base = synth::noise_text(&mut rng, words);
            let text = synth::plant(&mut rng, &base, token);
            docs.push(Document { id: (docs.len() + 1).to_string(), text, weight: 1, label: None });
        }
    }
    for _ in 0..noise_docs {
        let words = rng.gen_range(4..=9);
        let text = synth::noise_text(&mut rng, words);
        docs.push(Document { id: (docs.len() + 1).to_string(), text, weight: 1, label: None });
    }
    Corpus { name: name.into(), docs }
}

fn recount_loss(original: &str, final_regex: &str, corpus: &Corpus) -> f64 {
    let m0 = default_matcher(original);
    let m1 = default_matcher(final_regex);
    let mut base_w = 0u64;
    let mut lost = 0u64;
    for doc in &corpus.docs {
        if m0.is_match(&doc.text) {
            base_w += doc.weight;
            if !m1.is_match(&doc.text) {
                lost += doc.weight;
            }
        }
    }
    lost as f64 / base_w as f64 * 100.0
}

#[test]
fn criterion_08_distill_honors_budget_and_never_drops_both_copies() {
    let _g = serial();
    // Three clauses with distinct calibration losses: 200/60/40 docs of a
    // 300-doc matched baseline.
    let regex = "covid|c0vid|corona";
    let corpus =
        planted_corpus("calib", &[("covid", 200), ("c0vid", 60), ("corona", 40)], 100, 81);
    for (budget, want_loss, want_removals) in [
        (0.0, 0.0, 0),
        (10.0, 0.0, 0),
        (15.0, 40f64 / 300f64 * 100.0, 1),
        (40.0, 100f64 / 300f64 * 100.0, 2),
        (100.0, 100.0, 3),
    ] {
        let report = profiler::distill(regex, &corpus, budget).unwrap();
        assert!(report.final_loss_pct <= budget, "budget {budget}: {}", report.final_loss_pct);
        assert_eq!(report.final_loss_pct, want_loss, "budget {budget}");
        assert_eq!(report.suggested_removals.len(), want_removals, "budget {budget}");
        if budget < 100.0 {
            assert_eq!(recount_loss(regex, &report.final_regex, &corpus), report.final_loss_pct);
        }
        if want_removals == 0 {
            assert_eq!(report.final_regex, regex);
        }
    }

    // Redundant pair: each copy alone is free to remove, both together
    // cost everything. No budget below that joint loss may drop both.
    let trap = "covid|c[o0]vid";
    let trap_corpus = planted_corpus("calib", &[("covid", 40), ("c0vid", 40)], 120, 82);
    for budget in [5.0, 25.0, 60.0, 99.9] {
        let report = profiler::distill(trap, &trap_corpus, budget).unwrap();
        let m = default_matcher(&report.final_regex);
        assert!(m.is_match("zz covid zz"), "budget {budget} lost covid");
        assert!(m.is_match("zz c0vid zz"), "budget {budget} lost c0vid");
        assert_eq!(report.final_loss_pct, 0.0);
        assert_eq!(recount_loss(trap, &report.final_regex, &trap_corpus), 0.0);
    }
}

// ---- 9: confusion metrics ----

#[test]
fn criterion_09_confusion_metrics_equal_hand_computation() {
    let _g = serial();
    let doc = |id: usize, text: &str, weight: u64, label: Label| Document {
        id: id.to_string(),
        text: text.to_string(),
        weight,
        label: Some(label),
    };
    // Hand-tallied: tp = 3+1+1+1+1+1 = 8, fp = 2+1 = 3, fn = 2, tn = 10.
    let docs = vec![
        doc(1, "covid wards are full", 3, Label::Positive),
        doc(2, "new covid wave", 1, Label::Positive),
        doc(3, "tested covid positive", 1, Label::Positive),
        doc(4, "covid covid covid", 1, Label::Positive),
        doc(5, "mild covid case", 1, Label::Positive),
        doc(6, "covid again", 1, Label::Positive),
        doc(7, "corona the beer brand", 2, Label::Negative),
        doc(8, "corona typeface specimen", 1, Label::Negative),
        doc(9, "pandemic disease spreading", 1, Label::Positive),
        doc(10, "lockdown fatigue rising", 1, Label::Positive),
        doc(11, "garden tips today", 1, Label::Negative),
        doc(12, "football results", 1, Label::Negative),
        doc(13, "stock market news", 1, Label::Negative),
        doc(14, "recipe for bread", 1, Label::Negative),
        doc(15, "holiday photos", 1, Label::Negative),
        doc(16, "music festival lineup", 1, Label::Negative),
        doc(17, "weather looks fine", 1, Label::Negative),
        doc(18, "bike repair guide", 1, Label::Negative),
        doc(19, "movie review thread", 1, Label::Negative),
        doc(20, "gardening again", 1, Label::Negative),
    ];
    assert_eq!(docs.len(), 20);
    let corpus = Corpus { name: "hand".into(), docs };
    let matcher = default_matcher("covid|corona");
    let report = eval::confusion_eval(&matcher, &corpus).unwrap();
    assert_eq!(
        report,
        ConfusionReport {
            tp: 8,
            fp: 3,
            r#fn: 2,
            tn: 10,
            accuracy: Some(18.0 / 23.0),
            precision: Some(8.0 / 11.0),
            recall: Some(8.0 / 10.0),
        }
    );

    // Metric identity over random weighted count mixes, including empty
    // denominators.
    let mut rng = synth::rng(91);
    for _ in 0..50 {
        let quads = [
            (true, Label::Positive, rng.gen_range(0..8usize)),
            (true, Label::Negative, rng.gen_range(0..8usize)),
            (false, Label::Positive, rng.gen_range(0..8usize)),
            (false, Label::Negative, rng.gen_range(0..8usize)),
        ];
        let mut docs = Vec::new();
        let mut want = [0u64; 4];
        for (i, (matched, label, n)) in quads.into_iter().enumerate() {
            for _ in 0..n {
                let words = rng.gen_range(3..=7);
                let mut text = synth::noise_text(&mut rng, words);
                if matched {
                    text = synth::plant(&mut rng, &text, "covid");
                }
                let weight = rng.gen_range(1..=3);
                want[i] += weight;
                docs.push(Document {
                    id: (docs.len() + 1).to_string(),
                    text,
                    weight,
                    label: Some(label),
                });
            }
        }
        let corpus = Corpus { name: "mix".into(), docs };
        let report = eval::confusion_eval(&default_matcher("covid"), &corpus).unwrap();
        assert_eq!(report, ConfusionReport::from_counts(want[0], want[1], want[2], want[3]));
    }
}

// ---- 10: safe confirmation ----

#[test]
fn criterion_10_safe_confirm_equals_brute_force_and_partitions() {
    let _g = serial();
    let texts: [(&str, u64); 12] = [
        ("covid case rising", 3),
        ("corona outbreak abroad", 2),
        ("covid and corona both", 1),
        ("plain noise words", 2),
        ("corona again here", 1),
        ("c0vid evades the main regex", 4),
        ("covid once more", 2),
        ("nothing relevant", 1),
        ("corona third mention", 5),
        ("covid corona covid", 1),
        ("still nothing", 3),
        ("last covid item", 2),
    ];
    let docs = texts
        .iter()
        .enumerate()
        .map(|(i, (text, weight))| Document {
            id: (i + 1).to_string(),
            text: text.to_string(),
            weight: *weight,
            label: None,
        })
        .collect();
    let corpus = Corpus { name: "stream".into(), docs };
    let main = default_matcher("covid|corona");
    let safe = default_matcher("covid");

    for scope in [ConfirmScope::MatchedByMain, ConfirmScope::All] {
        let report = eval::safe_confirm(&main, &safe, &corpus, scope).unwrap();

        let mut considered = 0u64;
        let mut confirmed = 0u64;
        let mut residual = Vec::new();
        for doc in &corpus.docs {
            let in_scope =
                matches!(scope, ConfirmScope::All) || main.is_match(&doc.text);
            if !in_scope {
                continue;
            }
            considered += doc.weight;
            if safe.is_match(&doc.text) {
                confirmed += doc.weight;
            } else {
                residual.push(doc.id.clone());
            }
        }
        assert_eq!(report.considered, considered);
        assert_eq!(report.auto_confirmed, confirmed);
        assert_eq!(report.fraction, confirmed as f64 / considered as f64);
        assert_eq!(report.residual_ids, residual);

        // Partition: every in-scope doc is confirmed or residual, never
        // both, and the weights add back up.
        let residual_set: BTreeSet<&String> = report.residual_ids.iter().collect();
        let mut confirmed_back = 0u64;
        let mut residual_back = 0u64;
        for doc in &corpus.docs {
            let in_scope =
                matches!(scope, ConfirmScope::All) || main.is_match(&doc.text);
            if !in_scope {
                assert!(!residual_set.contains(&doc.id));
                continue;
            }
            if residual_set.contains(&doc.id) {
                assert!(!safe.is_match(&doc.text));
                residual_back += doc.weight;
            } else {
                assert!(safe.is_match(&doc.text));
                confirmed_back += doc.weight;
            }
        }
        assert_eq!(confirmed_back, report.auto_confirmed);
        assert_eq!(confirmed_back + residual_back, report.considered);
    }

    // Hand check of the matched scope: weights 3+2+1+1+2+5+1+2 in scope,
    // covid docs confirmed, corona-only docs residual.
    let report = eval::safe_confirm(&main, &safe, &corpus, ConfirmScope::MatchedByMain).unwrap();
    assert_eq!(report.considered, 17);
    assert_eq!(report.auto_confirmed, 9);
    assert_eq!(report.fraction, 9.0 / 17.0);
    assert_eq!(report.residual_ids, vec!["2", "5", "9"]);
}

// ---- 11: discovery surfaces planted variants ----

#[test]
fn criterion_11_discovery_surfaces_planted_variants_and_fn_token() {
    let _g = serial();
    let variants = ["c0vid", "covid19", "kovid", "coronvirus"];
    let mut rng = synth::rng(11);
    let mut docs = Vec::with_capacity(10_000);
    let mut fn_docs = Vec::new();
    for i in 0..10_000usize {
        let words = rng.gen_range(6..=14);
        let mut text = synth::noise_text(&mut rng, words);
        if rng.gen_bool(0.3) {
            text = synth::plant(&mut rng, &text, "news");
        }
        match i % 100 {
            // Matched by the seed regex, with misspellings riding along.
            0..=14 => {
                let seed_word = if rng.gen_bool(0.5) { "covid" } else { "coronavirus" };
                text = synth::plant(&mut rng, &text, seed_word);
                for v in variants {
                    if rng.gen_bool(0.5) {
                        text = synth::plant(&mut rng, &text, v);
                    }
                }
            }
            // On-topic but missed: only the unknown spelling appears.
            15..=17 => {
                text = synth::plant(&mut rng, &text, "qovid");
            }
            _ => {}
        }
        let doc = Document { id: (i + 1).to_string(), text, weight: 1, label: None };
        if (15..=17).contains(&(i % 100)) {
            fn_docs.push(doc.clone());
        }
        docs.push(doc);
    }
    let corpus = Corpus { name: "posts".into(), docs };
    let seed_matcher = default_matcher("covid|coronavirus");

    let top = discovery::top_words(&corpus, Some(&seed_matcher), 50).unwrap();
    let names: BTreeSet<&str> = top.iter().map(|(w, _)| w.as_str()).collect();
    for v in variants {
        assert!(names.contains(v), "{v} missing from top 50: {top:?}");
    }

    let fn_corpus = Corpus { name: "missed".into(), docs: fn_docs };
    let ranked = discovery::ratio_ranked_words(&fn_corpus, &corpus, usize::MAX).unwrap();
    let position =
        |w: &str| ranked.iter().position(|(t, _)| t == w).unwrap_or_else(|| panic!("{w} absent"));
    let qovid_at = position("qovid");

    // Weighted document frequency over the whole corpus; anything in at
    // least 5% of it counts as background-common.
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for doc in &corpus.docs {
        let unique: BTreeSet<String> = discovery::tokenize(&doc.text).into_iter().collect();
        for token in unique {
            *df.entry(token).or_insert(0) += doc.weight;
        }
    }
    let mut commons = 0;
    for (token, weight) in &df {
        if *weight >= 500 && token != "qovid" {
            commons += 1;
            let p = position(token);
            assert!(qovid_at < p, "qovid at {qovid_at} ranked below common {token:?} at {p}");
        }
    }
    assert!(commons > 0, "corpus has no background-common tokens to compare against");
}

// ---- 12: latency on a production-scale regex ----

#[test]
fn criterion_12_tier2_latency_under_50ms_and_scales_with_length() {
    let _g = serial();
    let doc = synth::tier2_document(12, 5000);
    let live = render::render_compact(&doc).unwrap();
    assert!(live.len() >= 5000, "rendered only {} bytes", live.len());
    let matcher = default_matcher(&live);

    // Text alphabet disjoint from every pattern letter: the scan always
    // runs to the end with no match and no early exit.
    const TEXT_LETTERS: &[u8] = b"acdeinorv";
    let mut rng = synth::rng(121);
    let bucket = |rng: &mut ChaCha8Rng, chars: usize| -> Vec<String> {
        (0..6).map(|_| synth::text_of_len_from(rng, TEXT_LETTERS, chars)).collect()
    };
    let t1k = bucket(&mut rng, 1000);
    let t3k = bucket(&mut rng, 3000);
    let t5k = bucket(&mut rng, 5000);
    for text in t1k.iter().chain(&t3k).chain(&t5k) {
        assert!(!matcher.is_match(text));
    }

    let mut samples = Vec::new();
    for text in &t5k {
        std::hint::black_box(matcher.classify(text));
        for _ in 0..5 {
            let t0 = Instant::now();
            std::hint::black_box(matcher.classify(text));
            samples.push(t0.elapsed().as_secs_f64() * 1000.0);
        }
    }
    samples.sort_by(f64::total_cmp);
    let median = samples[samples.len() / 2];
    assert!(median < 50.0, "median {median:.2} ms on 5000-char texts");

    let all: Vec<String> = t1k.iter().chain(&t3k).chain(&t5k).cloned().collect();
    let bench = eval::bench(&matcher, &all, 5).unwrap();
    let buckets = &bench.full.buckets;
    assert_eq!(
        buckets.iter().map(|b| b.text_chars).collect::<Vec<_>>(),
        vec![1000, 3000, 5000]
    );
    assert!(
        buckets[0].mean_ms <= buckets[1].mean_ms && buckets[1].mean_ms <= buckets[2].mean_ms,
        "means not nondecreasing: {:?}",
        buckets.iter().map(|b| b.mean_ms).collect::<Vec<_>>()
    );
    let ratio = buckets[2].mean_ms / buckets[0].mean_ms;
    assert!((1.5..=10.0).contains(&ratio), "5k/1k mean ratio {ratio:.2}");
}

// ---- 13: --jobs never changes analysis output ----

#[test]
fn criterion_13_analysis_output_is_identical_across_jobs() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let write = |name: &str, content: &str| {
        std::fs::write(dir.path().join(name), content).unwrap();
    };

    write("main.regex", &render::escape_for_store("covid|c[o0]rona|flu(?!ffy)"));
    write("base.regex", &render::escape_for_store("covid"));
    write("safe.regex", &render::escape_for_store("covid"));
    write("doc.json", &serialize_document(&synth::document(77)));

    let mut rng = synth::rng(13);
    let mut posts = Vec::new();
    let mut labeled = Vec::new();
    for i in 0..200usize {
        let words = rng.gen_range(5..=12);
        let mut text = synth::noise_text(&mut rng, words);
        let token = match i % 5 {
            0 => Some("covid"),
            1 => Some("c0rona"),
            2 => Some("flu"),
            _ => None,
        };
        if let Some(token) = token {
            text = synth::plant(&mut rng, &text, token);
        }
        posts.push(text.clone());
        if i < 150 {
            let label = if token.is_some() { "1" } else { "0" };
            labeled.push(format!("{text}\t{}\t{label}", i % 3 + 1));
        }
    }
    write("posts.txt", &(posts.join("\n") + "\n"));
    write("labeled.tsv", &(labeled.join("\n") + "\n"));
    let mut missed = Vec::new();
    for _ in 0..40 {
        let words = rng.gen_range(5..=12);
        let text = synth::noise_text(&mut rng, words);
        missed.push(synth::plant(&mut rng, &text, "qovid"));
    }
    write("fnset.txt", &(missed.join("\n") + "\n"));

    let (main_rx, base_rx, safe_rx) = (path("main.regex"), path("base.regex"), path("safe.regex"));
    let (posts, labeled, fnset, doc) =
        (path("posts.txt"), path("labeled.tsv"), path("fnset.txt"), path("doc.json"));
    let cases: Vec<Vec<&str>> = vec![
        vec!["validate", "--doc", &doc],
        vec!["validate", "--stored", &main_rx],
        vec!["match", "--regex", &main_rx, "--corpus", &posts],
        vec!["match", "--regex", &main_rx, "--corpus", &posts, "--format", "tsv"],
        vec!["diff", "--old", &base_rx, "--new", &main_rx, "--corpus", &posts],
        vec!["discover", "words", "--corpus", &posts, "--regex", &main_rx, "--top-k", "25"],
        vec!["discover", "cooccur", "--corpus", &posts, "--regex", &base_rx, "--window", "2", "--top-k", "25"],
        vec!["discover", "ratio", "--corpus", &fnset, "--background", &posts, "--top-k", "25"],
        vec!["discover", "ngrams", "--corpus", &posts, "--n", "2", "--top-k", "25"],
        vec!["eval", "confusion", "--regex", &main_rx, "--corpus", &labeled],
        vec!["eval", "confirm", "--regex", &main_rx, "--safe", &safe_rx, "--corpus", &posts],
        vec!["eval", "gain", "--base", &base_rx, "--improved", &main_rx, "--corpus", &posts],
        vec!["profile", "--regex", &main_rx, "--corpus", &posts],
        vec!["profile", "--regex", &main_rx, "--corpus", &posts, "--format", "tsv"],
        vec!["distill", "--regex", &main_rx, "--corpus", &posts, "--budget", "10"],
    ];

    let bin = env!("CARGO_BIN_EXE_topickit");
    for case in &cases {
        let run = |jobs: &str| {
            let out = Command::new(bin)
                .args(case)
                .args(["--jobs", jobs])
                .env_remove("TOPICKIT_REGISTRY")
                .output()
                .unwrap();
            (out.status.code(), out.stdout)
        };
        let (code1, out1) = run("1");
        let (code8, out8) = run("8");
        assert_eq!(code1, Some(0), "`{}` failed", case.join(" "));
        assert_eq!(code1, code8, "`{}` exit codes differ", case.join(" "));
        assert_eq!(
            out1,
            out8,
            "`{}` output differs between --jobs 1 and --jobs 8",
            case.join(" ")
        );
        // A clean validate run legitimately prints no findings.
        if case[0] != "validate" {
            assert!(!out1.is_empty(), "`{}` printed nothing", case.join(" "));
        }
    }
}
