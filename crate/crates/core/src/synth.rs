//! Deterministic synthetic texts, corpora, and regex documents for
//! tests, benchmarks, and demos.
//!
//! Noise words draw only on letters outside `covid`, `corona`, `virus`
//! and friends (no a c d e i n o r v), so a planted token can never arise
//! from background noise and every match in a synthetic corpus is one we
//! planted. Everything is seeded; the same seed yields the same bytes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discovery::{Corpus, Document, Label};
use crate::model::{
    Clause, RegexDocument, Section, TestSuite, Tier, DEFAULT_PREFIX_GUARD, DEFAULT_SUFFIX_GUARD,
};

const NOISE_LETTERS: &[u8] = b"bfghjklmpqstuwxyz";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One lowercase word of 3 to 8 letters drawn from `letters`.
pub fn word_from(rng: &mut ChaCha8Rng, letters: &[u8]) -> String {
    let len = rng.gen_range(3..=8);
    (0..len).map(|_| *letters.choose(rng).unwrap() as char).collect()
}

/// One lowercase noise word, 3 to 8 letters.
pub fn noise_word(rng: &mut ChaCha8Rng) -> String {
    word_from(rng, NOISE_LETTERS)
}

/// Space-separated noise words.
pub fn noise_text(rng: &mut ChaCha8Rng, n_words: usize) -> String {
    (0..n_words).map(|_| noise_word(rng)).collect::<Vec<_>>().join(" ")
}

/// Text of exactly `n_chars` characters (ASCII, so also bytes) made of
/// words over `letters`. A caller that picks `letters` disjoint from a
/// pattern's alphabet gets guaranteed non-matching text.
pub fn text_of_len_from(rng: &mut ChaCha8Rng, letters: &[u8], n_chars: usize) -> String {
    let mut out = String::with_capacity(n_chars + 8);
    while out.len() < n_chars {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&word_from(rng, letters));
    }
    out.truncate(n_chars);
    out
}

/// Noise text of exactly `n_chars` characters.
pub fn text_of_len(rng: &mut ChaCha8Rng, n_chars: usize) -> String {
    text_of_len_from(rng, NOISE_LETTERS, n_chars)
}

/// Inserts `token` as a standalone word at a random word boundary.
pub fn plant(rng: &mut ChaCha8Rng, text: &str, token: &str) -> String {
    let mut words: Vec<&str> = text.split(' ').collect();
    let at = rng.gen_range(0..=words.len());
    words.insert(at, token);
    words.join(" ")
}

/// Unlabeled noise corpus: `n_docs` documents of `words_per_doc` words,
/// all weight 1.
pub fn noise_corpus(seed: u64, n_docs: usize, words_per_doc: usize) -> Corpus {
    let mut r = rng(seed);
    let texts: Vec<String> = (0..n_docs).map(|_| noise_text(&mut r, words_per_doc)).collect();
    let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
    Corpus::from_texts("synthetic", &refs)
}

/// Labeled corpus: each document is noise, and with probability
/// `p_positive` gets one token from `tokens` planted and a POSITIVE
/// label; otherwise it stays noise and is NEGATIVE.
pub fn labeled_corpus(seed: u64, n_docs: usize, tokens: &[&str], p_positive: f64) -> Corpus {
    let mut r = rng(seed);
    let docs = (0..n_docs)
        .map(|i| {
            let n_words = r.gen_range(6..=14);
            let base = noise_text(&mut r, n_words);
            let (text, label) = if r.gen_bool(p_positive) {
                let token = *tokens.choose(&mut r).unwrap();
                (plant(&mut r, &base, token), Label::Positive)
            } else {
                (base, Label::Negative)
            };
            Document { id: (i + 1).to_string(), text, weight: 1, label: Some(label) }
        })
        .collect();
    Corpus { name: "synthetic".into(), docs }
}

/// A noise word with one letter swapped for a two-way character class,
/// e.g. "gldu" becoming "g[lL]du"; still only matches planted text.
fn classy_core(rng: &mut ChaCha8Rng, word: &str) -> String {
    let bytes = word.as_bytes();
    let at = rng.gen_range(0..bytes.len());
    let c = bytes[at] as char;
    format!(
        "{}[{}{}]{}",
        &word[..at],
        c,
        c.to_ascii_uppercase(),
        &word[at + 1..]
    )
}

/// A small valid document mixing all clause kinds, with a derived test
/// suite that its own rendering satisfies.
pub fn document(seed: u64) -> RegexDocument {
    let mut r = rng(seed);
    let lit = noise_word(&mut r);
    let kw = noise_word(&mut r);
    let excl = format!("{}{}", kw, noise_word(&mut r));
    let (a1, a2, b1) = (noise_word(&mut r), noise_word(&mut r), noise_word(&mut r));
    let n_sections = r.gen_range(1..=2);
    let mut sections = vec![Section {
        label: "core_terms".into(),
        clauses: vec![
            Clause::Literal { pattern: lit.clone() },
            Clause::Keyword {
                core: classy_core(&mut r, &kw),
                exclusions: vec![excl.clone()],
                prefix_guard: DEFAULT_PREFIX_GUARD.into(),
                suffix_guard: DEFAULT_SUFFIX_GUARD.into(),
            },
        ],
    }];
    if n_sections == 2 {
        sections.push(Section {
            label: "pairs".into(),
            clauses: vec![Clause::Bipartite {
                set_a: vec![a1.clone(), a2],
                set_b: vec![b1.clone()],
                max_gap: r.gen_range(20..=80),
                ordered_both_ways: true,
            }],
        });
    }
    let mut must_match = vec![format!("zz {} zz", lit), format!("zz {} zz", kw)];
    let mut must_not_match = vec![format!("zz {} zz", excl), "zz".to_string()];
    if n_sections == 2 {
        must_match.push(format!("{} zz {}", a1, b1));
    } else {
        must_not_match.push(format!("{} zz {}", a1, b1));
    }
    RegexDocument {
        topic: format!("topic{}", seed),
        language: "en".into(),
        tier: if r.gen_bool(0.5) { Tier::Tier1 } else { Tier::Tier2 },
        version: r.gen_range(1..=9),
        sections,
        tests: TestSuite { must_match, must_not_match },
    }
}

/// A document whose compact rendering is at least `target_bytes` long:
/// many guarded keyword clauses plus a bipartite section, the shape of a
/// mature second-tier regex.
pub fn tier2_document(seed: u64, target_bytes: usize) -> RegexDocument {
    let mut r = rng(seed);
    let mut sections: Vec<Section> = vec![Section {
        label: "pairs".into(),
        clauses: vec![Clause::Bipartite {
            set_a: vec![noise_word(&mut r), noise_word(&mut r), noise_word(&mut r)],
            set_b: vec![noise_word(&mut r), noise_word(&mut r)],
            max_gap: 80,
            ordered_both_ways: true,
        }],
    }];
    let mut doc = RegexDocument {
        topic: "synthetic".into(),
        language: "en".into(),
        tier: Tier::Tier2,
        version: 1,
        sections: Vec::new(),
        tests: TestSuite::default(),
    };
    let mut i = 0;
    loop {
        let mut clauses = Vec::new();
        for _ in 0..8 {
            let word = noise_word(&mut r);
            clauses.push(Clause::Keyword {
                core: classy_core(&mut r, &word),
                exclusions: if r.gen_bool(0.3) {
                    vec![format!("{}{}", word, noise_word(&mut r))]
                } else {
                    Vec::new()
                },
                prefix_guard: DEFAULT_PREFIX_GUARD.into(),
                suffix_guard: DEFAULT_SUFFIX_GUARD.into(),
            });
        }
        sections.push(Section { label: format!("terms_{}", i), clauses });
        i += 1;
        doc.sections = sections.clone();
        let rendered = crate::render::render_compact(&doc).expect("synthetic doc renders");
        if rendered.len() >= target_bytes {
            return doc;
        }
    }
}

/// A defect class the validator must catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantedBug {
    OddBackslash,
    EmptyAlternative,
    CompileFail,
    BannedSyntax,
    TestFail,
}

impl PlantedBug {
    pub const ALL: [PlantedBug; 5] = [
        PlantedBug::OddBackslash,
        PlantedBug::EmptyAlternative,
        PlantedBug::CompileFail,
        PlantedBug::BannedSyntax,
        PlantedBug::TestFail,
    ];

    pub fn expected_code(self) -> crate::validate::Code {
        match self {
            PlantedBug::OddBackslash => crate::validate::Code::OddBackslash,
            PlantedBug::EmptyAlternative => crate::validate::Code::EmptyAlternative,
            PlantedBug::CompileFail => crate::validate::Code::CompileFail,
            PlantedBug::BannedSyntax => crate::validate::Code::BannedSyntax,
            PlantedBug::TestFail => crate::validate::Code::TestFail,
        }
    }
}

/// Corrupts a clean stored-form regex with one regex-level bug.
/// `TestFail` is a document-level defect; use [`sabotage_tests`].
pub fn sabotage_stored(rng: &mut ChaCha8Rng, stored: &str, bug: PlantedBug) -> String {
    match bug {
        PlantedBug::OddBackslash => {
            // A lone backslash before some word character.
            let spots: Vec<usize> = stored
                .char_indices()
                .filter(|(_, c)| c.is_ascii_alphanumeric())
                .map(|(i, _)| i)
                .collect();
            let at = *spots.choose(rng).expect("regex has a word character");
            format!("{}\\{}", &stored[..at], &stored[at..])
        }
        PlantedBug::EmptyAlternative => {
            let pipes: Vec<usize> =
                stored.char_indices().filter(|&(_, c)| c == '|').map(|(i, _)| i).collect();
            let at = *pipes.choose(rng).expect("regex has an alternation");
            format!("{}|{}", &stored[..at], &stored[at..])
        }
        PlantedBug::CompileFail => format!("{}(", stored),
        PlantedBug::BannedSyntax => format!("(?<=x){}", stored),
        PlantedBug::TestFail => panic!("TestFail is planted on a document, not a stored regex"),
    }
}

/// Adds a must-match test no clause can satisfy: a bare digit contains no
/// letters, so neither literal, keyword, nor bipartite clauses built from
/// noise words can match it.
pub fn sabotage_tests(doc: &mut RegexDocument) {
    doc.tests.must_match.push("0".into());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{compile, Customization};
    use crate::render::render_compact;
    use crate::validate::{has_errors, validate_document};

    #[test]
    fn same_seed_same_output() {
        assert_eq!(noise_corpus(7, 5, 10), noise_corpus(7, 5, 10));
        assert_ne!(noise_corpus(7, 5, 10), noise_corpus(8, 5, 10));
        assert_eq!(
            crate::model::serialize_document(&document(3)),
            crate::model::serialize_document(&document(3))
        );
    }

    #[test]
    fn noise_never_contains_planted_tokens() {
        let c = noise_corpus(11, 200, 12);
        for token in ["covid", "corona", "virus", "c0vid"] {
            assert!(c.docs.iter().all(|d| !d.text.contains(token)), "{token}");
        }
    }

    #[test]
    fn text_of_len_is_exact() {
        let mut r = rng(5);
        for n in [1000, 3000, 5000] {
            assert_eq!(text_of_len(&mut r, n).len(), n);
        }
    }

    #[test]
    fn labeled_corpus_labels_track_planting() {
        let c = labeled_corpus(13, 300, &["covid", "c0vid"], 0.3);
        for d in &c.docs {
            let planted = d.text.contains("covid") || d.text.contains("c0vid");
            assert_eq!(d.label == Some(Label::Positive), planted, "{}", d.text);
        }
        let positives = c.docs.iter().filter(|d| d.label == Some(Label::Positive)).count();
        assert!(positives > 40 && positives < 140, "got {positives}");
    }

    #[test]
    fn generated_documents_validate_clean_and_pass_own_tests() {
        for seed in 0..40 {
            let doc = document(seed);
            let findings = validate_document(&doc, &crate::validate::BanList::default());
            assert!(!has_errors(&findings), "seed {seed}: {findings:?}");
        }
    }

    #[test]
    fn tier2_document_reaches_target_size() {
        let doc = tier2_document(21, 5000);
        let live = render_compact(&doc).unwrap();
        assert!(live.len() >= 5000, "{}", live.len());
        assert!(live.len() < 8000, "not wildly oversized: {}", live.len());
        let m = compile(&live, Customization::default()).unwrap();
        assert!(!m.is_match("zz qq zz"), "pure filler should not match");
    }
}
