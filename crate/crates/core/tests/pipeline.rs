//! Library-level properties of the select-then-read pipeline.

use std::collections::HashMap;

use minictx::corpus::squad::examples_from_squad;
use minictx::corpus::QaExample;
use minictx::embed::EmbeddingTable;
use minictx::exec::Execution;
use minictx::neural::params::to_named;
use minictx::neural::Hyperparams;
use minictx::pipeline::{evaluate, predict_dataset, same_prediction, select_dataset, Scorer};
use minictx::policy::Policy;
use minictx::reader::{self, train_reader, InputMode, Reader, ReaderParams};
use minictx::retrieval::candidate_sentences;
use minictx::selector::{
    build_selector_training_set, train_selector, transfer_encoder_weights, Objective, SelectorParams, SentenceReader,
};
use minictx::synthetic::{generate, SyntheticConfig};
use minictx::Error;
use proptest::prelude::*;

const H_D: usize = 8;

fn dataset(n: usize, sentences: usize, seed: u64) -> Vec<QaExample> {
    let c = generate(&SyntheticConfig {
        n_questions: n,
        sentences_per_doc: sentences,
        vocab_size: 500,
        seed,
    })
    .unwrap();
    examples_from_squad(&c.file)
}

fn table() -> EmbeddingTable {
    EmbeddingTable::hashed(H_D, 0)
}

fn hp(epochs: usize) -> Hyperparams {
    Hyperparams {
        h: 6,
        h_d: H_D,
        epochs,
        batch_size: 4,
        seed: 7,
        ..Default::default()
    }
}

#[test]
fn minimal_with_every_sentence_matches_full() {
    let ds = dataset(20, 4, 1);
    let table = table();
    let params = ReaderParams::new(H_D, 6, 3);
    let r = Reader::new(&params, &table);
    for ex in &ds {
        let all: Vec<usize> = (0..ex.sentences.len()).collect();
        assert!(same_prediction(&r.predict(ex, None), &r.predict(ex, Some(&all))), "{}", ex.id);
    }
}

#[test]
fn oracle_on_single_sentence_documents_matches_full() {
    let ds = dataset(15, 1, 2);
    let table = table();
    let params = ReaderParams::new(H_D, 6, 4);
    let r = Reader::new(&params, &table);
    let full = predict_dataset(&ds, r, InputMode::Full, None, Execution::Sequential).unwrap();
    let oracle = predict_dataset(&ds, r, InputMode::Oracle, None, Execution::Sequential).unwrap();
    assert_eq!(full, oracle);
}

#[test]
fn tfidf_finds_the_overlapping_sentence() {
    let ds = dataset(30, 5, 3);
    let sel = select_dataset(&ds, Scorer::Tfidf { n_max: 2 }, Policy::TopK(1), 200, Execution::Sequential).unwrap();
    let report = evaluate(&ds, Some(&sel), None).unwrap();
    assert_eq!(report.top_k_accuracy[&1], 1.0);
    assert_eq!(report.mean_selected, 1.0);
}

#[test]
fn sequential_and_parallel_selection_agree() {
    let ds = dataset(20, 5, 4);
    let table = table();
    let params = SelectorParams::new(H_D, 6, 5);
    let scorer = Scorer::Neural {
        params: &params,
        table: &table,
        normalize: true,
    };
    let a = select_dataset(&ds, scorer, Policy::Dyn(0.3), 200, Execution::Sequential).unwrap();
    let b = select_dataset(&ds, scorer, Policy::Dyn(0.3), 200, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

struct Fixed(&'static str);

impl SentenceReader for Fixed {
    fn answer(&self, _: &QaExample, _: &[usize]) -> String {
        self.0.to_string()
    }
}

struct Gold;

impl SentenceReader for Gold {
    fn answer(&self, ex: &QaExample, _: &[usize]) -> String {
        ex.gold_texts()[0].to_string()
    }
}

#[test]
fn modification_relabels_only_oracle_sentences() {
    let ds = dataset(10, 4, 5);
    let plain = build_selector_training_set(&ds, None, false).unwrap();
    let kept = build_selector_training_set(&ds, Some(&Gold), true).unwrap();
    let wrong = build_selector_training_set(&ds, Some(&Fixed("zzz")), true).unwrap();
    assert_eq!(plain, kept);
    for (p, w) in plain.iter().zip(&wrong) {
        assert!(p.labels.iter().any(|&l| l));
        assert!(w.labels.iter().all(|&l| !l));
    }
    assert!(matches!(build_selector_training_set(&ds, None, true), Err(Error::Config(_))));
}

#[test]
fn transfer_copies_the_reader_encoder() {
    let reader = ReaderParams::new(H_D, 6, 8);
    let named = to_named(&reader, reader::PREFIX);
    let sel = transfer_encoder_weights(&named, H_D, 6, 1).unwrap();
    assert_eq!(sel.encoder, reader.encoder);
    assert!(matches!(transfer_encoder_weights(&named, H_D, 5, 1), Err(Error::Transfer { .. })));
    assert!(matches!(transfer_encoder_weights(&named, H_D + 1, 6, 1), Err(Error::Transfer { .. })));
    assert!(matches!(transfer_encoder_weights(&named[1..], H_D, 6, 1), Err(Error::Transfer { .. })));
}

#[test]
fn zero_epochs_leave_models_untouched() {
    let ds = dataset(8, 4, 6);
    let table = table();
    let set = build_selector_training_set(&ds, None, false).unwrap();
    let mut sel = SelectorParams::new(H_D, 6, 1);
    let before = sel.clone();
    train_selector(&set, &table, &mut sel, &hp(0), Objective::PerSentence, Execution::Sequential).unwrap();
    assert_eq!(sel, before);
    let mut rd = ReaderParams::new(H_D, 6, 2);
    let before = rd.clone();
    train_reader(&ds, &table, &mut rd, &hp(0), InputMode::Full, None, Execution::Sequential).unwrap();
    assert_eq!(rd, before);
}

#[test]
fn fixed_seed_reproduces_training() {
    let ds = dataset(12, 4, 7);
    let table = table();
    let set = build_selector_training_set(&ds, None, false).unwrap();
    let run = |exec| {
        let mut sel = SelectorParams::new(H_D, 6, 1);
        let h = train_selector(&set, &table, &mut sel, &hp(2), Objective::Normalized, exec).unwrap();
        (sel, h)
    };
    let (a, ha) = run(Execution::Sequential);
    let (b, hb) = run(Execution::Parallel);
    assert_eq!(a, b);
    assert_eq!(ha, hb);

    let run = || {
        let mut rd = ReaderParams::new(H_D, 6, 2);
        let sel: HashMap<String, Vec<usize>> = ds.iter().map(|e| (e.id.clone(), vec![0, 1])).collect();
        train_reader(&ds, &table, &mut rd, &hp(2), InputMode::Minimal, Some(&sel), Execution::Parallel).unwrap()
    };
    assert_eq!(run(), run());
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["ka", "mo", "ti", "ra", "su", "ne", "lo", "pi"]).prop_map(String::from)
}

proptest! {
    #[test]
    fn candidates_come_from_kept_paragraphs(
        question in prop::collection::vec(word(), 1..4),
        paragraphs in prop::collection::vec(
            prop::collection::vec(prop::collection::vec(word(), 1..6), 1..5), 1..6),
        top_n in 1usize..4,
        max_candidates in 1usize..8,
    ) {
        let refs = candidate_sentences(&question, &paragraphs, top_n, max_candidates, 2);
        let kept: std::collections::BTreeSet<_> = refs.iter().map(|r| r.paragraph).collect();
        let available: usize = {
            let flat: Vec<Vec<String>> = paragraphs.iter().map(|p| p.concat()).collect();
            let idx = minictx::retrieval::build_index(&flat, 2);
            minictx::retrieval::rank_by_tfidf(&idx, &question, &flat)
                .into_iter()
                .take(top_n)
                .map(|p| paragraphs[p].len())
                .sum()
        };
        prop_assert!(kept.len() <= top_n);
        prop_assert_eq!(refs.len(), available.min(max_candidates));
        let unique: std::collections::BTreeSet<_> = refs.iter().collect();
        prop_assert_eq!(unique.len(), refs.len());
        for r in &refs {
            prop_assert!(r.sentence < paragraphs[r.paragraph].len());
        }
    }
}
