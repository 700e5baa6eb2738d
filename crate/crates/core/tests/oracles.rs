mod common;

use common::*;
use punct_restore::eval::{confusion_counts, evaluate};
use punct_restore::lm::{count_ngrams, train_lm, Smoothing};
use punct_restore::sampler::{select_top_k, ScoredUtterance};
use punct_restore::text::{remove_repetitions, PunctLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_corpus(rng: &mut ChaCha8Rng, sentences: usize, vocab: usize) -> Vec<Vec<String>> {
    (0..sentences)
        .map(|_| {
            let n = rng.random_range(1..=8);
            (0..n).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
        })
        .collect()
}

#[test]
fn kneser_ney_matches_string_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (order, min_freq) in [(1, 1), (2, 1), (3, 2), (4, 1)] {
        let corpus = random_corpus(&mut rng, 60, 15);
        let lm = train_lm(&count_ngrams(&corpus, order, min_freq).unwrap(), Smoothing::default()).unwrap();
        let oracle = KnOracle::new(&corpus, order, min_freq, 0.75);
        let held_out = random_corpus(&mut rng, 20, 18);
        for s in corpus.iter().take(20).chain(&held_out) {
            let got = lm.perplexity(s).unwrap();
            let want = oracle.perplexity(s);
            assert!((got - want).abs() <= 1e-9 * want, "order {order}: {got} vs {want}");
        }
    }
}

#[test]
fn maximum_likelihood_is_relative_frequency() {
    let corpus: Vec<Vec<String>> = ["a b a", "b a"]
        .iter()
        .map(|l| l.split(' ').map(String::from).collect())
        .collect();
    let lm = train_lm(&count_ngrams(&corpus, 2, 1).unwrap(), Smoothing::MaximumLikelihood).unwrap();
    let v = lm.vocab();
    // a is followed by b once and by </s> twice
    assert!((lm.prob(&[v.id("a")], v.id("b")) - 1.0 / 3.0).abs() < 1e-12);
    assert!((lm.prob(&[v.id("a")], v.id("</s>")) - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn top_k_matches_full_sort_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let all: Vec<ScoredUtterance> = (0..5000)
        .map(|i| ScoredUtterance {
            source_index: i,
            perplexity: rng.random_range(0..40) as f64,
            text: format!("u{i}"),
        })
        .collect();
    for k in [1, 7, 100, 4999, 5000, 6000] {
        let got = select_top_k(all.clone(), k).unwrap();
        assert_eq!(got, top_k_by_sort(all.clone(), k), "k = {k}");
    }
}

#[test]
fn repetition_removal_matches_restart_fixpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3000 {
        let n = rng.random_range(0..14);
        let t: Vec<String> = (0..n).map(|_| ["a", "b", "c"][rng.random_range(0..3)].to_string()).collect();
        let got = remove_repetitions(&t, 3);
        assert!(!has_adjacent_repeat(&got, 3), "{t:?} -> {got:?}");
        assert_eq!(got, collapse_repeats(t.clone(), 3), "{t:?}");
    }
}

#[test]
fn confusion_matches_naive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draw = |rng: &mut ChaCha8Rng| PunctLabel::ALL[rng.random_range(0..4)];
    let pred: Vec<PunctLabel> = (0..2000).map(|_| draw(&mut rng)).collect();
    let gold: Vec<PunctLabel> = (0..2000).map(|_| draw(&mut rng)).collect();
    let c = confusion_counts(&pred, &gold).unwrap();
    for class in PunctLabel::SCORED {
        assert_eq!(*c.get(class).unwrap(), naive_counts(&pred, &gold, class));
    }
    let report = evaluate(std::slice::from_ref(&pred), std::slice::from_ref(&gold)).unwrap();
    for class in PunctLabel::SCORED {
        let n = naive_counts(&pred, &gold, class);
        let row = report.class(class).unwrap();
        assert!((row.metrics.precision - pct(n.tp, n.tp + n.fp)).abs() < 1e-9);
        assert!((row.metrics.recall - pct(n.tp, n.tp + n.fn_)).abs() < 1e-9);
    }
}
