//! Shared fixtures for the benchmarks.

use lscd_core::corpus::{apply_threshold, extract_windows};
use lscd_core::eval::synthesize_change_corpus;
use lscd_core::spaces::count_matrix;
use lscd_core::{CooccurrenceMatrix, Corpus, Vocabulary, WindowPolicy};

/// A synthetic corpus pair of `tokens` tokens each.
pub fn corpora(tokens: usize) -> (Corpus, Corpus) {
    let (a, b, _) = synthesize_change_corpus(20, tokens, 0).expect("synthetic corpora");
    (a, b)
}

/// Co-occurrence counts of a corpus with a fixed window of 5.
pub fn counts(corpus: &Corpus) -> CooccurrenceMatrix {
    let (corpus, vocab): (Corpus, Vocabulary) = apply_threshold(corpus, 1).expect("threshold");
    let pairs: Vec<_> = extract_windows(&corpus, &vocab, WindowPolicy::fixed(5), 0).expect("window").collect();
    count_matrix(pairs, vocab).expect("counts")
}
