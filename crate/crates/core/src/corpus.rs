//! Tokenized corpora, vocabularies, context windows and the corpus-level
//! transforms (word injection, time shuffling, target downsampling).
//!
//! Tokens are opaque strings. Lemmatized or `lemma:POS` variants of a corpus
//! are simply different input files.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util::{self, seeded_rng};

/// Token and type counts of a corpus before frequency thresholding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub tokens: usize,
    pub types: usize,
}

/// An ordered list of non-empty sentences.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    label: String,
    sentences: Vec<Vec<String>>,
    token_count: usize,
    full: CorpusStats,
}

impl Corpus {
    /// Builds a corpus, dropping empty sentences. The pre-threshold
    /// statistics are taken from the sentences themselves.
    pub fn new(label: impl Into<String>, sentences: Vec<Vec<String>>) -> Self {
        let sentences: Vec<_> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        let token_count = sentences.iter().map(Vec::len).sum();
        let types = sentences.iter().flatten().collect::<HashSet<_>>().len();
        Corpus {
            label: label.into(),
            sentences,
            token_count,
            full: CorpusStats {
                tokens: token_count,
                types,
            },
        }
    }

    /// Convenience constructor from whitespace-separated sentence strings.
    pub fn from_lines<'a>(label: impl Into<String>, lines: impl IntoIterator<Item = &'a str>) -> Self {
        let sentences = lines
            .into_iter()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect();
        Corpus::new(label, sentences)
    }

    fn with_sentences(&self, sentences: Vec<Vec<String>>) -> Self {
        let mut c = Corpus::new(self.label.clone(), sentences);
        c.full = self.full;
        c
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Token and type counts of the corpus as loaded, before any word was
    /// removed. These are the normalization constants of the dispersion
    /// measures.
    pub fn full_stats(&self) -> CorpusStats {
        self.full
    }

    /// Number of occurrences of `word`.
    pub fn count(&self, word: &str) -> usize {
        self.sentences.iter().map(|s| occurrences(s, word)).sum()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, |w| self.write_to(w))
    }

    pub fn write_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for s in &self.sentences {
            writeln!(w, "{}", s.join(" "))?;
        }
        Ok(())
    }
}

fn occurrences(sentence: &[String], word: &str) -> usize {
    sentence.iter().filter(|t| *t == word).count()
}

/// Bidirectional word/index map with corpus frequencies.
///
/// Indices are dense. Vocabularies built from a corpus order words by
/// descending frequency, ties broken lexicographically.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    freq: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the given order. Later duplicates are merged into the first
    /// occurrence by adding their frequency.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut vocab = Vocabulary::default();
        for (word, f) in entries {
            match vocab.index.get(&word) {
                Some(&i) => vocab.freq[i] += f,
                None => {
                    vocab.index.insert(word.clone(), vocab.words.len());
                    vocab.words.push(word);
                    vocab.freq.push(f);
                }
            }
        }
        vocab
    }

    /// Vocabulary of every token in `corpus`.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::from_counts(count_tokens(corpus))
    }

    fn from_counts(counts: HashMap<&str, u64>) -> Self {
        let mut entries: Vec<_> = counts.into_iter().collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_entries(entries.into_iter().map(|(w, f)| (w.to_owned(), f)))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn freq(&self, idx: usize) -> u64 {
        self.freq[idx]
    }

    pub fn freq_of(&self, word: &str) -> Option<u64> {
        self.index(word).map(|i| self.freq[i])
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    /// Sum of all frequencies.
    pub fn total(&self) -> u64 {
        self.freq.iter().sum()
    }
}

fn count_tokens(corpus: &Corpus) -> HashMap<&str, u64> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for tok in corpus.sentences.iter().flatten() {
        *counts.entry(tok.as_str()).or_default() += 1;
    }
    counts
}

/// Removes tokens with frequency below `min_count`, drops sentences that
/// become empty, and returns the vocabulary of the survivors.
pub fn apply_threshold(corpus: &Corpus, min_count: u64) -> Result<(Corpus, Vocabulary)> {
    let counts = count_tokens(corpus);
    let keep: HashSet<&str> = counts
        .iter()
        .filter(|(_, &f)| f >= min_count)
        .map(|(w, _)| *w)
        .collect();
    let sentences = corpus
        .sentences
        .iter()
        .map(|s| s.iter().filter(|t| keep.contains(t.as_str())).cloned().collect())
        .collect();
    let kept = corpus.with_sentences(sentences);
    if kept.is_empty() {
        return Err(Error::EmptyCorpus(corpus.label.clone()));
    }
    let vocab = Vocabulary::from_corpus(&kept);
    Ok((kept, vocab))
}

/// Reads a corpus with one sentence per line and whitespace-separated
/// tokens, then applies the frequency threshold.
pub fn read_corpus<R: BufRead>(reader: R, label: &str, min_count: u64) -> Result<(Corpus, Vocabulary)> {
    let mut sentences = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(label, i + 1, e.to_string()))?;
        sentences.push(line.split_whitespace().map(str::to_owned).collect());
    }
    apply_threshold(&Corpus::new(label, sentences), min_count)
}

/// Loads a pre-tokenized UTF-8 corpus file. The corpus label is the file
/// stem.
pub fn load_corpus(path: &Path, min_count: u64) -> Result<(Corpus, Vocabulary)> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let mut sentences = Vec::new();
    for line in util::open_lines(path)? {
        let (_, line) = line?;
        sentences.push(line.split_whitespace().map(str::to_owned).collect());
    }
    let corpus = Corpus::new(label, sentences);
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus(path.display().to_string()));
    }
    apply_threshold(&corpus, min_count)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowMode {
    /// Every context within `size` positions.
    Fixed,
    /// Per target occurrence, an effective size drawn uniformly from
    /// `1..=size`.
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowPolicy {
    pub size: usize,
    pub mode: WindowMode,
}

impl WindowPolicy {
    pub fn fixed(size: usize) -> Self {
        WindowPolicy {
            size,
            mode: WindowMode::Fixed,
        }
    }

    pub fn dynamic(size: usize) -> Self {
        WindowPolicy {
            size,
            mode: WindowMode::Dynamic,
        }
    }
}

/// Lazily enumerates `(target, context)` index pairs of a corpus.
///
/// Tokens missing from the vocabulary are skipped before windowing, so they
/// neither emit pairs nor separate their neighbours.
pub struct WindowPairs<'a> {
    sentences: std::slice::Iter<'a, Vec<String>>,
    vocab: &'a Vocabulary,
    policy: WindowPolicy,
    rng: ChaCha8Rng,
    current: Vec<u32>,
    pos: usize,
    lo: usize,
    hi: usize,
    next_ctx: usize,
}

pub fn extract_windows<'a>(
    corpus: &'a Corpus,
    vocab: &'a Vocabulary,
    policy: WindowPolicy,
    seed: u64,
) -> Result<WindowPairs<'a>> {
    window_pairs(&corpus.sentences, vocab, policy, seed)
}

/// [`extract_windows`] over a slice of sentences.
pub(crate) fn window_pairs<'a>(
    sentences: &'a [Vec<String>],
    vocab: &'a Vocabulary,
    policy: WindowPolicy,
    seed: u64,
) -> Result<WindowPairs<'a>> {
    if policy.size == 0 {
        return Err(Error::InvalidParameter("window size must be at least 1".into()));
    }
    Ok(WindowPairs {
        sentences: sentences.iter(),
        vocab,
        policy,
        rng: seeded_rng(seed, util::STREAM_WINDOWS),
        current: Vec::new(),
        pos: 0,
        lo: 0,
        hi: 0,
        next_ctx: 0,
    })
}

impl WindowPairs<'_> {
    fn start_position(&mut self) {
        let b = match self.policy.mode {
            WindowMode::Fixed => self.policy.size,
            WindowMode::Dynamic => self.rng.random_range(1..=self.policy.size),
        };
        self.lo = self.pos.saturating_sub(b);
        self.hi = (self.pos + b).min(self.current.len() - 1);
        self.next_ctx = self.lo;
    }
}

impl Iterator for WindowPairs<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        loop {
            if self.pos < self.current.len() {
                while self.next_ctx <= self.hi {
                    let j = self.next_ctx;
                    self.next_ctx += 1;
                    if j != self.pos {
                        return Some((self.current[self.pos] as usize, self.current[j] as usize));
                    }
                }
                self.pos += 1;
                if self.pos < self.current.len() {
                    self.start_position();
                }
                continue;
            }
            let sentence = self.sentences.next()?;
            self.current.clear();
            self.current
                .extend(sentence.iter().filter_map(|t| self.vocab.index(t)).map(|i| i as u32));
            self.pos = 0;
            if !self.current.is_empty() {
                self.start_position();
            }
        }
    }
}

/// Probability of keeping one occurrence of a word with relative frequency
/// `rel_freq` under subsampling threshold `t`.
pub fn keep_probability(rel_freq: f64, t: f64) -> f64 {
    if rel_freq <= 0.0 {
        1.0
    } else {
        (t / rel_freq).sqrt().clamp(0.0, 1.0)
    }
}

/// Randomly deletes occurrences of frequent words: an occurrence of `w` is
/// discarded with probability `1 - sqrt(t / f(w))`, `f` being the relative
/// frequency in `vocab`.
pub fn subsample(corpus: &Corpus, vocab: &Vocabulary, t: f64, seed: u64) -> Result<Corpus> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!("subsampling threshold must be positive, got {t}")));
    }
    let total = vocab.total() as f64;
    let keep: Vec<f64> = vocab
        .frequencies()
        .iter()
        .map(|&f| keep_probability(f as f64 / total, t))
        .collect();
    let mut rng = seeded_rng(seed, util::STREAM_SUBSAMPLE);
    let sentences = corpus
        .sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter(|tok| match vocab.index(tok) {
                    Some(i) => keep[i] >= 1.0 || rng.random::<f64>() < keep[i],
                    None => true,
                })
                .cloned()
                .collect()
        })
        .collect();
    Ok(corpus.with_sentences(sentences))
}

/// Word injection: mixes the sentences of both corpora into one corpus in
/// which every occurrence of a target in `corpus_b` is renamed to
/// `target + suffix`. Sentence order is shuffled with `seed`.
pub fn inject_targets(
    corpus_a: &Corpus,
    corpus_b: &Corpus,
    targets: &[String],
    suffix: &str,
    seed: u64,
) -> Result<Corpus> {
    if suffix.is_empty() {
        return Err(Error::InvalidParameter("word-injection suffix must be non-empty".into()));
    }
    let targets: HashSet<&str> = targets.iter().map(String::as_str).collect();
    let placeholders: HashSet<String> = targets.iter().map(|t| format!("{t}{suffix}")).collect();
    if let Some(tok) = corpus_a
        .sentences
        .iter()
        .chain(&corpus_b.sentences)
        .flatten()
        .find(|tok| placeholders.contains(*tok))
    {
        return Err(Error::PlaceholderCollision(tok.clone()));
    }

    let mut mixed: Vec<Vec<String>> = corpus_a.sentences.clone();
    mixed.extend(corpus_b.sentences.iter().map(|s| {
        s.iter()
            .map(|tok| {
                if targets.contains(tok.as_str()) {
                    format!("{tok}{suffix}")
                } else {
                    tok.clone()
                }
            })
            .collect()
    }));
    mixed.shuffle(&mut seeded_rng(seed, util::STREAM_INJECT));

    let mut out = Corpus::new(format!("{}+{}", corpus_a.label, corpus_b.label), mixed);
    out.full = CorpusStats {
        tokens: corpus_a.full.tokens + corpus_b.full.tokens,
        types: out.full.types,
    };
    Ok(out)
}

fn unique_targets(targets: &[String]) -> Vec<&str> {
    let mut seen = BTreeSet::new();
    targets
        .iter()
        .filter(|t| seen.insert(t.as_str()))
        .map(String::as_str)
        .collect()
}

fn take_sentences_with(sentences: &mut Vec<Vec<String>>, word: &str) -> Vec<Vec<String>> {
    let (with, without): (Vec<_>, Vec<_>) = std::mem::take(sentences)
        .into_iter()
        .partition(|s| s.iter().any(|t| t == word));
    *sentences = without;
    with
}

/// Control condition: for every target, pools the sentences containing it
/// from both corpora, shuffles the pool and splits it again so that each
/// corpus keeps approximately its original number of target occurrences.
///
/// The split is greedy: each pooled sentence goes to the corpus with the
/// larger remaining occurrence quota (ties to `corpus_a`). Per-corpus
/// counts then deviate from the originals by at most half the largest
/// per-sentence multiplicity of the target. Targets are processed in
/// order of first appearance; a sentence with several targets may move
/// more than once.
pub fn shuffle_control(
    corpus_a: &Corpus,
    corpus_b: &Corpus,
    targets: &[String],
    seed: u64,
) -> (Corpus, Corpus) {
    let mut a = corpus_a.sentences.clone();
    let mut b = corpus_b.sentences.clone();
    let mut rng = seeded_rng(seed, util::STREAM_SHUFFLE);

    for target in unique_targets(targets) {
        let from_a = take_sentences_with(&mut a, target);
        let from_b = take_sentences_with(&mut b, target);
        let mut quota_a = from_a.iter().map(|s| occurrences(s, target) as i64).sum::<i64>();
        let mut quota_b = from_b.iter().map(|s| occurrences(s, target) as i64).sum::<i64>();

        let mut pool: Vec<_> = from_a.into_iter().chain(from_b).collect();
        pool.shuffle(&mut rng);
        for sentence in pool {
            let m = occurrences(&sentence, target) as i64;
            if quota_a >= quota_b {
                quota_a -= m;
                a.push(sentence);
            } else {
                quota_b -= m;
                b.push(sentence);
            }
        }
    }
    (corpus_a.with_sentences(a), corpus_b.with_sentences(b))
}

fn downsample_one(sentences: &mut Vec<Vec<String>>, target: &str, n_target: usize, rng: &mut ChaCha8Rng) {
    let mut with = take_sentences_with(sentences, target);
    with.shuffle(rng);
    let mut kept = 0;
    for s in with {
        if kept >= n_target {
            break;
        }
        kept += occurrences(&s, target);
        sentences.push(s);
    }
}

/// Randomly thins the sentences containing each target so that, in each
/// corpus, the retained target occurrences first reach at least `n_target`
/// (or all are kept when there are fewer).
pub fn downsample_targets(
    corpus_a: &Corpus,
    corpus_b: &Corpus,
    targets: &[String],
    n_target: usize,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    if n_target == 0 {
        return Err(Error::InvalidParameter("downsampling target frequency must be at least 1".into()));
    }
    let mut a = corpus_a.sentences.clone();
    let mut b = corpus_b.sentences.clone();
    let mut rng = seeded_rng(seed, util::STREAM_DOWNSAMPLE);
    for target in unique_targets(targets) {
        downsample_one(&mut a, target, n_target, &mut rng);
        downsample_one(&mut b, target, n_target, &mut rng);
    }
    Ok((corpus_a.with_sentences(a), corpus_b.with_sentences(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn threshold_drops_rare_tokens_and_empty_sentences() {
        let (c, v) = read_corpus(Cursor::new("a b a\nb c\n"), "x", 2).unwrap();
        assert_eq!(c.sentences(), &[words(&["a", "b", "a"]), words(&["b"])]);
        assert_eq!(v.len(), 2);
        assert_eq!(v.freq_of("a"), Some(2));
        assert_eq!(v.freq_of("b"), Some(2));
        assert_eq!(v.freq_of("c"), None);
        assert_eq!(c.token_count(), 4);
        assert_eq!(c.full_stats(), CorpusStats { tokens: 5, types: 3 });
    }

    #[test]
    fn zero_threshold_is_identity() {
        let (c, v) = read_corpus(Cursor::new("a b a\nb c\n"), "x", 0).unwrap();
        assert_eq!(c.sentences(), &[words(&["a", "b", "a"]), words(&["b", "c"])]);
        assert_eq!(v.len(), 3);
        // frequency-descending, then lexicographic
        assert_eq!(v.words(), &words(&["a", "b", "c"]));
    }

    #[test]
    fn empty_after_threshold_is_error() {
        let err = read_corpus(Cursor::new("a b\n"), "x", 5).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_corpus(Path::new("/nonexistent/corpus.txt"), 0).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn per_corpus_thresholds_are_plain_values() {
        let text = "w ".repeat(100);
        for t in [2u64, 25, 37, 97] {
            let (_, v) = read_corpus(Cursor::new(text.clone()), "x", t).unwrap();
            assert_eq!(v.freq_of("w"), Some(100));
        }
    }

    fn contexts_of(corpus: &Corpus, vocab: &Vocabulary, policy: WindowPolicy, target_pos: usize) -> BTreeSet<String> {
        // single-sentence corpus; every occurrence is distinct so filter by
        // counting pairs emitted while the target index is at target_pos
        let sentence = &corpus.sentences()[0];
        let n = sentence.len();
        let mut out = BTreeSet::new();
        let pairs: Vec<_> = extract_windows(corpus, vocab, policy, 0).unwrap().collect();
        let mut idx = 0;
        for i in 0..n {
            let b = policy.size;
            let lo = i.saturating_sub(b);
            let hi = (i + b).min(n - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                if i == target_pos {
                    out.insert(vocab.word(pairs[idx].1).to_owned());
                }
                idx += 1;
            }
        }
        assert_eq!(idx, pairs.len());
        out
    }

    #[test]
    fn fixed_window_clips_at_sentence_boundaries() {
        let c = Corpus::from_lines("x", ["a b c d"]);
        let v = Vocabulary::from_corpus(&c);
        let ctx = contexts_of(&c, &v, WindowPolicy::fixed(2), 2);
        assert_eq!(ctx, ["a", "b", "d"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn wide_fixed_window_covers_whole_sentence() {
        let c = Corpus::from_lines("x", ["a b c d"]);
        let v = Vocabulary::from_corpus(&c);
        let pairs: Vec<_> = extract_windows(&c, &v, WindowPolicy::fixed(10), 0).unwrap().collect();
        assert_eq!(pairs.len(), 4 * 3);
        let a = v.index("a").unwrap();
        let from_a: BTreeSet<_> = pairs.iter().filter(|p| p.0 == a).map(|p| p.1).collect();
        assert_eq!(from_a.len(), 3);
    }

    #[test]
    fn dynamic_windows_are_seeded() {
        let c = Corpus::from_lines("x", ["a b c d e f g h i j", "k l m n o p"]);
        let v = Vocabulary::from_corpus(&c);
        let run = |seed| extract_windows(&c, &v, WindowPolicy::dynamic(5), seed).unwrap().collect::<Vec<_>>();
        assert_eq!(run(7), run(7));
        let fixed: Vec<_> = extract_windows(&c, &v, WindowPolicy::fixed(5), 7).unwrap().collect();
        assert!(run(7).len() <= fixed.len());
    }

    #[test]
    fn zero_window_rejected() {
        let c = Corpus::from_lines("x", ["a b"]);
        let v = Vocabulary::from_corpus(&c);
        assert!(extract_windows(&c, &v, WindowPolicy::fixed(0), 0).is_err());
    }

    #[test]
    fn injection_renames_targets_of_second_corpus() {
        let a = Corpus::from_lines("a", ["x t"]);
        let b = Corpus::from_lines("b", ["t y"]);
        let m = inject_targets(&a, &b, &words(&["t"]), "_", 1).unwrap();
        let mut s = m.sentences().to_vec();
        s.sort();
        assert_eq!(s, vec![words(&["t_", "y"]), words(&["x", "t"])]);
        assert_eq!(m.token_count(), a.token_count() + b.token_count());
    }

    #[test]
    fn injection_without_targets_is_union() {
        let a = Corpus::from_lines("a", ["x t", "u v"]);
        let b = Corpus::from_lines("b", ["t y"]);
        let m = inject_targets(&a, &b, &[], "_", 1).unwrap();
        let mut s = m.sentences().to_vec();
        s.sort();
        let mut expected = a.sentences().to_vec();
        expected.extend(b.sentences().iter().cloned());
        expected.sort();
        assert_eq!(s, expected);
    }

    #[test]
    fn injection_target_absent_in_b() {
        let a = Corpus::from_lines("a", ["x t"]);
        let b = Corpus::from_lines("b", ["y z"]);
        let m = inject_targets(&a, &b, &words(&["t"]), "_", 1).unwrap();
        assert_eq!(m.count("t_"), 0);
    }

    #[test]
    fn injection_placeholder_collision() {
        let a = Corpus::from_lines("a", ["x t_"]);
        let b = Corpus::from_lines("b", ["t y"]);
        let err = inject_targets(&a, &b, &words(&["t"]), "_", 1).unwrap_err();
        assert!(matches!(err, Error::PlaceholderCollision(ref p) if p == "t_"));
        assert!(inject_targets(&a, &b, &words(&["t"]), "", 1).is_err());
    }

    fn control_corpora() -> (Corpus, Corpus) {
        let a = Corpus::from_lines("a", ["t x", "t t y", "z", "t q", "p"]);
        let b = Corpus::from_lines("b", ["t r", "t s", "w", "t u t", "t v", "t o"]);
        (a, b)
    }

    #[test]
    fn shuffle_conserves_target_sentences() {
        let (a, b) = control_corpora();
        let targets = words(&["t"]);
        let (a2, b2) = shuffle_control(&a, &b, &targets, 3);
        let mut before: Vec<_> = a.sentences().iter().chain(b.sentences()).cloned().collect();
        let mut after: Vec<_> = a2.sentences().iter().chain(b2.sentences()).cloned().collect();
        before.sort();
        after.sort();
        assert_eq!(before, after);
        // sentences without a target stay put
        assert!(a2.sentences().contains(&words(&["z"])));
        assert!(b2.sentences().contains(&words(&["w"])));
        // max multiplicity is 2
        assert!((a2.count("t") as i64 - a.count("t") as i64).abs() <= 2);
        assert!((b2.count("t") as i64 - b.count("t") as i64).abs() <= 2);
        assert_eq!(a2.count("t") + b2.count("t"), a.count("t") + b.count("t"));
    }

    #[test]
    fn shuffle_is_seeded() {
        let (a, b) = control_corpora();
        let targets = words(&["t"]);
        assert_eq!(shuffle_control(&a, &b, &targets, 9), shuffle_control(&a, &b, &targets, 9));
    }

    #[test]
    fn shuffle_target_only_in_one_corpus() {
        let a = Corpus::from_lines("a", ["t x", "t y", "t z", "t w"]);
        let b = Corpus::from_lines("b", ["q r"]);
        let (a2, b2) = shuffle_control(&a, &b, &words(&["t"]), 1);
        assert_eq!(a2.count("t") + b2.count("t"), 4);
        assert_eq!(a2.count("t"), 4);
    }

    #[test]
    fn downsample_keeps_small_targets() {
        let a = Corpus::from_lines("a", vec!["t x"; 10]);
        let b = Corpus::from_lines("b", vec!["t y"; 10]);
        let (a2, b2) = downsample_targets(&a, &b, &words(&["t"]), 50, 0).unwrap();
        assert_eq!(a2.count("t"), 10);
        assert_eq!(b2.count("t"), 10);
        assert!(downsample_targets(&a, &b, &words(&["t"]), 0, 0).is_err());
    }

    #[test]
    fn subsampling_thins_frequent_words() {
        let mut lines = vec!["the cat"; 1000];
        lines.extend(vec!["the dog"; 1000]);
        let c = Corpus::from_lines("x", lines);
        let v = Vocabulary::from_corpus(&c);
        let s = subsample(&c, &v, 0.001, 1).unwrap();
        assert!(s.count("the") < 200);
        assert_eq!(s, subsample(&c, &v, 0.001, 1).unwrap());
        assert!(subsample(&c, &v, 0.0, 1).is_err());
    }

    #[test]
    fn keep_probability_clamps() {
        assert_eq!(keep_probability(1e-6, 0.001), 1.0);
        assert!((keep_probability(0.1, 0.001) - 0.1).abs() < 1e-12);
    }
}
