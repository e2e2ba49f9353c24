//! Change scores between two representations of a word.
//!
//! Similarity measures (CD, LND, JSD) compare the two representations
//! directly; dispersion measures (FD, TD, HD) compare a statistic computed
//! on each side. Every score is nonnegative and grows with the amount of
//! change.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::spaces::{CooccurrenceMatrix, EmbeddingMatrix};
use crate::util;

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Cd,
    Lnd,
    Jsd,
    Fd,
    Td,
    Hd,
    HdNorm,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::Cd,
        Measure::Lnd,
        Measure::Jsd,
        Measure::Fd,
        Measure::Td,
        Measure::Hd,
        Measure::HdNorm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Measure::Cd => "cd",
            Measure::Lnd => "lnd",
            Measure::Jsd => "jsd",
            Measure::Fd => "fd",
            Measure::Td => "td",
            Measure::Hd => "hd",
            Measure::HdNorm => "hd-norm",
        }
    }

    /// Whether larger scores mean more change. True for every measure here;
    /// kept on the scores so consumers never have to guess.
    pub fn higher_means_more_change(self) -> bool {
        true
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown measure {s:?}")))
    }
}

/// Per-word change scores of one measure.
#[derive(Clone, Debug, PartialEq)]
pub struct ChangeScores {
    scores: BTreeMap<String, f64>,
    measure: Measure,
    higher_means_more_change: bool,
    iterations: usize,
}

impl ChangeScores {
    pub fn new(measure: Measure, scores: BTreeMap<String, f64>) -> Result<Self> {
        Self::with_iterations(measure, scores, 1)
    }

    pub(crate) fn with_iterations(measure: Measure, scores: BTreeMap<String, f64>, iterations: usize) -> Result<Self> {
        if let Some((w, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::NonFinite(format!("{measure} score {s} for {w:?}")));
        }
        Ok(ChangeScores {
            scores,
            measure,
            higher_means_more_change: measure.higher_means_more_change(),
            iterations,
        })
    }

    pub fn scores(&self) -> &BTreeMap<String, f64> {
        &self.scores
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.scores.get(word).copied()
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn higher_means_more_change(&self) -> bool {
        self.higher_means_more_change
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.scores.is_empty()).then(|| self.scores.values().sum::<f64>() / self.scores.len() as f64)
    }

    /// Words by descending score; equal scores in lexicographic order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> = self.scores.iter().map(|(w, &s)| (w.as_str(), s)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }

    pub fn write_tsv(&self, path: &Path, config_hash: &str) -> Result<()> {
        util::write_atomic(path, |w| self.write_tsv_to(w, config_hash))
    }

    /// A `# measure=.. config=..` header, then `word<TAB>score` rows in
    /// [`ranked`](Self::ranked) order.
    pub fn write_tsv_to(&self, w: &mut dyn Write, config_hash: &str) -> std::io::Result<()> {
        writeln!(
            w,
            "# measure={} config={} iterations={}",
            self.measure, config_hash, self.iterations
        )?;
        for (word, score) in self.ranked() {
            writeln!(w, "{word}\t{score:.12}")?;
        }
        Ok(())
    }
}

fn check_len(x: usize, y: usize) -> Result<()> {
    if x != y {
        return Err(Error::DimensionMismatch(format!("vector lengths {x} and {y}")));
    }
    Ok(())
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn cosine_from_parts(dot: f64, nx: f64, ny: f64) -> Result<f64> {
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector("cosine of a zero vector".into()));
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    cosine_from_parts(dot(x, y), dot(x, x).sqrt(), dot(y, y).sqrt())
}

/// `1 - cos(x, y)`, in `[0, 2]`. Zero vectors are an error.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    cosine_similarity(x, y).map(|c| 1.0 - c)
}

/// Row-addressable vectors over one column space, as needed by CD and LND.
pub trait RowSpace {
    fn row_vocab(&self) -> &Vocabulary;
    fn n_columns(&self) -> usize;
    /// Dot product of row `i` of `self` with row `j` of `other`.
    fn dot_rows(&self, i: usize, other: &Self, j: usize) -> f64;

    fn row_norm(&self, i: usize) -> f64 {
        self.dot_rows(i, self, i).sqrt()
    }
}

impl RowSpace for EmbeddingMatrix {
    fn row_vocab(&self) -> &Vocabulary {
        self.vocab()
    }

    fn n_columns(&self) -> usize {
        self.dim()
    }

    fn dot_rows(&self, i: usize, other: &Self, j: usize) -> f64 {
        dot(self.row(i), other.row(j))
    }
}

fn sparse_dot(x: &[(u32, f64)], y: &[(u32, f64)]) -> f64 {
    let (mut a, mut b, mut sum) = (0, 0, 0.0);
    while a < x.len() && b < y.len() {
        match x[a].0.cmp(&y[b].0) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                sum += x[a].1 * y[b].1;
                a += 1;
                b += 1;
            }
        }
    }
    sum
}

impl RowSpace for CooccurrenceMatrix {
    fn row_vocab(&self) -> &Vocabulary {
        CooccurrenceMatrix::row_vocab(self)
    }

    fn n_columns(&self) -> usize {
        self.n_cols()
    }

    fn dot_rows(&self, i: usize, other: &Self, j: usize) -> f64 {
        sparse_dot(self.row(i), other.row(j))
    }
}

fn lookup<M: RowSpace>(m: &M, word: &str) -> Result<usize> {
    m.row_vocab()
        .index(word)
        .ok_or_else(|| Error::MissingWord(word.to_owned()))
}

/// Cosine distance between `word_a` in `a` and `word_b` in `b`. The two
/// spaces must share their column space.
pub fn row_cosine_distance<M: RowSpace>(a: &M, word_a: &str, b: &M, word_b: &str) -> Result<f64> {
    check_len(a.n_columns(), b.n_columns())?;
    let (i, j) = (lookup(a, word_a)?, lookup(b, word_b)?);
    let cos = cosine_from_parts(a.dot_rows(i, b, j), a.row_norm(i), b.row_norm(j))
        .map_err(|_| Error::ZeroVector(format!("{word_a:?} or {word_b:?}")))?;
    Ok(1.0 - cos)
}

/// Local neighborhood distance of `word`, comparing its `k` nearest
/// neighbors in `a` and in `b`. See [`local_neighborhood_distance_with`].
pub fn local_neighborhood_distance<M: RowSpace>(a: &M, b: &M, word: &str, k: usize) -> Result<f64> {
    local_neighborhood_distance_with(a, word, b, word, k, &BTreeSet::new())
}

/// Second-order distance between `word_a` in `a` and `word_b` in `b`.
///
/// Neighbor candidates are the words present in both spaces with nonzero
/// rows, minus `word_a`, `word_b` and `exclude`. The `k` candidates most
/// cosine-similar to the word are taken in each space (ties at equal
/// similarity go to the earlier row of `a`). For the union of both
/// neighbor sets, each space gives a vector of similarities between the
/// word and the neighbors; the score is the cosine distance of these two
/// vectors. No cross-space comparison of coordinates takes place.
pub fn local_neighborhood_distance_with<M: RowSpace>(
    a: &M,
    word_a: &str,
    b: &M,
    word_b: &str,
    k: usize,
    exclude: &BTreeSet<String>,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("LND needs k >= 1".into()));
    }
    let (x, y) = (lookup(a, word_a)?, lookup(b, word_b)?);
    let (nx, ny) = (a.row_norm(x), b.row_norm(y));
    if nx == 0.0 {
        return Err(Error::ZeroVector(word_a.to_owned()));
    }
    if ny == 0.0 {
        return Err(Error::ZeroVector(word_b.to_owned()));
    }

    // (index in a, index in b, row norm in a, row norm in b)
    let mut candidates = Vec::new();
    for (i, w) in a.row_vocab().words().iter().enumerate() {
        if w == word_a || w == word_b || exclude.contains(w) {
            continue;
        }
        let Some(j) = b.row_vocab().index(w) else { continue };
        let (na, nb) = (a.row_norm(i), b.row_norm(j));
        if na > 0.0 && nb > 0.0 {
            candidates.push((i, j, na, nb));
        }
    }
    if candidates.is_empty() {
        return Err(Error::EmptyIntersection("neighbor candidates"));
    }

    let sim_a: Vec<f64> = candidates
        .iter()
        .map(|&(i, _, na, _)| a.dot_rows(x, a, i) / (nx * na))
        .collect();
    let sim_b: Vec<f64> = candidates
        .iter()
        .map(|&(_, j, _, nb)| b.dot_rows(y, b, j) / (ny * nb))
        .collect();

    let top = |sims: &[f64]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..sims.len()).collect();
        order.sort_by(|&p, &q| sims[q].total_cmp(&sims[p]).then(p.cmp(&q)));
        order.truncate(k);
        order
    };
    let union: BTreeSet<usize> = top(&sim_a).into_iter().chain(top(&sim_b)).collect();
    let s_a: Vec<f64> = union.iter().map(|&c| sim_a[c]).collect();
    let s_b: Vec<f64> = union.iter().map(|&c| sim_b[c]).collect();
    cosine_distance(&s_a, &s_b).map_err(|_| {
        Error::ZeroVector(format!("second-order vector of {word_a:?} or {word_b:?}"))
    })
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

fn kl2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon distance with base-2 logarithms, in `[0, 1]`.
pub fn jensen_shannon_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p.len(), q.len())?;
    check_distribution(p)?;
    check_distribution(q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let div = 0.5 * (kl2(p, &m) + kl2(q, &m));
    Ok(div.max(0.0).sqrt().min(1.0))
}

/// `|ln(f_a / n_a) - ln(f_b / n_b)|`.
pub fn log_frequency_difference(f_a: u64, n_a: u64, f_b: u64, n_b: u64) -> Result<f64> {
    if f_a == 0 || f_b == 0 {
        return Err(Error::MissingWord("zero frequency".into()));
    }
    if n_a == 0 || n_b == 0 {
        return Err(Error::InvalidParameter("corpus size must be positive".into()));
    }
    Ok(((f_a as f64 / n_a as f64).ln() - (f_b as f64 / n_b as f64).ln()).abs())
}

/// Frequency difference of `word`, normalized by the full (pre-threshold)
/// token counts of the corpora.
pub fn frequency_difference(word: &str, corpus_a: &Corpus, corpus_b: &Corpus) -> Result<f64> {
    let (f_a, f_b) = (corpus_a.count(word), corpus_b.count(word));
    for (f, c) in [(f_a, corpus_a), (f_b, corpus_b)] {
        if f == 0 {
            return Err(Error::MissingWord(format!("{word:?} does not occur in {}", c.label())));
        }
    }
    log_frequency_difference(
        f_a as u64,
        corpus_a.full_stats().tokens as u64,
        f_b as u64,
        corpus_b.full_stats().tokens as u64,
    )
}

fn nonzero_count(x: &[(u32, f64)]) -> usize {
    x.iter().filter(|e| e.1 != 0.0).count()
}

/// `|ln(nnz(x) / types_a) - ln(nnz(y) / types_b)|` on sparse rows.
pub fn type_difference(x: &[(u32, f64)], types_a: usize, y: &[(u32, f64)], types_b: usize) -> Result<f64> {
    let (nx, ny) = (nonzero_count(x), nonzero_count(y));
    if nx == 0 || ny == 0 {
        return Err(Error::ZeroVector("type difference of an empty row".into()));
    }
    if types_a == 0 || types_b == 0 {
        return Err(Error::InvalidParameter("type counts must be positive".into()));
    }
    Ok(((nx as f64 / types_a as f64).ln() - (ny as f64 / types_b as f64).ln()).abs())
}

/// Shannon entropy (natural log) of the L1-normalized vector. The
/// normalized variant divides by the log of the number of nonzero entries;
/// a single nonzero entry gives 0 either way.
pub fn vector_entropy(x: &[f64], normalized: bool) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter("entropy needs nonnegative finite entries".into()));
    }
    let total: f64 = x.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroVector("entropy of a zero vector".into()));
    }
    let h = -x
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let p = v / total;
            p * p.ln()
        })
        .sum::<f64>();
    let h = h.max(0.0);
    if !normalized {
        return Ok(h);
    }
    let types = x.iter().filter(|v| **v > 0.0).count();
    Ok(if types > 1 { h / (types as f64).ln() } else { h })
}

/// `|VH(x) - VH(y)|`, optionally with normalized entropies.
pub fn entropy_difference(x: &[f64], y: &[f64], normalized: bool) -> Result<f64> {
    Ok((vector_entropy(x, normalized)? - vector_entropy(y, normalized)?).abs())
}

fn sparse_values(row: &[(u32, f64)]) -> Vec<f64> {
    row.iter().map(|e| e.1).collect()
}

/// Entropy difference on sparse rows.
pub fn sparse_entropy_difference(x: &[(u32, f64)], y: &[(u32, f64)], normalized: bool) -> Result<f64> {
    entropy_difference(&sparse_values(x), &sparse_values(y), normalized)
}
