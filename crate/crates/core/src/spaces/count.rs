use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand_distr::{Binomial, Distribution};

use crate::corpus::{keep_probability, Vocabulary};
use crate::error::{Error, Result};
use crate::util::{self, seeded_rng};

/// Sparse nonnegative word-by-context matrix with cached marginals.
///
/// Rows are sorted by column index and never store explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceMatrix {
    rows: Vec<Vec<(u32, f64)>>,
    row_vocab: Arc<Vocabulary>,
    col_vocab: Arc<Vocabulary>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    total: f64,
}

impl CooccurrenceMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries are
    /// sorted, duplicate columns summed and zeros dropped.
    pub fn from_rows(
        rows: Vec<Vec<(u32, f64)>>,
        row_vocab: impl Into<Arc<Vocabulary>>,
        col_vocab: impl Into<Arc<Vocabulary>>,
    ) -> Result<Self> {
        let row_vocab = row_vocab.into();
        let col_vocab = col_vocab.into();
        if rows.len() != row_vocab.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for {} row words",
                rows.len(),
                row_vocab.len()
            )));
        }
        let n_cols = col_vocab.len();
        let mut clean = Vec::with_capacity(rows.len());
        for (i, mut row) in rows.into_iter().enumerate() {
            for &(j, v) in &row {
                if j as usize >= n_cols {
                    return Err(Error::DimensionMismatch(format!("column {j} out of range {n_cols}")));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("row {:?}", row_vocab.word(i))));
                }
                if v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "negative co-occurrence value {v} in row {:?}",
                        row_vocab.word(i)
                    )));
                }
            }
            row.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            clean.push(merged);
        }
        Ok(Self::from_clean_rows(clean, row_vocab, col_vocab))
    }

    fn from_clean_rows(rows: Vec<Vec<(u32, f64)>>, row_vocab: Arc<Vocabulary>, col_vocab: Arc<Vocabulary>) -> Self {
        let mut col_sums = vec![0.0; col_vocab.len()];
        let row_sums: Vec<f64> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&(j, v)| {
                        col_sums[j as usize] += v;
                        v
                    })
                    .sum()
            })
            .collect();
        let total = row_sums.iter().sum();
        CooccurrenceMatrix {
            rows,
            row_vocab,
            col_vocab,
            row_sums,
            col_sums,
            total,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_vocab.len()
    }

    pub fn row_vocab(&self) -> &Vocabulary {
        &self.row_vocab
    }

    pub fn col_vocab(&self) -> &Vocabulary {
        &self.col_vocab
    }

    pub fn shared_row_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.row_vocab)
    }

    pub fn shared_col_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.col_vocab)
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&(j as u32), |e| e.0)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }

    /// Looks a cell up by row and column word.
    pub fn get_word(&self, row_word: &str, col_word: &str) -> f64 {
        match (self.row_vocab.index(row_word), self.col_vocab.index(col_word)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => 0.0,
        }
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for &(j, v) in &self.rows[i] {
            out[j as usize] = v;
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows(), self.n_cols()));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[[i, j as usize]] = v;
            }
        }
        out
    }

    /// Same sparsity structure, new values.
    pub(crate) fn map_values<F>(&self, mut f: F) -> Self
    where
        F: FnMut(usize, usize, f64) -> f64,
    {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|&(j, v)| (j, f(i, j as usize, v)))
                    .filter(|e| e.1 != 0.0)
                    .collect()
            })
            .collect();
        Self::from_clean_rows(rows, Arc::clone(&self.row_vocab), Arc::clone(&self.col_vocab))
    }

    /// TSV triples `row_word<TAB>col_word<TAB>value`.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, |w| self.write_tsv_to(w))
    }

    pub fn write_tsv_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(
                    w,
                    "{}\t{}\t{}",
                    self.row_vocab.word(i),
                    self.col_vocab.word(j as usize),
                    v
                )?;
            }
        }
        Ok(())
    }

    /// Reads TSV triples. Row and column vocabularies follow first
    /// appearance; their frequencies are the rounded marginals.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let mut row_ids: HashMap<String, usize> = HashMap::new();
        let mut col_ids: HashMap<String, usize> = HashMap::new();
        let mut row_words = Vec::new();
        let mut col_words = Vec::new();
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
        for line in util::open_lines(path)? {
            let (no, line) = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [rw, cw, v] = fields[..] else {
                return Err(Error::parse(path, no, "expected row_word, col_word, value"));
            };
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, no, format!("bad value {v:?}")))?;
            let i = *row_ids.entry(rw.to_owned()).or_insert_with(|| {
                row_words.push(rw.to_owned());
                rows.push(Vec::new());
                row_words.len() - 1
            });
            let j = *col_ids.entry(cw.to_owned()).or_insert_with(|| {
                col_words.push(cw.to_owned());
                col_words.len() - 1
            });
            rows[i].push((j as u32, v));
        }
        let provisional_rows = Vocabulary::from_entries(row_words.iter().map(|w| (w.clone(), 0)));
        let provisional_cols = Vocabulary::from_entries(col_words.iter().map(|w| (w.clone(), 0)));
        let m = CooccurrenceMatrix::from_rows(rows, provisional_rows, provisional_cols)?;
        let row_vocab = Vocabulary::from_entries(
            row_words
                .into_iter()
                .zip(&m.row_sums)
                .map(|(w, s)| (w, s.round() as u64)),
        );
        let col_vocab = Vocabulary::from_entries(
            col_words
                .into_iter()
                .zip(&m.col_sums)
                .map(|(w, s)| (w, s.round() as u64)),
        );
        Ok(Self::from_clean_rows(m.rows, Arc::new(row_vocab), Arc::new(col_vocab)))
    }
}

/// Counts `(target, context)` pairs into a square matrix over `vocab`.
pub fn count_matrix<I>(pairs: I, vocab: impl Into<Arc<Vocabulary>>) -> Result<CooccurrenceMatrix>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let vocab = vocab.into();
    let n = vocab.len();
    let mut cells: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n];
    for (i, j) in pairs {
        if i >= n || j >= n {
            return Err(Error::DimensionMismatch(format!("pair ({i}, {j}) outside vocabulary of {n}")));
        }
        *cells[i].entry(j as u32).or_default() += 1.0;
    }
    let rows = cells
        .into_iter()
        .map(|m| {
            let mut r: Vec<_> = m.into_iter().collect();
            r.sort_unstable_by_key(|e| e.0);
            r
        })
        .collect();
    Ok(CooccurrenceMatrix::from_clean_rows(rows, Arc::clone(&vocab), vocab))
}

/// Shifted positive PMI with context-distribution smoothing:
///
/// `max(log(#(w,c) * sum_c' #(c')^alpha / (#(w) * #(c)^alpha)) - log k, 0)`
///
/// Zero cells stay zero, so the output never gains nonzeros.
pub fn ppmi_transform(counts: &CooccurrenceMatrix, k: f64, alpha: f64) -> Result<CooccurrenceMatrix> {
    if counts.total.is_nan() || counts.total <= 0.0 {
        return Err(Error::InvalidParameter("PPMI of an all-zero count matrix".into()));
    }
    if k.is_nan() || k < 1.0 {
        return Err(Error::InvalidParameter(format!("PPMI shift k must be >= 1, got {k}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let smoothed: Vec<f64> = counts.col_sums.iter().map(|c| c.powf(alpha)).collect();
    let smoothed_total: f64 = smoothed.iter().sum();
    let log_shift = k.ln();
    let row_sums = counts.row_sums.clone();
    Ok(counts.map_values(|i, j, v| {
        let pmi = (v * smoothed_total / (row_sums[i] * smoothed[j])).ln() - log_shift;
        pmi.max(0.0)
    }))
}

/// Stochastically removes co-occurrences involving frequent words: each of
/// the `#(w,c)` pairs survives with probability `keep(w) * keep(c)`, where
/// `keep(x) = min(1, sqrt(t / f(x)))` and `f` is the relative marginal
/// frequency. Cells must hold integer counts.
pub fn subsample_counts(counts: &CooccurrenceMatrix, t: f64, seed: u64) -> Result<CooccurrenceMatrix> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!("subsampling threshold must be positive, got {t}")));
    }
    if counts.total == 0.0 {
        return Ok(counts.clone());
    }
    let total = counts.total;
    let keep_row: Vec<f64> = counts.row_sums.iter().map(|&s| keep_probability(s / total, t)).collect();
    let keep_col: Vec<f64> = counts.col_sums.iter().map(|&s| keep_probability(s / total, t)).collect();
    let mut rng = seeded_rng(seed, util::STREAM_SUBSAMPLE);
    let mut bad = None;
    let thinned = counts.map_values(|i, j, v| {
        if v.fract() != 0.0 {
            bad = Some(v);
            return v;
        }
        let p = keep_row[i] * keep_col[j];
        if p >= 1.0 {
            return v;
        }
        Binomial::new(v as u64, p).expect("valid binomial").sample(&mut rng) as f64
    });
    match bad {
        Some(v) => Err(Error::InvalidParameter(format!("subsampling needs integer counts, found {v}"))),
        None => Ok(thinned),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_windows, Corpus, WindowPolicy};

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_entries(words.iter().map(|w| (w.to_string(), 1)))
    }

    #[test]
    fn empty_stream_gives_zero_matrix() {
        let m = count_matrix(std::iter::empty(), vocab(&["a", "b"])).unwrap();
        assert_eq!(m.total(), 0.0);
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn counts_pairs() {
        let m = count_matrix([(0, 1), (0, 1), (1, 0)], vocab(&["a", "b"])).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.total(), 3.0);
        assert_eq!(m.row_sums(), &[2.0, 1.0]);
        assert_eq!(m.col_sums(), &[1.0, 2.0]);
        assert!(count_matrix([(0, 5)], vocab(&["a"])).is_err());
    }

    #[test]
    fn counts_from_windowed_corpus() {
        // [a b a] with n=1: pairs (a,b) (b,a) (b,a) (a,b) -> two each
        let c = Corpus::from_lines("x", ["a b a"]);
        let v = Vocabulary::from_corpus(&c);
        let pairs: Vec<_> = extract_windows(&c, &v, WindowPolicy::fixed(1), 0).unwrap().collect();
        let m = count_matrix(pairs, v).unwrap();
        assert_eq!(m.get_word("a", "b"), 2.0);
        assert_eq!(m.get_word("b", "a"), 2.0);
        assert_eq!(m.get_word("a", "a"), 0.0);
        assert_eq!(m.total(), 4.0);
    }

    #[test]
    fn counts_from_windowed_corpus_with_self_pairs() {
        // [a b a] with n=2 also pairs the two a's with each other
        let c = Corpus::from_lines("x", ["a b a"]);
        let v = Vocabulary::from_corpus(&c);
        let pairs: Vec<_> = extract_windows(&c, &v, WindowPolicy::fixed(2), 0).unwrap().collect();
        let m = count_matrix(pairs, v).unwrap();
        assert_eq!(m.get_word("a", "b"), 2.0);
        assert_eq!(m.get_word("b", "a"), 2.0);
        assert_eq!(m.get_word("a", "a"), 2.0);
    }

    #[test]
    fn ppmi_diagonal() {
        let m = CooccurrenceMatrix::from_rows(
            vec![vec![(0, 2.0)], vec![(1, 2.0)]],
            vocab(&["a", "b"]),
            vocab(&["a", "b"]),
        )
        .unwrap();
        let p = ppmi_transform(&m, 1.0, 1.0).unwrap();
        assert!((p.get(0, 0) - 2f64.ln()).abs() < 1e-15);
        assert!((p.get(1, 1) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(p.get(0, 1), 0.0);
        let huge = ppmi_transform(&m, 1e9, 1.0).unwrap();
        assert_eq!(huge.nnz(), 0);
    }

    #[test]
    fn ppmi_rejects_bad_inputs() {
        let zero = count_matrix(std::iter::empty(), vocab(&["a"])).unwrap();
        assert!(ppmi_transform(&zero, 1.0, 0.75).is_err());
        let m = count_matrix([(0, 0)], vocab(&["a"])).unwrap();
        assert!(ppmi_transform(&m, 0.5, 0.75).is_err());
        assert!(ppmi_transform(&m, 1.0, 0.0).is_err());
    }

    #[test]
    fn rejects_negative_cells() {
        let err = CooccurrenceMatrix::from_rows(vec![vec![(0, -1.0)]], vocab(&["a"]), vocab(&["a"]));
        assert!(err.is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let m = count_matrix([(0, 1), (0, 1), (1, 0), (2, 2)], vocab(&["a", "b", "c"])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        m.write_tsv(&path).unwrap();
        let back = CooccurrenceMatrix::read_tsv(&path).unwrap();
        for r in ["a", "b", "c"] {
            for c in ["a", "b", "c"] {
                assert_eq!(back.get_word(r, c), m.get_word(r, c));
            }
        }
    }

    #[test]
    fn subsampling_counts_is_seeded_and_thins() {
        let mut pairs = vec![(0, 1); 5000];
        pairs.extend(vec![(1, 0); 5000]);
        pairs.extend(vec![(2, 1); 3]);
        let m = count_matrix(pairs, vocab(&["a", "b", "c"])).unwrap();
        let s = subsample_counts(&m, 0.001, 4).unwrap();
        assert!(s.total() < m.total() / 10.0);
        assert_eq!(s, subsample_counts(&m, 0.001, 4).unwrap());
    }
}
