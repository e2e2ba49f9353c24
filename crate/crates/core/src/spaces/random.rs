use std::sync::Arc;

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;

use super::{subsample_counts, CooccurrenceMatrix, EmbeddingMatrix};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::util::{self, seeded_rng};

/// Sparse ternary projection matrix: each row holds exactly `s` entries of
/// `+1` or `-1` at distinct columns.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomMatrix {
    rows: Vec<Vec<(u32, i8)>>,
    vocab: Arc<Vocabulary>,
    dim: usize,
    nonzeros: usize,
    seed: u64,
}

impl RandomMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonzeros(&self) -> usize {
        self.nonzeros
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// `(column, sign)` entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(u32, i8)] {
        &self.rows[i]
    }

    /// Random vector of `word`.
    pub fn row_of(&self, word: &str) -> Option<&[(u32, i8)]> {
        self.vocab.index(word).map(|i| self.row(i))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows(), self.dim));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, s) in row {
                out[[i, j as usize]] = f64::from(s);
            }
        }
        out
    }
}

/// Draws one sparse ternary vector per vocabulary word, in vocabulary order.
pub fn make_random_matrix(vocab: impl Into<Arc<Vocabulary>>, d: usize, s: usize, seed: u64) -> Result<RandomMatrix> {
    let vocab = vocab.into();
    if s == 0 || d == 0 {
        return Err(Error::InvalidParameter("random vectors need d >= 1 and s >= 1".into()));
    }
    if s > d {
        return Err(Error::InvalidParameter(format!("{s} nonzeros do not fit into {d} dimensions")));
    }
    let mut rng = seeded_rng(seed, util::STREAM_RANDOM_INDEX);
    let rows = (0..vocab.len())
        .map(|_| {
            let mut cols: Vec<usize> = index::sample(&mut rng, d, s).into_vec();
            cols.sort_unstable();
            cols.into_iter()
                .map(|c| (c as u32, if rng.random_bool(0.5) { 1 } else { -1 }))
                .collect()
        })
        .collect();
    Ok(RandomMatrix {
        rows,
        vocab,
        dim: d,
        nonzeros: s,
        seed,
    })
}

/// Sparse-times-random product restricted to a row-index map: column `j` of
/// `counts` uses random row `col_map[j]`.
pub(crate) fn project(counts: &CooccurrenceMatrix, random: &RandomMatrix, col_map: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((counts.n_rows(), random.dim()));
    for (i, row) in counts.rows().iter().enumerate() {
        let mut target = out.row_mut(i);
        for &(j, v) in row {
            for &(c, sign) in random.row(col_map[j as usize]) {
                target[c as usize] += v * f64::from(sign);
            }
        }
    }
    out
}

/// Random indexing: `counts * R`, optionally after subsampling the counts
/// with threshold `t_sub`.
pub fn random_index(
    counts: &CooccurrenceMatrix,
    random: &RandomMatrix,
    t_sub: Option<f64>,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if random.n_rows() != counts.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "random matrix has {} rows, count matrix {} columns",
            random.n_rows(),
            counts.n_cols()
        )));
    }
    let thinned;
    let counts = match t_sub {
        Some(t) => {
            thinned = subsample_counts(counts, t, seed)?;
            &thinned
        }
        None => counts,
    };
    let identity: Vec<usize> = (0..counts.n_cols()).collect();
    EmbeddingMatrix::new(counts.shared_row_vocab(), project(counts, random, &identity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::count_matrix;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_entries((0..n).map(|i| (format!("w{i}"), 1)))
    }

    #[test]
    fn rows_have_exactly_s_nonzeros() {
        let r = make_random_matrix(vocab(50), 300, 2, 1).unwrap();
        let dense = r.to_dense();
        for row in dense.outer_iter() {
            assert_eq!(row.iter().filter(|x| **x != 0.0).count(), 2);
            assert!(row.iter().all(|x| [-1.0, 0.0, 1.0].contains(x)));
        }
        assert_eq!(r, make_random_matrix(vocab(50), 300, 2, 1).unwrap());
        assert_ne!(r, make_random_matrix(vocab(50), 300, 2, 2).unwrap());
    }

    #[test]
    fn bad_nonzero_counts() {
        assert!(make_random_matrix(vocab(3), 10, 0, 1).is_err());
        assert!(make_random_matrix(vocab(3), 2, 3, 1).is_err());
    }

    #[test]
    fn projection_matches_dense_product() {
        let m = count_matrix([(0, 1), (0, 1), (1, 2), (2, 0), (2, 2)], vocab(3)).unwrap();
        let r = make_random_matrix(vocab(3), 8, 2, 5).unwrap();
        let e = random_index(&m, &r, None, 0).unwrap();
        let expected = m.to_dense().dot(&r.to_dense());
        assert_eq!(e.matrix(), &expected);
    }

    #[test]
    fn degenerate_single_one_projection_sums_columns() {
        // R[i, i mod d] = 1: output column c sums count columns j with j mod d == c
        let m = count_matrix([(0, 0), (0, 2), (0, 2), (1, 1), (1, 3)], vocab(4)).unwrap();
        let r = RandomMatrix {
            rows: (0..4).map(|i| vec![((i % 2) as u32, 1)]).collect(),
            vocab: Arc::new(vocab(4)),
            dim: 2,
            nonzeros: 1,
            seed: 0,
        };
        let e = random_index(&m, &r, None, 0).unwrap();
        assert_eq!(e.row(0), &[3.0, 0.0]);
        assert_eq!(e.row(1), &[0.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = count_matrix([(0, 1)], vocab(2)).unwrap();
        let r = make_random_matrix(vocab(3), 8, 2, 5).unwrap();
        assert!(matches!(random_index(&m, &r, None, 0), Err(Error::DimensionMismatch(_))));
    }
}
