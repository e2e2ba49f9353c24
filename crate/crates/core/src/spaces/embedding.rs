use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::util;

/// Dense matrix with one row per vocabulary word.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: Array2<f64>,
    vocab: Arc<Vocabulary>,
}

impl EmbeddingMatrix {
    pub fn new(vocab: impl Into<Arc<Vocabulary>>, rows: Array2<f64>) -> Result<Self> {
        let vocab = vocab.into();
        if rows.nrows() != vocab.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for a vocabulary of {} words",
                rows.nrows(),
                vocab.len()
            )));
        }
        if rows.ncols() == 0 {
            return Err(Error::DimensionMismatch("embedding dimensionality must be positive".into()));
        }
        if let Some(i) = rows.outer_iter().position(|r| r.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite(format!("embedding row for {:?}", vocab.word(i))));
        }
        let rows = rows.as_standard_layout().into_owned();
        Ok(EmbeddingMatrix { rows, vocab })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.rows
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        self.rows
            .row(idx)
            .to_slice()
            .expect("embedding rows are stored in standard layout")
    }

    pub fn row_view(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.rows.row(idx)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.index(word).map(|i| self.row(i))
    }

    /// Keeps the rows of `words`, in the given order, under `vocab`.
    pub(crate) fn select(&self, words: &[usize], vocab: Arc<Vocabulary>) -> Result<Self> {
        let rows = self.rows.select(ndarray::Axis(0), words);
        EmbeddingMatrix::new(vocab, rows)
    }

    /// Text format: a `"|V| d"` header line, then one line per word with the
    /// token followed by `d` values in 17-significant-digit scientific
    /// notation.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, |w| self.write_text_to(w))
    }

    pub fn write_text_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim())?;
        for (i, row) in self.rows.outer_iter().enumerate() {
            write!(w, "{}", self.vocab.word(i))?;
            for x in row {
                write!(w, " {x:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let mut lines = util::open_lines(path)?;
        let (_, header) = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(path, 1, "header must be \"|V| d\"")))
            .collect::<Result<_>>()?;
        let [n, d] = dims[..] else {
            return Err(Error::parse(path, 1, "header must be \"|V| d\""));
        };

        let mut words = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * d);
        for line in lines {
            let (no, line) = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line");
            let before = data.len();
            for f in fields {
                data.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(path, no, format!("bad value {f:?}")))?,
                );
            }
            if data.len() - before != d {
                return Err(Error::parse(path, no, format!("expected {d} values")));
            }
            words.push((word.to_owned(), 0));
        }
        if words.len() != n {
            return Err(Error::parse(path, 1, format!("header announces {n} rows, found {}", words.len())));
        }
        let vocab = Vocabulary::from_entries(words);
        if vocab.len() != n {
            return Err(Error::parse(path, 1, "duplicate words"));
        }
        let rows = Array2::from_shape_vec((n, d), data).expect("shape checked");
        EmbeddingMatrix::new(vocab, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_entries((0..n).map(|i| (format!("w{i}"), 1)))
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(EmbeddingMatrix::new(vocab(2), Array2::zeros((3, 2))).is_err());
        let mut m = Array2::zeros((2, 2));
        m[[1, 0]] = f64::NAN;
        assert!(matches!(EmbeddingMatrix::new(vocab(2), m), Err(Error::NonFinite(_))));
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(values in proptest::collection::vec(-1e300f64..1e300, 6)) {
            let m = EmbeddingMatrix::new(vocab(3), Array2::from_shape_vec((3, 2), values).unwrap()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("emb.txt");
            m.write_text(&path).unwrap();
            let back = EmbeddingMatrix::read_text(&path).unwrap();
            prop_assert_eq!(back.matrix(), m.matrix());
            prop_assert_eq!(back.vocab().words(), m.vocab().words());
        }
    }
}
