//! Making two separately built representations comparable row by row.
//!
//! Count-based spaces are aligned by intersecting their context columns
//! (CI) or by projecting both through one shared random matrix (SRV).
//! Low-dimensional spaces are rotated onto each other with orthogonal
//! Procrustes (OP, OP-, OP+) or trained in a common coordinate system to
//! begin with (VI). Word injection needs no alignment and lives in the
//! corpus module.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use ndarray::Array2;
use rand::Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::{self, from_mat, to_mat};
use crate::spaces::project;
use crate::spaces::{make_random_matrix, sgns, CooccurrenceMatrix, EmbeddingMatrix, SpaceConfig};
use crate::util::{self, seeded_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProcrustesVariant {
    /// Length normalization and mean centering before the rotation.
    Standard,
    /// Length normalization only.
    NoCentering,
    /// Standard preprocessing plus whitening, re-weighting and
    /// de-whitening around the orthogonal map.
    Extended,
}

impl ProcrustesVariant {
    pub fn tag(self) -> &'static str {
        match self {
            ProcrustesVariant::Standard => "op",
            ProcrustesVariant::NoCentering => "op-",
            ProcrustesVariant::Extended => "op+",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlignMethod {
    ColumnIntersection,
    SharedRandomVectors,
    Procrustes(ProcrustesVariant),
    VectorInitialization,
    WordInjection,
    None,
}

/// Two matrices whose row `i` both describe word `i` of `shared_vocab`, in
/// a common column space.
#[derive(Clone, Debug)]
pub struct AlignedPair<M> {
    pub a: M,
    pub b: M,
    pub shared_vocab: Arc<Vocabulary>,
    pub method: AlignMethod,
}

/// Words of `a` (in `a`'s order, with `a`'s frequencies) that also occur in
/// `b`, plus their indices on both sides.
fn intersect(a: &Vocabulary, b: &Vocabulary) -> (Vocabulary, Vec<usize>, Vec<usize>) {
    let mut ia = Vec::new();
    let mut ib = Vec::new();
    for (i, w) in a.words().iter().enumerate() {
        if let Some(j) = b.index(w) {
            ia.push(i);
            ib.push(j);
        }
    }
    let vocab = Vocabulary::from_entries(ia.iter().map(|&i| (a.word(i).to_owned(), a.freq(i))));
    (vocab, ia, ib)
}

fn restrict_sparse(
    m: &CooccurrenceMatrix,
    rows: &[usize],
    cols: &[usize],
    row_vocab: &Arc<Vocabulary>,
    col_vocab: &Arc<Vocabulary>,
) -> Result<CooccurrenceMatrix> {
    let mut new_col = vec![u32::MAX; m.n_cols()];
    for (k, &j) in cols.iter().enumerate() {
        new_col[j] = k as u32;
    }
    let data = rows
        .iter()
        .map(|&i| {
            m.row(i)
                .iter()
                .filter(|e| new_col[e.0 as usize] != u32::MAX)
                .map(|&(j, v)| (new_col[j as usize], v))
                .collect()
        })
        .collect();
    CooccurrenceMatrix::from_rows(data, Arc::clone(row_vocab), Arc::clone(col_vocab))
}

/// Column intersection: keeps the context columns and target rows present
/// in both matrices, in `a`'s order. Cell values are copied unchanged.
pub fn column_intersect(a: &CooccurrenceMatrix, b: &CooccurrenceMatrix) -> Result<AlignedPair<CooccurrenceMatrix>> {
    let (cols, ca, cb) = intersect(a.col_vocab(), b.col_vocab());
    if cols.is_empty() {
        return Err(Error::EmptyIntersection("context words"));
    }
    let (rows, ra, rb) = intersect(a.row_vocab(), b.row_vocab());
    if rows.is_empty() {
        return Err(Error::EmptyIntersection("target words"));
    }
    let (rows, cols) = (Arc::new(rows), Arc::new(cols));
    Ok(AlignedPair {
        a: restrict_sparse(a, &ra, &ca, &rows, &cols)?,
        b: restrict_sparse(b, &rb, &cb, &rows, &cols)?,
        shared_vocab: rows,
        method: AlignMethod::ColumnIntersection,
    })
}

/// Shared random vectors: one random matrix over the union of both context
/// vocabularies; each side is projected through the rows of its own
/// context words. Rows are restricted to the shared target words.
pub fn shared_random_align(
    a: &CooccurrenceMatrix,
    b: &CooccurrenceMatrix,
    d: usize,
    s: usize,
    seed: u64,
) -> Result<AlignedPair<EmbeddingMatrix>> {
    let union = Vocabulary::from_entries(
        a.col_vocab()
            .words()
            .iter()
            .zip(a.col_vocab().frequencies())
            .chain(b.col_vocab().words().iter().zip(b.col_vocab().frequencies()))
            .map(|(w, &f)| (w.clone(), f)),
    );
    let map = |v: &Vocabulary| -> Vec<usize> {
        v.words()
            .iter()
            .map(|w| union.index(w).expect("union covers both"))
            .collect()
    };
    let (map_a, map_b) = (map(a.col_vocab()), map(b.col_vocab()));
    let random = make_random_matrix(union, d, s, seed)?;

    let proj_a = EmbeddingMatrix::new(a.shared_row_vocab(), project(a, &random, &map_a))?;
    let proj_b = EmbeddingMatrix::new(b.shared_row_vocab(), project(b, &random, &map_b))?;
    pair_on_shared_rows(&proj_a, &proj_b, AlignMethod::SharedRandomVectors)
}

/// Restricts two dense spaces to the words they share, in `a`'s order,
/// without changing coordinates.
pub fn pair_on_shared_rows(a: &EmbeddingMatrix, b: &EmbeddingMatrix, method: AlignMethod) -> Result<AlignedPair<EmbeddingMatrix>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("dimensionalities {} and {}", a.dim(), b.dim())));
    }
    let (shared, ia, ib) = intersect(a.vocab(), b.vocab());
    if shared.is_empty() {
        return Err(Error::EmptyIntersection("words"));
    }
    let shared = Arc::new(shared);
    Ok(AlignedPair {
        a: a.select(&ia, Arc::clone(&shared))?,
        b: b.select(&ib, Arc::clone(&shared))?,
        shared_vocab: shared,
        method,
    })
}

/// How the extended variant undoes the whitening after the rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dewhiten {
    None,
    /// Each side with its own covariance factor.
    Own,
    /// Each side with the other side's covariance factor.
    Opposite,
}

/// Step switches of [`ProcrustesVariant::Extended`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedSteps {
    pub whiten: bool,
    /// Exponent of the singular-value re-weighting, applied to both sides.
    pub reweight: f64,
    pub dewhiten: Dewhiten,
}

impl Default for ExtendedSteps {
    fn default() -> Self {
        ExtendedSteps {
            whiten: true,
            reweight: 0.5,
            dewhiten: Dewhiten::Opposite,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcrustesSolution {
    /// Orthogonal `d x d` map applied to `b` (for the extended variant: the
    /// orthogonal factor of the mapping step).
    pub rotation: Array2<f64>,
    /// Sum of squared row distances between the aligned matrices.
    pub residual: f64,
    pub variant: ProcrustesVariant,
}

impl ProcrustesSolution {
    /// Largest absolute entry of `W^T W - I`.
    pub fn orthogonality_error(&self) -> f64 {
        let w = &self.rotation;
        let gram = w.t().dot(w);
        gram.indexed_iter()
            .map(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        util::write_atomic(path, |w| self.write_text_to(w))
    }

    /// `d` lines of `d` values, then `residual <value>` and
    /// `variant <tag>`.
    pub fn write_text_to(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for row in self.rotation.outer_iter() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w, "residual {:.16e}", self.residual)?;
        writeln!(w, "variant {}", self.variant.tag())
    }
}

fn normalize_rows(m: &mut Mat<f64>) {
    for i in 0..m.nrows() {
        let n = (0..m.ncols()).map(|j| m[(i, j)] * m[(i, j)]).sum::<f64>().sqrt();
        if n > 0.0 {
            for j in 0..m.ncols() {
                m[(i, j)] /= n;
            }
        }
    }
}

fn center_columns(m: &mut Mat<f64>) {
    let n = m.nrows();
    if n == 0 {
        return;
    }
    for j in 0..m.ncols() {
        let mean = (0..n).map(|i| m[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            m[(i, j)] -= mean;
        }
    }
}

fn scale_columns(m: &mut Mat<f64>, factors: &[f64]) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= factors[j];
        }
    }
}

fn squared_distance(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = a[(i, j)] - b[(i, j)];
            sum += d * d;
        }
    }
    sum
}

// Eigenvalues below this fraction of the largest are dropped when
// inverting covariance factors.
const WHITEN_EPS: f64 = 1e-10;

/// Orthogonal Procrustes with the default extended-variant steps.
pub fn orthogonal_procrustes(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    variant: ProcrustesVariant,
) -> Result<(AlignedPair<EmbeddingMatrix>, ProcrustesSolution)> {
    orthogonal_procrustes_with(a, b, variant, &ExtendedSteps::default())
}

/// Maps `b` onto `a` with the orthogonal `W = U V^T`, where `U S V^T` is
/// the SVD of `B^T A` over the shared vocabulary (identity dictionary).
///
/// Words whose vector is zero on either side are left out of the shared
/// vocabulary. The returned pair holds the preprocessed `a` and the mapped
/// `b`.
pub fn orthogonal_procrustes_with(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    variant: ProcrustesVariant,
    steps: &ExtendedSteps,
) -> Result<(AlignedPair<EmbeddingMatrix>, ProcrustesSolution)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("dimensionalities {} and {}", a.dim(), b.dim())));
    }
    let mut ia = Vec::new();
    let mut ib = Vec::new();
    for (i, w) in a.vocab().words().iter().enumerate() {
        let Some(j) = b.vocab().index(w) else { continue };
        let zero_a = a.row(i).iter().all(|x| *x == 0.0);
        let zero_b = b.row(j).iter().all(|x| *x == 0.0);
        if zero_a || zero_b {
            log::warn!("leaving {w:?} out of the Procrustes dictionary: zero vector");
            continue;
        }
        ia.push(i);
        ib.push(j);
    }
    if ia.is_empty() {
        return Err(Error::EmptyIntersection("words with nonzero vectors"));
    }
    let shared = Arc::new(Vocabulary::from_entries(
        ia.iter().map(|&i| (a.vocab().word(i).to_owned(), a.vocab().freq(i))),
    ));
    let mut za = to_mat(a.select(&ia, Arc::clone(&shared))?.matrix());
    let mut xb = to_mat(b.select(&ib, Arc::clone(&shared))?.matrix());

    normalize_rows(&mut za);
    normalize_rows(&mut xb);
    if variant != ProcrustesVariant::NoCentering {
        center_columns(&mut za);
        center_columns(&mut xb);
    }

    let (aligned_a, aligned_b, rotation) = match variant {
        ProcrustesVariant::Standard | ProcrustesVariant::NoCentering => {
            let svd = linalg::svd(&(xb.transpose() * &za))?;
            let w = &svd.u * &svd.v_t;
            let mapped = &xb * &w;
            (za, mapped, w)
        }
        ProcrustesVariant::Extended => {
            let d = za.ncols();
            let (wx1, wz1, wx1_inv, wz1_inv) = if steps.whiten {
                let cov_x = xb.transpose() * &xb;
                let cov_z = za.transpose() * &za;
                (
                    linalg::sym_power(&cov_x, -0.5, WHITEN_EPS)?,
                    linalg::sym_power(&cov_z, -0.5, WHITEN_EPS)?,
                    linalg::sym_power(&cov_x, 0.5, WHITEN_EPS)?,
                    linalg::sym_power(&cov_z, 0.5, WHITEN_EPS)?,
                )
            } else {
                let id = Mat::<f64>::identity(d, d);
                (id.clone(), id.clone(), id.clone(), id)
            };
            let xw = &xb * &wx1;
            let zw = &za * &wz1;
            let svd = linalg::svd(&(xw.transpose() * &zw))?;
            let wx2 = svd.u;
            let wz2 = svd.v_t.transpose().to_owned();
            let mut xw = &xw * &wx2;
            let mut zw = &zw * &wz2;
            let weights: Vec<f64> = svd.sigma.iter().map(|s| s.max(0.0).powf(steps.reweight)).collect();
            scale_columns(&mut xw, &weights);
            scale_columns(&mut zw, &weights);
            let src_factor = wx2.transpose() * &wx1_inv * &wx2;
            let trg_factor = wz2.transpose() * &wz1_inv * &wz2;
            let (xw, zw) = match steps.dewhiten {
                Dewhiten::None => (xw, zw),
                Dewhiten::Own => (&xw * &src_factor, &zw * &trg_factor),
                Dewhiten::Opposite => (&xw * &trg_factor, &zw * &src_factor),
            };
            (zw, xw, &wx2 * wz2.transpose())
        }
    };

    let residual = squared_distance(&aligned_b, &aligned_a);
    let pair = AlignedPair {
        a: EmbeddingMatrix::new(Arc::clone(&shared), from_mat(&aligned_a))?,
        b: EmbeddingMatrix::new(Arc::clone(&shared), from_mat(&aligned_b))?,
        shared_vocab: shared,
        method: AlignMethod::Procrustes(variant),
    };
    Ok((
        pair,
        ProcrustesSolution {
            rotation: from_mat(&rotation),
            residual,
            variant,
        },
    ))
}

/// Vector initialization: trains SGNS on `corpus_a`, then continues
/// training on `corpus_b` from the first model's word and context vectors.
/// Words unseen in `corpus_a` start from seeded random word vectors and
/// zero context vectors. The continued model runs `cfg.vi_epochs` epochs
/// (default `cfg.epochs`; zero is allowed).
pub fn vector_initialization_align(
    corpus_a: &Corpus,
    corpus_b: &Corpus,
    vocab_a: impl Into<Arc<Vocabulary>>,
    vocab_b: impl Into<Arc<Vocabulary>>,
    cfg: &SpaceConfig,
) -> Result<AlignedPair<EmbeddingMatrix>> {
    cfg.validate()?;
    let vocab_a = vocab_a.into();
    let vocab_b = vocab_b.into();
    let first = sgns::train_epochs(corpus_a, &vocab_a, cfg, None, cfg.epochs)?;

    let dim = cfg.dim;
    let half = 0.5 / dim as f64;
    let mut rng = seeded_rng(cfg.seed, util::STREAM_SGNS_INIT + 1);
    let mut w0 = Array2::zeros((vocab_b.len(), dim));
    let mut c0 = Array2::zeros((vocab_b.len(), dim));
    for (i, word) in vocab_b.words().iter().enumerate() {
        match vocab_a.index(word) {
            Some(j) => {
                w0.row_mut(i).assign(&first.words.row_view(j));
                c0.row_mut(i).assign(&first.contexts.row_view(j));
            }
            None => w0.row_mut(i).mapv_inplace(|_| rng.random_range(-half..half)),
        }
    }
    let w0 = EmbeddingMatrix::new(Arc::clone(&vocab_b), w0)?;
    let c0 = EmbeddingMatrix::new(Arc::clone(&vocab_b), c0)?;
    let epochs = cfg.vi_epochs.unwrap_or(cfg.epochs);
    let second = sgns::train_epochs(corpus_b, &vocab_b, cfg, Some((&w0, &c0)), epochs)?;
    pair_on_shared_rows(&first.words, &second.words, AlignMethod::VectorInitialization)
}
