//! Skip-gram with negative sampling.
//!
//! Maximizes `sum_{(w,c) in D} log s(v_c . v_w) + sum_{(w,c) in D'} log s(-v_c . v_w)`
//! by stochastic gradient ascent, where `D` are the observed (dynamic
//! window) pairs and `D'` holds `k` negative contexts per observed pair drawn
//! from the unigram distribution. The word matrix `W` is the embedding.
//!
//! Parameters live in a shared buffer of atomically accessed `f64`s. With a
//! single worker training is sequential and bit-reproducible. With several
//! workers each one trains on its own contiguous shard of sentences with
//! its own seed, and concurrent updates to the same row may overwrite each
//! other (lock-free "hogwild" updates); results then depend on scheduling.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::{EmbeddingMatrix, SpaceConfig};
use crate::corpus::{self, subsample, Corpus, Vocabulary, WindowPolicy};
use crate::error::{Error, Result};
use crate::util::{self, seeded_rng};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Derivative of the pair objective with respect to the score `v_c . v_w`.
#[inline]
pub fn score_gradient(score: f64, positive: bool) -> f64 {
    if positive {
        1.0 - sigmoid(score)
    } else {
        -sigmoid(score)
    }
}

/// One term of the objective: `log s(v_c . v_w)` for an observed pair,
/// `log s(-v_c . v_w)` for a negative sample.
pub fn pair_objective(v_w: &[f64], v_c: &[f64], positive: bool) -> f64 {
    let s = dot(v_w, v_c);
    if positive {
        log_sigmoid(s)
    } else {
        log_sigmoid(-s)
    }
}

/// Gradient of [`pair_objective`] with respect to `v_w` and `v_c`.
pub fn pair_gradient(v_w: &[f64], v_c: &[f64], positive: bool) -> (Vec<f64>, Vec<f64>) {
    let g = score_gradient(dot(v_w, v_c), positive);
    (v_c.iter().map(|x| g * x).collect(), v_w.iter().map(|x| g * x).collect())
}

struct SharedRows {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl SharedRows {
    fn new(m: &Array2<f64>) -> Self {
        SharedRows {
            data: m.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            dim: m.ncols(),
        }
    }

    #[inline]
    fn load(&self, row: usize, buf: &mut [f64]) {
        let src = &self.data[row * self.dim..(row + 1) * self.dim];
        for (b, a) in buf.iter_mut().zip(src) {
            *b = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn store(&self, row: usize, buf: &[f64]) {
        let dst = &self.data[row * self.dim..(row + 1) * self.dim];
        for (a, b) in dst.iter().zip(buf) {
            a.store(b.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_array(self) -> Array2<f64> {
        let rows = self.data.len() / self.dim;
        let values = self
            .data
            .into_iter()
            .map(|a| f64::from_bits(a.into_inner()))
            .collect();
        Array2::from_shape_vec((rows, self.dim), values).expect("shape preserved")
    }
}

/// Trained word and context matrices plus the mean per-pair loss (negated
/// objective) of every epoch.
#[derive(Clone, Debug)]
pub struct SgnsModel {
    pub words: EmbeddingMatrix,
    pub contexts: EmbeddingMatrix,
    pub epoch_losses: Vec<f64>,
}

struct Schedule {
    lr_start: f64,
    lr_end: f64,
    epochs: usize,
}

impl Schedule {
    /// Linear decay over the whole run; `progress` is the fraction of the
    /// current epoch already processed.
    fn rate(&self, epoch: usize, progress: f64) -> f64 {
        let done = (epoch as f64 + progress) / self.epochs as f64;
        self.lr_start - (self.lr_start - self.lr_end) * done
    }
}

struct Worker<'a> {
    words: &'a SharedRows,
    contexts: &'a SharedRows,
    negatives: &'a WeightedAliasIndex<f64>,
    k: usize,
    schedule: &'a Schedule,
}

impl Worker<'_> {
    fn run(
        &self,
        sentences: &[Vec<String>],
        vocab: &Vocabulary,
        policy: WindowPolicy,
        window_seed: u64,
        epoch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, usize)> {
        let n_pairs = corpus::window_pairs(sentences, vocab, policy, window_seed)?.count();
        let dim = self.words.dim;
        let mut v_w = vec![0.0; dim];
        let mut v_c = vec![0.0; dim];
        let mut update = vec![0.0; dim];
        let mut loss = 0.0;
        for (step, (w, c)) in corpus::window_pairs(sentences, vocab, policy, window_seed)?.enumerate() {
            let lr = self.schedule.rate(epoch, step as f64 / n_pairs as f64);
            self.words.load(w, &mut v_w);
            update.iter_mut().for_each(|x| *x = 0.0);

            let mut sample = |ctx: usize, positive: bool| {
                self.contexts.load(ctx, &mut v_c);
                let score = dot(&v_w, &v_c);
                loss -= if positive { log_sigmoid(score) } else { log_sigmoid(-score) };
                let g = lr * score_gradient(score, positive);
                for ((u, cv), wv) in update.iter_mut().zip(v_c.iter_mut()).zip(&v_w) {
                    *u += g * *cv;
                    *cv += g * wv;
                }
                self.contexts.store(ctx, &v_c);
            };

            sample(c, true);
            for _ in 0..self.k {
                let neg = self.negatives.sample(rng);
                if neg != c {
                    sample(neg, false);
                }
            }
            for (x, u) in v_w.iter_mut().zip(&update) {
                *x += u;
            }
            self.words.store(w, &v_w);
        }
        Ok((loss, n_pairs))
    }
}

fn shards(sentences: &[Vec<String>], n: usize) -> Vec<&[Vec<String>]> {
    let size = sentences.len().div_ceil(n).max(1);
    sentences.chunks(size).collect()
}

pub(crate) fn train_epochs(
    corpus: &Corpus,
    vocab: &Arc<Vocabulary>,
    cfg: &SpaceConfig,
    init: Option<(&EmbeddingMatrix, &EmbeddingMatrix)>,
    epochs: usize,
) -> Result<SgnsModel> {
    if corpus.is_empty() || vocab.is_empty() {
        return Err(Error::EmptyCorpus(corpus.label().to_owned()));
    }
    let dim = cfg.dim;
    let (w0, c0) = match init {
        Some((w, c)) => {
            for m in [w, c] {
                if m.len() != vocab.len() || m.dim() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "initial matrix is {}x{}, model needs {}x{}",
                        m.len(),
                        m.dim(),
                        vocab.len(),
                        dim
                    )));
                }
            }
            (w.matrix().clone(), c.matrix().clone())
        }
        None => {
            let mut rng = seeded_rng(cfg.seed, util::STREAM_SGNS_INIT);
            let half = 0.5 / dim as f64;
            let w = Array2::from_shape_simple_fn((vocab.len(), dim), || rng.random_range(-half..half));
            (w, Array2::zeros((vocab.len(), dim)))
        }
    };

    let weights: Vec<f64> = vocab
        .frequencies()
        .iter()
        .map(|&f| (f as f64).powf(cfg.neg_exponent))
        .collect();
    let negatives = WeightedAliasIndex::new(weights)
        .map_err(|e| Error::InvalidParameter(format!("negative-sampling distribution: {e}")))?;

    let words = SharedRows::new(&w0);
    let contexts = SharedRows::new(&c0);
    let schedule = Schedule {
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        epochs: epochs.max(1),
    };
    let worker = Worker {
        words: &words,
        contexts: &contexts,
        negatives: &negatives,
        k: cfg.k,
        schedule: &schedule,
    };

    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.workers)
        .map(|i| seeded_rng(cfg.seed, util::STREAM_SGNS_TRAIN + 16 * i as u64))
        .collect();
    for epoch in 0..epochs {
        let epoch_seed = cfg.seed.wrapping_add(epoch as u64);
        let sentences: Cow<'_, Corpus> = match cfg.t_sub {
            Some(t) => Cow::Owned(subsample(corpus, vocab, t, epoch_seed)?),
            None => Cow::Borrowed(corpus),
        };
        let (loss, pairs) = if cfg.workers == 1 {
            worker.run(sentences.sentences(), vocab, cfg.window, epoch_seed, epoch, &mut rngs[0])?
        } else {
            let parts = shards(sentences.sentences(), cfg.workers);
            let results: Vec<Result<(f64, usize)>> = std::thread::scope(|s| {
                let handles: Vec<_> = parts
                    .iter()
                    .zip(rngs.iter_mut())
                    .enumerate()
                    .map(|(i, (part, rng))| {
                        let worker = &worker;
                        let seed = epoch_seed.wrapping_add(1_000_003 * i as u64);
                        s.spawn(move || worker.run(part, vocab, cfg.window, seed, epoch, rng))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            results.into_iter().try_fold((0.0, 0), |acc, r| {
                r.map(|(l, p)| (acc.0 + l, acc.1 + p))
            })?
        };
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    Ok(SgnsModel {
        words: EmbeddingMatrix::new(Arc::clone(vocab), words.into_array())?,
        contexts: EmbeddingMatrix::new(Arc::clone(vocab), contexts.into_array())?,
        epoch_losses,
    })
}

/// Trains SGNS and returns both matrices. `init` supplies starting word and
/// context matrices (vector initialization).
pub fn train_sgns_model(
    corpus: &Corpus,
    vocab: impl Into<Arc<Vocabulary>>,
    cfg: &SpaceConfig,
    init: Option<(&EmbeddingMatrix, &EmbeddingMatrix)>,
) -> Result<SgnsModel> {
    cfg.validate()?;
    train_epochs(corpus, &vocab.into(), cfg, init, cfg.epochs)
}

/// Trains SGNS and returns the word matrix.
pub fn train_sgns(
    corpus: &Corpus,
    vocab: impl Into<Arc<Vocabulary>>,
    cfg: &SpaceConfig,
    init: Option<(&EmbeddingMatrix, &EmbeddingMatrix)>,
) -> Result<EmbeddingMatrix> {
    train_sgns_model(corpus, vocab, cfg, init).map(|m| m.words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SpaceConfig {
        SpaceConfig {
            dim: 10,
            k: 3,
            epochs: 5,
            window: WindowPolicy::dynamic(2),
            seed: 11,
            ..SpaceConfig::default()
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_closed_form() {
        let v_w = [0.3, -0.2, 0.5];
        let v_c = [0.1, 0.4, -0.3];
        let (gw, _) = pair_gradient(&v_w, &v_c, true);
        let s = dot(&v_w, &v_c);
        for (g, c) in gw.iter().zip(&v_c) {
            assert!((g - (1.0 - sigmoid(s)) * c).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_empty_and_mismatched_init() {
        let empty = Corpus::new("e", vec![]);
        let vocab = Vocabulary::from_entries([("a".to_string(), 1)]);
        assert!(train_sgns(&empty, vocab.clone(), &small_cfg(), None).is_err());

        let c = Corpus::from_lines("c", ["a a a"]);
        let v = Vocabulary::from_corpus(&c);
        let wrong = EmbeddingMatrix::new(v.clone(), Array2::zeros((1, 4))).unwrap();
        let err = train_sgns(&c, v, &small_cfg(), Some((&wrong, &wrong))).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn single_worker_is_reproducible() {
        let c = Corpus::from_lines("c", ["a b c d", "b c d e", "a c e"]);
        let v = Vocabulary::from_corpus(&c);
        let a = train_sgns(&c, v.clone(), &small_cfg(), None).unwrap();
        let b = train_sgns(&c, v, &small_cfg(), None).unwrap();
        assert!(a.matrix().iter().zip(b.matrix()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn multi_worker_runs() {
        let lines: Vec<String> = (0..200).map(|i| format!("w{} w{} w{}", i % 7, (i + 1) % 7, (i + 3) % 7)).collect();
        let c = Corpus::from_lines("c", lines.iter().map(String::as_str));
        let v = Vocabulary::from_corpus(&c);
        let cfg = SpaceConfig {
            workers: 3,
            ..small_cfg()
        };
        let m = train_sgns_model(&c, v, &cfg, None).unwrap();
        assert_eq!(m.epoch_losses.len(), 5);
        assert!(m.words.matrix().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn cooccurring_words_end_up_closer() {
        // x and y share contexts p*, z only ever appears with q*
        let mut lines = Vec::new();
        for i in 0..300 {
            lines.push(format!("p{} x p{}", i % 5, (i + 1) % 5));
            lines.push(format!("p{} y p{}", (i + 2) % 5, (i + 3) % 5));
            lines.push(format!("q{} z q{}", i % 5, (i + 1) % 5));
        }
        let c = Corpus::from_lines("c", lines.iter().map(String::as_str));
        let v = Vocabulary::from_corpus(&c);
        let m = train_sgns(&c, v, &small_cfg(), None).unwrap();
        let cos = |a: &str, b: &str| {
            let (x, y) = (m.vector(a).unwrap(), m.vector(b).unwrap());
            dot(x, y) / (dot(x, x).sqrt() * dot(y, y).sqrt())
        };
        assert!(cos("x", "y") > cos("x", "z"));
    }
}
