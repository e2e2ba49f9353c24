//! Word representations built from a corpus: sparse co-occurrence counts
//! and their PPMI weighting, dense SVD, random-indexing and skip-gram
//! embeddings, and externally inferred sense distributions.

mod count;
mod embedding;
mod random;
mod sense;
pub mod sgns;
mod svd;

pub use count::{count_matrix, ppmi_transform, subsample_counts, CooccurrenceMatrix};
pub use embedding::EmbeddingMatrix;
pub use random::{make_random_matrix, random_index, RandomMatrix};
pub(crate) use random::project;
pub use sense::{load_sense_distributions, parse_sense_distributions, SenseDistribution, SensePairs};
pub use sgns::{train_sgns, train_sgns_model, SgnsModel};
pub use svd::svd_reduce;

use crate::corpus::WindowPolicy;
use crate::error::{Error, Result};

/// Hyperparameters shared by the space constructors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceConfig {
    /// Dimensionality of SVD, RI and SGNS spaces.
    pub dim: usize,
    /// PPMI shift constant and number of SGNS negative samples.
    pub k: usize,
    /// PPMI context-distribution smoothing exponent.
    pub alpha: f64,
    /// Subsampling threshold for RI and SGNS.
    pub t_sub: Option<f64>,
    /// Singular-value weighting exponent for SVD.
    pub eig_p: f64,
    /// Nonzeros per random-indexing vector.
    pub ri_nonzeros: usize,
    pub epochs: usize,
    /// Epochs of the continued model in vector initialization; `None`
    /// reuses `epochs`.
    pub vi_epochs: Option<usize>,
    pub window: WindowPolicy,
    pub seed: u64,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Exponent applied to unigram counts for negative sampling. 1.0 is the
    /// plain unigram distribution.
    pub neg_exponent: f64,
    /// SGNS worker threads. Only a single worker is bit-reproducible.
    pub workers: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            dim: 300,
            k: 1,
            alpha: 0.75,
            t_sub: None,
            eig_p: 0.0,
            ri_nonzeros: 2,
            epochs: 5,
            vi_epochs: None,
            window: WindowPolicy::dynamic(5),
            seed: 0,
            lr_start: 0.025,
            lr_end: 0.0001,
            neg_exponent: 1.0,
            workers: 1,
        }
    }
}

impl SpaceConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.dim == 0 {
            problems.push("dim must be positive".to_string());
        }
        if self.k < 1 {
            problems.push("k must be at least 1".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            problems.push(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.eig_p) {
            problems.push(format!("eig_p must lie in [0, 1], got {}", self.eig_p));
        }
        if let Some(t) = self.t_sub {
            if t.is_nan() || t <= 0.0 {
                problems.push(format!("t_sub must be positive, got {t}"));
            }
        }
        if self.ri_nonzeros == 0 || self.ri_nonzeros > self.dim {
            problems.push(format!("ri_nonzeros must lie in 1..=dim, got {}", self.ri_nonzeros));
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1".to_string());
        }
        if self.window.size == 0 {
            problems.push("window size must be at least 1".to_string());
        }
        if !(self.lr_start > 0.0 && self.lr_end >= 0.0 && self.lr_end <= self.lr_start) {
            problems.push("learning rates must satisfy 0 <= lr_end <= lr_start, lr_start > 0".to_string());
        }
        if !(self.neg_exponent > 0.0 && self.neg_exponent <= 1.0) {
            problems.push(format!("neg_exponent must lie in (0, 1], got {}", self.neg_exponent));
        }
        if self.workers == 0 {
            problems.push("workers must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}
