//! Graph-based decoding: biaffine arc scoring, maximum spanning
//! arborescence search and relation assignment.

mod biaffine;
mod mst;

use ndarray::{Array2, Array3};
use thiserror::Error;

pub use biaffine::{biaffine_scores, BiaffineParams};
pub use mst::{decode_mst, decode_mst_bruteforce, tree_score, BRUTEFORCE_MAX_LEN};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("cannot decode an empty sentence")]
    EmptySentence,
    #[error("score matrix has shape {rows}x{cols}, expected (n+1)xn")]
    BadShape { rows: usize, cols: usize },
    #[error("non-finite score at head {head}, dependent {dependent}")]
    NonFinite { head: usize, dependent: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("exhaustive decoding is limited to {max} tokens, got {n}")]
    TooLong { n: usize, max: usize },
    #[error("head {head} of token {dependent} is out of range")]
    HeadOutOfRange { dependent: usize, head: usize },
    #[error("relation vocabulary has {vocab} entries but the label tensor has {labels}")]
    VocabularySize { vocab: usize, labels: usize },
}

/// Arc scores for a sentence of `n` tokens.
///
/// Row `h` holds the scores of arcs leaving head `h` (0 is the virtual
/// root), column `d` the scores of arcs entering token `d + 1`. Self-arcs
/// are never selected regardless of their stored value.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcScoreMatrix {
    scores: Array2<f64>,
}

impl ArcScoreMatrix {
    pub fn new(scores: Array2<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = scores.dim();
        if rows != cols + 1 {
            return Err(GraphError::BadShape { rows, cols });
        }
        if let Some(((head, col), _)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GraphError::NonFinite {
                head,
                dependent: col + 1,
            });
        }
        Ok(ArcScoreMatrix { scores })
    }

    /// Sentence length.
    pub fn len(&self) -> usize {
        self.scores.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Score of the arc `head -> dependent`, `dependent` being 1-based.
    pub fn arc(&self, head: usize, dependent: usize) -> f64 {
        self.scores[(head, dependent - 1)]
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.scores
    }
}

/// Relation scores per candidate arc, shape `(n+1) x n x L`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelScoreTensor {
    scores: Array3<f64>,
}

impl LabelScoreTensor {
    pub fn new(scores: Array3<f64>) -> Result<Self, GraphError> {
        let (rows, cols, labels) = scores.dim();
        if rows != cols + 1 {
            return Err(GraphError::BadShape { rows, cols });
        }
        if labels == 0 {
            return Err(GraphError::Dimension(
                "label tensor needs at least one relation".into(),
            ));
        }
        if let Some(((head, col, _), _)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GraphError::NonFinite {
                head,
                dependent: col + 1,
            });
        }
        Ok(LabelScoreTensor { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.dim().1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_labels(&self) -> usize {
        self.scores.dim().2
    }

    pub fn scores(&self) -> &Array3<f64> {
        &self.scores
    }
}

/// Pick the best relation for each chosen arc. Ties go to the lowest
/// vocabulary index.
pub fn assign_labels<S: AsRef<str>>(
    heads: &[usize],
    tensor: &LabelScoreTensor,
    vocab: &[S],
) -> Result<Vec<String>, GraphError> {
    let n = tensor.len();
    if heads.len() != n {
        return Err(GraphError::Dimension(format!(
            "{} heads for a label tensor over {} tokens",
            heads.len(),
            n
        )));
    }
    if vocab.len() != tensor.num_labels() {
        return Err(GraphError::VocabularySize {
            vocab: vocab.len(),
            labels: tensor.num_labels(),
        });
    }

    heads
        .iter()
        .enumerate()
        .map(|(d, &h)| {
            if h > n || h == d + 1 {
                return Err(GraphError::HeadOutOfRange {
                    dependent: d + 1,
                    head: h,
                });
            }
            let row = tensor.scores.slice(ndarray::s![h, d, ..]);
            let mut best = 0;
            for (l, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = l;
                }
            }
            Ok(vocab[best].as_ref().to_owned())
        })
        .collect()
}
