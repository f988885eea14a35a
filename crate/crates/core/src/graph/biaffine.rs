use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{ArcScoreMatrix, GraphError};

/// Parameters of the arc scorer
/// `s(h, d) = head_h · (U dep_d) + w_head · head_h + w_dep · dep_d + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiaffineParams {
    /// Bilinear term, `d_head x d_dep`.
    pub u: Array2<f64>,
    pub w_head: Array1<f64>,
    pub w_dep: Array1<f64>,
    pub bias: f64,
}

impl BiaffineParams {
    pub fn new(
        u: Array2<f64>,
        w_head: Array1<f64>,
        w_dep: Array1<f64>,
        bias: f64,
    ) -> Result<Self, GraphError> {
        if u.nrows() != w_head.len() || u.ncols() != w_dep.len() {
            return Err(GraphError::Dimension(format!(
                "bilinear matrix {}x{} with linear terms of length {} and {}",
                u.nrows(),
                u.ncols(),
                w_head.len(),
                w_dep.len()
            )));
        }
        Ok(BiaffineParams {
            u,
            w_head,
            w_dep,
            bias,
        })
    }

    pub fn zeros(head_dim: usize, dep_dim: usize) -> Self {
        BiaffineParams {
            u: Array2::zeros((head_dim, dep_dim)),
            w_head: Array1::zeros(head_dim),
            w_dep: Array1::zeros(dep_dim),
            bias: 0.0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn dep_dim(&self) -> usize {
        self.u.ncols()
    }
}

/// Score every arc of a sentence.
///
/// `head_reprs` has one row per head candidate, row 0 being the root
/// representation; `dep_reprs` has one row per token.
pub fn biaffine_scores(
    head_reprs: ArrayView2<f64>,
    dep_reprs: ArrayView2<f64>,
    params: &BiaffineParams,
) -> Result<ArcScoreMatrix, GraphError> {
    if head_reprs.ncols() != params.head_dim() || dep_reprs.ncols() != params.dep_dim() {
        return Err(GraphError::Dimension(format!(
            "representations of width {} and {} for a {}x{} scorer",
            head_reprs.ncols(),
            dep_reprs.ncols(),
            params.head_dim(),
            params.dep_dim()
        )));
    }
    if head_reprs.nrows() != dep_reprs.nrows() + 1 {
        return Err(GraphError::Dimension(format!(
            "{} head rows for {} dependents (expected one extra root row)",
            head_reprs.nrows(),
            dep_reprs.nrows()
        )));
    }

    let mut scores = head_reprs.dot(&params.u).dot(&dep_reprs.t());
    let head_terms = head_reprs.dot(&params.w_head);
    let dep_terms = dep_reprs.dot(&params.w_dep);
    scores += &head_terms.insert_axis(Axis(1));
    scores += &dep_terms.insert_axis(Axis(0));
    scores += params.bias;

    ArcScoreMatrix::new(scores)
}
