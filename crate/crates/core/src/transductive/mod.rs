//! From predicted attributes to labels: nearest prototype, or label
//! propagation over a graph of prototypes and predictions together.

mod graph;
mod tsne;

pub use graph::{
    knn_graph, knn_indices, label_propagate, normalized_affinity, row_argmax, Graph,
    LabelDistribution,
};
pub use tsne::{tsne_embed, tsne_run, TsneOutput};

use crate::data::{ClassId, UnseenPrototypes};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::params::{Embedding, HyperParams};

/// Index of the nearest prototype of every column, lowest index on ties.
pub fn nn_indices(zhat: &DenseMatrix, protos: &UnseenPrototypes) -> Result<Vec<usize>> {
    if protos.is_empty() {
        return Err(Error::InvalidData("no prototypes to assign to".into()));
    }
    if zhat.rows() != protos.dim() {
        return Err(Error::Dimension(format!(
            "predictions have dimension {} but prototypes have {}",
            zhat.rows(),
            protos.dim()
        )));
    }
    let centers = protos.attributes().columns();
    Ok((0..zhat.cols())
        .map(|j| {
            let z = zhat.col(j);
            centers
                .iter()
                .enumerate()
                .map(|(m, c)| (m, linalg::sq_dist(&z, c)))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0
        })
        .collect())
}

/// Label of the nearest prototype of every column.
pub fn nn_assign(zhat: &DenseMatrix, protos: &UnseenPrototypes) -> Result<Vec<ClassId>> {
    Ok(nn_indices(zhat, protos)?
        .into_iter()
        .map(|m| protos.labels()[m])
        .collect())
}

/// Outcome of transductive assignment for `l` predictions.
#[derive(Clone, Debug)]
pub struct TransductiveResult {
    pub labels: Vec<ClassId>,
    /// Propagated scores of the test nodes, `l × M`, columns in prototype order.
    pub scores: DenseMatrix,
    /// Coordinates used to build the graph, `dim × (M + l)`; prototypes first.
    pub embedding: DenseMatrix,
}

/// Propagates prototype labels to the predictions over a kNN graph built on
/// `[Z' | Ẑ]`, optionally after a t-SNE reduction to two dimensions.
pub fn taaw_assign(
    zhat: &DenseMatrix,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Result<TransductiveResult> {
    let l = zhat.cols();
    if l < 3 {
        return Err(Error::InvalidData(format!(
            "transductive assignment needs at least 3 predictions, got {l}"
        )));
    }
    if protos.is_empty() {
        return Err(Error::InvalidData("no prototypes to propagate from".into()));
    }
    if zhat.rows() != protos.dim() {
        return Err(Error::Dimension(format!(
            "predictions have dimension {} but prototypes have {}",
            zhat.rows(),
            protos.dim()
        )));
    }
    let m = protos.len();
    let stacked = protos.attributes().hstack(zhat)?;
    let n = stacked.cols();
    let embedding = match params.embedding {
        Embedding::Tsne => tsne_embed(
            &stacked,
            2,
            params.perplexity_for(n),
            params.tsne_iters,
            params.seed,
        )?,
        Embedding::Identity => stacked,
    };
    let graph = knn_graph(&embedding, params.knn_k.min(n - 1))?;
    let mut seeds = DenseMatrix::zeros(n, m);
    for k in 0..m {
        seeds.set(k, k, 1.0);
    }
    let dist = label_propagate(&graph, &seeds, params.lp_alpha)?;
    let scores = DenseMatrix::from_fn(l, m, |i, j| dist.scores.get(m + i, j));
    let labels = dist.hard_labels[m..]
        .iter()
        .map(|&c| protos.labels()[c])
        .collect();
    Ok(TransductiveResult {
        labels,
        scores,
        embedding,
    })
}
