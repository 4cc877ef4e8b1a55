//! Similarity graphs and label propagation over them.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

const SYMMETRY_TOL: f64 = 1e-12;

/// Weighted undirected graph: symmetric nonnegative weights, zero diagonal,
/// and no isolated nodes.
#[derive(Clone, Debug)]
pub struct Graph {
    weights: DenseMatrix,
}

impl Graph {
    pub fn new(weights: DenseMatrix) -> Result<Self> {
        let n = weights.rows();
        if weights.cols() != n {
            return Err(Error::Dimension("graph weights must be square".into()));
        }
        for i in 0..n {
            if weights.get(i, i) != 0.0 {
                return Err(Error::InvalidData(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let w = weights.get(i, j);
                if w < 0.0 {
                    return Err(Error::InvalidData(format!("negative weight ({i}, {j})")));
                }
                if (w - weights.get(j, i)).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidData(format!("asymmetric weight ({i}, {j})")));
                }
            }
            if weights.row(i).iter().all(|&w| w == 0.0) {
                return Err(Error::IsolatedNode(i));
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.weights.get(i, j) > 0.0).collect()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.weights.row(i).iter().sum()).collect()
    }
}

/// Indices of the `k` nearest other points of every column, closest first,
/// ties by lowest index.
pub fn knn_indices(points: &DenseMatrix, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = points.cols();
    if k >= n {
        return Err(Error::InvalidParam(format!("k = {k} must be below the {n} nodes")));
    }
    let cols = points.columns();
    Ok((0..n)
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, linalg::sq_dist(&cols[i], &cols[j]).sqrt()))
                .collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
            d
        })
        .collect())
}

/// Symmetric kNN graph with Gaussian weights `exp(−d²/2σ²)`, σ the median kNN
/// distance. Nodes `i` and `j` are joined when either is among the other's
/// `k` nearest.
pub fn knn_graph(points: &DenseMatrix, k: usize) -> Result<Graph> {
    let n = points.cols();
    let nn = knn_indices(points, k)?;
    let mut dists: Vec<f64> = nn.iter().flatten().map(|&(_, d)| d).collect();
    dists.sort_by(f64::total_cmp);
    let mut sigma = median_sorted(&dists);
    if sigma <= 0.0 {
        // More than half the neighbor pairs coincide; fall back to the
        // smallest positive distance.
        sigma = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(1.0);
    }
    let mut w = DenseMatrix::zeros(n, n);
    for (i, row) in nn.iter().enumerate() {
        for &(j, d) in row {
            let v = (-(d * d) / (2.0 * sigma * sigma)).exp().max(f64::MIN_POSITIVE);
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Graph::new(w)
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Propagated class scores and their row-wise argmax.
#[derive(Clone, Debug)]
pub struct LabelDistribution {
    /// `n × C`.
    pub scores: DenseMatrix,
    /// Column index of each row's maximum, lowest index on ties.
    pub hard_labels: Vec<usize>,
}

/// Row argmax with lowest-index tie-break.
pub fn row_argmax(m: &DenseMatrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

/// `S = D^{−1/2} W D^{−1/2}`.
pub fn normalized_affinity(graph: &Graph) -> DenseMatrix {
    let inv_sqrt: Vec<f64> = graph.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    let w = graph.weights();
    DenseMatrix::from_fn(graph.n(), graph.n(), |i, j| inv_sqrt[i] * w.get(i, j) * inv_sqrt[j])
}

/// Spreads the seed rows `Y` over the graph: `F = (1 − α)(I − αS)⁻¹ Y`.
pub fn label_propagate(graph: &Graph, seeds: &DenseMatrix, alpha: f64) -> Result<LabelDistribution> {
    let n = graph.n();
    if seeds.rows() != n {
        return Err(Error::Dimension(format!(
            "seed matrix has {} rows for {n} nodes",
            seeds.rows()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(c) = (0..seeds.cols()).find(|&c| (0..n).all(|i| seeds.get(i, c) <= 0.0)) {
        return Err(Error::InvalidData(format!("class {c} has no labeled node")));
    }
    let s = normalized_affinity(graph);
    // I − αS is symmetric positive definite since ‖S‖₂ ≤ 1.
    let system = DenseMatrix::identity(n).sub(&s.scale(alpha))?;
    let scores = linalg::cholesky_solve(&system, seeds)?.scale(1.0 - alpha);
    let hard_labels = row_argmax(&scores);
    Ok(LabelDistribution { scores, hard_labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(m(2, 2, &[0., 1., 0.5, 0.])).is_err());
        assert!(Graph::new(m(2, 2, &[1., 1., 1., 0.])).is_err());
        assert!(matches!(
            Graph::new(m(3, 3, &[0., 1., 0., 1., 0., 0., 0., 0., 0.])),
            Err(Error::IsolatedNode(2))
        ));
        assert!(Graph::new(m(2, 2, &[0., -1., -1., 0.])).is_err());
    }

    #[test]
    fn collinear_or_rule() {
        let pts = m(1, 3, &[0., 1., 2.]);
        let g = knn_graph(&pts, 1).unwrap();
        assert_eq!(g.neighbors(1), vec![0, 2]);
        assert_eq!(g.neighbors(0), vec![1]);
        // σ = 1 so the unit-distance edges weigh exp(−1/2).
        assert!((g.weights().get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn knn_rejects_large_k() {
        assert!(knn_graph(&m(1, 3, &[0., 1., 2.]), 3).is_err());
    }

    #[test]
    fn two_nodes_single_label() {
        let g = Graph::new(m(2, 2, &[0., 1., 1., 0.])).unwrap();
        let y = m(2, 2, &[1., 0., 0., 0.]);
        let err = label_propagate(&g, &y, 0.5).unwrap_err();
        assert!(err.to_string().contains("class 1"));
        let y = m(2, 1, &[1., 0.]);
        let f = label_propagate(&g, &y, 0.5).unwrap();
        assert_eq!(f.hard_labels, vec![0, 0]);
        assert!(f.scores.get(1, 0) > 0.0);
    }

    #[test]
    fn components_keep_their_label() {
        // 0-1-2 and 3-4, labeled at 0 (class 0) and 4 (class 1).
        let mut w = DenseMatrix::zeros(5, 5);
        for (i, j) in [(0, 1), (1, 2), (3, 4)] {
            w.set(i, j, 1.0);
            w.set(j, i, 1.0);
        }
        let g = Graph::new(w).unwrap();
        let mut y = DenseMatrix::zeros(5, 2);
        y.set(0, 0, 1.0);
        y.set(4, 1, 1.0);
        let f = label_propagate(&g, &y, 0.9).unwrap();
        assert_eq!(f.hard_labels, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(row_argmax(&m(2, 3, &[1., 1., 0., 0., 2., 2.])), vec![0, 1]);
    }
}
