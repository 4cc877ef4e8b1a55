mod common;

use common::*;
use jdzsl::linalg::DenseMatrix;
use jdzsl::params::Embedding;
use jdzsl::transductive::{
    knn_graph, knn_indices, label_propagate, nn_indices, taaw_assign, tsne_run, Graph,
};
use jdzsl::{HyperParams, UnseenPrototypes};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random sparse symmetric weights with a ring so no node is isolated.
fn random_graph(n: usize, g: &mut ChaCha8Rng) -> Graph {
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        let v = g.gen_range(0.1..1.0);
        w.set(i, j, v);
        w.set(j, i, v);
    }
    for i in 0..n {
        for j in i + 2..n {
            if g.gen_bool(0.2) {
                let v = g.gen_range(0.01..1.0);
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
    }
    Graph::new(w).unwrap()
}

fn random_seeds(n: usize, c: usize, g: &mut ChaCha8Rng) -> DenseMatrix {
    let mut y = DenseMatrix::zeros(n, c);
    for k in 0..c {
        y.set(k, k, 1.0);
    }
    for i in c..n {
        if g.gen_bool(0.3) {
            y.set(i, g.gen_range(0..c), 1.0);
        }
    }
    y
}

#[test]
fn propagation_matches_dense_inverse() {
    let mut g = rng(61);
    for _ in 0..20 {
        let n = g.gen_range(3..=30);
        let c = g.gen_range(1..=n.min(5));
        let graph = random_graph(n, &mut g);
        let y = random_seeds(n, c, &mut g);
        let alpha = g.gen_range(0.05..0.99);
        let got = label_propagate(&graph, &y, alpha).unwrap();
        let oracle = lp_oracle(graph.weights(), &y, alpha);
        assert!(got.scores.max_abs_diff(&oracle) < 1e-10);
    }
}

#[test]
fn small_alpha_keeps_the_seeds() {
    let mut g = rng(67);
    let graph = random_graph(12, &mut g);
    let y = random_seeds(12, 3, &mut g);
    let alpha = 1e-9;
    let f = label_propagate(&graph, &y, alpha).unwrap();
    assert!(f.scores.max_abs_diff(&y.scale(1.0 - alpha)) < 1e-8);
    assert_eq!(&f.hard_labels[..3], &[0, 1, 2]);
}

#[test]
fn knn_matches_brute_force() {
    let mut g = rng(71);
    for _ in 0..10 {
        let pts = gaussian(3, 25, &mut g);
        let k = g.gen_range(1..10);
        let got: Vec<Vec<usize>> = knn_indices(&pts, k)
            .unwrap()
            .into_iter()
            .map(|row| row.into_iter().map(|(j, _)| j).collect())
            .collect();
        assert_eq!(got, brute_knn(&pts, k));
    }
}

#[test]
fn knn_graph_uses_the_or_rule() {
    let mut g = rng(73);
    let pts = gaussian(2, 20, &mut g);
    let k = 3;
    let graph = knn_graph(&pts, k).unwrap();
    let nn = brute_knn(&pts, k);
    for i in 0..20 {
        for j in 0..20 {
            let linked = nn[i].contains(&j) || nn[j].contains(&i);
            assert_eq!(graph.weights().get(i, j) > 0.0, linked, "({i}, {j})");
        }
    }
}

#[test]
fn nearest_prototype_matches_brute_force() {
    let mut g = rng(79);
    let centers = gaussian(4, 7, &mut g);
    let protos = UnseenPrototypes::new(centers.clone(), (0..7).collect()).unwrap();
    let pts = gaussian(4, 50, &mut g);
    assert_eq!(nn_indices(&pts, &protos).unwrap(), brute_nn(&pts, &centers));
}

fn two_clusters(g: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(5, 40, |i, j| {
        let offset = if j < 20 && i == 0 { 20.0 } else { 0.0 };
        offset + g.gen_range(-1.0..1.0)
    })
}

#[test]
fn tsne_lowers_kl_and_keeps_clusters_apart() {
    let pts = two_clusters(&mut rng(83));
    let out = tsne_run(&pts, 2, 5.0, 500, 3).unwrap();
    assert!(out.kl_final < out.kl_initial, "{} -> {}", out.kl_initial, out.kl_final);
    // Every point's nearest embedded neighbor lies in its own cluster.
    let e = out.embedding;
    let nn = brute_knn(&e, 1);
    assert!(nn.iter().enumerate().all(|(i, row)| (row[0] < 20) == (i < 20)));
}

#[test]
fn tsne_is_deterministic_and_validates() {
    let pts = two_clusters(&mut rng(89));
    let a = tsne_run(&pts, 2, 5.0, 200, 11).unwrap();
    let b = tsne_run(&pts, 2, 5.0, 200, 11).unwrap();
    assert_eq!(a.embedding, b.embedding);
    assert!(tsne_run(&pts, 2, 13.0, 10, 0).is_err());
    assert!(tsne_run(&pts, 0, 5.0, 10, 0).is_err());
    assert!(tsne_run(&DenseMatrix::zeros(2, 3), 2, 0.5, 10, 0).is_err());
}

fn spread_protos() -> UnseenPrototypes {
    let z = DenseMatrix::from_fn(3, 4, |i, j| if i == j % 3 { 4.0 } else { 0.0 } + if j == 3 { 3.0 } else { 0.0 });
    UnseenPrototypes::new(z, vec![5, 6, 7, 8]).unwrap()
}

#[test]
fn copies_of_prototypes_get_their_labels() {
    let protos = spread_protos();
    let idx: Vec<usize> = (0..24).map(|i| i % 4).collect();
    let zhat = protos.attributes().select_columns(&idx);
    let expected: Vec<u32> = idx.iter().map(|&m| protos.labels()[m]).collect();
    for embedding in [Embedding::Identity, Embedding::Tsne] {
        let params = HyperParams { embedding, knn_k: 5, ..HyperParams::default() };
        let res = taaw_assign(&zhat, &protos, &params).unwrap();
        assert_eq!(res.labels, expected, "{embedding:?}");
    }
}

#[test]
fn taaw_is_permutation_equivariant_in_attribute_space() {
    let mut g = rng(97);
    let protos = spread_protos();
    let idx: Vec<usize> = (0..16).map(|i| i % 4).collect();
    let zhat = protos.attributes().select_columns(&idx).add(&gaussian(3, 16, &mut g).scale(0.3)).unwrap();
    let params = HyperParams { embedding: Embedding::Identity, knn_k: 4, ..HyperParams::default() };
    let base = taaw_assign(&zhat, &protos, &params).unwrap();
    let perm: Vec<usize> = (0..16).rev().collect();
    let shuffled = taaw_assign(&zhat.select_columns(&perm), &protos, &params).unwrap();
    let expected: Vec<u32> = perm.iter().map(|&j| base.labels[j]).collect();
    assert_eq!(shuffled.labels, expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn graph_weights_are_valid(seed in any::<u64>(), n in 3usize..20, dim in 1usize..4, k in 1usize..5) {
        let pts = gaussian(dim, n, &mut rng(seed));
        let graph = knn_graph(&pts, k.min(n - 1)).unwrap();
        let w = graph.weights();
        for i in 0..n {
            for j in 0..n {
                let v = w.get(i, j);
                prop_assert_eq!(v, w.get(j, i));
                prop_assert!(v <= 1.0 && v >= 0.0);
            }
            prop_assert!(!graph.neighbors(i).is_empty());
        }
    }

    #[test]
    fn propagated_scores_are_nonnegative(seed in any::<u64>(), n in 3usize..25, alpha in 0.01f64..0.99) {
        let mut g = rng(seed);
        let graph = random_graph(n, &mut g);
        let y = random_seeds(n, 2.min(n), &mut g);
        let f = label_propagate(&graph, &y, alpha).unwrap();
        prop_assert!(f.scores.data().iter().all(|&v| v >= -1e-12));
    }
}
