//! Exact t-SNE (no tree or grid acceleration).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

const BISECTION_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;
const LEARNING_RATE: f64 = 200.0;
const EXAGGERATION: f64 = 4.0;
const EXAGGERATION_ITERS: usize = 100;
const MOMENTUM_SWITCH: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const INIT_SCALE: f64 = 1e-4;

/// Embedding together with its KL divergence before and after optimization.
#[derive(Clone, Debug)]
pub struct TsneOutput {
    /// `out_dim × n`; one embedded point per column.
    pub embedding: DenseMatrix,
    pub kl_initial: f64,
    pub kl_final: f64,
}

/// Embeds the columns of `points` into `out_dim` dimensions.
pub fn tsne_embed(
    points: &DenseMatrix,
    out_dim: usize,
    perplexity: f64,
    iters: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    Ok(tsne_run(points, out_dim, perplexity, iters, seed)?.embedding)
}

pub fn tsne_run(
    points: &DenseMatrix,
    out_dim: usize,
    perplexity: f64,
    iters: usize,
    seed: u64,
) -> Result<TsneOutput> {
    let n = points.cols();
    if n < 4 {
        return Err(Error::InvalidData(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if !(perplexity > 0.0 && perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(Error::InvalidParam(format!(
            "perplexity {perplexity} must lie in (0, {}) for {n} points",
            (n as f64 - 1.0) / 3.0
        )));
    }
    if out_dim == 0 {
        return Err(Error::InvalidParam("out_dim must be >= 1".into()));
    }

    let cols = points.columns();
    let d2 = pairwise_sq_dists(&cols);
    let p = joint_affinities(&d2, n, perplexity);
    let mut y = initial_layout(&cols, out_dim, seed);
    let kl_initial = kl_divergence(&p, &y, n, out_dim);

    let mut velocity = vec![0.0; n * out_dim];
    let mut gains = vec![1.0; n * out_dim];
    let mut grad = vec![0.0; n * out_dim];
    let mut num = vec![0.0; n * n];
    for it in 0..iters {
        let exaggeration = if it < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if it < MOMENTUM_SWITCH { INITIAL_MOMENTUM } else { FINAL_MOMENTUM };
        gradient(&p, &y, n, out_dim, exaggeration, &mut num, &mut grad);
        for k in 0..n * out_dim {
            gains[k] = if (grad[k] > 0.0) != (velocity[k] > 0.0) {
                gains[k] + 0.2_f64
            } else {
                gains[k] * 0.8
            }
            .max(MIN_GAIN);
            velocity[k] = momentum * velocity[k] - LEARNING_RATE * gains[k] * grad[k];
            y[k] += velocity[k];
        }
        center(&mut y, n, out_dim);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence);
    }
    let kl_final = kl_divergence(&p, &y, n, out_dim);
    let embedding = DenseMatrix::from_fn(out_dim, n, |d, i| y[i * out_dim + d]);
    Ok(TsneOutput {
        embedding,
        kl_initial,
        kl_final,
    })
}

fn pairwise_sq_dists(cols: &[Vec<f64>]) -> Vec<f64> {
    let n = cols.len();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = linalg::sq_dist(&cols[i], &cols[j]);
            d2[i * n + j] = v;
            d2[j * n + i] = v;
        }
    }
    d2
}

/// Row `i` of the conditional Gaussian affinities at precision `beta`, and its
/// Shannon entropy (nats). Distances are shifted by the row minimum, which
/// cancels in the normalization.
fn conditional_row(d2_row: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let shift = d2_row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, &v) in d2_row.iter().enumerate() {
        if j == i {
            out[j] = 0.0;
            continue;
        }
        let s = v - shift;
        let e = (-beta * s).exp();
        out[j] = e;
        sum += e;
        weighted += s * e;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Bisects the precision of row `i` until its entropy matches `ln(perplexity)`;
/// leaves the conditional distribution in `out` and returns the entropy.
fn fit_bandwidth(d2_row: &[f64], i: usize, perplexity: f64, out: &mut [f64]) -> f64 {
    let target = perplexity.ln();
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut h = conditional_row(d2_row, i, beta, out);
    for _ in 0..BISECTION_STEPS {
        let diff = h - target;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        h = conditional_row(d2_row, i, beta, out);
    }
    h
}

/// Symmetrized affinities `P = (P_{j|i} + P_{i|j}) / 2n`.
fn joint_affinities(d2: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        fit_bandwidth(&d2[i * n..(i + 1) * n], i, perplexity, &mut cond[i * n..(i + 1) * n]);
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    p
}

/// Small Gaussian start. Each point's draw is seeded from its coordinates, so
/// reordering the input reorders the start identically.
fn initial_layout(cols: &[Vec<f64>], out_dim: usize, seed: u64) -> Vec<f64> {
    let mut y = Vec::with_capacity(cols.len() * out_dim);
    for c in cols {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for v in c {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
            h ^= h >> 29;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        for _ in 0..out_dim {
            let g: f64 = rng.sample(StandardNormal);
            y.push(INIT_SCALE * g);
        }
    }
    y
}

fn student_kernel(y: &[f64], n: usize, dim: usize, num: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let d = linalg::sq_dist(&y[i * dim..(i + 1) * dim], &y[j * dim..(j + 1) * dim]);
            let v = 1.0 / (1.0 + d);
            num[i * n + j] = v;
            num[j * n + i] = v;
            total += 2.0 * v;
        }
    }
    total
}

fn gradient(p: &[f64], y: &[f64], n: usize, dim: usize, exaggeration: f64, num: &mut [f64], grad: &mut [f64]) {
    let total = student_kernel(y, n, dim, num);
    grad.iter_mut().for_each(|g| *g = 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let q = (w / total).max(1e-12);
            let f = 4.0 * (exaggeration * p[i * n + j] - q) * w;
            for d in 0..dim {
                grad[i * dim + d] += f * (y[i * dim + d] - y[j * dim + d]);
            }
        }
    }
}

fn center(y: &mut [f64], n: usize, dim: usize) {
    for d in 0..dim {
        let mean = (0..n).map(|i| y[i * dim + d]).sum::<f64>() / n as f64;
        for i in 0..n {
            y[i * dim + d] -= mean;
        }
    }
}

fn kl_divergence(p: &[f64], y: &[f64], n: usize, dim: usize) -> f64 {
    let mut num = vec![0.0; n * n];
    let total = student_kernel(y, n, dim, &mut num);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                let qij = (num[i * n + j] / total).max(1e-12);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}
