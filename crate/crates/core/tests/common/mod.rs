//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use jdzsl::linalg::DenseMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let cols_v: Vec<Vec<f64>> = (0..cols)
        .map(|_| {
            let v = gaussian_vec(rows, rng);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    DenseMatrix::from_columns(rows, &cols_v).unwrap()
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `w·‖t − D a‖² + l1·‖a‖₁` by explicit loops.
pub fn lasso_objective(d: &DenseMatrix, t: &[f64], w: f64, l1: f64, a: &[f64]) -> f64 {
    let mut fit = 0.0;
    for i in 0..d.rows() {
        let mut s = 0.0;
        for j in 0..d.cols() {
            s += d.get(i, j) * a[j];
        }
        fit += (t[i] - s) * (t[i] - s);
    }
    w * fit + l1 * a.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Cyclic coordinate descent run to a tight fixed point.
pub fn cd_lasso(d: &DenseMatrix, t: &[f64], w: f64, l1: f64) -> Vec<f64> {
    let (m, n) = d.shape();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| d.get(i, j)).collect()).collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut a = vec![0.0; n];
    let mut resid = t.to_vec();
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for j in 0..n {
            if sq[j] == 0.0 {
                continue;
            }
            let rho: f64 = cols[j].iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>() + sq[j] * a[j];
            let new = soft(rho, l1 / (2.0 * w)) / sq[j];
            let diff = new - a[j];
            if diff != 0.0 {
                for i in 0..m {
                    resid[i] -= diff * cols[j][i];
                }
                a[j] = new;
            }
            delta = delta.max(diff.abs());
        }
        if delta < 1e-15 {
            break;
        }
    }
    a
}

/// Central differences of `f` at `a` with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, a: &[f64], h: f64) -> Vec<f64> {
    let mut x = a.to_vec();
    (0..a.len())
        .map(|j| {
            x[j] = a[j] + h;
            let up = f(&x);
            x[j] = a[j] - h;
            let down = f(&x);
            x[j] = a[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `(1 − α)(I − α D^{−1/2} W D^{−1/2})⁻¹ Y` by explicit dense inversion.
pub fn lp_oracle(w: &DenseMatrix, y: &DenseMatrix, alpha: f64) -> DenseMatrix {
    let n = w.rows();
    let w = to_na(w);
    let deg: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (deg[i] * deg[j]).sqrt());
    let sys = DMatrix::identity(n, n) - s * alpha;
    let inv = sys.try_inverse().expect("invertible");
    from_na(&(inv * to_na(y) * (1.0 - alpha)))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// kNN by sorting every full distance row; ties by lower index.
pub fn brute_knn(points: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    let cols = points.columns();
    (0..cols.len())
        .map(|i| {
            let mut all: Vec<(f64, usize)> = (0..cols.len())
                .filter(|&j| j != i)
                .map(|j| (euclid(&cols[i], &cols[j]), j))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Nearest column of `centers` for every column of `points`, first on ties.
pub fn brute_nn(points: &DenseMatrix, centers: &DenseMatrix) -> Vec<usize> {
    let c = centers.columns();
    points
        .columns()
        .iter()
        .map(|p| {
            let mut best = 0;
            for m in 1..c.len() {
                if euclid(p, &c[m]) < euclid(p, &c[best]) {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// hit@K by fully sorting each score row.
pub fn brute_hit_at_k(scores: &DenseMatrix, truth: &[usize], k: usize) -> f64 {
    let mut hits = 0;
    for i in 0..scores.rows() {
        let mut order: Vec<usize> = (0..scores.cols()).collect();
        order.sort_by(|&a, &b| {
            scores
                .get(i, b)
                .partial_cmp(&scores.get(i, a))
                .unwrap()
                .then(a.cmp(&b))
        });
        if order[..k].contains(&truth[i]) {
            hits += 1;
        }
    }
    hits as f64 / scores.rows() as f64
}
