//! Attribute prediction for unseen images.
//!
//! The attribute-agnostic (AAg) predictor sparse-codes a feature vector against
//! `D_x` and decodes `ẑ = D_z a`. The attribute-aware (AAw) predictor adds
//! `γ·H(p(a))`, the entropy of the Student-t soft assignment of `D_z a` to the
//! unseen prototypes, and minimizes by proximal gradient from the AAg code.

use std::str::FromStr;

use crate::data::{ClassId, UnseenPrototypes};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::joint_dict::JointDictionary;
use crate::linalg::{self, DenseMatrix};
use crate::params::HyperParams;
use crate::sparse_opt::{fista_lasso, lipschitz_step, soft_threshold, LassoProblem, SolveReport};
use crate::transductive::nn_assign;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredictMode {
    Aag,
    Aaw,
}

impl FromStr for PredictMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aag" => Ok(Self::Aag),
            "aaw" => Ok(Self::Aaw),
            other => Err(Error::InvalidParam(format!("unknown mode '{other}'"))),
        }
    }
}

/// Student-t soft assignment of one predicted attribute vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftAssignment {
    pub probs: Vec<f64>,
    pub entropy: f64,
}

/// Per-prototype quantities at a given `ẑ`.
struct Kernel {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    /// `(ẑ − z'_m)` per prototype.
    diffs: Vec<Vec<f64>>,
    /// `1 + ‖ẑ − z'_m‖²/ρ`.
    denoms: Vec<f64>,
}

impl Kernel {
    fn new(zhat: &[f64], protos: &UnseenPrototypes, rho: f64) -> Self {
        let m = protos.len();
        let z = protos.attributes();
        let mut diffs = Vec::with_capacity(m);
        let mut denoms = Vec::with_capacity(m);
        let mut log_l = Vec::with_capacity(m);
        for k in 0..m {
            let diff: Vec<f64> = zhat.iter().enumerate().map(|(i, v)| v - z.get(i, k)).collect();
            let d2 = linalg::dot(&diff, &diff);
            denoms.push(1.0 + d2 / rho);
            log_l.push(-0.5 * (rho + 1.0) * (d2 / rho).ln_1p());
            diffs.push(diff);
        }
        let top = log_l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + log_l.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = log_l.iter().map(|v| v - lse).collect();
        let probs = log_probs.iter().map(|v| v.exp()).collect();
        Self {
            probs,
            log_probs,
            diffs,
            denoms,
        }
    }

    fn entropy(&self) -> f64 {
        let h: f64 = self
            .probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, lp)| -p * lp)
            .sum();
        h.max(0.0)
    }

    /// `∇_ẑ H`. With `u_m = ∇ log l_m = −((ρ+1)/ρ)(ẑ − z'_m)/(1 + d_m/ρ)` and
    /// `∇p_m = p_m (u_m − Σ_k p_k u_k)`, the entropy gradient is
    /// `−Σ_m (1 + log p_m) ∇p_m = −Σ_m p_m log p_m (u_m − ū)`.
    fn entropy_grad(&self, rho: f64) -> Vec<f64> {
        let q = self.diffs.first().map_or(0, Vec::len);
        let c = -(rho + 1.0) / rho;
        let mut u_bar = vec![0.0; q];
        let mut weighted = vec![0.0; q];
        let mut plogp_sum = 0.0;
        for (k, diff) in self.diffs.iter().enumerate() {
            let p = self.probs[k];
            if p == 0.0 {
                continue;
            }
            let plogp = p * self.log_probs[k];
            plogp_sum += plogp;
            let s = c / self.denoms[k];
            linalg::axpy(p * s, diff, &mut u_bar);
            linalg::axpy(plogp * s, diff, &mut weighted);
        }
        // −Σ p log p · u_m + (Σ p log p) · ū
        weighted
            .iter()
            .zip(&u_bar)
            .map(|(w, u)| -w + plogp_sum * u)
            .collect()
    }
}

/// Student-t soft assignment of `zhat` to the prototypes.
pub fn soft_assign(zhat: &[f64], protos: &UnseenPrototypes, rho: f64) -> SoftAssignment {
    let k = Kernel::new(zhat, protos, rho);
    let entropy = k.entropy();
    SoftAssignment {
        probs: k.probs,
        entropy,
    }
}

fn check_sample(dict: &JointDictionary, x: &[f64]) -> Result<()> {
    if x.len() != dict.feature_dim() {
        return Err(Error::Dimension(format!(
            "feature vector has length {} but D_x has {} rows",
            x.len(),
            dict.feature_dim()
        )));
    }
    Ok(())
}

fn check_protos(dict: &JointDictionary, protos: &UnseenPrototypes) -> Result<()> {
    if protos.dim() != dict.attribute_dim() {
        return Err(Error::Dimension(format!(
            "prototypes have dimension {} but D_z has {} rows",
            protos.dim(),
            dict.attribute_dim()
        )));
    }
    if protos.is_empty() {
        return Err(Error::InvalidData("no unseen prototypes".into()));
    }
    Ok(())
}

/// Smooth part `g(a) = (1/p)‖x − D_x a‖² + γ·H(p(D_z a))`.
pub fn aaw_smooth_objective(
    a: &[f64],
    x: &[f64],
    dict: &JointDictionary,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> f64 {
    let p = dict.feature_dim() as f64;
    let fit = linalg::sq_dist(&dict.dx().matvec(a), x) / p;
    if params.gamma == 0.0 {
        return fit;
    }
    let zhat = dict.dz().matvec(a);
    fit + params.gamma * Kernel::new(&zhat, protos, params.rho).entropy()
}

/// Full attribute-aware objective `g(a) + (λ/r)‖a‖₁`.
pub fn aaw_objective(
    a: &[f64],
    x: &[f64],
    dict: &JointDictionary,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> f64 {
    let l1: f64 = a.iter().map(|v| v.abs()).sum();
    aaw_smooth_objective(a, x, dict, protos, params) + params.lambda / dict.r() as f64 * l1
}

/// Analytic gradient of [`aaw_smooth_objective`].
///
/// The data term contributes `(2/p) D_xᵀ(D_x a − x)`; the entropy term
/// `γ D_zᵀ ∇_ẑ H`. This is the quotient-rule expansion over `l_m` and
/// `∂l_m/∂a` written in terms of `p_m`, with the factor 2 of the quadratic kept.
pub fn grad_g(
    a: &[f64],
    x: &[f64],
    dict: &JointDictionary,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Vec<f64> {
    let p = dict.feature_dim() as f64;
    let mut resid = dict.dx().matvec(a);
    for (ri, xi) in resid.iter_mut().zip(x) {
        *ri = 2.0 / p * (*ri - xi);
    }
    let mut grad = dict.dx().matvec_t(&resid);
    if params.gamma != 0.0 {
        let zhat = dict.dz().matvec(a);
        let gz = Kernel::new(&zhat, protos, params.rho).entropy_grad(params.rho);
        let ga = dict.dz().matvec_t(&gz);
        linalg::axpy(params.gamma, &ga, &mut grad);
    }
    grad
}

fn aag_report(dict: &JointDictionary, x: &[f64], params: &HyperParams) -> Result<SolveReport> {
    check_sample(dict, x)?;
    let problem = LassoProblem::new(
        dict.dx(),
        x,
        1.0 / dict.feature_dim() as f64,
        params.lambda / dict.r() as f64,
    )?;
    fista_lasso(&problem, &vec![0.0; dict.r()], params.fista_max_iter, params.fista_tol)
}

/// Attribute-agnostic code of one feature vector.
pub fn predict_aag(dict: &JointDictionary, x: &[f64], params: &HyperParams) -> Result<Vec<f64>> {
    Ok(aag_report(dict, x, params)?.solution)
}

/// Attribute-aware code of one feature vector.
///
/// The iteration `a ← soft(a − t∇g(a), tλ/r)` starts at the AAg code and the
/// iterate with the lowest objective is returned. `report.objective_trace`
/// holds the objective along the iterates, starting at the AAg code.
pub fn predict_aaw(
    dict: &JointDictionary,
    x: &[f64],
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Result<(Vec<f64>, SolveReport)> {
    check_protos(dict, protos)?;
    let a0 = predict_aag(dict, x, params)?;
    aaw_from(dict, x, protos, params, a0)
}

fn aaw_from(
    dict: &JointDictionary,
    x: &[f64],
    protos: &UnseenPrototypes,
    params: &HyperParams,
    a0: Vec<f64>,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut step = match params.aaw_step {
        Some(t) => t,
        None => lipschitz_step(dict.dx(), 1.0 / dict.feature_dim() as f64)?,
    };
    let l1 = params.lambda / dict.r() as f64;
    let objective = |a: &[f64]| aaw_objective(a, x, dict, protos, params);
    let prox_step = |a: &[f64], t: f64| -> Result<Vec<f64>> {
        let g = grad_g(a, x, dict, protos, params);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::AawDivergence);
        }
        Ok(a.iter()
            .zip(&g)
            .map(|(ai, gi)| soft_threshold(ai - t * gi, t * l1))
            .collect())
    };

    let f0 = objective(&a0);
    let mut trace = vec![f0];
    let mut best = a0.clone();
    let mut f_best = f0;
    let mut a = a0;
    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=params.aaw_max_iter {
        iterations = k;
        let mut next = prox_step(&a, step)?;
        let mut f = objective(&next);
        if k == 1 && f > f0 {
            step *= 0.5;
            next = prox_step(&a, step)?;
            f = objective(&next);
        }
        if !f.is_finite() {
            return Err(Error::AawDivergence);
        }
        trace.push(f);
        let change = linalg::sq_dist(&next, &a).sqrt() / linalg::norm(&a).max(f64::MIN_POSITIVE);
        if f < f_best {
            f_best = f;
            best.clone_from(&next);
        }
        a = next;
        if change < params.fista_tol {
            converged = true;
            break;
        }
    }
    let report = SolveReport {
        solution: best.clone(),
        objective_trace: trace,
        iterations,
        converged,
    };
    Ok((best, report))
}

/// Predictions for a batch of unseen feature vectors (one per column).
#[derive(Clone, Debug)]
pub struct PredictionResult {
    /// `r × l`.
    pub codes: DenseMatrix,
    /// `q × l`, always `D_z · codes`.
    pub predicted_attributes: DenseMatrix,
    pub assignments: Vec<SoftAssignment>,
    /// Nearest-prototype labels of the predicted attributes.
    pub labels: Vec<ClassId>,
}

impl PredictionResult {
    /// Soft assignments as an `l × M` score matrix.
    pub fn score_matrix(&self) -> DenseMatrix {
        let m = self.assignments.first().map_or(0, |s| s.probs.len());
        DenseMatrix::from_fn(self.assignments.len(), m, |i, j| self.assignments[i].probs[j])
    }

    pub fn mean_entropy(&self) -> f64 {
        if self.assignments.is_empty() {
            return 0.0;
        }
        self.assignments.iter().map(|s| s.entropy).sum::<f64>() / self.assignments.len() as f64
    }
}

pub fn predict_batch(
    dict: &JointDictionary,
    features: &DenseMatrix,
    protos: &UnseenPrototypes,
    params: &HyperParams,
    mode: PredictMode,
) -> Result<PredictionResult> {
    predict_batch_with(dict, features, protos, params, mode, Parallelism::default())
}

/// [`predict_batch`] with explicit scheduling of the per-column solves.
pub fn predict_batch_with(
    dict: &JointDictionary,
    features: &DenseMatrix,
    protos: &UnseenPrototypes,
    params: &HyperParams,
    mode: PredictMode,
    parallelism: Parallelism,
) -> Result<PredictionResult> {
    check_protos(dict, protos)?;
    if features.rows() != dict.feature_dim() {
        return Err(Error::Dimension(format!(
            "test features have dimension {} but D_x has {} rows",
            features.rows(),
            dict.feature_dim()
        )));
    }
    let codes = exec::try_map_indexed(parallelism, features.cols(), |j| {
        let x = features.col(j);
        match mode {
            PredictMode::Aag => predict_aag(dict, &x, params),
            PredictMode::Aaw => predict_aaw(dict, &x, protos, params).map(|(a, _)| a),
        }
    })?;
    let codes = DenseMatrix::from_columns(dict.r(), &codes)?;
    let zhat = dict.dz().matmul(&codes)?;
    let assignments = (0..zhat.cols())
        .map(|j| soft_assign(&zhat.col(j), protos, params.rho))
        .collect();
    let labels = nn_assign(&zhat, protos)?;
    Ok(PredictionResult {
        codes,
        predicted_attributes: zhat,
        assignments,
        labels,
    })
}
