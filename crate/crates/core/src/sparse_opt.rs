//! Proximal-gradient machinery shared by training and prediction:
//! soft-thresholding, spectral step sizes, and a monotone FISTA LASSO solver.

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::linalg::{self, DenseMatrix};

/// Power-iteration cap for spectral-norm estimates.
pub const POWER_ITERS: usize = 500;
/// Relative tolerance on successive Rayleigh quotients.
pub const POWER_TOL: f64 = 1e-12;

/// Scalar proximal map of `tau·|u|`.
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    v.signum() * (v.abs() - tau).max(0.0)
}

/// Squared spectral norm `σ_max(design)²`, estimated by power iteration on `DᵀD`.
pub fn spectral_norm_sq(design: &DenseMatrix) -> f64 {
    let mut tmp = vec![0.0; design.rows()];
    linalg::power_iteration_top_eig(
        design.cols(),
        |v, out| {
            design.matvec_into(v, &mut tmp);
            design.matvec_t_into(&tmp, out);
        },
        POWER_ITERS,
        POWER_TOL,
    )
}

/// Step `1/L` for the smooth term `data_weight·‖t − D a‖²`, `L = 2·data_weight·σ_max²`.
pub fn lipschitz_step(design: &DenseMatrix, data_weight: f64) -> Result<f64> {
    if design.is_empty() {
        return Err(Error::DegenerateDesign);
    }
    if !(data_weight > 0.0 && data_weight.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "data_weight must be positive, got {data_weight}"
        )));
    }
    let s2 = spectral_norm_sq(design);
    if s2 <= 0.0 || !s2.is_finite() {
        return Err(Error::DegenerateDesign);
    }
    Ok(1.0 / (2.0 * data_weight * s2))
}

/// `min_a data_weight·‖target − design·a‖² + l1_weight·‖a‖₁`.
#[derive(Clone, Copy, Debug)]
pub struct LassoProblem<'a> {
    design: &'a DenseMatrix,
    target: &'a [f64],
    data_weight: f64,
    l1_weight: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(
        design: &'a DenseMatrix,
        target: &'a [f64],
        data_weight: f64,
        l1_weight: f64,
    ) -> Result<Self> {
        if design.rows() != target.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows but target has length {}",
                design.rows(),
                target.len()
            )));
        }
        if !(data_weight > 0.0 && data_weight.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "data_weight must be positive, got {data_weight}"
            )));
        }
        if !(l1_weight >= 0.0 && l1_weight.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "l1_weight must be nonnegative, got {l1_weight}"
            )));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lasso target"));
        }
        Ok(Self {
            design,
            target,
            data_weight,
            l1_weight,
        })
    }

    pub fn design(&self) -> &DenseMatrix {
        self.design
    }

    pub fn target(&self) -> &[f64] {
        self.target
    }

    pub fn objective(&self, a: &[f64]) -> f64 {
        let fit = self.design.matvec(a);
        self.objective_from_fit(a, &fit)
    }

    fn objective_from_fit(&self, a: &[f64], fit: &[f64]) -> f64 {
        let r2 = linalg::sq_dist(fit, self.target);
        let l1: f64 = a.iter().map(|v| v.abs()).sum();
        self.data_weight * r2 + self.l1_weight * l1
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// Objective at the current iterate: entry 0 is the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// Iteration controls for [`fista_lasso`] and the batch coder.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub parallelism: Parallelism,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-7,
            parallelism: Parallelism::default(),
        }
    }
}

/// Monotone FISTA for [`LassoProblem`] with a fixed `1/L` step.
///
/// `converged` is set once an accepted step changes the objective by less than
/// `tol` relative to the previous value.
pub fn fista_lasso(
    problem: &LassoProblem<'_>,
    init: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport> {
    let step = lipschitz_step(problem.design, problem.data_weight)?;
    let dead = dead_columns(problem.design);
    fista_with_step(problem, init, step, &dead, max_iter, tol)
}

fn dead_columns(design: &DenseMatrix) -> Vec<bool> {
    (0..design.cols()).map(|j| design.col_norm(j) == 0.0).collect()
}

pub(crate) fn fista_with_step(
    problem: &LassoProblem<'_>,
    init: &[f64],
    step: f64,
    dead: &[bool],
    max_iter: usize,
    tol: f64,
) -> Result<SolveReport> {
    let d = problem.design;
    let r = d.cols();
    if init.len() != r {
        return Err(Error::Dimension(format!(
            "init has length {} but design has {r} columns",
            init.len()
        )));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso init"));
    }

    let mut x: Vec<f64> = init
        .iter()
        .zip(dead)
        .map(|(&v, &z)| if z { 0.0 } else { v })
        .collect();
    let mut dx = d.matvec(&x);
    let mut fx = problem.objective_from_fit(&x, &dx);
    let mut y = x.clone();
    let mut dy = dx.clone();
    let mut z = vec![0.0; r];
    let mut dz = vec![0.0; d.rows()];
    let mut resid = vec![0.0; d.rows()];
    let mut grad = vec![0.0; r];
    let mut theta = 1.0_f64;
    let mut restarted = true;

    let thresh = step * problem.l1_weight;
    let gscale = 2.0 * problem.data_weight;

    let mut trace = Vec::with_capacity(max_iter.min(4096) + 1);
    trace.push(fx);
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=max_iter {
        iterations = it;
        for ((ri, dyi), ti) in resid.iter_mut().zip(&dy).zip(problem.target) {
            *ri = gscale * (dyi - ti);
        }
        d.matvec_t_into(&resid, &mut grad);
        for j in 0..r {
            z[j] = if dead[j] {
                0.0
            } else {
                soft_threshold(y[j] - step * grad[j], thresh)
            };
        }
        d.matvec_into(&z, &mut dz);
        let fz = problem.objective_from_fit(&z, &dz);
        if !fz.is_finite() {
            return Err(Error::NonFinite("fista objective"));
        }

        if fz <= fx {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            for j in 0..r {
                y[j] = z[j] + beta * (z[j] - x[j]);
            }
            for i in 0..dy.len() {
                dy[i] = dz[i] + beta * (dz[i] - dx[i]);
            }
            let rel = (fx - fz) / fx.abs().max(f64::MIN_POSITIVE);
            std::mem::swap(&mut x, &mut z);
            std::mem::swap(&mut dx, &mut dz);
            fx = fz;
            theta = theta_next;
            restarted = false;
            trace.push(fx);
            if rel < tol {
                converged = true;
                break;
            }
        } else {
            trace.push(fx);
            if restarted {
                // A plain proximal step from the best point no longer descends.
                converged = true;
                break;
            }
            theta = 1.0;
            y.copy_from_slice(&x);
            dy.copy_from_slice(&dx);
            restarted = true;
        }
    }

    Ok(SolveReport {
        solution: x,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Codes every column of `targets` against `design` from a zero start.
pub fn batch_sparse_code(
    design: &DenseMatrix,
    targets: &DenseMatrix,
    data_weight: f64,
    l1_weight: f64,
    opts: &SolverOptions,
) -> Result<DenseMatrix> {
    batch_sparse_code_warm(design, targets, data_weight, l1_weight, opts, None)
}

/// Like [`batch_sparse_code`], starting column `j` from `warm[:, j]` when given.
pub fn batch_sparse_code_warm(
    design: &DenseMatrix,
    targets: &DenseMatrix,
    data_weight: f64,
    l1_weight: f64,
    opts: &SolverOptions,
    warm: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    if design.rows() != targets.rows() {
        return Err(Error::Dimension(format!(
            "design has {} rows but targets have {}",
            design.rows(),
            targets.rows()
        )));
    }
    let r = design.cols();
    if let Some(w) = warm {
        if w.shape() != (r, targets.cols()) {
            return Err(Error::Dimension(format!(
                "warm start is {:?}, expected {:?}",
                w.shape(),
                (r, targets.cols())
            )));
        }
    }
    if targets.cols() == 0 {
        return Ok(DenseMatrix::zeros(r, 0));
    }
    let step = lipschitz_step(design, data_weight)?;
    let dead = dead_columns(design);
    let cols = exec::try_map_indexed(opts.parallelism, targets.cols(), |j| {
        let target = targets.col(j);
        let problem = LassoProblem::new(design, &target, data_weight, l1_weight)?;
        let init = match warm {
            Some(w) => w.col(j),
            None => vec![0.0; r],
        };
        fista_with_step(&problem, &init, step, &dead, opts.max_iter, opts.tol)
            .map(|rep| rep.solution)
    })?;
    DenseMatrix::from_columns(r, &cols)
}
