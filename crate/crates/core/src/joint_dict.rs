//! Coupled visual/attribute dictionaries learned by alternating minimization.
//!
//! The full objective over `(D_x, D_z, A, B)` is
//!
//! ```text
//! 1/(Np)·(‖X − D_x A‖² + pλ/r·‖A‖₁) + 1/(Nq)·‖Z − D_z A‖²
//!   + 1/(Mq)·(‖Z' − D_z B‖² + qλ/r·‖B‖₁)
//! ```
//!
//! subject to every dictionary column having norm at most one. A training
//! round first refits `D_z` against the visual codes of `X`, then refits `D_x`
//! against the attribute codes of `Z`; the shared codes are then re-solved
//! jointly. Rounds that would raise the objective are replaced by a plain
//! block-descent round so the recorded trace never goes up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{SeenDataset, UnseenPrototypes};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::params::HyperParams;
use crate::sparse_opt::{batch_sparse_code_warm, SolverOptions};

/// Slack for floating-point noise when comparing objectives across rounds.
pub const DESCENT_SLACK: f64 = 1e-8;
/// Column-norm tolerance of the feasible set.
pub const NORM_TOL: f64 = 1e-9;

const DICT_DESCENT_ITERS: usize = 200;
const DICT_DESCENT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct JointDictionary {
    dx: DenseMatrix,
    dz: DenseMatrix,
}

impl JointDictionary {
    /// Pairs a visual dictionary (`p × r`) with an attribute dictionary (`q × r`).
    pub fn new(dx: DenseMatrix, dz: DenseMatrix) -> Result<Self> {
        if dx.cols() != dz.cols() {
            return Err(Error::Dimension(format!(
                "D_x has {} atoms but D_z has {}",
                dx.cols(),
                dz.cols()
            )));
        }
        if !dx.all_finite() || !dz.all_finite() {
            return Err(Error::NonFinite("dictionary"));
        }
        Ok(Self { dx, dz })
    }

    pub fn dx(&self) -> &DenseMatrix {
        &self.dx
    }

    pub fn dz(&self) -> &DenseMatrix {
        &self.dz
    }

    pub fn r(&self) -> usize {
        self.dx.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.dx.rows()
    }

    pub fn attribute_dim(&self) -> usize {
        self.dz.rows()
    }

    /// Largest column norm over both dictionaries.
    pub fn max_column_norm(&self) -> f64 {
        let cn = |d: &DenseMatrix| (0..d.cols()).map(|j| d.col_norm(j)).fold(0.0, f64::max);
        cn(&self.dx).max(cn(&self.dz))
    }

    pub fn is_feasible(&self) -> bool {
        self.max_column_norm() <= 1.0 + NORM_TOL
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Objective at initialization (zero codes), then after every round.
    pub objective_trace: Vec<f64>,
    /// Shared codes of the seen samples, `r × N`.
    pub codes_seen: DenseMatrix,
    /// Codes of the unseen prototypes, `r × M`.
    pub codes_unseen: DenseMatrix,
    /// Rounds where the alternating update was replaced by block descent.
    pub fallback_rounds: usize,
    /// Largest dictionary column norm observed after each round.
    pub max_column_norms: Vec<f64>,
}

fn solver_opts(params: &HyperParams) -> SolverOptions {
    SolverOptions {
        max_iter: params.fista_max_iter,
        tol: params.fista_tol,
        ..SolverOptions::default()
    }
}

fn unit_gaussian_dictionary(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut d = DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    for j in 0..cols {
        let n = d.col_norm(j);
        let c: Vec<f64> = d.col(j).iter().map(|v| v / n).collect();
        d.set_col(j, &c);
    }
    d
}

/// Seeded Gaussian dictionaries with unit-norm columns.
pub fn init_dictionaries(p: usize, q: usize, params: &HyperParams) -> Result<JointDictionary> {
    let max_pq = p.max(q);
    if params.r <= max_pq {
        return Err(Error::UnderComplete {
            r: params.r,
            max_pq,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let dx = unit_gaussian_dictionary(p, params.r, &mut rng);
    let dz = unit_gaussian_dictionary(q, params.r, &mut rng);
    JointDictionary::new(dx, dz)
}

/// Projects onto `{D : ‖D[:, i]‖ ≤ 1}`: longer columns are rescaled, the rest kept.
pub fn project_columns(d: &DenseMatrix) -> DenseMatrix {
    let mut out = d.clone();
    for j in 0..d.cols() {
        let n = d.col_norm(j);
        if n > 1.0 {
            let c: Vec<f64> = d.col(j).iter().map(|v| v / n).collect();
            out.set_col(j, &c);
        }
    }
    out
}

fn check_shapes(
    dict: &JointDictionary,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<()> {
    let r = dict.r();
    if data.feature_dim() != dict.feature_dim() {
        return Err(Error::Dimension(format!(
            "features have dimension {} but D_x has {} rows",
            data.feature_dim(),
            dict.feature_dim()
        )));
    }
    if data.attribute_dim() != dict.attribute_dim() || protos.dim() != dict.attribute_dim() {
        return Err(Error::Dimension(format!(
            "attributes have dimension {}/{} but D_z has {} rows",
            data.attribute_dim(),
            protos.dim(),
            dict.attribute_dim()
        )));
    }
    if a.shape() != (r, data.len()) {
        return Err(Error::Dimension(format!(
            "A is {:?}, expected {:?}",
            a.shape(),
            (r, data.len())
        )));
    }
    if b.shape() != (r, protos.len()) {
        return Err(Error::Dimension(format!(
            "B is {:?}, expected {:?}",
            b.shape(),
            (r, protos.len())
        )));
    }
    Ok(())
}

/// Value of the joint objective. Terms whose sample count is zero are dropped.
pub fn joint_objective(
    dict: &JointDictionary,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    a: &DenseMatrix,
    b: &DenseMatrix,
    params: &HyperParams,
) -> Result<f64> {
    check_shapes(dict, data, protos, a, b)?;
    let (p, q, r) = (dict.feature_dim() as f64, dict.attribute_dim() as f64, dict.r() as f64);
    let (n, m) = (data.len() as f64, protos.len() as f64);
    let lambda = params.lambda;
    let mut total = 0.0;
    if data.len() > 0 {
        let x_res = data.features().sub(&dict.dx.matmul(a)?)?.frobenius_sq();
        let z_res = data.attributes().sub(&dict.dz.matmul(a)?)?.frobenius_sq();
        total += (x_res + p * lambda / r * a.abs_sum()) / (n * p) + z_res / (n * q);
    }
    if protos.len() > 0 {
        let zp_res = protos.attributes().sub(&dict.dz.matmul(b)?)?.frobenius_sq();
        total += (zp_res + q * lambda / r * b.abs_sum()) / (m * q);
    }
    Ok(total)
}

/// Objective of the `D_z` subproblem for fixed visual codes `a`.
pub fn dz_subproblem_objective(
    dz: &DenseMatrix,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    a: &DenseMatrix,
    b: &DenseMatrix,
    params: &HyperParams,
) -> Result<f64> {
    let q = dz.rows() as f64;
    let r = dz.cols() as f64;
    let mut total = 0.0;
    if data.len() > 0 {
        total += data.attributes().sub(&dz.matmul(a)?)?.frobenius_sq() / (data.len() as f64 * q);
    }
    if protos.len() > 0 {
        let m = protos.len() as f64;
        let res = protos.attributes().sub(&dz.matmul(b)?)?.frobenius_sq();
        total += (res + q * params.lambda / r * b.abs_sum()) / (m * q);
    }
    Ok(total)
}

/// One least-squares block `w·‖targets − D·codes‖²_F` of a dictionary subproblem.
struct FitTerm<'a> {
    targets: &'a DenseMatrix,
    codes: &'a DenseMatrix,
    weight: f64,
}

/// Quadratic `f(D) = ½⟨D H, D⟩ − ⟨C, D⟩` gathered from [`FitTerm`]s, equal to
/// their sum up to a constant.
struct DictQuadratic {
    h: DenseMatrix,
    c: DenseMatrix,
}

impl DictQuadratic {
    fn new(rows: usize, r: usize, terms: &[FitTerm<'_>]) -> Result<Self> {
        let mut h = DenseMatrix::zeros(r, r);
        let mut c = DenseMatrix::zeros(rows, r);
        for t in terms {
            if t.codes.cols() == 0 {
                continue;
            }
            h = h.add(&t.codes.gram_rows().scale(2.0 * t.weight))?;
            c = c.add(&t.targets.matmul(&t.codes.transpose())?.scale(2.0 * t.weight))?;
        }
        Ok(Self { h, c })
    }

    fn value(&self, d: &DenseMatrix) -> f64 {
        let dh = d.matmul(&self.h).expect("shapes fixed at construction");
        let quad: f64 = dh.data().iter().zip(d.data()).map(|(x, y)| x * y).sum();
        let lin: f64 = self.c.data().iter().zip(d.data()).map(|(x, y)| x * y).sum();
        0.5 * quad - lin
    }

    fn gradient(&self, d: &DenseMatrix) -> DenseMatrix {
        d.matmul(&self.h)
            .expect("shapes fixed at construction")
            .sub(&self.c)
            .expect("shapes fixed at construction")
    }

    /// `C (H + εI)⁻¹` with `ε = 1e-8·tr(H)/r`.
    fn ridge_solution(&self) -> Result<DenseMatrix> {
        let r = self.h.rows();
        let trace: f64 = (0..r).map(|i| self.h.get(i, i)).sum();
        let eps = if trace > 0.0 { 1e-8 * trace / r as f64 } else { 1e-12 };
        let mut reg = self.h.clone();
        for i in 0..r {
            reg.set(i, i, reg.get(i, i) + eps);
        }
        // (H + εI) Dᵀ = Cᵀ
        Ok(linalg::cholesky_solve(&reg, &self.c.transpose())?.transpose())
    }

    /// Projected FISTA on the column-norm ball, monotone in `f`.
    fn projected_descent(&self, start: DenseMatrix, max_iter: usize, tol: f64) -> DenseMatrix {
        let lip = linalg::symmetric_top_eig(&self.h, crate::sparse_opt::POWER_ITERS, crate::sparse_opt::POWER_TOL);
        let mut x = project_columns(&start);
        if lip <= 0.0 {
            return x;
        }
        let step = 1.0 / lip;
        let mut fx = self.value(&x);
        let mut y = x.clone();
        let mut theta = 1.0_f64;
        let mut restarted = true;
        for _ in 0..max_iter {
            let g = self.gradient(&y);
            let z = project_columns(&y.sub(&g.scale(step)).expect("same shape"));
            let fz = self.value(&z);
            if fz <= fx {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                let beta = (theta - 1.0) / theta_next;
                y = z.add(&z.sub(&x).expect("same shape").scale(beta)).expect("same shape");
                let scale = fx.abs().max(self.c.frobenius_sq().sqrt()).max(f64::MIN_POSITIVE);
                let done = (fx - fz) <= tol * scale;
                x = z;
                fx = fz;
                theta = theta_next;
                restarted = false;
                if done {
                    break;
                }
            } else {
                if restarted {
                    break;
                }
                theta = 1.0;
                y = x.clone();
                restarted = true;
            }
        }
        x
    }

    /// Feasible minimizer estimate: the better of `current` and the projected
    /// ridge solution, refined by projected descent. Never worse than `current`.
    fn minimize_from(&self, current: &DenseMatrix) -> Result<DenseMatrix> {
        let current = project_columns(current);
        let closed = project_columns(&self.ridge_solution()?);
        let start = if self.value(&closed) < self.value(&current) {
            closed
        } else {
            current
        };
        Ok(self.projected_descent(start, DICT_DESCENT_ITERS, DICT_DESCENT_TOL))
    }
}

/// Unconstrained ridge-stabilized regression `X Aᵀ (A Aᵀ + εI)⁻¹`,
/// `ε = 1e-8·tr(AAᵀ)/r`.
pub fn regress_dictionary(targets: &DenseMatrix, codes: &DenseMatrix) -> Result<DenseMatrix> {
    if targets.cols() != codes.cols() {
        return Err(Error::Dimension(format!(
            "targets have {} columns but codes have {}",
            targets.cols(),
            codes.cols()
        )));
    }
    let quad = DictQuadratic::new(
        targets.rows(),
        codes.rows(),
        &[FitTerm {
            targets,
            codes,
            weight: 0.5,
        }],
    )?;
    quad.ridge_solution()
}

fn dz_quadratic(
    q: usize,
    r: usize,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<DictQuadratic> {
    let mut terms = Vec::with_capacity(2);
    if data.len() > 0 {
        terms.push(FitTerm {
            targets: data.attributes(),
            codes: a,
            weight: 1.0 / (data.len() * q) as f64,
        });
    }
    if protos.len() > 0 {
        terms.push(FitTerm {
            targets: protos.attributes(),
            codes: b,
            weight: 1.0 / (protos.len() * q) as f64,
        });
    }
    DictQuadratic::new(q, r, &terms)
}

/// Refits `D_z` (and the prototype codes `B`) for the visual codes of `X`.
///
/// Returns the new `D_z`, the visual codes `A*`, and `B`.
pub fn update_dz(
    dict: &JointDictionary,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    update_dz_warm(dict, data, protos, params, None, None)
}

fn update_dz_warm(
    dict: &JointDictionary,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    params: &HyperParams,
    a_warm: Option<&DenseMatrix>,
    b_warm: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let (p, q, r) = (dict.feature_dim(), dict.attribute_dim(), dict.r());
    let opts = solver_opts(params);
    let l1 = params.lambda / r as f64;
    let a = batch_sparse_code_warm(&dict.dx, data.features(), 1.0 / p as f64, l1, &opts, a_warm)?;
    let mut dz = dict.dz.clone();
    let mut b = match b_warm {
        Some(b) => b.clone(),
        None => DenseMatrix::zeros(r, protos.len()),
    };
    let sweeps = if protos.is_empty() { 1 } else { params.dz_sweeps.max(1) };
    for _ in 0..sweeps {
        if !protos.is_empty() {
            b = batch_sparse_code_warm(&dz, protos.attributes(), 1.0 / q as f64, l1, &opts, Some(&b))?;
        }
        dz = dz_quadratic(q, r, data, protos, &a, &b)?.minimize_from(&dz)?;
    }
    Ok((dz, a, b))
}

/// Refits `D_x` by regression onto the attribute codes of `Z`, then projects.
///
/// Returns the new `D_x` and the attribute codes `A*`.
pub fn update_dx(
    dict: &JointDictionary,
    data: &SeenDataset,
    params: &HyperParams,
) -> Result<(DenseMatrix, DenseMatrix)> {
    update_dx_warm(dict, data, params, None)
}

fn update_dx_warm(
    dict: &JointDictionary,
    data: &SeenDataset,
    params: &HyperParams,
    a_warm: Option<&DenseMatrix>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (q, r) = (dict.attribute_dim(), dict.r());
    let opts = solver_opts(params);
    let a = batch_sparse_code_warm(
        &dict.dz,
        data.attributes(),
        1.0 / q as f64,
        params.lambda / r as f64,
        &opts,
        a_warm,
    )?;
    if a.data().iter().all(|&v| v == 0.0) {
        return Err(Error::DeadCodes);
    }
    let dx = project_columns(&regress_dictionary(data.features(), &a)?);
    Ok((dx, a))
}

/// Stacked design `[D_x/√p; D_z/√q]` whose LASSO gives the shared code minimizing
/// the `A` part of the joint objective.
fn stacked(dict: &JointDictionary, x: &DenseMatrix, z: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let sp = 1.0 / (dict.feature_dim() as f64).sqrt();
    let sq = 1.0 / (dict.attribute_dim() as f64).sqrt();
    let design = dict.dx.scale(sp).vstack(&dict.dz.scale(sq))?;
    let targets = x.scale(sp).vstack(&z.scale(sq))?;
    Ok((design, targets))
}

/// Shared codes of the seen pairs for fixed dictionaries.
fn joint_codes(
    dict: &JointDictionary,
    data: &SeenDataset,
    params: &HyperParams,
    warm: &DenseMatrix,
) -> Result<DenseMatrix> {
    let (design, targets) = stacked(dict, data.features(), data.attributes())?;
    batch_sparse_code_warm(
        &design,
        &targets,
        1.0,
        params.lambda / dict.r() as f64,
        &solver_opts(params),
        Some(warm),
    )
}

fn prototype_codes(
    dz: &DenseMatrix,
    protos: &UnseenPrototypes,
    params: &HyperParams,
    warm: &DenseMatrix,
) -> Result<DenseMatrix> {
    batch_sparse_code_warm(
        dz,
        protos.attributes(),
        1.0 / dz.rows() as f64,
        params.lambda / dz.cols() as f64,
        &solver_opts(params),
        Some(warm),
    )
}

struct State {
    dict: JointDictionary,
    a: DenseMatrix,
    b: DenseMatrix,
    objective: f64,
}

fn alternating_round(
    s: &State,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Result<State> {
    let (dz, _a_vis, b) = update_dz_warm(&s.dict, data, protos, params, Some(&s.a), Some(&s.b))?;
    let half = JointDictionary::new(s.dict.dx.clone(), dz)?;
    let (dx, a_attr) = update_dx_warm(&half, data, params, Some(&s.a))?;
    let dict = JointDictionary::new(dx, half.dz)?;
    let a = joint_codes(&dict, data, params, &a_attr)?;
    let b = prototype_codes(&dict.dz, protos, params, &b)?;
    let objective = joint_objective(&dict, data, protos, &a, &b, params)?;
    Ok(State {
        dict,
        a,
        b,
        objective,
    })
}

/// Block descent on the joint objective: each block update is non-increasing.
fn descent_round(
    s: &State,
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Result<State> {
    let (p, q, r) = (s.dict.feature_dim(), s.dict.attribute_dim(), s.dict.r());
    let dx_quad = DictQuadratic::new(
        p,
        r,
        &[FitTerm {
            targets: data.features(),
            codes: &s.a,
            weight: 1.0 / (data.len() * p) as f64,
        }],
    )?;
    let dx = dx_quad.minimize_from(&s.dict.dx)?;
    let dz = dz_quadratic(q, r, data, protos, &s.a, &s.b)?.minimize_from(&s.dict.dz)?;
    let dict = JointDictionary::new(dx, dz)?;
    let a = joint_codes(&dict, data, params, &s.a)?;
    let b = prototype_codes(&dict.dz, protos, params, &s.b)?;
    let objective = joint_objective(&dict, data, protos, &a, &b, params)?;
    Ok(State {
        dict,
        a,
        b,
        objective,
    })
}

/// Atoms no seen code uses are moved onto the worst-reconstructed samples.
/// Unused atoms do not enter `D_x A`, so the objective is unchanged.
fn reseed_dead_atoms(s: &mut State, data: &SeenDataset) -> Result<()> {
    let r = s.dict.r();
    let dead: Vec<usize> = (0..r)
        .filter(|&k| s.a.row(k).iter().all(|&v| v == 0.0))
        .collect();
    if dead.is_empty() {
        return Ok(());
    }
    let resid = data.features().sub(&s.dict.dx.matmul(&s.a)?)?;
    let mut order: Vec<(usize, f64)> = (0..resid.cols())
        .map(|j| (j, resid.col_norm(j)))
        .filter(|&(j, _)| data.features().col_norm(j) > 0.0)
        .collect();
    // Largest residual first; ties by lowest sample index.
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    for (&atom, &(sample, _)) in dead.iter().zip(&order) {
        let x = data.features().col(sample);
        let n = linalg::norm(&x);
        let unit: Vec<f64> = x.iter().map(|v| v / n).collect();
        s.dict.dx.set_col(atom, &unit);
    }
    Ok(())
}

/// Learns the coupled dictionaries from seen pairs and unseen prototypes.
pub fn train(
    data: &SeenDataset,
    protos: &UnseenPrototypes,
    params: &HyperParams,
) -> Result<(JointDictionary, TrainReport)> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidData("training needs at least one seen sample".into()));
    }
    if protos.is_empty() {
        return Err(Error::InvalidData("training needs at least one unseen prototype".into()));
    }
    protos.check_disjoint(data)?;
    if protos.dim() != data.attribute_dim() {
        return Err(Error::InvalidData(format!(
            "seen attributes have dimension {} but prototypes have {}",
            data.attribute_dim(),
            protos.dim()
        )));
    }
    let dict = init_dictionaries(data.feature_dim(), data.attribute_dim(), params)?;
    let r = dict.r();
    let a = DenseMatrix::zeros(r, data.len());
    let b = DenseMatrix::zeros(r, protos.len());
    let objective = joint_objective(&dict, data, protos, &a, &b, params)?;
    let mut state = State {
        dict,
        a,
        b,
        objective,
    };
    let mut trace = vec![objective];
    let mut norms = Vec::with_capacity(params.outer_iters);
    let mut fallback_rounds = 0;

    // Alternating rounds are tried until the first one that fails to descend;
    // from then on every round is block descent.
    let mut alternating = true;
    for _ in 0..params.outer_iters {
        let candidate = if alternating {
            match alternating_round(&state, data, protos, params) {
                Ok(c) if c.objective.is_finite() && c.objective <= state.objective + DESCENT_SLACK => Some(c),
                Ok(_) | Err(Error::DeadCodes) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        alternating &= candidate.is_some();
        let mut next = match candidate {
            Some(c) => c,
            None => {
                fallback_rounds += 1;
                descent_round(&state, data, protos, params)?
            }
        };
        if !next.objective.is_finite() {
            return Err(Error::Divergence);
        }
        reseed_dead_atoms(&mut next, data)?;
        norms.push(next.dict.max_column_norm());
        trace.push(next.objective);
        state = next;
    }

    let report = TrainReport {
        objective_trace: trace,
        codes_seen: state.a,
        codes_unseen: state.b,
        fallback_rounds,
        max_column_norms: norms,
    };
    Ok((state.dict, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, v.to_vec()).unwrap()
    }

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn init_is_deterministic_and_unit_norm() {
        let params = HyperParams {
            r: 10,
            seed: 7,
            ..HyperParams::default()
        };
        let a = init_dictionaries(4, 3, &params).unwrap();
        let b = init_dictionaries(4, 3, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dx().shape(), (4, 10));
        assert_eq!(a.dz().shape(), (3, 10));
        for j in 0..10 {
            assert!((a.dx().col_norm(j) - 1.0).abs() < 1e-12);
            assert!((a.dz().col_norm(j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn init_rejects_undercomplete() {
        let params = HyperParams {
            r: 4,
            ..HyperParams::default()
        };
        assert!(matches!(
            init_dictionaries(4, 3, &params),
            Err(Error::UnderComplete { r: 4, max_pq: 4 })
        ));
    }

    #[test]
    fn projection_cases() {
        let d = m(2, 3, &[3., 0.3, 0., 4., 0.4, 0.]);
        let p = project_columns(&d);
        assert!((p.get(0, 0) - 0.6).abs() < 1e-15 && (p.get(1, 0) - 0.8).abs() < 1e-15);
        assert_eq!(p.col(1), vec![0.3, 0.4]);
        assert_eq!(p.col(2), vec![0., 0.]);
    }

    #[test]
    fn joint_objective_zero_codes() {
        let x = random(3, 4, 1);
        let zc = random(2, 2, 2);
        let z = zc.select_columns(&[0, 0, 1, 1]);
        let data = SeenDataset::new(x.clone(), z.clone(), vec![0, 0, 1, 1]).unwrap();
        let zp = random(2, 2, 3);
        let protos = UnseenPrototypes::new(zp.clone(), vec![5, 6]).unwrap();
        let params = HyperParams {
            r: 5,
            ..HyperParams::default()
        };
        let dict = init_dictionaries(3, 2, &params).unwrap();
        let a = DenseMatrix::zeros(5, 4);
        let b = DenseMatrix::zeros(5, 2);
        let v = joint_objective(&dict, &data, &protos, &a, &b, &params).unwrap();
        let expect = x.frobenius_sq() / 12.0 + z.frobenius_sq() / 8.0 + zp.frobenius_sq() / 4.0;
        assert!((v - expect).abs() < 1e-14);
        let bad = DenseMatrix::zeros(4, 4);
        assert!(joint_objective(&dict, &data, &protos, &bad, &b, &params).is_err());
    }

    #[test]
    fn joint_objective_perfect_fit_is_zero() {
        let params = HyperParams {
            r: 4,
            lambda: 0.0,
            ..HyperParams::default()
        };
        let dict = init_dictionaries(3, 2, &params).unwrap();
        let a = random(4, 2, 4);
        let b = random(4, 1, 5);
        let data = SeenDataset::new(dict.dx().matmul(&a).unwrap(), dict.dz().matmul(&a).unwrap(), vec![0, 1]).unwrap();
        let protos = UnseenPrototypes::new(dict.dz().matmul(&b).unwrap(), vec![9]).unwrap();
        let v = joint_objective(&dict, &data, &protos, &a, &b, &params).unwrap();
        assert!(v.abs() < 1e-28);
    }

    #[test]
    fn regression_against_identity_codes() {
        let x = m(2, 3, &[3., 0.1, 0.2, 4., 0.3, 0.1]);
        let d = regress_dictionary(&x, &DenseMatrix::identity(3)).unwrap();
        assert!(d.max_abs_diff(&x) < 1e-7);
        let p = project_columns(&d);
        assert!(p.max_abs_diff(&project_columns(&x)) < 1e-7);
    }

    #[test]
    fn dead_codes_error() {
        let params = HyperParams {
            r: 4,
            lambda: 1e6,
            ..HyperParams::default()
        };
        let dict = init_dictionaries(2, 2, &params).unwrap();
        let data = SeenDataset::new(random(2, 3, 1), random(2, 3, 2), vec![0, 1, 2]).unwrap();
        assert!(matches!(update_dx(&dict, &data, &params), Err(Error::DeadCodes)));
    }

    #[test]
    fn zero_outer_iters_returns_init() {
        let params = HyperParams {
            r: 6,
            outer_iters: 0,
            ..HyperParams::default()
        };
        let data = SeenDataset::new(random(3, 4, 1), random(2, 4, 2), vec![0, 1, 2, 3]).unwrap();
        let protos = UnseenPrototypes::new(random(2, 1, 3), vec![7]).unwrap();
        let (dict, rep) = train(&data, &protos, &params).unwrap();
        assert_eq!(dict, init_dictionaries(3, 2, &params).unwrap());
        assert_eq!(rep.objective_trace.len(), 1);
    }

    #[test]
    fn train_input_checks() {
        let params = HyperParams {
            r: 6,
            ..HyperParams::default()
        };
        let data = SeenDataset::new(random(3, 2, 1), random(2, 2, 2), vec![0, 1]).unwrap();
        let empty = UnseenPrototypes::new(DenseMatrix::zeros(2, 0), vec![]).unwrap();
        assert!(train(&data, &empty, &params).is_err());
        let overlap = UnseenPrototypes::new(random(2, 1, 3), vec![1]).unwrap();
        assert!(train(&data, &overlap, &params).is_err());
    }
}
