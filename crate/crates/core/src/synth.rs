//! Synthetic zero-shot data drawn from known coupled dictionaries, and the
//! LASSO recovery-error scaling study on Gaussian designs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::data::{ClassId, SeenDataset, UnseenPrototypes};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::joint_dict::JointDictionary;
use crate::linalg::{self, DenseMatrix};
use crate::sparse_opt::{fista_lasso, LassoProblem};

/// Generator settings for [`gen_synthetic`].
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub p: usize,
    pub q: usize,
    pub r_true: usize,
    /// Nonzeros per class code.
    pub k_true: usize,
    /// Seen samples.
    pub n: usize,
    /// Unseen classes.
    pub m: usize,
    pub seen_classes: usize,
    pub test_per_class: usize,
    /// Std of additive feature noise.
    pub noise_sigma: f64,
    /// Norm of the per-class feature offset applied to unseen test images.
    pub shift_sigma: f64,
    /// Std of per-sample perturbations of the class code on its support.
    pub code_jitter: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            p: 32,
            q: 16,
            r_true: 64,
            k_true: 4,
            n: 400,
            m: 8,
            seen_classes: 100,
            test_per_class: 10,
            noise_sigma: 0.0,
            shift_sigma: 0.0,
            code_jitter: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// The domain-shift fixture: noisy, class-offset test features.
    pub fn domain_shift(seed: u64) -> Self {
        Self {
            noise_sigma: 0.15,
            shift_sigma: 1.0,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("p", self.p),
            ("q", self.q),
            ("r_true", self.r_true),
            ("k_true", self.k_true),
            ("n", self.n),
            ("m", self.m),
            ("seen_classes", self.seen_classes),
            ("test_per_class", self.test_per_class),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParam(format!("{name} must be >= 1")));
        }
        if self.k_true > self.r_true {
            return Err(Error::InvalidParam(format!(
                "k_true = {} exceeds r_true = {}",
                self.k_true, self.r_true
            )));
        }
        if self.seen_classes > self.n {
            return Err(Error::InvalidParam("more seen classes than seen samples".into()));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("shift_sigma", self.shift_sigma),
            ("code_jitter", self.code_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// A generated problem together with its ground truth.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub seen: SeenDataset,
    pub protos: UnseenPrototypes,
    pub test_features: DenseMatrix,
    pub test_labels: Vec<ClassId>,
    pub true_dict: JointDictionary,
    /// Generating codes of the test images, `r_true × l`.
    pub test_codes: DenseMatrix,
}

fn unit_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut d = DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    for j in 0..cols {
        let n = d.col_norm(j);
        let c: Vec<f64> = d.col(j).iter().map(|v| v / n).collect();
        d.set_col(j, &c);
    }
    d
}

fn sparse_code(support: &[usize], r: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut a = vec![0.0; r];
    for &s in support {
        let mag = rng.gen_range(0.5..1.5);
        a[s] = if rng.gen_bool(0.5) { mag } else { -mag };
    }
    a
}

fn jittered(code: &[f64], support: &[usize], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut a = code.to_vec();
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("sigma checked");
        for &s in support {
            a[s] += rng.sample(noise);
        }
    }
    a
}

fn add_noise(x: &mut [f64], sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("sigma checked");
        x.iter_mut().for_each(|v| *v += rng.sample(noise));
    }
}

/// Draws seen pairs, unseen prototypes and shifted unseen test features.
///
/// Seen class `c` has label `c`; unseen classes are labeled after them. Unseen
/// supports reuse atoms that some seen class exercises, so every atom needed
/// at test time can be learned from `X`.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = spec.r_true;
    let dx = unit_columns(spec.p, r, &mut rng);
    let dz = unit_columns(spec.q, r, &mut rng);

    let atoms: Vec<usize> = (0..r).collect();
    let seen_supports: Vec<Vec<usize>> = (0..spec.seen_classes)
        .map(|_| {
            let mut s: Vec<usize> = atoms.choose_multiple(&mut rng, spec.k_true).copied().collect();
            s.sort_unstable();
            s
        })
        .collect();
    let mut used: Vec<usize> = seen_supports.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let unseen_supports: Vec<Vec<usize>> = (0..spec.m)
        .map(|_| {
            let k = spec.k_true.min(used.len());
            let mut s: Vec<usize> = used.choose_multiple(&mut rng, k).copied().collect();
            s.sort_unstable();
            s
        })
        .collect();
    let seen_codes: Vec<Vec<f64>> = seen_supports.iter().map(|s| sparse_code(s, r, &mut rng)).collect();
    let unseen_codes: Vec<Vec<f64>> = unseen_supports.iter().map(|s| sparse_code(s, r, &mut rng)).collect();

    let mut x_cols = Vec::with_capacity(spec.n);
    let mut z_cols = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let class_attrs: Vec<Vec<f64>> = seen_codes.iter().map(|c| dz.matvec(c)).collect();
    for i in 0..spec.n {
        let c = i % spec.seen_classes;
        let code = jittered(&seen_codes[c], &seen_supports[c], spec.code_jitter, &mut rng);
        let mut x = dx.matvec(&code);
        add_noise(&mut x, spec.noise_sigma, &mut rng);
        x_cols.push(x);
        z_cols.push(class_attrs[c].clone());
        labels.push(c as ClassId);
    }
    let seen = SeenDataset::new(
        DenseMatrix::from_columns(spec.p, &x_cols)?,
        DenseMatrix::from_columns(spec.q, &z_cols)?,
        labels,
    )?;

    let proto_cols: Vec<Vec<f64>> = unseen_codes.iter().map(|c| dz.matvec(c)).collect();
    let unseen_labels: Vec<ClassId> = (0..spec.m).map(|j| (spec.seen_classes + j) as ClassId).collect();
    let protos = UnseenPrototypes::new(DenseMatrix::from_columns(spec.q, &proto_cols)?, unseen_labels.clone())?;

    let shifts: Vec<Vec<f64>> = (0..spec.m)
        .map(|_| {
            let v: Vec<f64> = (0..spec.p).map(|_| rng.sample(StandardNormal)).collect();
            let n = linalg::norm(&v);
            v.iter().map(|x| spec.shift_sigma * x / n).collect()
        })
        .collect();
    let mut t_cols = Vec::with_capacity(spec.m * spec.test_per_class);
    let mut t_codes = Vec::with_capacity(spec.m * spec.test_per_class);
    let mut t_labels = Vec::with_capacity(spec.m * spec.test_per_class);
    for (j, (code0, support)) in unseen_codes.iter().zip(&unseen_supports).enumerate() {
        for _ in 0..spec.test_per_class {
            let code = jittered(code0, support, spec.code_jitter, &mut rng);
            let mut x = dx.matvec(&code);
            linalg::axpy(1.0, &shifts[j], &mut x);
            add_noise(&mut x, spec.noise_sigma, &mut rng);
            t_cols.push(x);
            t_codes.push(code);
            t_labels.push(unseen_labels[j]);
        }
    }

    Ok(SynthData {
        seen,
        protos,
        test_features: DenseMatrix::from_columns(spec.p, &t_cols)?,
        test_labels: t_labels,
        true_dict: JointDictionary::new(dx, dz)?,
        test_codes: DenseMatrix::from_columns(r, &t_codes)?,
    })
}

/// Settings shared by every row of the recovery study.
#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Config {
    pub r: usize,
    pub k: usize,
    /// Std of the i.i.d. design entries.
    pub design_sigma: f64,
    pub noise_sigma: f64,
    /// Multiplier on the noise-calibrated ℓ1 weight.
    pub lambda_scale: f64,
    /// Noise level used for the ℓ1 weight when `noise_sigma` is smaller.
    pub noise_floor: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for Lemma1Config {
    fn default() -> Self {
        Self {
            r: 512,
            k: 4,
            design_sigma: 1.0,
            noise_sigma: 0.05,
            lambda_scale: 1.0,
            noise_floor: 1e-3,
            max_iter: 2000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl Lemma1Config {
    /// ℓ1 weight for `min (1/p)‖x − Da‖² + w‖a‖₁`: the scale of the largest
    /// off-support gradient the noise alone produces. Columns have norm about
    /// `σ_d·√p`, so that gradient is near `2·σ·σ_d·√(2 ln r / p)`.
    pub fn l1_weight(&self, p: usize) -> f64 {
        let sigma = self.noise_sigma.max(self.noise_floor);
        self.lambda_scale * 2.0 * sigma * self.design_sigma * (2.0 * (self.r as f64).ln() / p as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Row {
    pub p: usize,
    pub mean_error: f64,
    pub std_error: f64,
    /// Fraction of trials whose thresholded support equals the true one.
    pub support_recovery: f64,
    /// `√(k ln r / p)`.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Report {
    pub rows: Vec<Lemma1Row>,
    /// Least-squares `c'` in `error ≈ c'·√(k ln r / p)`.
    pub fitted_constant: f64,
}

/// Magnitude below which a recovered coefficient counts as zero.
const SUPPORT_THRESHOLD: f64 = 0.1;

struct Trial {
    error: f64,
    support_ok: bool,
}

fn lemma1_trial(p: usize, trial: usize, cfg: &Lemma1Config) -> Result<Trial> {
    let stream = (p as u64) << 32 | trial as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let design = DenseMatrix::from_fn(p, cfg.r, |_, _| cfg.design_sigma * rng.sample::<f64, _>(StandardNormal));
    let atoms: Vec<usize> = (0..cfg.r).collect();
    let mut support: Vec<usize> = atoms.choose_multiple(&mut rng, cfg.k).copied().collect();
    support.sort_unstable();
    let truth = sparse_code(&support, cfg.r, &mut rng);
    let mut x = design.matvec(&truth);
    add_noise(&mut x, cfg.noise_sigma, &mut rng);
    let problem = LassoProblem::new(&design, &x, 1.0 / p as f64, cfg.l1_weight(p))?;
    let est = fista_lasso(&problem, &vec![0.0; cfg.r], cfg.max_iter, cfg.tol)?.solution;
    let error = linalg::sq_dist(&est, &truth).sqrt();
    let found: Vec<usize> = (0..cfg.r).filter(|&j| est[j].abs() > SUPPORT_THRESHOLD).collect();
    Ok(Trial {
        error,
        support_ok: found == support,
    })
}

/// Mean LASSO recovery error on Gaussian designs for each feature dimension `p`.
pub fn lemma1_study(p_list: &[usize], trials: usize, cfg: &Lemma1Config) -> Result<Lemma1Report> {
    lemma1_study_with(p_list, trials, cfg, Parallelism::default())
}

pub fn lemma1_study_with(
    p_list: &[usize],
    trials: usize,
    cfg: &Lemma1Config,
    parallelism: Parallelism,
) -> Result<Lemma1Report> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    if p_list.windows(2).any(|w| w[0] >= w[1]) || p_list.contains(&0) {
        return Err(Error::InvalidParam("p_list must be positive and increasing".into()));
    }
    if cfg.k > cfg.r {
        return Err(Error::InvalidParam("k exceeds r".into()));
    }
    if !(cfg.design_sigma > 0.0 && cfg.noise_sigma >= 0.0 && cfg.lambda_scale > 0.0) {
        return Err(Error::InvalidParam("design_sigma and lambda_scale must be positive, noise_sigma >= 0".into()));
    }
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let results = exec::try_map_indexed(parallelism, trials, |t| lemma1_trial(p, t, cfg))?;
        let errors: Vec<f64> = results.iter().map(|t| t.error).collect();
        let mean = errors.iter().sum::<f64>() / trials as f64;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / trials as f64;
        rows.push(Lemma1Row {
            p,
            mean_error: mean,
            std_error: var.sqrt(),
            support_recovery: results.iter().filter(|t| t.support_ok).count() as f64 / trials as f64,
            rate: (cfg.k as f64 * (cfg.r as f64).ln() / p as f64).sqrt(),
        });
    }
    let num: f64 = rows.iter().map(|r| r.mean_error * r.rate).sum();
    let den: f64 = rows.iter().map(|r| r.rate * r.rate).sum();
    let fitted_constant = if den > 0.0 { num / den } else { 0.0 };
    Ok(Lemma1Report { rows, fitted_constant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(SynthSpec::default().validate().is_ok());
        let bad = SynthSpec {
            k_true: 100,
            ..SynthSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = SynthSpec {
            m: 0,
            ..SynthSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec {
            n: 200,
            ..SynthSpec::domain_shift(3)
        };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a.test_features, b.test_features);
        assert_eq!(a.seen.features(), b.seen.features());
        assert_eq!(a.protos.attributes(), b.protos.attributes());
    }

    #[test]
    fn noiseless_test_features_are_exact() {
        let spec = SynthSpec {
            n: 200,
            ..SynthSpec::default()
        };
        let d = gen_synthetic(&spec).unwrap();
        let recon = d.true_dict.dx().matmul(&d.test_codes).unwrap();
        assert!(recon.max_abs_diff(&d.test_features) < 1e-14);
        assert_eq!(d.test_features.cols(), spec.m * spec.test_per_class);
        assert_eq!(d.protos.len(), spec.m);
        for j in 0..d.test_codes.cols() {
            let nnz = d.test_codes.col(j).iter().filter(|v| **v != 0.0).count();
            assert!(nnz <= spec.k_true);
        }
    }

    #[test]
    fn zero_sparsity_gives_zero_error() {
        let cfg = Lemma1Config {
            k: 0,
            noise_sigma: 0.0,
            r: 64,
            ..Lemma1Config::default()
        };
        let rep = lemma1_study(&[16, 32], 5, &cfg).unwrap();
        for row in &rep.rows {
            assert_eq!(row.mean_error, 0.0);
            assert_eq!(row.support_recovery, 1.0);
        }
    }

    #[test]
    fn study_arguments() {
        let cfg = Lemma1Config::default();
        assert!(lemma1_study(&[64, 32], 1, &cfg).is_err());
        assert!(lemma1_study(&[32], 0, &cfg).is_err());
    }
}
