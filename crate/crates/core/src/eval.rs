//! Flat hit@K accuracy and multi-seed evaluation of the three assignment
//! methods.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::attr_predict::{predict_batch, PredictMode, PredictionResult};
use crate::data::{ClassId, UnseenPrototypes};
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::joint_dict::{train, JointDictionary};
use crate::linalg::DenseMatrix;
use crate::params::HyperParams;
use crate::synth::{gen_synthetic, SynthSpec};
use crate::transductive::taaw_assign;

/// The K values reported for every method.
pub const REPORTED_K: [usize; 3] = [1, 3, 5];

/// Column indices of the `k` largest entries of `row`, best first. Among equal
/// scores the lower index ranks higher.
pub fn top_k(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Whether `truth` is among the top `k` of `row` under the lowest-index
/// tie rule, decided by counting without sorting.
fn in_top_k(row: &[f64], truth: usize, k: usize) -> bool {
    let t = row[truth];
    let ahead = row
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > t || (v == t && j < truth))
        .count();
    ahead < k
}

/// Fraction of rows of `scores` (`l × C`) whose true column is in the top `k`.
pub fn hit_at_k(scores: &DenseMatrix, truth: &[usize], k: usize) -> Result<f64> {
    let (l, c) = scores.shape();
    if k == 0 {
        return Err(Error::InvalidParam("K must be >= 1".into()));
    }
    if k > c {
        return Err(Error::InvalidParam(format!("K = {k} exceeds the {c} classes")));
    }
    if truth.len() != l {
        return Err(Error::Dimension(format!(
            "{} truth entries for {l} score rows",
            truth.len()
        )));
    }
    if let Some(&t) = truth.iter().find(|&&t| t >= c) {
        return Err(Error::InvalidData(format!("truth index {t} out of range for {c} classes")));
    }
    if l == 0 {
        return Ok(0.0);
    }
    let hits = (0..l).filter(|&i| in_top_k(scores.row(i), truth[i], k)).count();
    Ok(hits as f64 / l as f64)
}

/// hit@1 from hard labels.
pub fn hit_at_1_labels(predicted: &[ClassId], truth: &[ClassId]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Prediction plus assignment pipeline being evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Attribute-agnostic codes, nearest prototype.
    Aag,
    /// Attribute-aware codes, nearest prototype.
    Aaw,
    /// Attribute-aware codes, label propagation.
    Taaw,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Aag, Method::Aaw, Method::Taaw];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Aag => "aag",
            Method::Aaw => "aaw",
            Method::Taaw => "taaw",
        }
    }

    fn predict_mode(&self) -> PredictMode {
        match self {
            Method::Aag => PredictMode::Aag,
            Method::Aaw | Method::Taaw => PredictMode::Aaw,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aag" => Ok(Method::Aag),
            "aaw" => Ok(Method::Aaw),
            "taaw" => Ok(Method::Taaw),
            other => Err(Error::InvalidParam(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accuracy summary of one method, averaged over repetitions.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: Method,
    /// Mean accuracy per K. K at or above the class count scores 1.
    pub hit_at: BTreeMap<usize, f64>,
    /// Standard deviation of the per-repetition accuracy, per K.
    pub hit_at_std: BTreeMap<usize, f64>,
    /// Mean hit@1 restricted to each true class.
    pub per_class_accuracy: BTreeMap<ClassId, f64>,
    /// Mean soft-assignment entropy of the predicted attributes.
    pub mean_entropy: f64,
    pub n_test: usize,
    pub seeds_used: Vec<u64>,
}

impl EvalReport {
    pub fn hit(&self, k: usize) -> f64 {
        self.hit_at.get(&k).copied().unwrap_or(f64::NAN)
    }

    /// Flat `method.key=value` lines.
    pub fn to_kv_lines(&self) -> String {
        let mut s = String::new();
        let m = self.method.as_str();
        for (k, v) in &self.hit_at {
            let _ = writeln!(s, "{m}.hit@{k}={v:.6}");
        }
        for (k, v) in &self.hit_at_std {
            let _ = writeln!(s, "{m}.hit@{k}.std={v:.6}");
        }
        for (c, v) in &self.per_class_accuracy {
            let _ = writeln!(s, "{m}.class.{c}={v:.6}");
        }
        let _ = writeln!(s, "{m}.mean_entropy={:.6}", self.mean_entropy);
        let _ = writeln!(s, "{m}.n_test={}", self.n_test);
        let seeds: Vec<String> = self.seeds_used.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "{m}.seeds={}", seeds.join(","));
        s
    }
}

/// Aligned table with one row per report.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<8}", "method");
    for k in REPORTED_K {
        let _ = write!(s, "{:>10}", format!("hit@{k}"));
    }
    let _ = writeln!(s, "{:>10}{:>8}", "entropy", "n");
    for r in reports {
        let _ = write!(s, "{:<8}", r.method.as_str());
        for k in REPORTED_K {
            let _ = write!(s, "{:>9.2}%", 100.0 * r.hit(k));
        }
        let _ = writeln!(s, "{:>10.4}{:>8}", r.mean_entropy, r.n_test);
    }
    s
}

/// Machine-readable form of several reports.
pub fn format_kv(reports: &[EvalReport]) -> String {
    reports.iter().map(EvalReport::to_kv_lines).collect()
}

/// Per-repetition measurements of one method.
struct Run {
    hits: BTreeMap<usize, f64>,
    per_class: BTreeMap<ClassId, f64>,
    entropy: f64,
}

fn truth_indices(truth: &[ClassId], protos: &UnseenPrototypes) -> Result<Vec<usize>> {
    truth
        .iter()
        .map(|&c| {
            protos
                .index_of(c)
                .ok_or_else(|| Error::InvalidData(format!("test label {c} is not an unseen class")))
        })
        .collect()
}

fn measure(scores: &DenseMatrix, labels: &[ClassId], truth: &[ClassId], idx: &[usize], entropy: f64) -> Result<Run> {
    let c = scores.cols();
    let mut hits = BTreeMap::new();
    for k in REPORTED_K {
        let v = if k >= c { 1.0 } else { hit_at_k(scores, idx, k)? };
        hits.insert(k, v);
    }
    let mut totals: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for (p, t) in labels.iter().zip(truth) {
        let e = totals.entry(*t).or_default();
        e.0 += usize::from(p == t);
        e.1 += 1;
    }
    let per_class = totals
        .into_iter()
        .map(|(c, (h, n))| (c, h as f64 / n as f64))
        .collect();
    Ok(Run {
        hits,
        per_class,
        entropy,
    })
}

fn summarize(method: Method, runs: &[Run], n_test: usize, seeds: &[u64]) -> EvalReport {
    let n = runs.len() as f64;
    let mut hit_at = BTreeMap::new();
    let mut hit_at_std = BTreeMap::new();
    for k in REPORTED_K {
        let vals: Vec<f64> = runs.iter().map(|r| r.hits[&k]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        hit_at.insert(k, mean);
        hit_at_std.insert(k, var.sqrt());
    }
    let mut per_class: BTreeMap<ClassId, f64> = BTreeMap::new();
    for r in runs {
        for (c, v) in &r.per_class {
            *per_class.entry(*c).or_default() += v / n;
        }
    }
    EvalReport {
        method,
        hit_at,
        hit_at_std,
        per_class_accuracy: per_class,
        mean_entropy: runs.iter().map(|r| r.entropy).sum::<f64>() / n,
        n_test,
        seeds_used: seeds.to_vec(),
    }
}

fn validate_eval_inputs(test_features: &DenseMatrix, truth: &[ClassId], seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidParam("at least one seed is required".into()));
    }
    if truth.len() != test_features.cols() {
        return Err(Error::Dimension(format!(
            "{} test features but {} truth labels",
            test_features.cols(),
            truth.len()
        )));
    }
    Ok(())
}

/// Scores a trained dictionary on labeled unseen test features.
///
/// Code prediction does not depend on the seed, so AAg and AAw are solved once;
/// the transductive stage is repeated for every seed and averaged.
pub fn evaluate(
    dict: &JointDictionary,
    test_features: &DenseMatrix,
    truth: &[ClassId],
    protos: &UnseenPrototypes,
    params: &HyperParams,
    methods: &[Method],
    seeds: &[u64],
) -> Result<Vec<EvalReport>> {
    validate_eval_inputs(test_features, truth, seeds)?;
    let idx = truth_indices(truth, protos)?;
    let mut cache: BTreeMap<PredictMode, PredictionResult> = BTreeMap::new();
    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        let mode = method.predict_mode();
        if !cache.contains_key(&mode) {
            cache.insert(mode, predict_batch(dict, test_features, protos, params, mode)?);
        }
        let pred = &cache[&mode];
        let runs = match method {
            Method::Aag | Method::Aaw => {
                let run = measure(&pred.score_matrix(), &pred.labels, truth, &idx, pred.mean_entropy())?;
                (0..seeds.len())
                    .map(|_| Run {
                        hits: run.hits.clone(),
                        per_class: run.per_class.clone(),
                        entropy: run.entropy,
                    })
                    .collect::<Vec<_>>()
            }
            Method::Taaw => exec::try_map_indexed(Parallelism::default(), seeds.len(), |s| {
                let p = HyperParams {
                    seed: seeds[s],
                    ..params.clone()
                };
                let res = taaw_assign(&pred.predicted_attributes, protos, &p)?;
                measure(&res.scores, &res.labels, truth, &idx, pred.mean_entropy())
            })?,
        };
        reports.push(summarize(method, &runs, truth.len(), seeds));
    }
    Ok(reports)
}

/// Trains and evaluates on a freshly generated dataset per seed; the seed
/// drives both the generator and the learner. Reports are averaged across
/// seeds in method order.
pub fn synthetic_experiment(
    template: &SynthSpec,
    params: &HyperParams,
    methods: &[Method],
    seeds: &[u64],
) -> Result<Vec<EvalReport>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParam("at least one seed is required".into()));
    }
    let per_seed = exec::try_map_indexed(Parallelism::default(), seeds.len(), |s| {
        let spec = SynthSpec {
            seed: seeds[s],
            ..template.clone()
        };
        let p = HyperParams {
            seed: seeds[s],
            ..params.clone()
        };
        let data = gen_synthetic(&spec)?;
        let (dict, _) = train(&data.seen, &data.protos, &p)?;
        evaluate(&dict, &data.test_features, &data.test_labels, &data.protos, &p, methods, &[seeds[s]])
    })?;
    let n_test = per_seed[0].first().map_or(0, |r| r.n_test);
    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let runs: Vec<Run> = per_seed
                .iter()
                .map(|reps| Run {
                    hits: reps[i].hit_at.clone(),
                    per_class: reps[i].per_class_accuracy.clone(),
                    entropy: reps[i].mean_entropy,
                })
                .collect();
            summarize(m, &runs, n_test, seeds)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let s = m(2, 3, &[0.9, 0.1, 0.0, 0.0, 0.2, 0.8]);
        assert_eq!(hit_at_k(&s, &[0, 2], 1).unwrap(), 1.0);
    }

    #[test]
    fn uniform_scores_follow_tie_rule() {
        let s = DenseMatrix::from_fn(4, 4, |_, _| 0.25);
        let truth = [0, 1, 2, 3];
        for k in 1..=4 {
            assert_eq!(hit_at_k(&s, &truth, k).unwrap(), k as f64 / 4.0);
        }
    }

    #[test]
    fn k_bounds() {
        let s = DenseMatrix::zeros(1, 3);
        assert!(hit_at_k(&s, &[0], 0).is_err());
        assert!(hit_at_k(&s, &[0], 4).is_err());
        assert!(hit_at_k(&s, &[3], 1).is_err());
        assert!(hit_at_k(&s, &[0, 1], 1).is_err());
    }

    #[test]
    fn top_k_order() {
        assert_eq!(top_k(&[0.1, 0.5, 0.5, 0.9], 3), vec![3, 1, 2]);
    }

    #[test]
    fn label_accuracy() {
        assert_eq!(hit_at_1_labels(&[1, 2, 3, 3], &[1, 2, 3, 4]).unwrap(), 0.75);
        assert!(hit_at_1_labels(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn method_parse() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("knn".parse::<Method>().is_err());
    }

    #[test]
    fn kv_lines_are_flat() {
        let run = Run {
            hits: REPORTED_K.iter().map(|&k| (k, 0.5)).collect(),
            per_class: [(7, 0.25)].into_iter().collect(),
            entropy: 0.1,
        };
        let rep = summarize(Method::Taaw, &[run], 4, &[0, 1]);
        let text = rep.to_kv_lines();
        assert!(text.contains("taaw.hit@1=0.500000\n"));
        assert!(text.contains("taaw.class.7=0.250000\n"));
        assert!(text.contains("taaw.seeds=0,1\n"));
        assert!(text.lines().all(|l| l.split('=').count() == 2));
    }
}
