//! Command-line front end. [`run`] parses arguments, executes one subcommand,
//! and returns the process exit code.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::attr_predict::{predict_batch, PredictMode};
use crate::data::{normalize_columns, split_by_classes, ClassId, SeenDataset, UnseenPrototypes};
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_kv, format_table, Method};
use crate::io;
use crate::joint_dict::{train, JointDictionary};
use crate::linalg::DenseMatrix;
use crate::params::{Embedding, HyperParams};
use crate::synth::{gen_synthetic, lemma1_study, Lemma1Config, SynthSpec};
use crate::transductive::{nn_assign, taaw_assign};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// File names written by `synth` and picked up by `--data-dir`.
pub mod layout {
    pub const SEEN_FEATURES: &str = "seen_features.bin";
    pub const SEEN_ATTRIBUTES: &str = "seen_attributes.bin";
    pub const SEEN_LABELS: &str = "seen_labels.txt";
    pub const PROTOTYPES: &str = "prototypes.bin";
    pub const PROTOTYPE_LABELS: &str = "prototype_labels.txt";
    pub const TEST_FEATURES: &str = "test_features.bin";
    pub const TEST_LABELS: &str = "test_labels.txt";
}

#[derive(Parser, Debug)]
#[command(name = "jdzsl", version, about = "Zero-shot learning with coupled sparse dictionaries")]
struct Cli {
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// File of key=value hyperparameters; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scale every feature vector to unit length on load.
    #[arg(long, global = true)]
    normalize_l2: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Learn the coupled dictionaries.
    Train(TrainArgs),
    /// Predict codes and attributes of test features.
    Predict(PredictArgs),
    /// Assign predicted attributes to unseen classes.
    Assign(AssignArgs),
    /// Train (or load) a model and report hit@K accuracy.
    Evaluate(EvaluateArgs),
    /// Recovery-error scaling of the LASSO on Gaussian designs.
    Lemma1(Lemma1Args),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    r_true: Option<usize>,
    #[arg(long)]
    k_true: Option<usize>,
    /// Seen samples.
    #[arg(long)]
    n: Option<usize>,
    /// Unseen classes.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seen_classes: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    shift_sigma: Option<f64>,
    #[arg(long)]
    code_jitter: Option<f64>,
}

/// Input files. Either a directory written by `synth`, explicit per-role
/// files, or a full labeled set with a class-attribute table and split file.
#[derive(Args, Debug, Default)]
struct DataArgs {
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Seen features, `p × N`.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Seen attributes, `q × N`.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Class id per seen sample.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Unseen prototypes, `q × M`.
    #[arg(long)]
    prototypes: Option<PathBuf>,
    #[arg(long)]
    prototype_labels: Option<PathBuf>,
    #[arg(long)]
    test_features: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Attribute table with one column per class id; used with `--split`.
    #[arg(long)]
    class_attributes: Option<PathBuf>,
    /// Unseen class ids. Samples of those classes in `--features` become the
    /// test set.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Dictionary atoms.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    dz_sweeps: Option<usize>,
    #[arg(long)]
    fista_max_iter: Option<usize>,
    #[arg(long)]
    fista_tol: Option<f64>,
    #[arg(long)]
    aaw_max_iter: Option<usize>,
    /// Number or `auto`.
    #[arg(long)]
    aaw_step: Option<String>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    lp_alpha: Option<f64>,
    /// Number or `auto`.
    #[arg(long)]
    tsne_perplexity: Option<String>,
    #[arg(long)]
    tsne_iters: Option<usize>,
    #[arg(long, value_enum)]
    embedding: Option<EmbeddingArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EmbeddingArg {
    Tsne,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Aag,
    Aaw,
}

impl From<ModeArg> for PredictMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Aag => PredictMode::Aag,
            ModeArg::Aaw => PredictMode::Aaw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Nn,
    Taaw,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// Optional file for the objective after every round.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "aaw")]
    mode: ModeArg,
    /// Predicted attributes, `q × l`.
    #[arg(long)]
    out_attributes: PathBuf,
    /// Sparse codes, `r × l`.
    #[arg(long)]
    out_codes: Option<PathBuf>,
    /// Soft assignments, `l × M`.
    #[arg(long)]
    out_scores: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AssignArgs {
    /// Predicted attributes, `q × l`.
    #[arg(long)]
    predicted: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "taaw")]
    strategy: StrategyArg,
    /// Output: one class id per prediction.
    #[arg(long)]
    out: PathBuf,
    /// Write the graph coordinates as CSV (taaw only).
    #[arg(long)]
    emit_embedding: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Trained model; without it a model is trained from the seen data first.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Restrict to one prediction mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Restrict to one assignment strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Repetitions of the transductive stage, with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    repeats: u64,
    /// Also write the key=value report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Lemma1Args {
    #[arg(long, value_delimiter = ',', default_values_t = vec![32usize, 64, 128, 256])]
    p_list: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    lambda_scale: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            EXIT_NUMERICAL
        } else {
            match e {
                Error::InvalidParam(_) | Error::UnderComplete { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    let base = layered(cli, HyperParams::default())?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &base, out),
        Command::Train(a) => cmd_train(a, cli, &base, out),
        Command::Predict(a) => cmd_predict(a, cli),
        Command::Assign(a) => cmd_assign(a, cli, &base),
        Command::Evaluate(a) => cmd_evaluate(a, cli, &base, out),
        Command::Lemma1(a) => cmd_lemma1(a, &base, out),
    }
}

/// `start` (defaults or a model's stored settings), then the config file,
/// then `--seed`.
fn layered(cli: &Cli, start: HyperParams) -> std::result::Result<HyperParams, Failure> {
    let mut params = start;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let unknown = params.apply_kv_text(&text)?;
        if let Some((k, _)) = unknown.first() {
            return Err(usage(format!("unknown config key '{k}'")));
        }
    }
    if let Some(seed) = cli.seed {
        params.seed = seed;
    }
    Ok(params)
}

fn apply_flags(base: &HyperParams, f: &ParamArgs) -> std::result::Result<HyperParams, Failure> {
    let mut p = base.clone();
    if let Some(v) = f.lambda {
        p.lambda = v;
    }
    if let Some(v) = f.gamma {
        p.gamma = v;
    }
    if let Some(v) = f.rho {
        p.rho = v;
    }
    if let Some(v) = f.r {
        p.r = v;
    }
    if let Some(v) = f.outer_iters {
        p.outer_iters = v;
    }
    if let Some(v) = f.dz_sweeps {
        p.dz_sweeps = v;
    }
    if let Some(v) = f.fista_max_iter {
        p.fista_max_iter = v;
    }
    if let Some(v) = f.fista_tol {
        p.fista_tol = v;
    }
    if let Some(v) = f.aaw_max_iter {
        p.aaw_max_iter = v;
    }
    if let Some(v) = &f.aaw_step {
        p.set("aaw_step", v)?;
    }
    if let Some(v) = f.knn_k {
        p.knn_k = v;
    }
    if let Some(v) = f.lp_alpha {
        p.lp_alpha = v;
    }
    if let Some(v) = &f.tsne_perplexity {
        p.set("tsne_perplexity", v)?;
    }
    if let Some(v) = f.tsne_iters {
        p.tsne_iters = v;
    }
    if let Some(v) = f.embedding {
        p.embedding = match v {
            EmbeddingArg::Tsne => Embedding::Tsne,
            EmbeddingArg::Identity => Embedding::Identity,
        };
    }
    p.validate()?;
    Ok(p)
}

/// Loaded inputs; each part is present only when its files were given.
#[derive(Default)]
struct Inputs {
    seen: Option<SeenDataset>,
    protos: Option<UnseenPrototypes>,
    test: Option<(DenseMatrix, Vec<ClassId>)>,
}

fn resolve(dir: &Option<PathBuf>, explicit: &Option<PathBuf>, file: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| dir.as_ref().map(|d| d.join(file)))
}

fn load_features(path: &Path, normalize: bool) -> Result<DenseMatrix> {
    let m = io::read_matrix(path)?;
    Ok(if normalize { normalize_columns(&m) } else { m })
}

fn load_inputs(d: &DataArgs, normalize: bool) -> std::result::Result<Inputs, Failure> {
    if let Some(split) = &d.split {
        let (Some(f), Some(l), Some(c)) = (&d.features, &d.labels, &d.class_attributes) else {
            return Err(usage("--split needs --features, --labels and --class-attributes"));
        };
        let features = load_features(f, normalize)?;
        let labels = io::read_class_ids(l)?;
        let table = io::read_matrix(c)?;
        let unseen = io::read_class_ids(split)?;
        let (seen, protos, tx, tl) = split_by_classes(&features, &labels, &table, &unseen)?;
        return Ok(Inputs {
            seen: Some(seen),
            protos: Some(protos),
            test: Some((tx, tl)),
        });
    }
    use layout::*;
    let dir = &d.data_dir;
    if let Some(path) = dir.as_deref().filter(|p| !p.is_dir()) {
        return Err(Failure {
            code: EXIT_DATA,
            message: format!("data directory {} does not exist", path.display()),
        });
    }
    let mut inputs = Inputs::default();
    let seen_files = (
        resolve(dir, &d.features, SEEN_FEATURES),
        resolve(dir, &d.attributes, SEEN_ATTRIBUTES),
        resolve(dir, &d.labels, SEEN_LABELS),
    );
    if let (Some(f), Some(a), Some(l)) = seen_files {
        if f.exists() || d.features.is_some() {
            let x = load_features(&f, normalize)?;
            let z = io::read_matrix(&a)?;
            let labels = io::read_class_ids(&l)?;
            inputs.seen = Some(SeenDataset::new(x, z, labels)?);
        }
    }
    if let (Some(p), Some(l)) = (
        resolve(dir, &d.prototypes, PROTOTYPES),
        resolve(dir, &d.prototype_labels, PROTOTYPE_LABELS),
    ) {
        if p.exists() || d.prototypes.is_some() {
            inputs.protos = Some(UnseenPrototypes::new(io::read_matrix(&p)?, io::read_class_ids(&l)?)?);
        }
    }
    if let (Some(f), Some(l)) = (
        resolve(dir, &d.test_features, TEST_FEATURES),
        resolve(dir, &d.test_labels, TEST_LABELS),
    ) {
        if f.exists() || d.test_features.is_some() {
            inputs.test = Some((load_features(&f, normalize)?, io::read_class_ids(&l)?));
        }
    }
    Ok(inputs)
}

fn require<T>(v: Option<T>, what: &str) -> std::result::Result<T, Failure> {
    v.ok_or_else(|| usage(format!("missing input: {what}")))
}

fn cmd_synth(a: &SynthArgs, base: &HyperParams, out: &mut dyn Write) -> CmdResult {
    let d = SynthSpec::default();
    let spec = SynthSpec {
        p: a.p.unwrap_or(d.p),
        q: a.q.unwrap_or(d.q),
        r_true: a.r_true.unwrap_or(d.r_true),
        k_true: a.k_true.unwrap_or(d.k_true),
        n: a.n.unwrap_or(d.n),
        m: a.m.unwrap_or(d.m),
        seen_classes: a.seen_classes.unwrap_or(d.seen_classes),
        test_per_class: a.test_per_class.unwrap_or(d.test_per_class),
        noise_sigma: a.noise_sigma.unwrap_or(d.noise_sigma),
        shift_sigma: a.shift_sigma.unwrap_or(d.shift_sigma),
        code_jitter: a.code_jitter.unwrap_or(d.code_jitter),
        seed: base.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let data = gen_synthetic(&spec)?;
    std::fs::create_dir_all(&a.out_dir).map_err(Error::from)?;
    let dir = &a.out_dir;
    use layout::*;
    io::write_matrix(&dir.join(SEEN_FEATURES), data.seen.features())?;
    io::write_matrix(&dir.join(SEEN_ATTRIBUTES), data.seen.attributes())?;
    io::write_class_ids(&dir.join(SEEN_LABELS), data.seen.labels())?;
    io::write_matrix(&dir.join(PROTOTYPES), data.protos.attributes())?;
    io::write_class_ids(&dir.join(PROTOTYPE_LABELS), data.protos.labels())?;
    io::write_matrix(&dir.join(TEST_FEATURES), &data.test_features)?;
    io::write_class_ids(&dir.join(TEST_LABELS), &data.test_labels)?;
    let _ = writeln!(
        out,
        "wrote {} seen, {} prototypes, {} test samples to {}",
        data.seen.len(),
        data.protos.len(),
        data.test_labels.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs, cli: &Cli, base: &HyperParams, out: &mut dyn Write) -> CmdResult {
    let params = apply_flags(base, &a.params)?;
    let inputs = load_inputs(&a.data, cli.normalize_l2)?;
    let seen = require(inputs.seen, "seen features, attributes and labels")?;
    let protos = require(inputs.protos, "unseen prototypes and their labels")?;
    let (dict, report) = train(&seen, &protos, &params)?;
    io::save_model(&a.model, &dict, &params)?;
    if let Some(path) = &a.trace {
        io::write_values(path, &report.objective_trace)?;
    }
    let first = report.objective_trace.first().copied().unwrap_or(f64::NAN);
    let last = report.objective_trace.last().copied().unwrap_or(f64::NAN);
    let _ = writeln!(
        out,
        "objective {first:.6e} -> {last:.6e} over {} rounds; max column norm {:.12}",
        report.objective_trace.len() - 1,
        dict.max_column_norm()
    );
    Ok(())
}

/// A saved model and its settings; the config file and flags still override
/// what was stored.
fn load_model_params(path: &Path, cli: &Cli, flags: &ParamArgs) -> std::result::Result<(JointDictionary, HyperParams), Failure> {
    let (dict, stored) = io::load_model(path)?;
    let params = layered(cli, stored)?;
    Ok((dict, apply_flags(&params, flags)?))
}

fn test_set(inputs: &mut Inputs) -> std::result::Result<(DenseMatrix, Vec<ClassId>), Failure> {
    require(inputs.test.take(), "test features and labels")
}

fn cmd_predict(a: &PredictArgs, cli: &Cli) -> CmdResult {
    let (dict, params) = load_model_params(&a.model, cli, &a.params)?;
    let mut inputs = load_inputs(&a.data, cli.normalize_l2)?;
    let protos = require(inputs.protos.take(), "unseen prototypes and their labels")?;
    let features = match inputs.test.take() {
        Some((x, _)) => x,
        None => return Err(usage("missing input: --test-features")),
    };
    let pred = predict_batch(&dict, &features, &protos, &params, a.mode.into())?;
    io::write_matrix(&a.out_attributes, &pred.predicted_attributes)?;
    if let Some(p) = &a.out_codes {
        io::write_matrix(p, &pred.codes)?;
    }
    if let Some(p) = &a.out_scores {
        io::write_matrix(p, &pred.score_matrix())?;
    }
    Ok(())
}

fn cmd_assign(a: &AssignArgs, cli: &Cli, base: &HyperParams) -> CmdResult {
    let params = apply_flags(base, &a.params)?;
    let inputs = load_inputs(&a.data, cli.normalize_l2)?;
    let protos = require(inputs.protos, "unseen prototypes and their labels")?;
    let zhat = io::read_matrix(&a.predicted)?;
    match a.strategy {
        StrategyArg::Nn => {
            if a.emit_embedding.is_some() {
                return Err(usage("--emit-embedding requires --strategy taaw"));
            }
            io::write_class_ids(&a.out, &nn_assign(&zhat, &protos)?)?;
        }
        StrategyArg::Taaw => {
            let res = taaw_assign(&zhat, &protos, &params)?;
            io::write_class_ids(&a.out, &res.labels)?;
            if let Some(path) = &a.emit_embedding {
                let labels: Vec<ClassId> = protos.labels().iter().chain(&res.labels).copied().collect();
                let file = std::fs::File::create(path).map_err(Error::from)?;
                io::write_embedding_csv(std::io::BufWriter::new(file), &res.embedding, protos.len(), &labels)?;
            }
        }
    }
    Ok(())
}

fn selected_methods(mode: Option<ModeArg>, strategy: Option<StrategyArg>) -> std::result::Result<Vec<Method>, Failure> {
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| match mode {
            Some(ModeArg::Aag) => *m == Method::Aag,
            Some(ModeArg::Aaw) => *m != Method::Aag,
            None => true,
        })
        .filter(|m| match strategy {
            Some(StrategyArg::Nn) => *m != Method::Taaw,
            Some(StrategyArg::Taaw) => *m == Method::Taaw,
            None => true,
        })
        .collect();
    if methods.is_empty() {
        return Err(usage("transductive assignment is defined for aaw predictions only"));
    }
    Ok(methods)
}

fn cmd_evaluate(a: &EvaluateArgs, cli: &Cli, base: &HyperParams, out: &mut dyn Write) -> CmdResult {
    let methods = selected_methods(a.mode, a.strategy)?;
    if a.repeats == 0 {
        return Err(usage("--repeats must be >= 1"));
    }
    let mut inputs = load_inputs(&a.data, cli.normalize_l2)?;
    let protos = require(inputs.protos.take(), "unseen prototypes and their labels")?;
    let (dict, params) = match &a.model {
        Some(path) => load_model_params(path, cli, &a.params)?,
        None => {
            let params = apply_flags(base, &a.params)?;
            let seen = require(inputs.seen.take(), "seen data (or --model)")?;
            (train(&seen, &protos, &params)?.0, params)
        }
    };
    let (tx, tl) = test_set(&mut inputs)?;
    let seeds: Vec<u64> = (0..a.repeats).map(|i| params.seed.wrapping_add(i)).collect();
    let reports = evaluate(&dict, &tx, &tl, &protos, &params, &methods, &seeds)?;
    let kv = format_kv(&reports);
    let _ = write!(out, "{}\n{kv}", format_table(&reports));
    if let Some(path) = &a.report {
        std::fs::write(path, &kv).map_err(Error::from)?;
    }
    Ok(())
}

fn cmd_lemma1(a: &Lemma1Args, base: &HyperParams, out: &mut dyn Write) -> CmdResult {
    let d = Lemma1Config::default();
    let cfg = Lemma1Config {
        r: a.r.unwrap_or(d.r),
        k: a.k.unwrap_or(d.k),
        noise_sigma: a.noise_sigma.unwrap_or(d.noise_sigma),
        lambda_scale: a.lambda_scale.unwrap_or(d.lambda_scale),
        seed: base.seed,
        ..d
    };
    let rep = lemma1_study(&a.p_list, a.trials, &cfg)?;
    let mut kv = String::new();
    let _ = writeln!(out, "{:>6}{:>14}{:>12}{:>12}{:>10}", "p", "mean_error", "std", "rate", "support");
    for row in &rep.rows {
        let _ = writeln!(
            out,
            "{:>6}{:>14.6}{:>12.6}{:>12.6}{:>10.3}",
            row.p, row.mean_error, row.std_error, row.rate, row.support_recovery
        );
        let _ = writeln!(kv, "lemma1.p{}.mean_error={:.9}", row.p, row.mean_error);
        let _ = writeln!(kv, "lemma1.p{}.support_recovery={:.6}", row.p, row.support_recovery);
    }
    let _ = writeln!(kv, "lemma1.fitted_constant={:.9}", rep.fitted_constant);
    let _ = write!(out, "\n{kv}");
    if let Some(path) = &a.report {
        std::fs::write(path, &kv).map_err(Error::from)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("jdzsl").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("evaluate"));
    }

    #[test]
    fn method_selection() {
        assert_eq!(selected_methods(None, None).unwrap(), Method::ALL.to_vec());
        assert_eq!(selected_methods(None, Some(StrategyArg::Taaw)).unwrap(), vec![Method::Taaw]);
        assert_eq!(
            selected_methods(Some(ModeArg::Aaw), Some(StrategyArg::Nn)).unwrap(),
            vec![Method::Aaw]
        );
        assert!(selected_methods(Some(ModeArg::Aag), Some(StrategyArg::Taaw)).is_err());
    }

    #[test]
    fn flags_override_config() {
        let base = HyperParams {
            lambda: 0.5,
            ..HyperParams::default()
        };
        let flags = ParamArgs {
            gamma: Some(2.0),
            ..ParamArgs::default()
        };
        let p = apply_flags(&base, &flags).unwrap();
        assert_eq!((p.lambda, p.gamma), (0.5, 2.0));
        let bad = ParamArgs {
            lp_alpha: Some(1.5),
            ..ParamArgs::default()
        };
        assert!(apply_flags(&base, &bad).is_err());
    }
}
