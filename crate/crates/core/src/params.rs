//! Hyperparameters, with `key=value` text (de)serialization shared by the
//! config file and the model file.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Low-dimensional embedding used before graph construction in the
/// transductive step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Embedding {
    /// Exact t-SNE to two dimensions.
    Tsne,
    /// Build the graph directly in attribute space.
    Identity,
}

impl FromStr for Embedding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsne" => Ok(Self::Tsne),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(Error::InvalidParam(format!("unknown embedding '{other}'"))),
        }
    }
}

impl Embedding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tsne => "tsne",
            Self::Identity => "identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    /// Sparsity weight.
    pub lambda: f64,
    /// Entropy weight of the attribute-aware objective.
    pub gamma: f64,
    /// Student-t kernel parameter.
    pub rho: f64,
    /// Number of dictionary atoms.
    pub r: usize,
    pub outer_iters: usize,
    /// Alternating `B` / `D_z` sweeps inside one `D_z` update.
    pub dz_sweeps: usize,
    pub fista_max_iter: usize,
    pub fista_tol: f64,
    pub aaw_max_iter: usize,
    /// Proximal step for the attribute-aware iteration; `None` derives it from
    /// the data term's Lipschitz constant.
    pub aaw_step: Option<f64>,
    pub knn_k: usize,
    pub lp_alpha: f64,
    /// `None` picks `min(30, (n − 1)/3 − 1)` for the graph size at hand.
    pub tsne_perplexity: Option<f64>,
    pub tsne_iters: usize,
    pub embedding: Embedding,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            gamma: 0.1,
            rho: 1.0,
            r: 64,
            outer_iters: 30,
            dz_sweeps: 5,
            fista_max_iter: 500,
            fista_tol: 1e-7,
            aaw_max_iter: 200,
            aaw_step: None,
            knn_k: 10,
            lp_alpha: 0.99,
            tsne_perplexity: None,
            tsne_iters: 1000,
            embedding: Embedding::Tsne,
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParam(format!("cannot parse {key}={value}")))
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "auto" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl HyperParams {
    /// Names accepted by [`HyperParams::set`].
    pub const KEYS: &'static [&'static str] = &[
        "lambda",
        "gamma",
        "rho",
        "r",
        "outer_iters",
        "dz_sweeps",
        "fista_max_iter",
        "fista_tol",
        "aaw_max_iter",
        "aaw_step",
        "knn_k",
        "lp_alpha",
        "tsne_perplexity",
        "tsne_iters",
        "embedding",
        "seed",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        if self.r == 0 {
            return bad("r must be >= 1".into());
        }
        if self.fista_max_iter == 0 {
            return bad("fista_max_iter must be >= 1".into());
        }
        if !(self.fista_tol >= 0.0) {
            return bad(format!("fista_tol must be >= 0, got {}", self.fista_tol));
        }
        if let Some(t) = self.aaw_step {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("aaw_step must be > 0, got {t}"));
            }
        }
        if self.knn_k == 0 {
            return bad("knn_k must be >= 1".into());
        }
        if !(self.lp_alpha > 0.0 && self.lp_alpha < 1.0) {
            return bad(format!("lp_alpha must lie in (0, 1), got {}", self.lp_alpha));
        }
        if let Some(p) = self.tsne_perplexity {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("tsne_perplexity must be > 0, got {p}"));
            }
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lambda" => self.lambda = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "outer_iters" => self.outer_iters = parse(key, value)?,
            "dz_sweeps" => self.dz_sweeps = parse(key, value)?,
            "fista_max_iter" => self.fista_max_iter = parse(key, value)?,
            "fista_tol" => self.fista_tol = parse(key, value)?,
            "aaw_max_iter" => self.aaw_max_iter = parse(key, value)?,
            "aaw_step" => self.aaw_step = parse_opt(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "lp_alpha" => self.lp_alpha = parse(key, value)?,
            "tsne_perplexity" => self.tsne_perplexity = parse_opt(key, value)?,
            "tsne_iters" => self.tsne_iters = parse(key, value)?,
            "embedding" => self.embedding = value.trim().parse()?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::InvalidParam(format!("unknown parameter '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    /// Keys not in [`HyperParams::KEYS`] are returned untouched for the caller.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut rest = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParam(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if Self::KEYS.contains(&k) {
                self.set(k, v)?;
            } else {
                rest.push((k.to_string(), v.to_string()));
            }
        }
        Ok(rest)
    }

    /// `key=value` lines that [`HyperParams::apply_kv_text`] reads back exactly.
    pub fn to_kv_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_string(), |x| format!("{x:?}"));
        let mut s = String::new();
        let _ = writeln!(s, "lambda={:?}", self.lambda);
        let _ = writeln!(s, "gamma={:?}", self.gamma);
        let _ = writeln!(s, "rho={:?}", self.rho);
        let _ = writeln!(s, "r={}", self.r);
        let _ = writeln!(s, "outer_iters={}", self.outer_iters);
        let _ = writeln!(s, "dz_sweeps={}", self.dz_sweeps);
        let _ = writeln!(s, "fista_max_iter={}", self.fista_max_iter);
        let _ = writeln!(s, "fista_tol={:?}", self.fista_tol);
        let _ = writeln!(s, "aaw_max_iter={}", self.aaw_max_iter);
        let _ = writeln!(s, "aaw_step={}", opt(self.aaw_step));
        let _ = writeln!(s, "knn_k={}", self.knn_k);
        let _ = writeln!(s, "lp_alpha={:?}", self.lp_alpha);
        let _ = writeln!(s, "tsne_perplexity={}", opt(self.tsne_perplexity));
        let _ = writeln!(s, "tsne_iters={}", self.tsne_iters);
        let _ = writeln!(s, "embedding={}", self.embedding.as_str());
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }

    /// Perplexity for a t-SNE run over `n` points.
    pub fn perplexity_for(&self, n: usize) -> f64 {
        self.tsne_perplexity.unwrap_or_else(|| {
            let cap = (n as f64 - 1.0) / 3.0;
            let auto = 30.0_f64.min(cap - 1.0);
            if auto >= 1.0 {
                auto
            } else {
                0.5 * cap
            }
        })
    }
}
