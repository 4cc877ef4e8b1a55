//! Zero-shot classification through coupled sparse dictionaries.
//!
//! Image features and class attributes are modeled as sparse combinations of
//! two dictionaries that share their codes. Training learns the pair from seen
//! classes plus the unseen class prototypes; prediction sparse-codes an unseen
//! image, decodes its attributes, and assigns a class either by nearest
//! prototype or by label propagation over all test predictions.

pub mod attr_predict;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod io;
pub mod joint_dict;
pub mod linalg;
pub mod params;
pub mod sparse_opt;
pub mod synth;
pub mod transductive;

pub use attr_predict::{predict_aag, predict_aaw, predict_batch, PredictMode, PredictionResult, SoftAssignment};
pub use data::{ClassId, SeenDataset, UnseenPrototypes};
pub use error::{Error, Result};
pub use eval::{evaluate, hit_at_k, EvalReport, Method};
pub use exec::Parallelism;
pub use joint_dict::{train, JointDictionary, TrainReport};
pub use linalg::DenseMatrix;
pub use params::{Embedding, HyperParams};
pub use sparse_opt::{fista_lasso, LassoProblem, SolveReport};
pub use synth::{gen_synthetic, lemma1_study, SynthSpec};
pub use transductive::{label_propagate, nn_assign, taaw_assign, Graph};
