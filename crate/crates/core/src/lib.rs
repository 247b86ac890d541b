//! Large margin sigmoid belief networks and Boltzmann machines for binary
//! multi-label structured prediction.
//!
//! The crate covers hinge-loss training by dual coordinate descent,
//! branch-and-bound MAP inference for directed models, exact and ICM
//! baselines, multi-label metrics, planted-model sampling and the file
//! formats used by the `lmnet` command-line tool.

pub mod bench;
pub mod error;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod model;
pub mod ordering;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use inference::{
    bb_infer, exhaustive_infer, icm_infer, infer, infer_batch, BBConfig, InferMethod, InferenceResult, InferenceStatus,
};
pub use metrics::{evaluate, MetricReport};
pub use model::{
    bm_log_likelihood, joint_loss, node_margin, sbn_log_likelihood, surrogate_bound_check, Clique, Dataset, GraphKind,
    GraphSpec, Instance, Label, LossBreakdown, Potentials, WeightVector,
};
pub use ordering::{fscore_order, index_order, OrderKind, OrderStrategy};
pub use training::{train_lmbm, train_lmsbn, TrainConfig, Trained};
