//! Unimodal and fusion networks with score, polarity and intensity heads.
//!
//! Every network maps one aligned segment to a top representation and
//! attaches a `score_scale · tanh` score head plus the auxiliary heads its
//! [`TaskSet`] asks for. Vocal and visual features are mean-pooled over the
//! segment; the verbal channel is read word by word through an LSTM.

mod network;
mod spec;

pub use network::{build_model, fuse_ef, fuse_hf, fuse_lf, fuse_tfn, HeadVars, HfTrace, MultiTaskOutput, Network};
pub use spec::{Hyperparameters, ModelKind, ModelSpec, TaskSet};
