//! Graph learning and sampling-set selection for graph-signal reconstruction.
//!
//! The pipeline: draw smooth signals ([`synth`]), learn a graph from their
//! empirical covariance ([`learn`]), pick the vertices to observe
//! ([`sampler`]), reconstruct the rest ([`reconstruct`]) and score the
//! result ([`bench`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod graph;
pub mod io;
pub mod learn;
pub mod matrix;
pub mod reconstruct;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{build_graph_model, sampling_operator, GraphModel, SamplingSet};
pub use learn::{learn_cgl, learn_ddgl, LearnConfig, LearnTrace};
pub use matrix::DenseSymMatrix;
pub use reconstruct::{glr_reconstruct, GlrSolver, ReconstructionProblem};
