//! Fair node classification on graphs through sensitive-information
//! neutralization.
//!
//! Instead of filtering sensitive signal out of a graph (dropping edges,
//! masking features), this crate adds an estimate of every node's
//! heterogeneous-neighbor features before message passing. Nodes then carry
//! a statistically balanced view of both sensitive groups, and downstream
//! predictions depend less on the sensitive attribute.
//!
//! Layout:
//! - [`graph`]: CSR graph store, TSV I/O, neighbor statistics, splits.
//! - [`numerics`]: dense/sparse kernels, a reverse-mode tape, Adam.
//! - [`encoders`]: GCN, GIN and GraphSAGE with per-layer input hooks.
//! - [`neutralizer`]: heterogeneous-neighbor targets, the feature estimator,
//!   edge reweighting, and feature/representation neutralization.
//! - [`trainer`]: alternating estimator / encoder / discriminator training.
//! - [`metrics`]: accuracy, F1, demographic parity, equal opportunity.
//! - [`probe`]: leakage probes and Monte-Carlo checks of the bias model.
//! - [`synth`]: homophilous, sensitively biased synthetic graphs.

pub mod encoders;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod mlp;
pub mod neutralizer;
pub mod numerics;
pub mod probe;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use encoders::{EncoderConfig, EncoderKind};
pub use error::{Error, Result};
pub use graph::{Graph, NeighborStats, Split};
pub use metrics::{MetricsReport, Predictions, SeedMetrics};
pub use neutralizer::{NeutralizeConfig, Variant};
pub use numerics::{DenseMatrix, ParamStore, SparseMatrix, Tape, Var};
pub use synth::{LabelRule, SynthConfig};
pub use trainer::{Checkpoint, TrainConfig, TrainOutcome};
