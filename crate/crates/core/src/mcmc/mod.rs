//! Sampling machinery shared by the hierarchical models: seeded generators,
//! distributions, conjugate updates, adaptive Metropolis blocks, the chain
//! runner, draw persistence and the Raftery-Lewis diagnostic.

mod chain;
mod conjugate;
pub mod diagnostics;
pub mod dist;
mod draws;
mod mh;
mod rng;

pub use chain::{run_chain, BlockSpec, ChainConfig, Model, SweepContext};
pub use conjugate::{
    conjugate_update, inv_gamma_posterior, normal_mean_posterior, ConjugateDraw, ConjugateKind, InvGammaPrior,
    NormalMeanStats, NormalPrior, VarianceStats,
};
pub use diagnostics::{
    format_two_quantile_table, minimum_iid_length, raftery_lewis, raftery_lewis_report, RafteryLewisEntry,
    RafteryLewisReport,
};
pub use dist::sample_truncated_normal;
pub use draws::PosteriorDraws;
pub use mh::{mh_step, AdaptiveBlock, Bounds, TARGET_ACCEPTANCE};
pub use rng::{label_stream, stream_rng, SimRng};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("empty support [{lower}, {upper}]")]
    EmptySupport { lower: f64, upper: f64 },
    #[error("degenerate sufficient statistics: {0}")]
    DegenerateStats(String),
    #[error("log target is {value} at the current point of block `{block}`")]
    NonFiniteTarget { block: String, value: f64 },
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {chain}, iteration {iteration}: {source}")]
    AtIteration {
        chain: usize,
        iteration: usize,
        #[source]
        source: Box<McmcError>,
    },
    #[error("non-finite draw for `{parameter}`")]
    NonFiniteDraw { parameter: String },
    #[error("chain of length {length} is shorter than the required pilot length {required}")]
    ChainTooShort { length: usize, required: usize },
    #[error("degenerate chain: {0}")]
    DegenerateChain(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("malformed draws: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
