//! Smoking-aware probabilistic forecasts of life expectancy at birth.
//!
//! Age-specific smoking-attributable fractions are modelled with an
//! age-cohort hierarchical model, non-smoking life expectancy with a second
//! hierarchical model, and the two are recombined into all-cause male life
//! expectancy. Female life expectancy follows from a gap regression.

pub mod assaf;
pub mod data;
pub mod e0ns;
pub mod gap;
pub mod lifetable;
pub mod mcmc;
pub mod pipeline;
pub mod reconstruct;
pub mod stats;
pub mod trajectory;

use thiserror::Error;

/// Any error raised by the library, with pipeline stage labels where known.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid truth: {0}")]
    InvalidTruth(String),
    #[error("test data missing: {0}")]
    TestDataMissing(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    LifeTable(#[from] lifetable::LifeTableError),
    #[error(transparent)]
    Mcmc(#[from] mcmc::McmcError),
    #[error(transparent)]
    Assaf(#[from] assaf::AssafError),
    #[error(transparent)]
    E0ns(#[from] e0ns::E0nsError),
    #[error(transparent)]
    Reconstruct(#[from] reconstruct::ReconstructError),
    #[error(transparent)]
    Gap(#[from] gap::GapError),
    #[error(transparent)]
    Trajectory(#[from] trajectory::TrajectoryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
