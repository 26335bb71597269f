//! Hierarchical age-cohort model for age-specific smoking-attributable
//! fractions: fitting, posterior mean surfaces and forecasts.

mod curve;
mod forecast;
mod layout;
mod model;

pub use curve::{double_logistic_cohort, logistic, DoubleLogisticParams, COHORT_ORIGIN};
pub use forecast::{
    country_draw, forecast_assaf, mean_sample_indices, posterior_assaf_mean_samples, AssafForecast,
    AssafMeanSample, DrawSurface,
};
pub use layout::{AssafLayout, CountryLayout, CURVE_NAMES, GLOBAL_NAMES};
pub use model::{
    assaf_level1_loglik, loglik_by_cells, simulate_assaf_panel, AssafModel, AssafPriors, AssafState, CountryData,
    CountryState, GlobalState, SyntheticAssaf,
};

use serde::Serialize;
use thiserror::Error;

use crate::data::{build_age_cohort_matrix, AssafSurface, DataError, Sex, ASSAF_AGES};
use crate::mcmc::{run_chain, ChainConfig, McmcError, PosteriorDraws};
use crate::stats;

#[derive(Debug, Error)]
pub enum AssafError {
    #[error("{country}: {found} observed periods, at least 3 required")]
    InsufficientPeriods { country: String, found: usize },
    #[error("no countries to fit")]
    NoCountries,
    #[error("non-finite likelihood at {country}, age {age}, cohort {cohort}")]
    NonFiniteLik { country: String, age: u32, cohort: i32 },
    #[error("initial values for {0} are not finite")]
    InitializationFailure(String),
    #[error("requested {count} samples from {available} retained draws")]
    CountExceedsDraws { count: usize, available: usize },
    #[error("draw layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}

/// Fits the model to every country of `sex` in `surface`.
pub fn fit_assaf_bhm(surface: &AssafSurface, sex: Sex, config: &ChainConfig) -> Result<PosteriorDraws, AssafError> {
    fit_assaf_with(surface, sex, config, AssafPriors::default())
}

pub fn fit_assaf_with(
    surface: &AssafSurface,
    sex: Sex,
    config: &ChainConfig,
    priors: AssafPriors,
) -> Result<PosteriorDraws, AssafError> {
    let matrices = surface
        .countries()
        .iter()
        .filter(|c| !surface.periods(c, sex).is_empty())
        .map(|c| build_age_cohort_matrix(surface, c, sex))
        .collect::<Result<Vec<_>, _>>()?;
    let model = AssafModel::new(matrices)?.with_priors(priors);
    let draws = run_chain(&model, config)?;
    Ok(draws.with_meta(serde_json::json!({
        "model": "assaf",
        "sex": sex.to_string(),
        "clamp": [0.0, crate::lifetable::MAX_ATTRIBUTION],
    })))
}

/// Posterior median and 95% interval of one effect.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSummary {
    pub country: String,
    /// `age`, `cohort` or `cohort_old`.
    pub kind: &'static str,
    /// Age for age effects, birth cohort otherwise.
    pub index: i32,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Age- and cohort-effect summaries per country.
pub fn effect_summaries(draws: &PosteriorDraws) -> Result<Vec<EffectSummary>, AssafError> {
    let layout = AssafLayout::from_names(draws.names())?;
    let mut out = Vec::new();
    let summarize = |country: &str, kind, index, col: usize| {
        let q = stats::quantiles(&draws.column_at(col), &[0.5, 0.025, 0.975]);
        EffectSummary {
            country: country.to_string(),
            kind,
            index,
            median: q[0],
            lower: q[1],
            upper: q[2],
        }
    };
    for c in &layout.countries {
        for (age, &col) in ASSAF_AGES.iter().zip(&c.age_effect) {
            out.push(summarize(&c.name, "age", *age as i32, col));
        }
        for &(coh, col) in &c.cohorts {
            out.push(summarize(&c.name, "cohort", coh, col));
        }
        for &(coh, col) in &c.old_cohorts {
            out.push(summarize(&c.name, "cohort_old", coh, col));
        }
    }
    Ok(out)
}
