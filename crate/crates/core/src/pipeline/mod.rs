//! Orchestration of the full forecast, its configuration and persistence,
//! synthetic inputs, and out-of-sample validation.

mod config;
mod run;
mod simulate;
mod validate;

pub use config::{ChainSettings, DataPaths, GapSettings, GapSource, PipelineConfig, SyntheticSpec};
pub use run::{
    file_sha256, load_inputs, projected_asaf_gap, run_full_pipeline, run_with_inputs, ForecastBundle, Inputs, Manifest,
    StageRecord,
};
pub use simulate::{simulate_synthetic, AssafTruth, CountryTruth, E0nsTruth, SyntheticData, SyntheticTruth, TruthRecord};
pub use validate::{
    lee_carter_baseline, mean_absolute_error, observed_cells, out_of_sample_validate, score_cells, validate_inputs_split,
    ForecastMetrics, IntervalCell, ValidationReport, ValidationRow, BASELINE_DRAWS,
};
