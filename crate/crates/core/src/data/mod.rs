//! Input grids and surfaces: age groups, five-year periods, mortality and
//! ASSAF surfaces, the age-cohort view of ASSAF, and CSV ingestion.
//!
//! ASSAF inputs are treated as point estimates; no uncertainty from the
//! upstream attribution step is carried.

mod cohort;
mod grid;
pub mod io;
mod surface;

pub use cohort::{build_age_cohort_matrix, AgeCohortMatrix};
pub use grid::{AgeGrid, AgeGroup, Period, Sex, ESTIMATION_PERIODS, ESTIMATION_START, FORECAST_PERIODS};
pub use io::{
    load_assaf_surface, load_e0_series, load_mortality_surface, validate_inputs, write_e0_csv, write_surface_csv, ColumnMapping,
    InputIssue, Schema,
};
pub use surface::{
    harmonize_assaf_ages, AgeSurface, AssafSurface, E0Bounds, E0Series, MortalitySurface, SliceKey,
    ASSAF_AGES,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("unknown sex `{value}`{}", fmt_row(*row))]
    UnknownSex { row: Option<usize>, value: String },
    #[error("year {0} is not a five-year period start or label")]
    InvalidPeriod(i32),
    #[error("invalid age grid: {0}")]
    InvalidAgeGrid(String),
    #[error("row {row}: age {age} is not on the age grid")]
    UnknownAgeGroup { row: usize, age: u32 },
    #[error("{country} {sex} {period}: missing age group {age}")]
    MissingAgeGroup {
        country: String,
        sex: Sex,
        period: i32,
        age: u32,
    },
    #[error("negative rate {value}{}", fmt_row(*row))]
    NegativeRate { row: Option<usize>, value: f64 },
    #[error("non-finite value in {column}{}", fmt_row(*row))]
    NonFiniteValue { row: Option<usize>, column: String },
    #[error("{country} {sex} {period}: open age group has a zero rate")]
    OpenGroupZeroRate {
        country: String,
        sex: Sex,
        period: i32,
    },
    #[error("row {row}: duplicate key {key}")]
    DuplicateKey { row: usize, key: String },
    #[error("fraction {value} outside [0, 1){}", fmt_row(*row))]
    OutOfRangeFraction { row: Option<usize>, value: f64 },
    #[error("ASSAF core age group {0} is missing")]
    MissingCoreGroup(u32),
    #[error("ASSAF at age {age} is {value}, harmonization requires {expected}")]
    UnharmonizedAssaf { age: u32, value: f64, expected: f64 },
    #[error("no observed periods for {country} {sex}")]
    EmptySlice { country: String, sex: Sex },
    #[error("{country} {period}: e0 {value} outside sanity bounds")]
    E0OutOfBounds {
        country: String,
        period: i32,
        value: f64,
    },
}

fn fmt_row(row: Option<usize>) -> String {
    row.map(|r| format!(" at row {r}")).unwrap_or_default()
}

impl DataError {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            DataError::Io { .. } => "Io",
            DataError::Csv(_) => "Csv",
            DataError::MissingColumn(_) => "MissingColumn",
            DataError::Parse { .. } => "Parse",
            DataError::UnknownSex { .. } => "UnknownSex",
            DataError::InvalidPeriod(_) => "InvalidPeriod",
            DataError::InvalidAgeGrid(_) => "InvalidAgeGrid",
            DataError::UnknownAgeGroup { .. } => "UnknownAgeGroup",
            DataError::MissingAgeGroup { .. } => "MissingAgeGroup",
            DataError::NegativeRate { .. } => "NegativeRate",
            DataError::NonFiniteValue { .. } => "NonFiniteValue",
            DataError::OpenGroupZeroRate { .. } => "OpenGroupZeroRate",
            DataError::DuplicateKey { .. } => "DuplicateKey",
            DataError::OutOfRangeFraction { .. } => "OutOfRangeFraction",
            DataError::MissingCoreGroup(_) => "MissingCoreGroup",
            DataError::UnharmonizedAssaf { .. } => "UnharmonizedAssaf",
            DataError::EmptySlice { .. } => "EmptySlice",
            DataError::E0OutOfBounds { .. } => "E0OutOfBounds",
        }
    }

    /// Input row the error refers to, when known.
    pub fn row(&self) -> Option<usize> {
        match self {
            DataError::Parse { row, .. }
            | DataError::UnknownAgeGroup { row, .. }
            | DataError::DuplicateKey { row, .. } => Some(*row),
            DataError::UnknownSex { row, .. }
            | DataError::NegativeRate { row, .. }
            | DataError::NonFiniteValue { row, .. }
            | DataError::OutOfRangeFraction { row, .. } => *row,
            _ => None,
        }
    }
}
