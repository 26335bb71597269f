//! Delimited-text ingestion and export for mortality, ASSAF and e0 inputs.
//!
//! Column names are configurable through [`ColumnMapping`] so that exports
//! with different headers load without preprocessing. The period column may
//! hold either the first year of the period (1950) or its label year (1953).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{AgeGrid, Period, Sex};
use super::surface::{
    harmonize_assaf_ages, AssafSurface, E0Bounds, E0Series, MortalitySurface, SliceKey, ASSAF_AGES,
};
use super::DataError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub country: String,
    pub sex: String,
    pub period: String,
    /// Age lower bound column; unused for e0 files.
    #[serde(default)]
    pub age: Option<String>,
    pub value: String,
}

impl ColumnMapping {
    pub fn mortality() -> Self {
        Self::with_value("mx", true)
    }

    pub fn assaf() -> Self {
        Self::with_value("y", true)
    }

    pub fn e0() -> Self {
        Self::with_value("e0", false)
    }

    fn with_value(value: &str, with_age: bool) -> Self {
        ColumnMapping {
            country: "country".into(),
            sex: "sex".into(),
            period: "period_start".into(),
            age: with_age.then(|| "age_lower".into()),
            value: value.into(),
        }
    }
}

/// Column mapping plus the age grid the file must cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: ColumnMapping,
    #[serde(default)]
    pub grid: AgeGrid,
}

impl Schema {
    pub fn mortality() -> Self {
        Schema {
            columns: ColumnMapping::mortality(),
            grid: AgeGrid::default(),
        }
    }

    pub fn assaf() -> Self {
        Schema {
            columns: ColumnMapping::assaf(),
            grid: AgeGrid::default(),
        }
    }

    pub fn e0() -> Self {
        Schema {
            columns: ColumnMapping::e0(),
            grid: AgeGrid::default(),
        }
    }
}

struct Record {
    row: usize,
    key: SliceKey,
    age: Option<u32>,
    value: f64,
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses every row, collecting all problems instead of stopping at the first.
fn read_records<R: Read>(reader: R, columns: &ColumnMapping) -> (Vec<Record>, Vec<DataError>) {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut issues = Vec::new();
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return (Vec::new(), vec![DataError::Csv(e)]),
    };
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = |name: &str, issues: &mut Vec<DataError>| {
        let idx = find(name);
        if idx.is_none() {
            issues.push(DataError::MissingColumn(name.to_string()));
        }
        idx
    };
    let country = col(&columns.country, &mut issues);
    let sex = col(&columns.sex, &mut issues);
    let period = col(&columns.period, &mut issues);
    let age = columns.age.as_deref().map(|a| col(a, &mut issues));
    let value = col(&columns.value, &mut issues);
    let (Some(country), Some(sex), Some(period), Some(value)) = (country, sex, period, value) else {
        return (Vec::new(), issues);
    };
    let age = match age {
        Some(None) => return (Vec::new(), issues),
        Some(Some(i)) => Some(i),
        None => None,
    };

    let mut records = Vec::new();
    for result in rdr.records() {
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                issues.push(DataError::Csv(e));
                continue;
            }
        };
        let row = rec.position().map(|p| p.line() as usize).unwrap_or_default();
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_err = |column: &str, value: &str| DataError::Parse {
            row,
            column: column.to_string(),
            value: value.to_string(),
        };

        let sex_value = match field(sex).parse::<Sex>() {
            Ok(s) => s,
            Err(_) => {
                issues.push(DataError::UnknownSex {
                    row: Some(row),
                    value: field(sex).to_string(),
                });
                continue;
            }
        };
        let period_value = match field(period).parse::<i32>() {
            Ok(y) => match Period::from_any_year(y) {
                Ok(p) => p,
                Err(_) => {
                    issues.push(parse_err(&columns.period, field(period)));
                    continue;
                }
            },
            Err(_) => {
                issues.push(parse_err(&columns.period, field(period)));
                continue;
            }
        };
        let age_value = match age {
            Some(i) => match field(i).parse::<u32>() {
                Ok(a) => Some(a),
                Err(_) => {
                    issues.push(parse_err(columns.age.as_deref().unwrap_or("age"), field(i)));
                    continue;
                }
            },
            None => None,
        };
        let v = match field(value).parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                issues.push(DataError::NonFiniteValue {
                    row: Some(row),
                    column: columns.value.clone(),
                });
                continue;
            }
            Err(_) => {
                issues.push(parse_err(&columns.value, field(value)));
                continue;
            }
        };
        let c = field(country);
        if c.is_empty() || c.contains('[') || c.contains(']') {
            issues.push(parse_err(&columns.country, c));
            continue;
        }
        records.push(Record {
            row,
            key: SliceKey::new(c, sex_value, period_value),
            age: age_value,
            value: v,
        });
    }
    (records, issues)
}

type AgeRows = BTreeMap<SliceKey, BTreeMap<u32, (usize, f64)>>;

fn group_by_slice(records: Vec<Record>, issues: &mut Vec<DataError>) -> AgeRows {
    let mut out: AgeRows = BTreeMap::new();
    for r in records {
        let age = r.age.unwrap_or_default();
        let entry = out.entry(r.key.clone()).or_default();
        if entry.contains_key(&age) {
            issues.push(DataError::DuplicateKey {
                row: r.row,
                key: format!("{} {} {} age {}", r.key.country, r.key.sex, r.key.period.start_year(), age),
            });
            continue;
        }
        entry.insert(age, (r.row, r.value));
    }
    out
}

/// Reads a mortality surface, returning every problem found.
pub fn read_mortality_surface<R: Read>(reader: R, schema: &Schema) -> Result<MortalitySurface, Vec<DataError>> {
    let (records, mut issues) = read_records(reader, &schema.columns);
    let grid = &schema.grid;
    for r in &records {
        if r.value < 0.0 {
            issues.push(DataError::NegativeRate {
                row: Some(r.row),
                value: r.value,
            });
        }
        if let Some(a) = r.age {
            if grid.index_of(a).is_none() {
                issues.push(DataError::UnknownAgeGroup { row: r.row, age: a });
            }
        }
    }
    let grouped = group_by_slice(records, &mut issues);
    let mut slices = BTreeMap::new();
    for (key, ages) in grouped {
        let mut values = Vec::with_capacity(grid.len());
        for g in grid.iter() {
            match ages.get(&g.lower) {
                Some(&(_, v)) => values.push(v),
                None => {
                    issues.push(DataError::MissingAgeGroup {
                        country: key.country.clone(),
                        sex: key.sex,
                        period: key.period.start_year(),
                        age: g.lower,
                    });
                    break;
                }
            }
        }
        if values.len() == grid.len() {
            slices.insert(key, values);
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }
    MortalitySurface::new(grid.clone(), slices).map_err(|e| vec![e])
}

/// Reads ASSAF values and harmonizes each slice onto the full grid.
pub fn read_assaf_surface<R: Read>(reader: R, schema: &Schema) -> Result<AssafSurface, Vec<DataError>> {
    let (records, mut issues) = read_records(reader, &schema.columns);
    for r in &records {
        if !(0.0..1.0).contains(&r.value) {
            issues.push(DataError::OutOfRangeFraction {
                row: Some(r.row),
                value: r.value,
            });
        }
    }
    let grouped = group_by_slice(records, &mut issues);
    let mut slices = BTreeMap::new();
    for (key, ages) in grouped {
        let raw: BTreeMap<u32, f64> = ages.iter().map(|(&a, &(_, v))| (a, v)).collect();
        if let Some(&missing) = ASSAF_AGES.iter().find(|a| !raw.contains_key(a)) {
            issues.push(DataError::MissingAgeGroup {
                country: key.country.clone(),
                sex: key.sex,
                period: key.period.start_year(),
                age: missing,
            });
            continue;
        }
        match harmonize_assaf_ages(&raw, &schema.grid) {
            Ok(v) => {
                slices.insert(key, v);
            }
            Err(e) => issues.push(e),
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }
    AssafSurface::new(schema.grid.clone(), slices).map_err(|e| vec![e])
}

pub fn read_e0_series<R: Read>(reader: R, columns: &ColumnMapping, bounds: E0Bounds) -> Result<E0Series, Vec<DataError>> {
    let mut columns = columns.clone();
    columns.age = None;
    let (records, mut issues) = read_records(reader, &columns);
    let mut entries = BTreeMap::new();
    for r in records {
        if !(r.value > bounds.lower && r.value < bounds.upper) {
            issues.push(DataError::E0OutOfBounds {
                country: r.key.country.clone(),
                period: r.key.period.start_year(),
                value: r.value,
            });
            continue;
        }
        if entries.contains_key(&r.key) {
            issues.push(DataError::DuplicateKey {
                row: r.row,
                key: format!("{} {} {}", r.key.country, r.key.sex, r.key.period.start_year()),
            });
            continue;
        }
        entries.insert(r.key, r.value);
    }
    if !issues.is_empty() {
        return Err(issues);
    }
    E0Series::with_bounds(entries, bounds).map_err(|e| vec![e])
}

fn first(mut issues: Vec<DataError>) -> DataError {
    issues.swap_remove(0)
}

/// Loads a mortality CSV; fails with the first problem found.
pub fn load_mortality_surface(path: &Path, schema: &Schema) -> Result<MortalitySurface, DataError> {
    read_mortality_surface(open(path)?, schema).map_err(first)
}

pub fn load_assaf_surface(path: &Path, schema: &Schema) -> Result<AssafSurface, DataError> {
    read_assaf_surface(open(path)?, schema).map_err(first)
}

pub fn load_e0_series(path: &Path, columns: &ColumnMapping, bounds: E0Bounds) -> Result<E0Series, DataError> {
    read_e0_series(open(path)?, columns, bounds).map_err(first)
}

/// One problem found while validating an input file.
#[derive(Debug)]
pub struct InputIssue {
    pub file: String,
    pub error: DataError,
}

impl InputIssue {
    /// JSON object for machine-readable reports (one per line).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "file": self.file,
            "kind": self.error.kind(),
            "row": self.error.row(),
            "message": self.error.to_string(),
        })
    }
}

/// Validates any subset of the three input files, collecting every issue.
pub fn validate_inputs(
    mortality: Option<(&Path, &Schema)>,
    assaf: Option<(&Path, &Schema)>,
    e0: Option<(&Path, &ColumnMapping, E0Bounds)>,
) -> Vec<InputIssue> {
    let mut out = Vec::new();
    let mut push = |path: &Path, errors: Vec<DataError>| {
        out.extend(errors.into_iter().map(|error| InputIssue {
            file: path.display().to_string(),
            error,
        }))
    };
    if let Some((path, schema)) = mortality {
        match open(path) {
            Ok(f) => {
                if let Err(e) = read_mortality_surface(f, schema) {
                    push(path, e)
                }
            }
            Err(e) => push(path, vec![e]),
        }
    }
    if let Some((path, schema)) = assaf {
        match open(path) {
            Ok(f) => {
                if let Err(e) = read_assaf_surface(f, schema) {
                    push(path, e)
                }
            }
            Err(e) => push(path, vec![e]),
        }
    }
    if let Some((path, columns, bounds)) = e0 {
        match open(path) {
            Ok(f) => {
                if let Err(e) = read_e0_series(f, columns, bounds) {
                    push(path, e)
                }
            }
            Err(e) => push(path, vec![e]),
        }
    }
    out
}

/// Writes a surface in the long `country,sex,period_start,age_lower,<value>` layout.
pub fn write_surface_csv<W: Write>(
    surface: &super::AgeSurface,
    value_column: &str,
    writer: W,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "sex", "period_start", "age_lower", value_column])?;
    for (key, values) in surface.iter() {
        for (g, v) in surface.grid().iter().zip(values) {
            w.write_record([
                key.country.clone(),
                key.sex.to_string(),
                key.period.start_year().to_string(),
                g.lower.to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })
}

pub fn write_e0_csv<W: Write>(series: &E0Series, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "sex", "period_start", "e0"])?;
    for (key, e0) in series.iter() {
        w.write_record([
            key.country.clone(),
            key.sex.to_string(),
            key.period.start_year().to_string(),
            e0.to_string(),
        ])?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })
}
