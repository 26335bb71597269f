use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::grid::{AgeGrid, Period, Sex};
use super::DataError;

/// Lower bounds of the nine age groups that carry their own ASSAF value.
pub const ASSAF_AGES: [u32; 9] = [40, 45, 50, 55, 60, 65, 70, 75, 80];

/// Identifies one age schedule inside a surface.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SliceKey {
    pub country: String,
    pub sex: Sex,
    pub period: Period,
}

impl SliceKey {
    pub fn new(country: impl Into<String>, sex: Sex, period: Period) -> Self {
        SliceKey {
            country: country.into(),
            sex,
            period,
        }
    }
}

/// Country x sex x period collection of full-grid age schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeSurface {
    grid: AgeGrid,
    slices: BTreeMap<SliceKey, Vec<f64>>,
}

impl AgeSurface {
    fn new(grid: AgeGrid, slices: BTreeMap<SliceKey, Vec<f64>>) -> Result<Self, DataError> {
        for (key, values) in &slices {
            if values.len() != grid.len() {
                return Err(DataError::MissingAgeGroup {
                    country: key.country.clone(),
                    sex: key.sex,
                    period: key.period.start_year(),
                    age: grid
                        .groups()
                        .get(values.len())
                        .map(|g| g.lower)
                        .unwrap_or_else(|| grid.open_age()),
                });
            }
        }
        Ok(AgeSurface { grid, slices })
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn slice(&self, country: &str, sex: Sex, period: Period) -> Option<&[f64]> {
        self.slices
            .get(&SliceKey::new(country, sex, period))
            .map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SliceKey, &[f64])> {
        self.slices.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Total number of (slice, age) cells.
    pub fn cell_count(&self) -> usize {
        self.slices.len() * self.grid.len()
    }

    pub fn countries(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.slices.keys().map(|k| &k.country).collect();
        set.into_iter().cloned().collect()
    }

    pub fn sexes(&self) -> Vec<Sex> {
        let set: BTreeSet<Sex> = self.slices.keys().map(|k| k.sex).collect();
        set.into_iter().collect()
    }

    /// Periods observed for a country/sex, ascending.
    pub fn periods(&self, country: &str, sex: Sex) -> Vec<Period> {
        self.slices
            .keys()
            .filter(|k| k.country == country && k.sex == sex)
            .map(|k| k.period)
            .collect()
    }

    /// Keeps only slices for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&SliceKey) -> bool) -> AgeSurface {
        AgeSurface {
            grid: self.grid.clone(),
            slices: self
                .slices
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Central death rates m_x by country, sex, period and age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalitySurface(AgeSurface);

impl MortalitySurface {
    pub fn new(grid: AgeGrid, slices: BTreeMap<SliceKey, Vec<f64>>) -> Result<Self, DataError> {
        let surface = AgeSurface::new(grid, slices)?;
        for (key, values) in surface.iter() {
            for (group, &m) in surface.grid().iter().zip(values) {
                if !m.is_finite() {
                    return Err(DataError::NonFiniteValue {
                        row: None,
                        column: format!("{} {} {} age {}", key.country, key.sex, key.period, group),
                    });
                }
                if m < 0.0 {
                    return Err(DataError::NegativeRate { row: None, value: m });
                }
            }
            if values[values.len() - 1] <= 0.0 {
                return Err(DataError::OpenGroupZeroRate {
                    country: key.country.clone(),
                    sex: key.sex,
                    period: key.period.start_year(),
                });
            }
        }
        Ok(MortalitySurface(surface))
    }

    pub fn surface(&self) -> &AgeSurface {
        &self.0
    }

    pub fn filtered(&self, keep: impl FnMut(&SliceKey) -> bool) -> MortalitySurface {
        MortalitySurface(self.0.filtered(keep))
    }
}

impl std::ops::Deref for MortalitySurface {
    type Target = AgeSurface;

    fn deref(&self) -> &AgeSurface {
        &self.0
    }
}

/// Age-specific smoking-attributable fractions on the full age grid.
///
/// Every slice satisfies the harmonization rules: zero below 40, and every
/// group from 85 upward repeats the 80-84 value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssafSurface(AgeSurface);

impl AssafSurface {
    pub fn new(grid: AgeGrid, slices: BTreeMap<SliceKey, Vec<f64>>) -> Result<Self, DataError> {
        let surface = AgeSurface::new(grid, slices)?;
        let idx80 = surface
            .grid()
            .index_of(80)
            .ok_or_else(|| DataError::InvalidAgeGrid("ASSAF grid needs an 80-84 group".into()))?;
        for (_, values) in surface.iter() {
            for (group, &y) in surface.grid().iter().zip(values) {
                check_fraction(y, None)?;
                let expected = if group.lower < ASSAF_AGES[0] {
                    Some(0.0)
                } else if group.lower > 80 {
                    Some(values[idx80])
                } else {
                    None
                };
                if let Some(e) = expected {
                    if y != e {
                        return Err(DataError::UnharmonizedAssaf {
                            age: group.lower,
                            value: y,
                            expected: e,
                        });
                    }
                }
            }
        }
        Ok(AssafSurface(surface))
    }

    /// Builds a surface from per-slice raw values on the nine core groups.
    pub fn from_core(
        grid: AgeGrid,
        core: BTreeMap<SliceKey, [f64; 9]>,
    ) -> Result<Self, DataError> {
        let mut slices = BTreeMap::new();
        for (key, values) in core {
            let raw: BTreeMap<u32, f64> = ASSAF_AGES.iter().copied().zip(values).collect();
            slices.insert(key, harmonize_assaf_ages(&raw, &grid)?);
        }
        Self::new(grid, slices)
    }

    pub fn surface(&self) -> &AgeSurface {
        &self.0
    }

    /// The nine core-group values of one slice.
    pub fn core_values(&self, country: &str, sex: Sex, period: Period) -> Option<[f64; 9]> {
        let slice = self.slice(country, sex, period)?;
        let mut out = [0.0; 9];
        for (o, age) in out.iter_mut().zip(ASSAF_AGES) {
            *o = slice[self.grid().index_of(age)?];
        }
        Some(out)
    }

    pub fn filtered(&self, keep: impl FnMut(&SliceKey) -> bool) -> AssafSurface {
        AssafSurface(self.0.filtered(keep))
    }
}

impl std::ops::Deref for AssafSurface {
    type Target = AgeSurface;

    fn deref(&self) -> &AgeSurface {
        &self.0
    }
}

fn check_fraction(y: f64, row: Option<usize>) -> Result<(), DataError> {
    if !(0.0..1.0).contains(&y) || y.is_nan() {
        return Err(DataError::OutOfRangeFraction { row, value: y });
    }
    Ok(())
}

/// Spreads raw ASSAF values for the nine groups 40..80 onto `grid`.
///
/// Groups below 40 get zero; groups from 85 up copy the 80-84 value. Any raw
/// values outside the nine core groups are ignored, so the operation is
/// idempotent when fed its own output.
pub fn harmonize_assaf_ages(raw: &BTreeMap<u32, f64>, grid: &AgeGrid) -> Result<Vec<f64>, DataError> {
    for age in ASSAF_AGES {
        match raw.get(&age) {
            None => return Err(DataError::MissingCoreGroup(age)),
            Some(&y) => check_fraction(y, None)?,
        }
    }
    let y80 = raw[&80];
    grid.iter()
        .map(|g| {
            if g.lower < ASSAF_AGES[0] {
                Ok(0.0)
            } else if g.lower > 80 {
                Ok(y80)
            } else {
                raw.get(&g.lower).copied().ok_or(DataError::MissingCoreGroup(g.lower))
            }
        })
        .collect()
}

/// Life expectancy at birth by country, sex and period.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<(SliceKey, f64)>", from = "Vec<(SliceKey, f64)>")]
pub struct E0Series {
    entries: BTreeMap<SliceKey, f64>,
}

// Serialized as an entry list so formats with string-only map keys work.
impl From<E0Series> for Vec<(SliceKey, f64)> {
    fn from(s: E0Series) -> Self {
        s.entries.into_iter().collect()
    }
}

impl From<Vec<(SliceKey, f64)>> for E0Series {
    fn from(v: Vec<(SliceKey, f64)>) -> Self {
        E0Series {
            entries: v.into_iter().collect(),
        }
    }
}

/// Sanity range for observed life expectancy values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E0Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for E0Bounds {
    fn default() -> Self {
        E0Bounds {
            lower: 20.0,
            upper: 100.0,
        }
    }
}

impl E0Series {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bounds(entries: BTreeMap<SliceKey, f64>, bounds: E0Bounds) -> Result<Self, DataError> {
        for (key, &e0) in &entries {
            if !(e0 > bounds.lower && e0 < bounds.upper) {
                return Err(DataError::E0OutOfBounds {
                    country: key.country.clone(),
                    period: key.period.start_year(),
                    value: e0,
                });
            }
        }
        Ok(E0Series { entries })
    }

    /// Inserts without a bounds check; used for derived series.
    pub fn insert(&mut self, country: &str, sex: Sex, period: Period, e0: f64) {
        self.entries.insert(SliceKey::new(country, sex, period), e0);
    }

    pub fn get(&self, country: &str, sex: Sex, period: Period) -> Option<f64> {
        self.entries.get(&SliceKey::new(country, sex, period)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SliceKey, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn countries(&self, sex: Sex) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .entries
            .keys()
            .filter(|k| k.sex == sex)
            .map(|k| &k.country)
            .collect();
        set.into_iter().cloned().collect()
    }

    /// (period, e0) pairs for one country/sex, ascending by period.
    pub fn series(&self, country: &str, sex: Sex) -> Vec<(Period, f64)> {
        self.entries
            .iter()
            .filter(|(k, _)| k.country == country && k.sex == sex)
            .map(|(k, &v)| (k.period, v))
            .collect()
    }

    pub fn filtered(&self, mut keep: impl FnMut(&SliceKey) -> bool) -> E0Series {
        E0Series {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }
}
