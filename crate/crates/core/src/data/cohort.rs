use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{Period, Sex};
use super::surface::{AssafSurface, ASSAF_AGES};
use super::DataError;

/// ASSAF re-indexed by (age, birth cohort), with cohort `c = label_year - age`.
///
/// Cells are missing where the cohort was not observed at that age. Rows are
/// the nine core age groups, columns the cohorts in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeCohortMatrix {
    pub country: String,
    pub sex: Sex,
    cohorts: Vec<i32>,
    cells: Vec<Option<f64>>,
}

impl AgeCohortMatrix {
    /// Builds the matrix from `(label_year, nine core values)` observations.
    pub fn from_periods(
        country: impl Into<String>,
        sex: Sex,
        observations: &[(i32, [f64; 9])],
    ) -> Result<Self, DataError> {
        let country = country.into();
        if observations.is_empty() {
            return Err(DataError::EmptySlice { country, sex });
        }
        let first = observations.iter().map(|(t, _)| *t).min().unwrap_or_default();
        let last = observations.iter().map(|(t, _)| *t).max().unwrap_or_default();
        let cohorts: Vec<i32> = (first - 80..=last - 40).step_by(5).collect();
        let mut cells = vec![None; ASSAF_AGES.len() * cohorts.len()];
        for (label, values) in observations {
            for (row, (&age, &y)) in ASSAF_AGES.iter().zip(values).enumerate() {
                let c = label - age as i32;
                let col = ((c - cohorts[0]) / 5) as usize;
                cells[row * cohorts.len() + col] = Some(y);
            }
        }
        Ok(AgeCohortMatrix {
            country,
            sex,
            cohorts,
            cells,
        })
    }

    pub fn cohorts(&self) -> &[i32] {
        &self.cohorts
    }

    pub fn ages(&self) -> &'static [u32; 9] {
        &ASSAF_AGES
    }

    pub fn get(&self, age: u32, cohort: i32) -> Option<f64> {
        let row = ASSAF_AGES.iter().position(|&a| a == age)?;
        let col = self.cohorts.iter().position(|&c| c == cohort)?;
        self.cells[row * self.cohorts.len() + col]
    }

    /// Observed cells as `(age row 0..9, cohort column, value)`.
    pub fn observed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.cohorts.len();
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| v.map(|y| (i / n, i % n, y)))
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Mean of observed cells per cohort column (None for empty columns).
    pub fn column_means(&self) -> Vec<Option<f64>> {
        let n = self.cohorts.len();
        (0..n)
            .map(|col| {
                let vals: Vec<f64> = (0..ASSAF_AGES.len())
                    .filter_map(|row| self.cells[row * n + col])
                    .collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    /// Inverse transform: the observed cells back on the age-period layout.
    pub fn to_periods(&self) -> BTreeMap<i32, BTreeMap<u32, f64>> {
        let mut out: BTreeMap<i32, BTreeMap<u32, f64>> = BTreeMap::new();
        for (row, col, y) in self.observed() {
            let age = ASSAF_AGES[row];
            out.entry(self.cohorts[col] + age as i32)
                .or_default()
                .insert(age, y);
        }
        out
    }
}

/// Builds the age-cohort matrix for one country/sex slice of `surface`.
pub fn build_age_cohort_matrix(
    surface: &AssafSurface,
    country: &str,
    sex: Sex,
) -> Result<AgeCohortMatrix, DataError> {
    let observations: Vec<(i32, [f64; 9])> = surface
        .periods(country, sex)
        .into_iter()
        .filter_map(|p: Period| {
            surface
                .core_values(country, sex, p)
                .map(|v| (p.label_year(), v))
        })
        .collect();
    AgeCohortMatrix::from_periods(country, sex, &observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::grid::AgeGrid;
    use crate::data::surface::SliceKey;

    fn surface(labels: &[i32]) -> AssafSurface {
        let mut core = BTreeMap::new();
        for &t in labels {
            let mut v = [0.0; 9];
            for (i, x) in v.iter_mut().enumerate() {
                *x = (t as f64 - 1900.0) / 1000.0 + i as f64 / 100.0;
            }
            core.insert(SliceKey::new("US", Sex::Male, Period::from_label(t).unwrap()), v);
        }
        AssafSurface::from_core(AgeGrid::default(), core).unwrap()
    }

    #[test]
    fn thirteen_periods_give_21_cohorts() {
        let labels: Vec<i32> = (0..13).map(|i| 1953 + 5 * i).collect();
        let m = build_age_cohort_matrix(&surface(&labels), "US", Sex::Male).unwrap();
        assert_eq!(m.cohorts().len(), 21);
        assert_eq!(m.cohorts()[0], 1873);
        assert_eq!(m.cohorts()[20], 1973);
        assert_eq!(m.observed_count(), 13 * 9);
        assert_eq!(m.get(40, 1873), None);
        assert!(m.get(80, 1873).is_some());
        assert!(m.get(40, 1973).is_some());
    }

    #[test]
    fn single_period_is_one_antidiagonal() {
        let m = build_age_cohort_matrix(&surface(&[1953]), "US", Sex::Male).unwrap();
        assert_eq!(m.cohorts(), &[1873, 1878, 1883, 1888, 1893, 1898, 1903, 1908, 1913]);
        assert_eq!(m.observed_count(), 9);
        for (i, age) in ASSAF_AGES.iter().enumerate() {
            assert!(m.get(*age, 1953 - *age as i32).is_some(), "row {i}");
        }
    }

    #[test]
    fn empty_slice_is_an_error() {
        let s = surface(&[1953]);
        assert!(matches!(
            build_age_cohort_matrix(&s, "XX", Sex::Male),
            Err(DataError::EmptySlice { .. })
        ));
    }

    #[test]
    fn round_trip_reproduces_observed_cells() {
        let labels = [1953, 1958, 1968, 2013];
        let s = surface(&labels);
        let m = build_age_cohort_matrix(&s, "US", Sex::Male).unwrap();
        let back = m.to_periods();
        assert_eq!(back.len(), labels.len());
        for &t in &labels {
            let orig = s.core_values("US", Sex::Male, Period::from_label(t).unwrap()).unwrap();
            let row = &back[&t];
            for (age, y) in ASSAF_AGES.iter().zip(orig) {
                assert_eq!(row[age], y);
            }
        }
    }
}
