use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

/// First year of the estimation window.
pub const ESTIMATION_START: i32 = 1950;
/// Number of five-year estimation periods (1950-2015).
pub const ESTIMATION_PERIODS: usize = 13;
/// Number of five-year forecast periods (2015-2060).
pub const FORECAST_PERIODS: usize = 9;

/// Offset between the first year of a five-year period and its label year.
const LABEL_OFFSET: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(DataError::UnknownSex {
                row: None,
                value: other.to_string(),
            }),
        }
    }
}

/// A five-year period, identified by its first calendar year.
///
/// Periods are labelled by their mid-period year (`start + 3`), so
/// 1950-1955 is labelled 1953.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Period {
    start_year: i32,
}

impl Period {
    pub fn from_start(start_year: i32) -> Result<Self, DataError> {
        if start_year.rem_euclid(5) != 0 {
            return Err(DataError::InvalidPeriod(start_year));
        }
        Ok(Period { start_year })
    }

    pub fn from_label(label_year: i32) -> Result<Self, DataError> {
        Self::from_start(label_year - LABEL_OFFSET).map_err(|_| DataError::InvalidPeriod(label_year))
    }

    /// Accepts either a start year (multiple of five) or a mid-period label.
    pub fn from_any_year(year: i32) -> Result<Self, DataError> {
        if year.rem_euclid(5) == 0 {
            Self::from_start(year)
        } else {
            Self::from_label(year)
        }
    }

    pub fn start_year(self) -> i32 {
        self.start_year
    }

    pub fn label_year(self) -> i32 {
        self.start_year + LABEL_OFFSET
    }

    pub fn next(self) -> Self {
        Period {
            start_year: self.start_year + 5,
        }
    }

    pub fn offset(self, steps: i32) -> Self {
        Period {
            start_year: self.start_year + 5 * steps,
        }
    }

    /// `count` consecutive periods starting at `first_start`.
    pub fn range(first_start: i32, count: usize) -> Result<Vec<Period>, DataError> {
        let first = Self::from_start(first_start)?;
        Ok((0..count as i32).map(|i| first.offset(i)).collect())
    }

    /// The thirteen estimation periods 1950-1955 ... 2010-2015.
    pub fn estimation() -> Vec<Period> {
        (0..ESTIMATION_PERIODS as i32)
            .map(|i| Period {
                start_year: ESTIMATION_START + 5 * i,
            })
            .collect()
    }

    /// The nine forecast periods 2015-2020 ... 2055-2060.
    pub fn forecast() -> Vec<Period> {
        let first = ESTIMATION_START + 5 * ESTIMATION_PERIODS as i32;
        (0..FORECAST_PERIODS as i32)
            .map(|i| Period {
                start_year: first + 5 * i,
            })
            .collect()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start_year, self.start_year + 5)
    }
}

/// Age interval `[lower, lower + width)`; `width == None` marks the open group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgeGroup {
    pub lower: u32,
    pub width: Option<u32>,
}

impl AgeGroup {
    pub fn closed(lower: u32, width: u32) -> Self {
        AgeGroup {
            lower,
            width: Some(width),
        }
    }

    pub fn open(lower: u32) -> Self {
        AgeGroup { lower, width: None }
    }

    pub fn is_open(&self) -> bool {
        self.width.is_none()
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.width {
            Some(w) => write!(f, "{}-{}", self.lower, self.lower + w - 1),
            None => write!(f, "{}+", self.lower),
        }
    }
}

/// Ordered, contiguous set of age groups ending in a single open group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeGrid {
    groups: Vec<AgeGroup>,
}

impl AgeGrid {
    pub fn new(groups: Vec<AgeGroup>) -> Result<Self, DataError> {
        if groups.is_empty() {
            return Err(DataError::InvalidAgeGrid("empty grid".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            let last = i + 1 == groups.len();
            match (g.width, last) {
                (None, false) => {
                    return Err(DataError::InvalidAgeGrid(format!(
                        "open group {g} is not the last group"
                    )))
                }
                (Some(_), true) => {
                    return Err(DataError::InvalidAgeGrid("last group must be open-ended".into()))
                }
                (Some(0), _) => {
                    return Err(DataError::InvalidAgeGrid(format!("zero-width group at {}", g.lower)))
                }
                _ => {}
            }
            if let Some(next) = groups.get(i + 1) {
                let end = g.lower + g.width.unwrap_or(0);
                if next.lower != end {
                    return Err(DataError::InvalidAgeGrid(format!(
                        "group {g} is followed by lower bound {} (expected {end})",
                        next.lower
                    )));
                }
            }
        }
        Ok(AgeGrid { groups })
    }

    /// Builds a grid from strictly increasing lower bounds; the last bound opens the final group.
    pub fn from_lower_bounds(bounds: &[u32]) -> Result<Self, DataError> {
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::InvalidAgeGrid(
                "lower bounds must be strictly increasing".into(),
            ));
        }
        let mut groups: Vec<AgeGroup> = bounds
            .windows(2)
            .map(|w| AgeGroup::closed(w[0], w[1] - w[0]))
            .collect();
        match bounds.last() {
            Some(&last) => groups.push(AgeGroup::open(last)),
            None => return Err(DataError::InvalidAgeGrid("empty grid".into())),
        }
        Self::new(groups)
    }

    /// The abridged grid 0, 1-4, 5-9, ..., with an open group at `open_age`.
    pub fn abridged(open_age: u32) -> Result<Self, DataError> {
        if open_age < 10 || open_age % 5 != 0 {
            return Err(DataError::InvalidAgeGrid(format!(
                "open age {open_age} must be a multiple of 5 and at least 10"
            )));
        }
        let mut bounds = vec![0, 1];
        bounds.extend((5..=open_age).step_by(5));
        Self::from_lower_bounds(&bounds)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[AgeGroup] {
        &self.groups
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgeGroup> {
        self.groups.iter()
    }

    pub fn lower_bounds(&self) -> Vec<u32> {
        self.groups.iter().map(|g| g.lower).collect()
    }

    pub fn index_of(&self, lower: u32) -> Option<usize> {
        self.groups.iter().position(|g| g.lower == lower)
    }

    pub fn open_age(&self) -> u32 {
        self.groups[self.groups.len() - 1].lower
    }
}

impl Default for AgeGrid {
    fn default() -> Self {
        AgeGrid::abridged(100).expect("default grid is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abridged_grid_has_22_groups() {
        let grid = AgeGrid::default();
        assert_eq!(grid.len(), 22);
        assert_eq!(grid.groups()[0], AgeGroup::closed(0, 1));
        assert_eq!(grid.groups()[1], AgeGroup::closed(1, 4));
        assert_eq!(grid.groups()[2], AgeGroup::closed(5, 5));
        assert_eq!(grid.groups()[21], AgeGroup::open(100));
        assert_eq!(grid.open_age(), 100);
    }

    #[test]
    fn grid_rejects_bad_orderings() {
        assert!(AgeGrid::from_lower_bounds(&[0, 5, 5]).is_err());
        assert!(AgeGrid::new(vec![AgeGroup::open(0), AgeGroup::closed(5, 5)]).is_err());
        assert!(AgeGrid::new(vec![AgeGroup::closed(0, 5), AgeGroup::closed(5, 5)]).is_err());
        assert!(AgeGrid::new(vec![AgeGroup::closed(0, 5), AgeGroup::open(10)]).is_err());
    }

    #[test]
    fn period_labels_are_mid_period() {
        let p = Period::from_start(1950).unwrap();
        assert_eq!(p.label_year(), 1953);
        assert_eq!(Period::from_label(2013).unwrap().start_year(), 2010);
        assert_eq!(Period::from_any_year(1953).unwrap(), p);
        assert_eq!(Period::from_any_year(1950).unwrap(), p);
        assert!(Period::from_start(1951).is_err());
        assert!(Period::from_any_year(1951).is_err());

        let est = Period::estimation();
        assert_eq!(est.len(), 13);
        assert_eq!(est[12].label_year(), 2013);
        let fc = Period::forecast();
        assert_eq!(fc.len(), 9);
        assert_eq!(fc[0].label_year(), 2018);
        assert_eq!(fc[8].label_year(), 2058);
    }

    #[test]
    fn sex_parsing_rejects_unknown() {
        assert_eq!("Male".parse::<Sex>().unwrap(), Sex::Male);
        assert_eq!("f".parse::<Sex>().unwrap(), Sex::Female);
        assert!("both".parse::<Sex>().is_err());
    }
}
