//! Forecast trajectories: draws of a scalar per country and period.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Period, Sex};
use crate::stats;

/// Probabilities reported in quantile tables.
pub const REPORT_PROBS: [f64; 5] = [0.025, 0.1, 0.5, 0.9, 0.975];

/// Fewest draws for which quantile tables are produced.
pub const MIN_DRAWS_FOR_QUANTILES: usize = 100;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{found} draws, at least {required} needed for quantiles")]
    TooFewDraws { found: usize, required: usize },
    #[error("trajectory sets do not share countries and periods")]
    Mismatch,
    #[error("country {0} not in trajectory set")]
    UnknownCountry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Draws for each (country, period) cell, all cells sharing the draw count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub sex: Sex,
    pub countries: Vec<String>,
    pub periods: Vec<Period>,
    n_draws: usize,
    // country, then period, then draw
    values: Vec<f64>,
}

impl TrajectorySet {
    /// Builds the set from one trajectory (one value per period) per
    /// country and draw.
    pub fn from_fn(
        sex: Sex,
        countries: Vec<String>,
        periods: Vec<Period>,
        n_draws: usize,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Self {
        let np = periods.len();
        let mut values = vec![0.0; countries.len() * np * n_draws];
        for c in 0..countries.len() {
            for d in 0..n_draws {
                let traj = f(c, d);
                assert_eq!(traj.len(), np, "trajectory length");
                for (p, v) in traj.into_iter().enumerate() {
                    values[(c * np + p) * n_draws + d] = v;
                }
            }
        }
        TrajectorySet {
            sex,
            countries,
            periods,
            n_draws,
            values,
        }
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn country_index(&self, name: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == name)
    }

    /// All draws of one cell.
    pub fn cell(&self, country: usize, period: usize) -> &[f64] {
        let start = (country * self.periods.len() + period) * self.n_draws;
        &self.values[start..start + self.n_draws]
    }

    pub fn get(&self, country: usize, period: usize, draw: usize) -> f64 {
        self.cell(country, period)[draw]
    }

    pub fn trajectory(&self, country: usize, draw: usize) -> Vec<f64> {
        (0..self.periods.len()).map(|p| self.get(country, p, draw)).collect()
    }

    /// Concatenates the draws of sets with identical countries and periods.
    pub fn pool(sets: &[TrajectorySet]) -> Result<TrajectorySet, TrajectoryError> {
        let first = sets.first().ok_or(TrajectoryError::Mismatch)?;
        if sets.iter().any(|s| s.countries != first.countries || s.periods != first.periods) {
            return Err(TrajectoryError::Mismatch);
        }
        let n_draws: usize = sets.iter().map(|s| s.n_draws).sum();
        let mut values = Vec::with_capacity(first.values.len() / first.n_draws.max(1) * n_draws);
        for c in 0..first.countries.len() {
            for p in 0..first.periods.len() {
                for s in sets {
                    values.extend_from_slice(s.cell(c, p));
                }
            }
        }
        Ok(TrajectorySet {
            sex: first.sex,
            countries: first.countries.clone(),
            periods: first.periods.clone(),
            n_draws,
            values,
        })
    }

    /// Cell-wise combination of two sets with the same shape.
    pub fn zip_with(&self, other: &TrajectorySet, sex: Sex, f: impl Fn(f64, f64) -> f64) -> Result<TrajectorySet, TrajectoryError> {
        if self.countries != other.countries || self.periods != other.periods || self.n_draws != other.n_draws {
            return Err(TrajectoryError::Mismatch);
        }
        Ok(TrajectorySet {
            sex,
            countries: self.countries.clone(),
            periods: self.periods.clone(),
            n_draws: self.n_draws,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Restricts to the listed countries, in the given order.
    pub fn select(&self, countries: &[String]) -> Result<TrajectorySet, TrajectoryError> {
        let idx: Vec<usize> = countries
            .iter()
            .map(|c| self.country_index(c).ok_or_else(|| TrajectoryError::UnknownCountry(c.clone())))
            .collect::<Result<_, _>>()?;
        let np = self.periods.len();
        let mut values = Vec::with_capacity(idx.len() * np * self.n_draws);
        for &c in &idx {
            for p in 0..np {
                values.extend_from_slice(self.cell(c, p));
            }
        }
        Ok(TrajectorySet {
            sex: self.sex,
            countries: countries.to_vec(),
            periods: self.periods.clone(),
            n_draws: self.n_draws,
            values,
        })
    }

    /// Type-7 quantiles for every cell.
    pub fn quantile_summary(&self, probs: &[f64]) -> Result<Vec<QuantileRow>, TrajectoryError> {
        if self.n_draws < MIN_DRAWS_FOR_QUANTILES {
            return Err(TrajectoryError::TooFewDraws {
                found: self.n_draws,
                required: MIN_DRAWS_FOR_QUANTILES,
            });
        }
        let mut rows = Vec::new();
        for (c, name) in self.countries.iter().enumerate() {
            for (p, period) in self.periods.iter().enumerate() {
                rows.push(QuantileRow {
                    country: name.clone(),
                    sex: self.sex,
                    period: *period,
                    observed: None,
                    quantiles: stats::quantiles(self.cell(c, p), probs),
                });
            }
        }
        Ok(rows)
    }

    pub fn median(&self, country: usize, period: usize) -> f64 {
        stats::quantile(self.cell(country, period), 0.5)
    }
}

/// One row of a quantile table: an observed value or forecast quantiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub country: String,
    pub sex: Sex,
    pub period: Period,
    pub observed: Option<f64>,
    pub quantiles: Vec<f64>,
}

/// Writes observed rows followed by forecast rows as CSV.
pub fn write_quantile_csv<W: Write>(rows: &[QuantileRow], probs: &[f64], w: W) -> Result<(), TrajectoryError> {
    let mut w = std::io::BufWriter::new(w);
    let header: Vec<String> = probs.iter().map(|p| format!("q{p}")).collect();
    writeln!(w, "country,sex,period,label,kind,observed,{}", header.join(","))?;
    for r in rows {
        let (kind, obs) = match r.observed {
            Some(v) => ("observed", v.to_string()),
            None => ("forecast", String::new()),
        };
        let qs: Vec<String> = if r.quantiles.is_empty() {
            vec![String::new(); probs.len()]
        } else {
            r.quantiles.iter().map(|q| q.to_string()).collect()
        };
        writeln!(
            w,
            "{},{},{},{},{kind},{obs},{}",
            r.country,
            r.sex,
            r.period.start_year(),
            r.period.label_year(),
            qs.join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, offset: f64) -> TrajectorySet {
        TrajectorySet::from_fn(
            Sex::Male,
            vec!["A".into(), "B".into()],
            Period::forecast()[..2].to_vec(),
            n,
            |c, d| vec![offset + c as f64 * 100.0 + d as f64, offset + c as f64 * 100.0 + d as f64 + 0.5],
        )
    }

    #[test]
    fn layout_and_pooling() {
        let a = set(3, 0.0);
        assert_eq!(a.cell(1, 1), &[100.5, 101.5, 102.5]);
        assert_eq!(a.trajectory(0, 2), vec![2.0, 2.5]);
        let p = TrajectorySet::pool(&[a.clone(), set(2, 1000.0)]).unwrap();
        assert_eq!(p.n_draws(), 5);
        assert_eq!(p.cell(0, 0), &[0.0, 1.0, 2.0, 1000.0, 1001.0]);
        let s = p.select(&["B".to_string()]).unwrap();
        assert_eq!(s.cell(0, 0), p.cell(1, 0));
    }

    #[test]
    fn quantiles_need_enough_draws() {
        assert!(matches!(set(99, 0.0).quantile_summary(&REPORT_PROBS), Err(TrajectoryError::TooFewDraws { .. })));
        let q = set(101, 0.0).quantile_summary(&REPORT_PROBS).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q[0].quantiles[2], 50.0);
    }
}
