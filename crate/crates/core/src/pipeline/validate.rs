//! Out-of-sample validation: accuracy, calibration and sharpness of e0
//! forecasts, for this method and a plain Lee-Carter baseline.

use std::io::Write;

use serde::Serialize;

use super::config::PipelineConfig;
use super::run::{load_inputs, run_with_inputs, Inputs};
use crate::data::{E0Series, MortalitySurface, Period, Sex};
use crate::lifetable::life_table_e0;
use crate::mcmc::dist::sample_std_normal;
use crate::mcmc::{label_stream, stream_rng};
use crate::reconstruct::lee_carter_fit;
use crate::stats;
use crate::trajectory::TrajectorySet;
use crate::{Error, Result};

/// Draws per cell for the baseline forecaster.
pub const BASELINE_DRAWS: usize = 1000;

/// Forecast summary of one country-period with its observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalCell {
    pub observed: f64,
    pub median: f64,
    pub lower80: f64,
    pub upper80: f64,
    pub lower95: f64,
    pub upper95: f64,
}

impl IntervalCell {
    pub fn from_draws(draws: &[f64], observed: f64) -> Self {
        let q = stats::quantiles(draws, &[0.025, 0.1, 0.5, 0.9, 0.975]);
        IntervalCell {
            observed,
            median: q[2],
            lower80: q[1],
            upper80: q[3],
            lower95: q[0],
            upper95: q[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastMetrics {
    pub mae: f64,
    pub coverage80: f64,
    pub coverage95: f64,
    /// Median over cells of the interval halfwidth.
    pub halfwidth80: f64,
    pub halfwidth95: f64,
    pub n_cells: usize,
}

/// Mean of `|median - observed|` over cells.
pub fn mean_absolute_error(cells: &[IntervalCell]) -> f64 {
    cells.iter().map(|c| (c.median - c.observed).abs()).sum::<f64>() / cells.len() as f64
}

pub fn score_cells(cells: &[IntervalCell]) -> Result<ForecastMetrics> {
    if cells.is_empty() {
        return Err(Error::TestDataMissing("no forecast cell has an observation".into()));
    }
    let n = cells.len() as f64;
    let covered = |lo: fn(&IntervalCell) -> f64, hi: fn(&IntervalCell) -> f64| {
        cells.iter().filter(|c| lo(c) <= c.observed && c.observed <= hi(c)).count() as f64 / n
    };
    let halfwidths = |lo: fn(&IntervalCell) -> f64, hi: fn(&IntervalCell) -> f64| {
        let h: Vec<f64> = cells.iter().map(|c| (hi(c) - lo(c)) / 2.0).collect();
        stats::quantile(&h, 0.5)
    };
    Ok(ForecastMetrics {
        mae: mean_absolute_error(cells),
        coverage80: covered(|c| c.lower80, |c| c.upper80),
        coverage95: covered(|c| c.lower95, |c| c.upper95),
        halfwidth80: halfwidths(|c| c.lower80, |c| c.upper80),
        halfwidth95: halfwidths(|c| c.lower95, |c| c.upper95),
        n_cells: cells.len(),
    })
}

/// Cells of `traj` with an observation in `observed`, and per country the
/// number of such cells.
pub fn observed_cells(traj: &TrajectorySet, observed: &E0Series) -> (Vec<IntervalCell>, Vec<(String, usize)>) {
    let mut cells = Vec::new();
    let mut per_country = Vec::new();
    for (c, name) in traj.countries.iter().enumerate() {
        let before = cells.len();
        for (p, period) in traj.periods.iter().enumerate() {
            if let Some(v) = observed.get(name, traj.sex, *period) {
                cells.push(IntervalCell::from_draws(traj.cell(c, p), v));
            }
        }
        per_country.push((name.clone(), cells.len() - before));
    }
    (cells, per_country)
}

/// Lee-Carter on all-cause rates with a random walk with drift on the
/// period index; one trajectory per draw and country over `periods`.
pub fn lee_carter_baseline(
    mortality: &MortalitySurface,
    sex: Sex,
    countries: &[String],
    periods: &[Period],
    n_draws: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    let grid = mortality.grid();
    let mut per_country = Vec::with_capacity(countries.len());
    for country in countries {
        let history: Vec<Period> = mortality.periods(country, sex);
        let rows: Vec<Vec<f64>> = history
            .iter()
            .map(|p| mortality.slice(country, sex, *p).expect("listed").to_vec())
            .collect();
        let lc = lee_carter_fit(grid, &history, &rows)?;
        let k = &lc.kt;
        let steps: Vec<f64> = k.windows(2).map(|w| w[1] - w[0]).collect();
        let drift = stats::mean(&steps);
        let sd = if steps.len() > 1 { stats::variance(&steps).sqrt() } else { 0.0 };
        let last = *history.last().expect("fitted");
        let mut rng = stream_rng(seed, &[label_stream(country), label_stream(sex.as_str())]);
        let mut draws = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let mut kt = lc.last_index();
            let mut step_to = last;
            let mut traj = Vec::with_capacity(periods.len());
            for p in periods {
                while step_to < *p {
                    kt += drift + sd * sample_std_normal(&mut rng);
                    step_to = step_to.next();
                }
                traj.push(life_table_e0(grid, &lc.rates(kt))?);
            }
            draws.push(traj);
        }
        per_country.push(draws);
    }
    Ok(TrajectorySet::from_fn(sex, countries.to_vec(), periods.to_vec(), n_draws, |c, d| {
        per_country[c][d].clone()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub method: String,
    pub sex: Sex,
    pub n_countries: usize,
    #[serde(flatten)]
    pub metrics: ForecastMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// First test period start year.
    pub split: i32,
    pub test_periods: Vec<Period>,
    pub rows: Vec<ValidationRow>,
    /// Test cells available per country; zero means excluded.
    pub countries: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["method", "sex", "countries", "cells", "mae", "coverage80", "coverage95", "halfwidth80", "halfwidth95"])
            .map_err(std::io::Error::from)?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.method.clone(),
                r.sex.to_string(),
                r.n_countries.to_string(),
                m.n_cells.to_string(),
                format!("{:.3}", m.mae),
                format!("{:.3}", m.coverage80),
                format!("{:.3}", m.coverage95),
                format!("{:.3}", m.halfwidth80),
                format!("{:.3}", m.halfwidth95),
            ])
            .map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits on periods starting before `split`, forecasts every later observed
/// period, and scores both methods against the held-out e0.
pub fn out_of_sample_validate(config: &PipelineConfig, split: i32) -> Result<ValidationReport> {
    let inputs = load_inputs(config).map_err(Error::at("inputs"))?;
    validate_inputs_split(config, &inputs, split)
}

pub fn validate_inputs_split(config: &PipelineConfig, inputs: &Inputs, split: i32) -> Result<ValidationReport> {
    let test_periods: Vec<Period> = inputs.periods().into_iter().filter(|p| p.start_year() >= split).collect();
    if test_periods.is_empty() {
        return Err(Error::TestDataMissing(format!("no observed period starts in or after {split}")));
    }
    let train = inputs.before(split);
    let Some(&last_train) = train.periods().last() else {
        return Err(Error::InvalidConfig(format!("no training periods before {split}")));
    };
    let horizon = test_periods.iter().map(|p| (p.start_year() - last_train.start_year()) / 5).max().unwrap_or(1);
    let mut cfg = config.clone();
    cfg.horizon = horizon as usize;
    cfg.out_dir = config.out_dir.join(format!("validate_{split}"));
    let bundle = run_with_inputs(&cfg, &train)?;

    let test_e0 = inputs.e0.filtered(|k| k.period.start_year() >= split);
    let mut rows = Vec::new();
    let mut countries = Vec::new();
    for sex in [Sex::Male, Sex::Female] {
        let ours = bundle.trajectories(sex);
        let baseline = lee_carter_baseline(
            &train.mortality,
            sex,
            &ours.countries,
            &ours.periods,
            BASELINE_DRAWS,
            config.stage_seed(&["baseline", sex.as_str()]),
        )?;
        for (method, traj) in [("lee-carter", &baseline), ("smokecast", ours)] {
            let (cells, per_country) = observed_cells(traj, &test_e0);
            let n_countries = per_country.iter().filter(|(_, n)| *n > 0).count();
            rows.push(ValidationRow {
                method: method.into(),
                sex,
                n_countries,
                metrics: score_cells(&cells)?,
            });
            if sex == Sex::Male && method == "smokecast" {
                countries = per_country;
            }
        }
    }
    Ok(ValidationReport {
        split,
        test_periods,
        rows,
        countries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(observed: f64, median: f64, h: f64) -> IntervalCell {
        IntervalCell {
            observed,
            median,
            lower80: median - h,
            upper80: median + h,
            lower95: median - 2.0 * h,
            upper95: median + 2.0 * h,
        }
    }

    #[test]
    fn perfect_forecasts() {
        let cells: Vec<_> = (0..5).map(|i| cell(70.0 + i as f64, 70.0 + i as f64, 0.5)).collect();
        let m = score_cells(&cells).unwrap();
        assert_eq!((m.mae, m.coverage80, m.coverage95), (0.0, 1.0, 1.0));
        assert_eq!((m.halfwidth80, m.halfwidth95), (0.5, 1.0));
    }

    #[test]
    fn mae_arithmetic_and_sign_symmetry() {
        let cells = [cell(70.0, 71.0, 0.1), cell(70.0, 68.0, 0.1), cell(70.0, 73.0, 0.1)];
        assert_eq!(mean_absolute_error(&cells), 2.0);
        let mut flipped = cells;
        flipped.reverse();
        flipped[0].median = 67.0;
        assert_eq!(mean_absolute_error(&flipped), 2.0);
    }

    #[test]
    fn constructed_intervals() {
        let cells: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&o| cell(o, o, 0.7)).collect();
        let m = score_cells(&cells).unwrap();
        assert_eq!(m.coverage80, 1.0);
        assert!((m.halfwidth80 - 0.7).abs() < 1e-12);
        let miss = [cell(0.0, 1.0, 0.5), cell(0.0, 0.2, 0.5)];
        let m = score_cells(&miss).unwrap();
        assert_eq!((m.coverage80, m.coverage95), (0.5, 1.0));
    }

    #[test]
    fn empty_test_data() {
        assert!(matches!(score_cells(&[]), Err(Error::TestDataMissing(_))));
    }

    #[test]
    fn cells_from_trajectories() {
        let ps = Period::forecast()[..2].to_vec();
        let traj = TrajectorySet::from_fn(Sex::Male, vec!["A".into(), "B".into()], ps.clone(), 1000, |_, d| {
            vec![(d + 1) as f64, (d + 1) as f64]
        });
        let mut obs = E0Series::new();
        obs.insert("A", Sex::Male, ps[0], 500.5);
        let (cells, per_country) = observed_cells(&traj, &obs);
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].median, 500.5);
        assert_eq!(per_country, vec![("A".to_string(), 1), ("B".to_string(), 0)]);
    }

    #[test]
    fn baseline_follows_drift() {
        use crate::data::{AgeGrid, SliceKey};
        use std::collections::BTreeMap;
        let grid = AgeGrid::default();
        let ps = Period::estimation();
        let mut slices = BTreeMap::new();
        for (t, p) in ps.iter().enumerate() {
            let rates: Vec<f64> = (0..grid.len()).map(|i| 0.001 * (1.0 + i as f64) * (-0.02 * t as f64).exp()).collect();
            slices.insert(SliceKey::new("A", Sex::Male, *p), rates);
        }
        let m = MortalitySurface::new(grid.clone(), slices).unwrap();
        let fut = Period::forecast()[..3].to_vec();
        let traj = lee_carter_baseline(&m, Sex::Male, &["A".into()], &fut, 50, 1).unwrap();
        let last = life_table_e0(&grid, m.slice("A", Sex::Male, ps[12]).unwrap()).unwrap();
        // Exact log-linear decline: zero step variance, so every draw is the
        // deterministic continuation.
        let first = traj.cell(0, 0);
        assert!(first.iter().all(|v| (v - first[0]).abs() < 1e-9));
        assert!(first[0] > last && traj.get(0, 2, 0) > first[0]);
    }
}
