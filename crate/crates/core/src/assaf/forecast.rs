use std::collections::BTreeMap;

use super::layout::{AssafLayout, CountryLayout};
use super::AssafError;
use crate::data::{AgeGrid, AssafSurface, Period, Sex, SliceKey, ASSAF_AGES};
use crate::lifetable::MAX_ATTRIBUTION;
use crate::mcmc::dist::sample_normal;
use crate::mcmc::{PosteriorDraws, SimRng};

/// Age-specific fractions for one draw: one row of nine values per period.
pub type DrawSurface = Vec<[f64; 9]>;

fn clamp(y: f64) -> f64 {
    y.clamp(0.0, MAX_ATTRIBUTION)
}

/// ASSAF for one country and one posterior draw over `periods`.
///
/// Cohort effects estimated in-sample are reused. Other cohorts take a curve
/// draw with cohort noise (`noisy`) or the curve value itself. With `noisy`
/// the measurement noise is added as well. Output is clamped to [0, 0.99].
pub fn country_draw(
    layout: &CountryLayout,
    row: &[f64],
    var_cohort: f64,
    periods: &[Period],
    noisy: bool,
    rng: &mut SimRng,
) -> DrawSurface {
    let state = layout.state(row);
    let estimated: BTreeMap<i32, f64> = layout.cohort_years().into_iter().zip(state.cohort_effect.iter().copied()).collect();
    let estimated_old: BTreeMap<i32, f64> =
        layout.old_cohort_years().into_iter().zip(state.cohort_effect_old.iter().copied()).collect();
    let mut drawn: BTreeMap<i32, f64> = BTreeMap::new();
    let mut drawn_old: BTreeMap<i32, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(periods.len());
    for p in periods {
        let t = p.label_year();
        let mut v = [0.0; 9];
        for (row_idx, &age) in ASSAF_AGES.iter().enumerate() {
            let c = t - age as i32;
            let old = row_idx == ASSAF_AGES.len() - 1;
            let (known, cache) = if old {
                (&estimated_old, &mut drawn_old)
            } else {
                (&estimated, &mut drawn)
            };
            let tau = match known.get(&c) {
                Some(&tau) => tau,
                None => *cache.entry(c).or_insert_with(|| {
                    let mean = if old {
                        state.curve.eval_old(c as f64)
                    } else {
                        state.curve.eval(c as f64)
                    };
                    if noisy {
                        sample_normal(mean, var_cohort, rng)
                    } else {
                        mean
                    }
                }),
            };
            let mean = state.age_effect[row_idx] * tau;
            v[row_idx] = clamp(if noisy { sample_normal(mean, state.noise_var, rng) } else { mean });
        }
        out.push(v);
    }
    out
}

/// Forecast draws for every country in the layout.
#[derive(Debug, Clone)]
pub struct AssafForecast {
    pub sex: Sex,
    pub countries: Vec<String>,
    pub periods: Vec<Period>,
    /// Retained-draw row used for each forecast draw.
    pub draw_indices: Vec<usize>,
    // draw-major, then country, then period
    values: Vec<[f64; 9]>,
}

impl AssafForecast {
    /// Builds a forecast from `f(draw, country, period)`.
    pub fn from_fn(
        sex: Sex,
        countries: Vec<String>,
        periods: Vec<Period>,
        draw_indices: Vec<usize>,
        mut f: impl FnMut(usize, usize, usize) -> [f64; 9],
    ) -> Self {
        let mut values = Vec::with_capacity(draw_indices.len() * countries.len() * periods.len());
        for d in 0..draw_indices.len() {
            for c in 0..countries.len() {
                for p in 0..periods.len() {
                    values.push(f(d, c, p));
                }
            }
        }
        AssafForecast {
            sex,
            countries,
            periods,
            draw_indices,
            values,
        }
    }

    pub fn n_draws(&self) -> usize {
        self.draw_indices.len()
    }

    pub fn get(&self, draw: usize, country: usize, period: usize) -> &[f64; 9] {
        let np = self.periods.len();
        &self.values[(draw * self.countries.len() + country) * np + period]
    }

    /// Values of one cell across draws.
    pub fn cell(&self, country: usize, period: usize, age_row: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|d| self.get(d, country, period)[age_row]).collect()
    }

    /// One draw as a harmonized surface on `grid`.
    pub fn surface(&self, draw: usize, grid: &AgeGrid) -> Result<AssafSurface, AssafError> {
        let mut core = BTreeMap::new();
        for (ci, c) in self.countries.iter().enumerate() {
            for (pi, p) in self.periods.iter().enumerate() {
                core.insert(SliceKey::new(c.clone(), self.sex, *p), *self.get(draw, ci, pi));
            }
        }
        Ok(AssafSurface::from_core(grid.clone(), core)?)
    }
}

fn sex_of(draws: &PosteriorDraws) -> Sex {
    draws
        .meta
        .get("sex")
        .and_then(|s| s.as_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(Sex::Male)
}

fn var_cohort(layout: &AssafLayout, row: &[f64]) -> f64 {
    layout.global(row, "var_cohort").expect("layout checks var_cohort")
}

/// Posterior predictive ASSAF over `periods` for every retained draw (or the
/// rows listed in `rows`).
pub fn forecast_assaf(
    draws: &PosteriorDraws,
    periods: &[Period],
    rows: Option<&[usize]>,
    rng: &mut SimRng,
) -> Result<AssafForecast, AssafError> {
    let layout = AssafLayout::from_names(draws.names())?;
    let draw_indices: Vec<usize> = rows.map(|r| r.to_vec()).unwrap_or_else(|| (0..draws.n_rows()).collect());
    let mut values = Vec::with_capacity(draw_indices.len() * layout.countries.len() * periods.len());
    for &i in &draw_indices {
        let row = draws.row(i);
        let vc = var_cohort(&layout, row);
        for c in &layout.countries {
            values.extend(country_draw(c, row, vc, periods, true, rng));
        }
    }
    Ok(AssafForecast {
        sex: sex_of(draws),
        countries: layout.countries.iter().map(|c| c.name.clone()).collect(),
        periods: periods.to_vec(),
        draw_indices,
        values,
    })
}

/// One posterior sample of the mean ASSAF surface.
#[derive(Debug, Clone)]
pub struct AssafMeanSample {
    pub draw_index: usize,
    pub surface: AssafSurface,
}

/// Evenly spaced retained-draw indices: `i * (n / count)`.
pub fn mean_sample_indices(n_rows: usize, count: usize) -> Result<Vec<usize>, AssafError> {
    if count == 0 || count > n_rows {
        return Err(AssafError::CountExceedsDraws {
            count,
            available: n_rows,
        });
    }
    let step = n_rows / count;
    Ok((0..count).map(|i| i * step).collect())
}

/// `count` equally spaced draws of the noiseless mean surface over `periods`.
pub fn posterior_assaf_mean_samples(
    draws: &PosteriorDraws,
    count: usize,
    periods: &[Period],
    grid: &AgeGrid,
) -> Result<Vec<AssafMeanSample>, AssafError> {
    let layout = AssafLayout::from_names(draws.names())?;
    let sex = sex_of(draws);
    // The noiseless path never consumes randomness.
    let mut rng = crate::mcmc::stream_rng(0, &[]);
    mean_sample_indices(draws.n_rows(), count)?
        .into_iter()
        .map(|i| {
            let row = draws.row(i);
            let vc = var_cohort(&layout, row);
            let mut core = BTreeMap::new();
            for c in &layout.countries {
                for (p, v) in periods.iter().zip(country_draw(c, row, vc, periods, false, &mut rng)) {
                    core.insert(SliceKey::new(c.name.clone(), sex, *p), v);
                }
            }
            Ok(AssafMeanSample {
                draw_index: i,
                surface: AssafSurface::from_core(grid.clone(), core)?,
            })
        })
        .collect()
}
