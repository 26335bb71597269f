//! Female-minus-male life expectancy gap: regression on male e0 terms and
//! the between-sex ASAF gap, its fit, and female forecasts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AssafSurface, DataError, E0Series, MortalitySurface, Period, Sex, ASSAF_AGES};
use crate::lifetable::{asaf_from_assaf, LifeTableError};
use crate::mcmc::dist::sample_std_normal;
use crate::mcmc::{stream_rng, SimRng};
use crate::trajectory::{TrajectoryError, TrajectorySet};

const DEFAULTS_JSON: &str = include_str!("../assets/gap_defaults.json");
const MIN_OBSERVATIONS: usize = 30;
/// Reciprocal condition number below which the design is rejected.
const COLLINEAR_RCOND: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GapError {
    #[error("{0} observations, at least 30 required")]
    TooFewObservations(usize),
    #[error("design matrix is collinear (condition number {condition:.3e})")]
    CollinearDesign { condition: f64 },
    #[error("no anchor male e0 for {0}")]
    MissingAnchor(String),
    #[error("{country}: no {what}")]
    MissingHistory { country: String, what: &'static str },
    #[error("{country}: ASAF gap covers {found} periods, forecast has {needed}")]
    ShortCovariate { country: String, found: usize, needed: usize },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    LifeTable(#[from] LifeTableError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Regression coefficients in the order intercept, anchor male e0, lagged
/// gap, male e0, hinge term, ASAF gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCoefficients {
    pub beta: [f64; 6],
    #[serde(default)]
    pub std_errors: Option<[f64; 6]>,
    /// Residual standard deviation.
    pub sigma: f64,
    /// Male e0 above which the gap stops widening.
    pub hinge: f64,
    pub lower: f64,
    pub upper: f64,
    /// Male e0 above which the hinge term is frozen at `cap_value`.
    pub cap_level: f64,
    pub cap_value: f64,
}

#[derive(Deserialize)]
struct Shipped {
    version: u32,
    #[serde(flatten)]
    coefficients: GapCoefficients,
}

impl Default for GapCoefficients {
    fn default() -> Self {
        let shipped: Shipped = serde_json::from_str(DEFAULTS_JSON).expect("bundled gap defaults parse");
        debug_assert_eq!(shipped.version, 1);
        shipped.coefficients
    }
}

impl GapCoefficients {
    pub fn validate(&self) -> Result<(), GapError> {
        if !(self.lower < self.upper) {
            return Err(GapError::InvalidCoefficients(format!("lower {} >= upper {}", self.lower, self.upper)));
        }
        if !(self.sigma > 0.0) {
            return Err(GapError::InvalidCoefficients(format!("sigma {}", self.sigma)));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(GapError::InvalidCoefficients("non-finite beta".into()));
        }
        Ok(())
    }

    /// Hinge term used when forecasting: frozen above `cap_level`.
    pub fn hinge_term(&self, e0_male: f64) -> f64 {
        if e0_male > self.cap_level {
            self.cap_value
        } else {
            (e0_male - self.hinge).max(0.0)
        }
    }

    /// Mean of the untruncated gap.
    pub fn predictor(&self, anchor: f64, gap_prev: f64, e0_male: f64, asaf_gap: f64) -> f64 {
        let b = &self.beta;
        b[0] + b[1] * anchor + b[2] * gap_prev + b[3] * e0_male + b[4] * self.hinge_term(e0_male) + b[5] * asaf_gap
    }

    pub fn clamp(&self, gap: f64) -> f64 {
        gap.clamp(self.lower, self.upper)
    }
}

/// One country-period row of the estimation panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapObservation {
    pub country: String,
    pub period: Period,
    /// Female minus male e0.
    pub gap: f64,
    /// Male e0 in 1950-1955.
    pub anchor: f64,
    pub e0_male: f64,
    pub gap_prev: f64,
    /// Male minus female ASAF.
    pub asaf_gap: f64,
}

impl GapObservation {
    fn regressors(&self, hinge: f64) -> [f64; 6] {
        [1.0, self.anchor, self.gap_prev, self.e0_male, (self.e0_male - hinge).max(0.0), self.asaf_gap]
    }
}

/// Least-squares fit with its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFit {
    pub coefficients: GapCoefficients,
    pub r_squared: f64,
    pub n: usize,
    /// Condition number of the column-scaled design.
    pub condition_number: f64,
}

/// Ordinary least squares with the hinge fixed at `hinge`.
pub fn fit_gap_model(panel: &[GapObservation], hinge: f64) -> Result<GapFit, GapError> {
    let n = panel.len();
    if n < MIN_OBSERVATIONS {
        return Err(GapError::TooFewObservations(n));
    }
    let x = DMatrix::from_fn(n, 6, |r, c| panel[r].regressors(hinge)[c]);
    let y = DVector::from_iterator(n, panel.iter().map(|o| o.gap));

    // Scale columns to unit norm so the condition number is unit-free.
    let norms: Vec<f64> = (0..6).map(|c| x.column(c).norm()).collect();
    let condition = if norms.iter().any(|&s| s == 0.0) {
        f64::INFINITY
    } else {
        let scaled = DMatrix::from_fn(n, 6, |r, c| x[(r, c)] / norms[c]);
        let sv = scaled.singular_values();
        sv.max() / sv.min()
    };
    if !(1.0 / condition > COLLINEAR_RCOND) {
        return Err(GapError::CollinearDesign { condition });
    }

    let xtx = x.transpose() * &x;
    let inv = xtx
        .try_inverse()
        .ok_or(GapError::CollinearDesign { condition })?;
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let s2 = rss / (n - 6) as f64;
    let mut b = [0.0; 6];
    let mut se = [0.0; 6];
    for i in 0..6 {
        b[i] = beta[i];
        se[i] = (s2 * inv[(i, i)]).sqrt();
    }
    let (lower, upper) = panel
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), o| (l.min(o.gap), u.max(o.gap)));
    let defaults = GapCoefficients::default();
    Ok(GapFit {
        coefficients: GapCoefficients {
            beta: b,
            std_errors: Some(se),
            sigma: s2.sqrt(),
            hinge,
            lower,
            upper,
            cap_level: defaults.cap_level,
            cap_value: defaults.cap_value,
        },
        r_squared: 1.0 - rss / tss,
        n,
        condition_number: condition,
    })
}

/// Per-country inputs that the gap recursion needs besides male draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapHistory {
    /// Male e0 in 1950-1955.
    pub anchor: f64,
    /// Last observed gap before the first forecast period.
    pub last_gap: f64,
    /// ASAF gap for each forecast period.
    pub asaf_gap: Vec<f64>,
}

/// Gap trajectories paired draw by draw with the male trajectories.
///
/// Each country gets its own random stream derived from `seed`, so results
/// do not depend on thread scheduling.
pub fn forecast_gap(
    coef: &GapCoefficients,
    male: &TrajectorySet,
    history: &BTreeMap<String, GapHistory>,
    seed: u64,
) -> Result<TrajectorySet, GapError> {
    coef.validate()?;
    let np = male.periods.len();
    for c in &male.countries {
        let h = history.get(c).ok_or_else(|| GapError::MissingAnchor(c.clone()))?;
        if !h.anchor.is_finite() {
            return Err(GapError::MissingAnchor(c.clone()));
        }
        if h.asaf_gap.len() < np {
            return Err(GapError::ShortCovariate {
                country: c.clone(),
                found: h.asaf_gap.len(),
                needed: np,
            });
        }
    }
    let per_country: Vec<Vec<Vec<f64>>> = male
        .countries
        .par_iter()
        .enumerate()
        .map(|(ci, name)| {
            let h = &history[name];
            let mut rng: SimRng = stream_rng(seed, &[crate::mcmc::label_stream(name)]);
            (0..male.n_draws())
                .map(|d| {
                    let mut prev = h.last_gap;
                    (0..np)
                        .map(|p| {
                            let mean = coef.predictor(h.anchor, prev, male.get(ci, p, d), h.asaf_gap[p]);
                            let g = coef.clamp(mean + coef.sigma * sample_std_normal(&mut rng));
                            prev = g;
                            g
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(TrajectorySet::from_fn(
        Sex::Female,
        male.countries.clone(),
        male.periods.clone(),
        male.n_draws(),
        |c, d| per_country[c][d].clone(),
    ))
}

/// Female e0 draws: male draw plus gap draw with the same index.
pub fn female_e0_from_gap(male: &TrajectorySet, gap: &TrajectorySet) -> Result<TrajectorySet, GapError> {
    Ok(male.zip_with(gap, Sex::Female, |m, g| m + g)?)
}

/// Anchor, last observed gap and forecast-period ASAF gap per country.
/// Countries lacking any of them get a NaN anchor, which the gap forecast
/// reports as missing.
pub fn gap_histories(e0: &E0Series, male: &TrajectorySet, asaf_gap: &AsafGapSeries, last: Period) -> BTreeMap<String, GapHistory> {
    let anchor_period = Period::estimation()[0];
    male.countries
        .iter()
        .map(|c| {
            let e = |sex, p| e0.get(c, sex, p);
            let last_gap = match (e(Sex::Female, last), e(Sex::Male, last)) {
                (Some(f), Some(m)) => f - m,
                _ => f64::NAN,
            };
            let h: Vec<f64> = male
                .periods
                .iter()
                .map(|p| asaf_gap.get(c).and_then(|s| s.get(p)).copied().unwrap_or(f64::NAN))
                .collect();
            let complete = last_gap.is_finite() && h.iter().all(|v| v.is_finite());
            let anchor = e(Sex::Male, anchor_period).filter(|_| complete).unwrap_or(f64::NAN);
            (
                c.clone(),
                GapHistory {
                    anchor,
                    last_gap,
                    asaf_gap: h,
                },
            )
        })
        .collect()
}

/// Male-minus-female ASAF by country and period.
pub type AsafGapSeries = BTreeMap<String, BTreeMap<Period, f64>>;

/// Indices of the nine ASSAF age groups on the surface grid.
fn core_indices(mortality: &MortalitySurface) -> Result<[usize; 9], GapError> {
    let mut idx = [0; 9];
    for (i, age) in ASSAF_AGES.iter().enumerate() {
        idx[i] = mortality
            .grid()
            .index_of(*age)
            .ok_or_else(|| DataError::InvalidAgeGrid(format!("no {age} group")))?;
    }
    Ok(idx)
}

/// Mortality rates of the nine ASSAF age groups.
pub fn core_rates(mortality: &MortalitySurface, country: &str, sex: Sex, period: Period) -> Result<Option<[f64; 9]>, GapError> {
    let idx = core_indices(mortality)?;
    Ok(mortality.slice(country, sex, period).map(|m| idx.map(|i| m[i])))
}

/// ASAF gap wherever both sexes have ASSAF and mortality data.
pub fn observed_asaf_gap(mortality: &MortalitySurface, assaf: &AssafSurface) -> Result<AsafGapSeries, GapError> {
    let mut out = AsafGapSeries::new();
    for country in assaf.countries() {
        for period in assaf.periods(&country, Sex::Male) {
            let mut asaf = [0.0; 2];
            let mut complete = true;
            for (slot, sex) in asaf.iter_mut().zip([Sex::Male, Sex::Female]) {
                match (assaf.core_values(&country, sex, period), core_rates(mortality, &country, sex, period)?) {
                    (Some(y), Some(m)) => *slot = asaf_from_assaf(&y, &m)?,
                    _ => complete = false,
                }
            }
            if complete {
                out.entry(country.clone()).or_default().insert(period, asaf[0] - asaf[1]);
            }
        }
    }
    Ok(out)
}

/// Estimation rows: every period with both sexes' e0, the previous period's
/// gap, an ASAF gap and a 1950-1955 male e0.
pub fn build_gap_panel(e0: &E0Series, asaf_gap: &AsafGapSeries) -> Vec<GapObservation> {
    let first = Period::estimation()[0];
    let mut out = Vec::new();
    for country in e0.countries(Sex::Male) {
        let Some(anchor) = e0.get(&country, Sex::Male, first) else {
            continue;
        };
        let gap_at = |p: Period| Some(e0.get(&country, Sex::Female, p)? - e0.get(&country, Sex::Male, p)?);
        for (period, male) in e0.series(&country, Sex::Male) {
            let (Some(gap), Some(prev), Some(h)) = (
                gap_at(period),
                gap_at(period.offset(-1)),
                asaf_gap.get(&country).and_then(|s| s.get(&period)),
            ) else {
                continue;
            };
            out.push(GapObservation {
                country: country.clone(),
                period,
                gap,
                anchor,
                e0_male: male,
                gap_prev: prev,
                asaf_gap: *h,
            });
        }
    }
    out
}

pub fn write_asaf_gap_csv<W: std::io::Write>(series: &AsafGapSeries, w: W) -> Result<(), GapError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["country", "period_start", "asaf_gap"])?;
    for (country, s) in series {
        for (p, h) in s {
            w.write_record([country.clone(), p.start_year().to_string(), h.to_string()])?;
        }
    }
    w.flush().map_err(|e| GapError::Csv(e.into()))
}

pub fn read_asaf_gap_csv<R: std::io::Read>(r: R) -> Result<AsafGapSeries, GapError> {
    let mut out = AsafGapSeries::new();
    for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r).deserialize() {
        let (country, year, h): (String, i32, f64) = rec?;
        out.entry(country).or_default().insert(Period::from_any_year(year)?, h);
    }
    Ok(out)
}

/// Writes the panel as CSV, the layout read by [`read_gap_panel_csv`].
pub fn write_gap_panel_csv<W: std::io::Write>(panel: &[GapObservation], w: W) -> Result<(), GapError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["country", "period_start", "gap", "anchor", "e0_male", "gap_prev", "asaf_gap"])?;
    for o in panel {
        w.write_record([
            o.country.clone(),
            o.period.start_year().to_string(),
            o.gap.to_string(),
            o.anchor.to_string(),
            o.e0_male.to_string(),
            o.gap_prev.to_string(),
            o.asaf_gap.to_string(),
        ])?;
    }
    w.flush().map_err(|e| GapError::Csv(e.into()))
}

pub fn read_gap_panel_csv<R: std::io::Read>(r: R) -> Result<Vec<GapObservation>, GapError> {
    let mut out = Vec::new();
    for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r).deserialize() {
        let (country, year, gap, anchor, e0_male, gap_prev, asaf_gap): (String, i32, f64, f64, f64, f64, f64) = rec?;
        out.push(GapObservation {
            country,
            period: Period::from_any_year(year)?,
            gap,
            anchor,
            e0_male,
            gap_prev,
            asaf_gap,
        });
    }
    Ok(out)
}

/// Synthetic estimation panel generated from the regression with coefficients
/// `coef`. The hinge term is not capped, matching the fitted design.
pub fn simulate_gap_panel(coef: &GapCoefficients, n_countries: usize, n_periods: usize, rng: &mut SimRng) -> Vec<GapObservation> {
    let mut out = Vec::new();
    for i in 0..n_countries {
        let country = format!("G{i:02}");
        let anchor = 50.0 + 20.0 * (i as f64 / n_countries.max(1) as f64) + 2.0 * sample_std_normal(rng);
        let mut e0 = anchor;
        let mut gap = 3.0 + 1.5 * sample_std_normal(rng).abs();
        let mut asaf = 0.05 + 0.1 * (i % 5) as f64 / 5.0;
        for t in 1..n_periods {
            e0 += 1.5 + 0.8 * sample_std_normal(rng);
            asaf = (asaf + 0.03 * sample_std_normal(rng)).clamp(-0.1, 0.5);
            let mut obs = GapObservation {
                country: country.clone(),
                period: Period::estimation()[0].offset(t as i32),
                gap: 0.0,
                anchor,
                e0_male: e0,
                gap_prev: gap,
                asaf_gap: asaf,
            };
            let x = obs.regressors(coef.hinge);
            obs.gap = (0..6).map(|j| coef.beta[j] * x[j]).sum::<f64>() + coef.sigma * sample_std_normal(rng);
            gap = obs.gap;
            out.push(obs);
        }
    }
    out
}
