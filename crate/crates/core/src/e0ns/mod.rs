//! Hierarchical model for five-year gains in non-smoking life expectancy:
//! gain curve, level-dependent noise spline, two-stage fit and forecasts.

mod gain;
mod model;
mod spline;

pub use gain::{gain_curve, GainCurveParams, GAIN_BOUNDS, GAIN_NAMES};
pub use model::{
    country_loglik, simulate_e0ns_panel, CountrySeries, E0nsCountryState, E0nsModel, E0nsPriors, E0nsState,
    SyntheticE0ns, NOISE_SD_MAX,
};
pub use spline::{fit_variance_spline, VarianceSpline, SPLINE_FLOOR};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, E0Series, Period, Sex};
use crate::mcmc::dist::sample_std_normal;
use crate::mcmc::{run_chain, ChainConfig, McmcError, PosteriorDraws, SimRng};
use crate::trajectory::TrajectorySet;

/// Knots used for the noise spline.
pub const SPLINE_KNOTS: usize = 5;

#[derive(Debug, Error)]
pub enum E0nsError {
    #[error("gain curve transition width is zero")]
    DegenerateWidth,
    #[error("{pairs} residual pairs spanning {span:.2} years; need 20 spanning more than 10")]
    InsufficientSpread { pairs: usize, span: f64 },
    #[error("spline fit failed: {0}")]
    SplineFit(String),
    #[error("{country}: {found} consecutive periods, at least 4 required")]
    InsufficientSeries { country: String, found: usize },
    #[error("{country} {period}: non-finite value {value}")]
    NonFinite { country: String, period: i32, value: f64 },
    #[error("no countries to fit")]
    NoCountries,
    #[error("draw layout: {0}")]
    Layout(String),
    #[error("jump-off for {0} is missing or not finite")]
    BadJumpoff(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}

/// Last observed value of a country, from which forecasts start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jumpoff {
    pub country: String,
    pub period: Period,
    pub e0: f64,
}

/// Column positions of one country's parameters in an e0ns draw row.
#[derive(Debug, Clone, PartialEq)]
pub struct E0nsCountryColumns {
    pub name: String,
    pub params: [usize; 6],
    pub noise_sd: usize,
}

impl E0nsCountryColumns {
    pub fn params(&self, row: &[f64]) -> GainCurveParams {
        GainCurveParams::from_array(&self.params.map(|i| row[i]))
    }
}

/// Per-country column map recovered from parameter names.
pub fn country_columns(names: &[String]) -> Result<Vec<E0nsCountryColumns>, E0nsError> {
    let mut out: Vec<E0nsCountryColumns> = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let Some((base, rest)) = name.split_once('[') else { continue };
        let country = rest
            .strip_suffix(']')
            .ok_or_else(|| E0nsError::Layout(format!("bad name `{name}`")))?;
        let pos = match out.iter().position(|c| c.name == country) {
            Some(p) => p,
            None => {
                out.push(E0nsCountryColumns {
                    name: country.to_string(),
                    params: [usize::MAX; 6],
                    noise_sd: usize::MAX,
                });
                out.len() - 1
            }
        };
        if base == "noise_sd" {
            out[pos].noise_sd = i;
        } else if let Some(k) = GAIN_NAMES.iter().position(|&g| g == base) {
            out[pos].params[k] = i;
        } else {
            return Err(E0nsError::Layout(format!("unexpected parameter `{name}`")));
        }
    }
    if let Some(c) = out.iter().find(|c| c.noise_sd == usize::MAX || c.params.contains(&usize::MAX)) {
        return Err(E0nsError::Layout(format!("incomplete parameters for {}", c.name)));
    }
    Ok(out)
}

/// Builds the per-country series of `sex`.
pub fn country_series(series: &E0Series, sex: Sex) -> Result<Vec<CountrySeries>, E0nsError> {
    series
        .countries(sex)
        .iter()
        .map(|c| CountrySeries::from_series(series, c, sex))
        .collect()
}

/// Two-stage fit: a constant-variance run supplies absolute residuals for the
/// noise spline, then the model is refit with that spline.
pub fn fit_e0ns_bhm(series: &E0Series, sex: Sex, config: &ChainConfig) -> Result<PosteriorDraws, E0nsError> {
    fit_e0ns_with(series, sex, config, E0nsPriors::default())
}

pub fn fit_e0ns_with(
    series: &E0Series,
    sex: Sex,
    config: &ChainConfig,
    priors: E0nsPriors,
) -> Result<PosteriorDraws, E0nsError> {
    let data = country_series(series, sex)?;
    let stage1 = run_chain(&E0nsModel::new(data.clone())?.with_priors(priors), config)?;
    let pairs = residual_pairs(&data, &stage1)?;
    let spline = fit_variance_spline(&pairs, SPLINE_KNOTS)?;
    let data: Vec<CountrySeries> = data.into_iter().map(|d| d.with_spline(Some(&spline))).collect();
    let jumpoffs: Vec<Jumpoff> = data
        .iter()
        .map(|d| {
            let (period, e0) = d.jumpoff();
            Jumpoff {
                country: d.name.clone(),
                period,
                e0,
            }
        })
        .collect();
    let stage2_config = config.with_seed(config.seed.wrapping_add(0x9e37_79b9));
    let draws = run_chain(&E0nsModel::new(data)?.with_priors(priors), &stage2_config)?;
    Ok(draws.with_meta(serde_json::json!({
        "model": "e0ns",
        "sex": sex.to_string(),
        "spline": spline,
        "jumpoffs": jumpoffs,
    })))
}

/// `(level, |residual|)` pairs at the posterior-mean gain parameters.
pub fn residual_pairs(data: &[CountrySeries], draws: &PosteriorDraws) -> Result<Vec<(f64, f64)>, E0nsError> {
    let cols = country_columns(draws.names())?;
    let means = draws.means();
    let mut pairs = Vec::new();
    for d in data {
        let c = cols
            .iter()
            .find(|c| c.name == d.name)
            .ok_or_else(|| E0nsError::Layout(format!("no draws for {}", d.name)))?;
        let params = c.params(&means);
        for (e, r) in d.levels.iter().zip(d.residuals(&params)) {
            pairs.push((*e, r.abs()));
        }
    }
    Ok(pairs)
}

/// Noise spline stored with stage-two draws, if any.
pub fn stored_spline(draws: &PosteriorDraws) -> Option<VarianceSpline> {
    serde_json::from_value(draws.meta.get("spline")?.clone()).ok()
}

/// Jump-offs stored with the draws by [`fit_e0ns_bhm`].
pub fn stored_jumpoffs(draws: &PosteriorDraws) -> Vec<Jumpoff> {
    draws
        .meta
        .get("jumpoffs")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_default()
}

/// One period ahead: level plus expected gain plus scaled noise.
pub fn step(e: f64, params: &GainCurveParams, noise_sd: f64, spline: Option<&VarianceSpline>, rng: &mut SimRng) -> f64 {
    let multiplier = spline.map_or(1.0, |s| s.eval(e));
    e + gain_curve(e, params) + noise_sd * multiplier * sample_std_normal(rng)
}

/// Posterior predictive trajectories for `horizon` periods after the latest
/// jump-off period, one per retained draw and country.
///
/// Countries whose jump-off is earlier are stepped through the gap first.
pub fn forecast_e0ns(
    draws: &PosteriorDraws,
    jumpoffs: &[Jumpoff],
    horizon: usize,
    rng: &mut SimRng,
) -> Result<TrajectorySet, E0nsError> {
    let cols = country_columns(draws.names())?;
    let spline = stored_spline(draws);
    let sex: Sex = draws
        .meta
        .get("sex")
        .and_then(|s| s.as_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(Sex::Male);
    let mut starts = Vec::with_capacity(jumpoffs.len());
    for j in jumpoffs {
        if !j.e0.is_finite() {
            return Err(E0nsError::BadJumpoff(j.country.clone()));
        }
        let c = cols
            .iter()
            .find(|c| c.name == j.country)
            .ok_or_else(|| E0nsError::BadJumpoff(j.country.clone()))?;
        starts.push((c, j));
    }
    let last = jumpoffs
        .iter()
        .map(|j| j.period)
        .max()
        .ok_or(E0nsError::NoCountries)?;
    let periods: Vec<Period> = (1..=horizon as i32).map(|h| last.offset(h)).collect();
    Ok(TrajectorySet::from_fn(
        sex,
        jumpoffs.iter().map(|j| j.country.clone()).collect(),
        periods,
        draws.n_rows(),
        |ci, d| {
            let (c, j) = starts[ci];
            let row = draws.row(d);
            let params = c.params(row);
            let omega = row[c.noise_sd];
            let mut e = j.e0;
            for _ in 0..(last.start_year() - j.period.start_year()) / 5 {
                e = step(e, &params, omega, spline.as_ref(), rng);
            }
            (0..horizon)
                .map(|_| {
                    e = step(e, &params, omega, spline.as_ref(), rng);
                    e
                })
                .collect()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::stream_rng;

    fn small_config(seed: u64) -> ChainConfig {
        ChainConfig {
            n_iterations: 3000,
            burn_in: 1000,
            thin: 5,
            n_chains: 1,
            seed,
            adaptation_window: 100,
        }
    }

    fn fitted() -> PosteriorDraws {
        let sim = simulate_e0ns_panel(6, 13, Sex::Male, &mut stream_rng(11, &[]));
        fit_e0ns_bhm(&sim.series, Sex::Male, &small_config(3)).unwrap()
    }

    #[test]
    fn draws_respect_supports() {
        let draws = fitted();
        let cols = country_columns(draws.names()).unwrap();
        assert_eq!(cols.len(), 6);
        for i in 0..draws.n_rows() {
            let row = draws.row(i);
            for c in &cols {
                assert!((0.0..=NOISE_SD_MAX).contains(&row[c.noise_sd]));
                let p = c.params(row).to_array();
                for (v, (lo, hi)) in p.iter().zip(GAIN_BOUNDS) {
                    assert!((lo..=hi).contains(v), "{v}");
                }
            }
        }
        assert!(stored_spline(&draws).is_some());
        assert_eq!(stored_jumpoffs(&draws).len(), 6);
    }

    #[test]
    fn forecast_shape_and_determinism() {
        let draws = fitted();
        let j = stored_jumpoffs(&draws);
        let a = forecast_e0ns(&draws, &j, 9, &mut stream_rng(5, &[])).unwrap();
        let b = forecast_e0ns(&draws, &j, 9, &mut stream_rng(5, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.periods.len(), 9);
        assert_eq!(a.periods[0].label_year(), 2018);
        assert_eq!(a.n_draws(), draws.n_rows());
    }

    fn one_country_draws(params: [f64; 6], omega: f64) -> PosteriorDraws {
        let mut names: Vec<String> = GAIN_NAMES.iter().map(|g| format!("{g}[A]")).collect();
        names.push("noise_sd[A]".into());
        let mut row = params.to_vec();
        row.push(omega);
        PosteriorDraws::new(names, row.repeat(50), 1, small_config(1), Default::default()).unwrap()
    }

    fn jump(e0: f64) -> Vec<Jumpoff> {
        vec![Jumpoff {
            country: "A".into(),
            period: Period::from_start(2010).unwrap(),
            e0,
        }]
    }

    #[test]
    fn zero_drift_zero_noise_is_flat() {
        let draws = one_country_draws([15.0, 40.0, 0.0, 20.0, 0.0, 0.0], 0.0);
        let t = forecast_e0ns(&draws, &jump(70.0), 9, &mut stream_rng(1, &[])).unwrap();
        for p in 0..9 {
            assert!(t.cell(0, p).iter().all(|&v| v == 70.0));
        }
    }

    #[test]
    fn asymptotic_regime_adds_z() {
        let draws = one_country_draws([10.0, 5.0, 0.0, 5.0, 2.0, 0.4], 0.0);
        let t = forecast_e0ns(&draws, &jump(80.0), 9, &mut stream_rng(1, &[])).unwrap();
        for p in 0..9 {
            let expected = 80.0 + 0.4 * (p + 1) as f64;
            assert!((t.get(0, p, 0) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn one_step_moments() {
        let p = GainCurveParams::from_array(&[15.0, 40.0, 0.0, 20.0, 3.0, 0.4]);
        let omega = 0.6;
        let e = 55.0;
        let mut rng = stream_rng(9, &[]);
        let n = 1_000_000;
        let inc: Vec<f64> = (0..n).map(|_| step(e, &p, omega, None, &mut rng) - e).collect();
        let m = crate::stats::mean(&inc);
        let v = crate::stats::variance(&inc);
        let se = omega / (n as f64).sqrt();
        assert!((m - gain_curve(e, &p)).abs() < 4.0 * se, "{m}");
        // Sample variance has sd about var * sqrt(2 / n).
        let var = omega * omega;
        assert!((v - var).abs() < 4.0 * var * (2.0 / n as f64).sqrt(), "{v}");
    }

    #[test]
    fn missing_country_is_rejected() {
        let draws = one_country_draws([15.0, 40.0, 0.0, 20.0, 3.0, 0.4], 0.5);
        let mut j = jump(60.0);
        j[0].country = "B".into();
        assert!(matches!(forecast_e0ns(&draws, &j, 9, &mut stream_rng(1, &[])), Err(E0nsError::BadJumpoff(_))));
        let mut j = jump(f64::NAN);
        j[0].country = "A".into();
        assert!(forecast_e0ns(&draws, &j, 9, &mut stream_rng(1, &[])).is_err());
    }
}
