use serde::{Deserialize, Serialize};

use super::gain::{gain_curve, GainCurveParams, GAIN_BOUNDS, GAIN_NAMES};
use super::spline::VarianceSpline;
use super::E0nsError;
use crate::data::{E0Series, Period, Sex};
use crate::mcmc::dist::{inv_gamma_ln_pdf, normal_ln_pdf, sample_std_normal, sample_truncated_normal, truncated_normal_ln_pdf};
use crate::mcmc::{BlockSpec, Bounds, InvGammaPrior, McmcError, Model, NormalPrior, SimRng, SweepContext};

/// Upper end of the uniform prior on the country noise scale.
pub const NOISE_SD_MAX: f64 = 10.0;
const MIN_PERIODS: usize = 4;

/// Hyperpriors on the means and variances of the six gain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E0nsPriors {
    pub mean: [NormalPrior; 6],
    pub var: [InvGammaPrior; 6],
}

impl Default for E0nsPriors {
    fn default() -> Self {
        let n = |mean: f64, sd: f64| NormalPrior { mean, variance: sd * sd };
        let ig = |sd: f64| InvGammaPrior { shape: 2.0, scale: sd * sd };
        E0nsPriors {
            mean: [n(15.77, 15.6), n(40.97, 23.5), n(0.21, 14.5), n(19.82, 14.7), n(2.93, 3.5), n(0.40, 0.6)],
            var: [ig(15.6), ig(14.5), ig(14.7), ig(3.5), ig(0.6), ig(0.6)],
        }
    }
}

/// One country's consecutive series and the noise multiplier at each
/// transition's starting level.
#[derive(Debug, Clone)]
pub struct CountrySeries {
    pub name: String,
    pub periods: Vec<Period>,
    pub levels: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl CountrySeries {
    /// Latest run of consecutive periods for `country`.
    pub fn from_series(series: &E0Series, country: &str, sex: Sex) -> Result<Self, E0nsError> {
        let all = series.series(country, sex);
        let mut start = all.len().saturating_sub(1);
        while start > 0 && all[start - 1].0.next() == all[start].0 {
            start -= 1;
        }
        let run = &all[start..];
        if run.len() < MIN_PERIODS {
            return Err(E0nsError::InsufficientSeries {
                country: country.to_string(),
                found: run.len(),
            });
        }
        if let Some((p, v)) = run.iter().find(|(_, v)| !v.is_finite()) {
            return Err(E0nsError::NonFinite {
                country: country.to_string(),
                period: p.start_year(),
                value: *v,
            });
        }
        Ok(CountrySeries {
            name: country.to_string(),
            periods: run.iter().map(|r| r.0).collect(),
            levels: run.iter().map(|r| r.1).collect(),
            multipliers: vec![1.0; run.len() - 1],
        })
    }

    pub fn with_spline(mut self, spline: Option<&VarianceSpline>) -> Self {
        self.multipliers = self.levels[..self.levels.len() - 1]
            .iter()
            .map(|&e| spline.map_or(1.0, |s| s.eval(e)))
            .collect();
        self
    }

    pub fn n_transitions(&self) -> usize {
        self.levels.len() - 1
    }

    /// Observed increment minus expected gain, per transition.
    pub fn residuals(&self, params: &GainCurveParams) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1] - w[0] - gain_curve(w[0], params)).collect()
    }

    pub fn jumpoff(&self) -> (Period, f64) {
        let n = self.levels.len() - 1;
        (self.periods[n], self.levels[n])
    }
}

/// Level-1 log-likelihood of one country.
pub fn country_loglik(data: &CountrySeries, params: &GainCurveParams, noise_sd: f64) -> f64 {
    data.residuals(params)
        .iter()
        .zip(&data.multipliers)
        .map(|(r, m)| {
            let sd = noise_sd * m;
            normal_ln_pdf(*r, 0.0, sd * sd)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct E0nsCountryState {
    pub params: GainCurveParams,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct E0nsState {
    pub countries: Vec<E0nsCountryState>,
    pub mean: [f64; 6],
    pub var: [f64; 6],
}

/// Hierarchical random-walk-with-drift model for non-smoking life expectancy.
pub struct E0nsModel {
    pub countries: Vec<CountrySeries>,
    pub priors: E0nsPriors,
}

impl E0nsModel {
    pub fn new(countries: Vec<CountrySeries>) -> Result<Self, E0nsError> {
        if countries.is_empty() {
            return Err(E0nsError::NoCountries);
        }
        Ok(E0nsModel {
            countries,
            priors: E0nsPriors::default(),
        })
    }

    pub fn with_priors(mut self, priors: E0nsPriors) -> Self {
        self.priors = priors;
        self
    }

    fn level2(&self, params: &[f64], mean: &[f64; 6], var: &[f64; 6]) -> f64 {
        (0..6)
            .map(|k| truncated_normal_ln_pdf(params[k], mean[k], var[k], GAIN_BOUNDS[k].0, GAIN_BOUNDS[k].1))
            .sum()
    }

    fn initial_state(&self, chain: usize, rng: &mut SimRng) -> E0nsState {
        let pr = &self.priors;
        let prior_means = pr.mean.map(|p| p.mean);
        let mut countries = Vec::with_capacity(self.countries.len());
        for d in &self.countries {
            let mut params = prior_means;
            if chain > 0 {
                for (k, v) in params.iter_mut().enumerate() {
                    let (lo, hi) = GAIN_BOUNDS[k];
                    *v = (*v + 0.05 * (hi - lo) * sample_std_normal(rng)).clamp(lo + 1e-3, hi - 1e-3);
                }
            }
            let inc: Vec<f64> = d.levels.windows(2).map(|w| w[1] - w[0]).collect();
            let sd = crate::stats::variance(&inc).sqrt();
            countries.push(E0nsCountryState {
                params: GainCurveParams::from_array(&params),
                noise_sd: if sd.is_finite() { sd.clamp(0.05, NOISE_SD_MAX - 0.1) } else { 1.0 },
            });
        }
        E0nsState {
            countries,
            mean: prior_means,
            var: pr.var.map(|p| p.scale),
        }
    }
}

impl Model for E0nsModel {
    type State = E0nsState;

    fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for d in &self.countries {
            names.extend(GAIN_NAMES.iter().map(|p| format!("{p}[{}]", d.name)));
            names.push(format!("noise_sd[{}]", d.name));
        }
        names.extend(GAIN_NAMES.iter().map(|p| format!("mu_{p}")));
        names.extend(GAIN_NAMES.iter().map(|p| format!("var_{p}")));
        names
    }

    fn blocks(&self) -> Vec<BlockSpec> {
        let bounds: Vec<Bounds> = GAIN_BOUNDS.iter().map(|&(lo, hi)| Bounds::new(lo, hi)).collect();
        let mut blocks = Vec::new();
        for d in &self.countries {
            blocks.push(BlockSpec::new(format!("gain[{}]", d.name), vec![2.0, 2.0, 2.0, 2.0, 0.1, 0.05], bounds.clone()));
        }
        for d in &self.countries {
            blocks.push(BlockSpec::scalar(format!("noise_sd[{}]", d.name), 0.1, Bounds::new(0.0, NOISE_SD_MAX)));
        }
        for p in GAIN_NAMES {
            blocks.push(BlockSpec::scalar(format!("mu_{p}"), 1.0, Bounds::REAL));
        }
        for p in GAIN_NAMES {
            blocks.push(BlockSpec::scalar(format!("var_{p}"), 0.5, Bounds::REAL));
        }
        blocks
    }

    fn initialize(&self, chain: usize, rng: &mut SimRng) -> Result<E0nsState, McmcError> {
        Ok(self.initial_state(chain, rng))
    }

    fn sweep(&self, st: &mut E0nsState, ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
        let n_c = self.countries.len();
        let (mean, var) = (st.mean, st.var);
        for (i, (d, s)) in self.countries.iter().zip(st.countries.iter_mut()).enumerate() {
            let omega = s.noise_sd;
            let mut x = s.params.to_array();
            ctx.mh(
                i,
                &mut x,
                &mut |v: &[f64]| country_loglik(d, &GainCurveParams::from_array(v), omega) + self.level2(v, &mean, &var),
                rng,
            )?;
            s.params = GainCurveParams::from_array(&x);

            // Uniform prior: the target is the likelihood alone.
            let params = s.params;
            let mut w = [s.noise_sd];
            ctx.mh(
                n_c + i,
                &mut w,
                &mut |v: &[f64]| if v[0] > 0.0 { country_loglik(d, &params, v[0]) } else { f64::NEG_INFINITY },
                rng,
            )?;
            s.noise_sd = w[0];
        }

        let pr = &self.priors;
        for k in 0..6 {
            let (lo, hi) = GAIN_BOUNDS[k];
            let xs: Vec<f64> = st.countries.iter().map(|c| c.params.to_array()[k]).collect();
            let v = st.var[k];
            let mut m = [st.mean[k]];
            ctx.mh(
                2 * n_c + k,
                &mut m,
                &mut |u: &[f64]| {
                    normal_ln_pdf(u[0], pr.mean[k].mean, pr.mean[k].variance)
                        + xs.iter().map(|&x| truncated_normal_ln_pdf(x, u[0], v, lo, hi)).sum::<f64>()
                },
                rng,
            )?;
            st.mean[k] = m[0];
            let mu = m[0];
            let mut u = [st.var[k].ln()];
            ctx.mh(
                2 * n_c + 6 + k,
                &mut u,
                &mut |u: &[f64]| {
                    let s2 = u[0].exp();
                    inv_gamma_ln_pdf(s2, pr.var[k].shape, pr.var[k].scale)
                        + u[0]
                        + xs.iter().map(|&x| truncated_normal_ln_pdf(x, mu, s2, lo, hi)).sum::<f64>()
                },
                rng,
            )?;
            st.var[k] = u[0].exp();
        }
        Ok(())
    }

    fn write_draw(&self, st: &E0nsState, out: &mut Vec<f64>) {
        for c in &st.countries {
            out.extend_from_slice(&c.params.to_array());
            out.push(c.noise_sd);
        }
        out.extend_from_slice(&st.mean);
        out.extend_from_slice(&st.var);
    }
}

/// Simulated countries with known gain parameters and noise scales.
pub struct SyntheticE0ns {
    pub series: E0Series,
    pub truth: Vec<(String, GainCurveParams, f64)>,
}

/// Draws `n_countries` series of `n_periods` from the model with fixed
/// hyperparameters, starting in 1950-1955 and using a unit multiplier.
pub fn simulate_e0ns_panel(n_countries: usize, n_periods: usize, sex: Sex, rng: &mut SimRng) -> SyntheticE0ns {
    let centre = [15.0, 40.0, 5.0, 20.0, 2.5, 0.5];
    let spread = [4.0, 6.0, 3.0, 4.0, 0.4, 0.15];
    let mut series = E0Series::new();
    let mut truth = Vec::new();
    for i in 0..n_countries {
        let name = format!("N{i:02}");
        let mut v = [0.0; 6];
        for k in 0..6 {
            let (lo, hi) = GAIN_BOUNDS[k];
            v[k] = sample_truncated_normal(centre[k], spread[k] * spread[k], lo, hi, rng).expect("non-empty support");
        }
        let params = GainCurveParams::from_array(&v);
        let omega = 0.3 + 0.2 * sample_std_normal(rng).abs();
        let mut e = 42.0 + 14.0 * (i as f64 / n_countries.max(1) as f64) + 2.0 * sample_std_normal(rng);
        let first = Period::estimation()[0];
        for t in 0..n_periods {
            series.insert(&name, sex, first.offset(t as i32), e);
            e += gain_curve(e, &params) + omega * sample_std_normal(rng);
        }
        truth.push((name, params, omega));
    }
    SyntheticE0ns { series, truth }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::stream_rng;

    fn toy() -> CountrySeries {
        let mut s = E0Series::new();
        let periods = Period::estimation();
        for (i, e) in [50.0, 52.5, 55.1, 57.0, 58.9].iter().enumerate() {
            s.insert("X", Sex::Male, periods[i + 3], *e);
        }
        // A gap before the run is ignored.
        s.insert("X", Sex::Male, periods[0], 40.0);
        CountrySeries::from_series(&s, "X", Sex::Male).unwrap()
    }

    #[test]
    fn uses_latest_consecutive_run() {
        let d = toy();
        assert_eq!(d.levels.len(), 5);
        assert_eq!(d.jumpoff(), (Period::estimation()[7], 58.9));
    }

    #[test]
    fn short_series_rejected() {
        let mut s = E0Series::new();
        for p in &Period::estimation()[..3] {
            s.insert("Y", Sex::Male, *p, 50.0);
        }
        assert!(matches!(
            CountrySeries::from_series(&s, "Y", Sex::Male),
            Err(E0nsError::InsufficientSeries { found: 3, .. })
        ));
    }

    #[test]
    fn loglik_matches_hand_sum() {
        let d = toy();
        let p = GainCurveParams::from_array(&[15.0, 40.0, 0.0, 20.0, 3.0, 0.4]);
        let omega = 0.7;
        let mut expected = 0.0;
        for w in d.levels.windows(2) {
            let r = w[1] - w[0] - gain_curve(w[0], &p);
            expected += -0.5 * (2.0 * std::f64::consts::PI * omega * omega).ln() - r * r / (2.0 * omega * omega);
        }
        assert!((country_loglik(&d, &p, omega) - expected).abs() < 1e-10);
    }

    #[test]
    fn simulated_panel_has_requested_shape() {
        let sim = simulate_e0ns_panel(3, 13, Sex::Male, &mut stream_rng(1, &[]));
        assert_eq!(sim.series.countries(Sex::Male).len(), 3);
        assert_eq!(sim.series.len(), 39);
        for (_, p, _) in &sim.truth {
            assert!(p.check().is_ok());
        }
    }
}
