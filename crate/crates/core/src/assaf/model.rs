use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::curve::DoubleLogisticParams;
use super::AssafError;
use crate::data::{AgeCohortMatrix, ASSAF_AGES};
use crate::mcmc::dist::{gamma_ln_pdf, inv_gamma_ln_pdf, normal_ln_pdf, sample_normal, sample_std_normal};
use crate::mcmc::{
    conjugate_update, BlockSpec, Bounds, ConjugateKind, InvGammaPrior, McmcError, Model, NormalMeanStats,
    NormalPrior, SimRng, SweepContext, VarianceStats,
};

const N_AGES: usize = ASSAF_AGES.len();
const OLD: usize = N_AGES - 1;

/// Hyperpriors. Gamma priors are (shape, rate); inverse-Gamma are (shape, scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssafPriors {
    pub mu_age_effect: NormalPrior,
    pub var_age_effect: InvGammaPrior,
    pub noise_scale: InvGammaPrior,
    pub var_cohort: InvGammaPrior,
    /// Shape of the country-level Gamma distribution of the two rates.
    pub rate_shape: f64,
    pub mu_rise_rate: (f64, f64),
    pub mu_fall_rate: (f64, f64),
    pub mu_onset: NormalPrior,
    pub var_onset: InvGammaPrior,
    pub mu_duration: NormalPrior,
    pub var_duration: InvGammaPrior,
    pub mu_peak: NormalPrior,
    pub var_peak: InvGammaPrior,
    pub mu_shift: NormalPrior,
    pub var_shift: InvGammaPrior,
    /// Shape of the country noise variance distribution around the global scale.
    pub noise_shape: f64,
}

impl Default for AssafPriors {
    fn default() -> Self {
        let n = |mean, variance| NormalPrior { mean, variance };
        let ig = |scale| InvGammaPrior { shape: 2.0, scale };
        AssafPriors {
            mu_age_effect: n(1.0, 5.0),
            var_age_effect: ig(5.0),
            noise_scale: ig(0.01),
            var_cohort: ig(0.01),
            rate_shape: 2.0,
            mu_rise_rate: (2.0, 0.1),
            mu_fall_rate: (2.0, 0.1),
            mu_onset: n(20.0, 1000.0),
            var_onset: ig(1000.0),
            mu_duration: n(20.0, 1000.0),
            var_duration: ig(1000.0),
            mu_peak: n(0.3, 0.25),
            var_peak: ig(0.25),
            mu_shift: n(0.0, 100.0),
            var_shift: ig(100.0),
            noise_shape: 2.0,
        }
    }
}

/// One country's age-cohort data, indexed for the sampler.
#[derive(Debug, Clone)]
pub struct CountryData {
    pub name: String,
    pub matrix: AgeCohortMatrix,
    /// Cohorts observed at some age below the oldest group.
    pub cohorts: Vec<i32>,
    /// Cohorts observed in the oldest group.
    pub old_cohorts: Vec<i32>,
    // (age row, position in cohorts or old_cohorts, value)
    cells: Vec<(usize, usize, f64)>,
}

impl CountryData {
    pub fn new(matrix: AgeCohortMatrix) -> Result<Self, AssafError> {
        let periods = matrix.to_periods().len();
        if periods < 3 {
            return Err(AssafError::InsufficientPeriods {
                country: matrix.country.clone(),
                found: periods,
            });
        }
        let all = matrix.cohorts().to_vec();
        let mut young = Vec::new();
        let mut old = Vec::new();
        for (row, col, _) in matrix.observed() {
            let list = if row == OLD { &mut old } else { &mut young };
            if !list.contains(&all[col]) {
                list.push(all[col]);
            }
        }
        young.sort_unstable();
        old.sort_unstable();
        let cells = matrix
            .observed()
            .map(|(row, col, y)| {
                let c = all[col];
                let pos = if row == OLD {
                    old.binary_search(&c)
                } else {
                    young.binary_search(&c)
                }
                .expect("cohort indexed above");
                (row, pos, y)
            })
            .collect();
        Ok(CountryData {
            name: matrix.country.clone(),
            matrix,
            cohorts: young,
            old_cohorts: old,
            cells,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryState {
    /// Age effects for the nine core ages; the first is fixed at 1.
    pub age_effect: [f64; N_AGES],
    pub cohort_effect: Vec<f64>,
    pub cohort_effect_old: Vec<f64>,
    pub curve: DoubleLogisticParams,
    pub noise_var: f64,
}

impl CountryState {
    pub fn mean(&self, row: usize, pos: usize) -> f64 {
        let tau = if row == OLD {
            self.cohort_effect_old[pos]
        } else {
            self.cohort_effect[pos]
        };
        self.age_effect[row] * tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    /// Index 0 (the reference age) is unused.
    pub mu_age_effect: [f64; N_AGES],
    pub var_age_effect: [f64; N_AGES],
    pub noise_scale: f64,
    pub var_cohort: f64,
    pub mu_rise_rate: f64,
    pub mu_onset: f64,
    pub var_onset: f64,
    pub mu_fall_rate: f64,
    pub mu_duration: f64,
    pub var_duration: f64,
    pub mu_peak: f64,
    pub var_peak: f64,
    pub mu_shift: f64,
    pub var_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssafState {
    pub countries: Vec<CountryState>,
    pub global: GlobalState,
}

/// Level-1 log-likelihood summed over all observed cells.
pub fn assaf_level1_loglik(data: &[CountryData], state: &AssafState) -> Result<f64, AssafError> {
    let mut total = 0.0;
    for (d, s) in data.iter().zip(&state.countries) {
        for &(row, pos, y) in &d.cells {
            let v = normal_ln_pdf(y, s.mean(row, pos), s.noise_var);
            if !v.is_finite() {
                let cohort = if row == OLD { d.old_cohorts[pos] } else { d.cohorts[pos] };
                return Err(AssafError::NonFiniteLik {
                    country: d.name.clone(),
                    age: ASSAF_AGES[row],
                    cohort,
                });
            }
            total += v;
        }
    }
    Ok(total)
}

/// The ASSAF hierarchical model over a set of countries.
#[derive(Debug, Clone)]
pub struct AssafModel {
    pub countries: Vec<CountryData>,
    pub priors: AssafPriors,
}

// Metropolis block indices after the per-country curve blocks.
const GLOBAL_BLOCKS: usize = 3;

impl AssafModel {
    pub fn new(matrices: Vec<AgeCohortMatrix>) -> Result<Self, AssafError> {
        if matrices.is_empty() {
            return Err(AssafError::NoCountries);
        }
        Ok(AssafModel {
            countries: matrices.into_iter().map(CountryData::new).collect::<Result<_, _>>()?,
            priors: AssafPriors::default(),
        })
    }

    pub fn with_priors(mut self, priors: AssafPriors) -> Self {
        self.priors = priors;
        self
    }

    pub fn layout(&self) -> super::AssafLayout {
        super::AssafLayout::from_names(&self.parameter_names()).expect("names produced by the model parse")
    }

    fn curve_log_density(&self, d: &CountryData, s: &CountryState, g: &GlobalState, v: &[f64]) -> f64 {
        let p = DoubleLogisticParams::from_array(v);
        let pr = &self.priors;
        let mut lp = gamma_ln_pdf(p.rise_rate, pr.rate_shape, pr.rate_shape / g.mu_rise_rate)
            + gamma_ln_pdf(p.fall_rate, pr.rate_shape, pr.rate_shape / g.mu_fall_rate)
            + normal_ln_pdf(p.onset, g.mu_onset, g.var_onset)
            + normal_ln_pdf(p.duration, g.mu_duration, g.var_duration)
            + normal_ln_pdf(p.peak, g.mu_peak, g.var_peak)
            + normal_ln_pdf(p.shift, g.mu_shift, g.var_shift);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let inv = 0.5 / g.var_cohort;
        for (c, tau) in d.cohorts.iter().zip(&s.cohort_effect) {
            lp -= (tau - p.eval(*c as f64)).powi(2) * inv;
        }
        for (c, tau) in d.old_cohorts.iter().zip(&s.cohort_effect_old) {
            lp -= (tau - p.eval_old(*c as f64)).powi(2) * inv;
        }
        lp
    }

    fn update_country(
        &self,
        idx: usize,
        s: &mut CountryState,
        g: &GlobalState,
        ctx: &mut SweepContext,
        rng: &mut SimRng,
    ) -> Result<(), McmcError> {
        let d = &self.countries[idx];
        // Age effects given cohort effects: regression through the origin.
        let mut stats = [NormalMeanStats::default(); N_AGES];
        for &(row, pos, y) in &d.cells {
            let tau = if row == OLD {
                s.cohort_effect_old[pos]
            } else {
                s.cohort_effect[pos]
            };
            stats[row].add_regression(tau, y, s.noise_var);
        }
        for row in 1..N_AGES {
            let prior = NormalPrior {
                mean: g.mu_age_effect[row],
                variance: g.var_age_effect[row],
            };
            s.age_effect[row] = conjugate_update(ConjugateKind::NormalMean { stats: stats[row], prior }, rng)?.value;
        }

        // Cohort effects given age effects and the curve.
        let mut young = vec![NormalMeanStats::default(); d.cohorts.len()];
        let mut old = vec![NormalMeanStats::default(); d.old_cohorts.len()];
        for &(row, pos, y) in &d.cells {
            let target = if row == OLD { &mut old[pos] } else { &mut young[pos] };
            target.add_regression(s.age_effect[row], y, s.noise_var);
        }
        for (i, st) in young.into_iter().enumerate() {
            let prior = NormalPrior {
                mean: s.curve.eval(d.cohorts[i] as f64),
                variance: g.var_cohort,
            };
            s.cohort_effect[i] = conjugate_update(ConjugateKind::NormalMean { stats: st, prior }, rng)?.value;
        }
        for (i, st) in old.into_iter().enumerate() {
            let prior = NormalPrior {
                mean: s.curve.eval_old(d.old_cohorts[i] as f64),
                variance: g.var_cohort,
            };
            s.cohort_effect_old[i] = conjugate_update(ConjugateKind::NormalMean { stats: st, prior }, rng)?.value;
        }

        // Curve parameters jointly.
        let mut v = s.curve.to_array();
        {
            let snapshot = s.clone();
            ctx.mh(idx, &mut v, &mut |x| self.curve_log_density(d, &snapshot, g, x), rng)?;
        }
        s.curve = DoubleLogisticParams::from_array(&v);

        // Country noise variance.
        let resid = VarianceStats::from_residuals(d.cells.iter().map(|&(row, pos, y)| y - s.mean(row, pos)));
        let prior = InvGammaPrior {
            shape: self.priors.noise_shape,
            scale: g.noise_scale,
        };
        s.noise_var = conjugate_update(ConjugateKind::InvGammaVariance { stats: resid, prior }, rng)?.value;
        Ok(())
    }

    fn update_globals(&self, st: &mut AssafState, ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
        let pr = self.priors;
        let n_c = self.countries.len();
        let cs = &st.countries;
        let g = &mut st.global;

        for row in 1..N_AGES {
            let xs: Vec<f64> = cs.iter().map(|c| c.age_effect[row]).collect();
            let (m, v) = normal_hyper(&xs, g.mu_age_effect[row], g.var_age_effect[row], pr.mu_age_effect, pr.var_age_effect, rng)?;
            g.mu_age_effect[row] = m;
            g.var_age_effect[row] = v;
        }

        let mut cohort_resid = VarianceStats::default();
        for (d, c) in self.countries.iter().zip(cs) {
            for (coh, tau) in d.cohorts.iter().zip(&c.cohort_effect) {
                cohort_resid.push(tau - c.curve.eval(*coh as f64));
            }
            for (coh, tau) in d.old_cohorts.iter().zip(&c.cohort_effect_old) {
                cohort_resid.push(tau - c.curve.eval_old(*coh as f64));
            }
        }
        g.var_cohort = conjugate_update(
            ConjugateKind::InvGammaVariance {
                stats: cohort_resid,
                prior: pr.var_cohort,
            },
            rng,
        )?
        .value;

        let pick = |f: fn(&DoubleLogisticParams) -> f64| cs.iter().map(|c| f(&c.curve)).collect::<Vec<f64>>();
        (g.mu_onset, g.var_onset) = normal_hyper(&pick(|p| p.onset), g.mu_onset, g.var_onset, pr.mu_onset, pr.var_onset, rng)?;
        (g.mu_duration, g.var_duration) =
            normal_hyper(&pick(|p| p.duration), g.mu_duration, g.var_duration, pr.mu_duration, pr.var_duration, rng)?;
        (g.mu_peak, g.var_peak) = normal_hyper(&pick(|p| p.peak), g.mu_peak, g.var_peak, pr.mu_peak, pr.var_peak, rng)?;
        (g.mu_shift, g.var_shift) = normal_hyper(&pick(|p| p.shift), g.mu_shift, g.var_shift, pr.mu_shift, pr.var_shift, rng)?;

        // Means of the Gamma-distributed rates and the noise scale have
        // non-conjugate full conditionals; sample them on the log scale.
        let shape = pr.rate_shape;
        let rises = pick(|p| p.rise_rate);
        let falls = pick(|p| p.fall_rate);
        let rate_mean_target = |rates: &[f64], prior: (f64, f64)| {
            let sum: f64 = rates.iter().sum();
            let n = rates.len() as f64;
            move |u: &[f64]| {
                let mu = u[0].exp();
                gamma_ln_pdf(mu, prior.0, prior.1) + u[0] + n * shape * (shape / mu).ln() - shape / mu * sum
            }
        };
        let mut u = [g.mu_rise_rate.ln()];
        ctx.mh(n_c, &mut u, &mut rate_mean_target(&rises, pr.mu_rise_rate), rng)?;
        g.mu_rise_rate = u[0].exp();
        let mut u = [g.mu_fall_rate.ln()];
        ctx.mh(n_c + 1, &mut u, &mut rate_mean_target(&falls, pr.mu_fall_rate), rng)?;
        g.mu_fall_rate = u[0].exp();

        let inv_sum: f64 = cs.iter().map(|c| 1.0 / c.noise_var).sum();
        let a = pr.noise_shape;
        let prior = pr.noise_scale;
        let mut u = [g.noise_scale.ln()];
        ctx.mh(
            n_c + 2,
            &mut u,
            &mut |u: &[f64]| {
                let s = u[0].exp();
                inv_gamma_ln_pdf(s, prior.shape, prior.scale) + u[0] + n_c as f64 * a * s.ln() - s * inv_sum
            },
            rng,
        )?;
        g.noise_scale = u[0].exp();
        Ok(())
    }

    fn initial_state(&self, chain: usize, rng: &mut SimRng) -> Result<AssafState, AssafError> {
        let pr = self.priors;
        let jitter = |rng: &mut SimRng, scale: f64| if chain == 0 { 0.0 } else { scale * sample_std_normal(rng) };
        let mut countries = Vec::with_capacity(self.countries.len());
        for d in &self.countries {
            let means = d.matrix.column_means();
            let (best, peak) = means
                .iter()
                .enumerate()
                .filter_map(|(i, m)| m.map(|m| (i, m)))
                .fold((0, f64::MIN), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
            let argmax = d.matrix.cohorts()[best] as f64;
            let curve = DoubleLogisticParams {
                rise_rate: 0.1,
                onset: argmax - super::COHORT_ORIGIN - 20.0 + jitter(rng, 2.0),
                fall_rate: 0.1,
                duration: 40.0,
                peak: peak * (1.0 + jitter(rng, 0.05)),
                shift: 0.0,
            };
            let col_mean = |c: i32| {
                d.matrix
                    .cohorts()
                    .iter()
                    .position(|&x| x == c)
                    .and_then(|i| means[i])
            };
            let cohort_effect = d
                .cohorts
                .iter()
                .map(|&c| col_mean(c).unwrap_or_else(|| curve.eval(c as f64)))
                .collect();
            let cohort_effect_old = d
                .old_cohorts
                .iter()
                .map(|&c| d.matrix.get(ASSAF_AGES[OLD], c).unwrap_or_else(|| curve.eval_old(c as f64)))
                .collect();
            let state = CountryState {
                age_effect: [1.0; N_AGES],
                cohort_effect,
                cohort_effect_old,
                curve,
                noise_var: pr.noise_scale.scale,
            };
            let finite = state.curve.to_array().iter().all(|v| v.is_finite())
                && state.cohort_effect.iter().chain(&state.cohort_effect_old).all(|v| v.is_finite());
            if !finite {
                return Err(AssafError::InitializationFailure(d.name.clone()));
            }
            countries.push(state);
        }
        let global = GlobalState {
            mu_age_effect: [pr.mu_age_effect.mean; N_AGES],
            var_age_effect: [pr.var_age_effect.scale; N_AGES],
            noise_scale: pr.noise_scale.scale,
            var_cohort: pr.var_cohort.scale,
            mu_rise_rate: 0.1,
            mu_onset: pr.mu_onset.mean,
            var_onset: pr.var_onset.scale,
            mu_fall_rate: 0.1,
            mu_duration: pr.mu_duration.mean,
            var_duration: pr.var_duration.scale,
            mu_peak: pr.mu_peak.mean,
            var_peak: pr.var_peak.scale,
            mu_shift: pr.mu_shift.mean,
            var_shift: pr.var_shift.scale,
        };
        Ok(AssafState { countries, global })
    }
}

// Conjugate update of a normal mean and variance given country values.
fn normal_hyper(
    xs: &[f64],
    _mu: f64,
    var: f64,
    mu_prior: NormalPrior,
    var_prior: InvGammaPrior,
    rng: &mut SimRng,
) -> Result<(f64, f64), McmcError> {
    let stats = NormalMeanStats::from_observations(xs, var);
    let mu = conjugate_update(ConjugateKind::NormalMean { stats, prior: mu_prior }, rng)?.value;
    let resid = VarianceStats::from_residuals(xs.iter().map(|x| x - mu));
    let var = conjugate_update(ConjugateKind::InvGammaVariance { stats: resid, prior: var_prior }, rng)?.value;
    Ok((mu, var))
}

impl Model for AssafModel {
    type State = AssafState;

    fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for d in &self.countries {
            let c = &d.name;
            names.extend(ASSAF_AGES.iter().map(|a| format!("age_effect[{c}][{a}]")));
            names.extend(d.cohorts.iter().map(|k| format!("cohort_effect[{c}][{k}]")));
            names.extend(d.old_cohorts.iter().map(|k| format!("cohort_effect_old[{c}][{k}]")));
            for p in super::CURVE_NAMES {
                names.push(format!("{p}[{c}]"));
            }
            names.push(format!("noise_var[{c}]"));
        }
        names.extend(ASSAF_AGES[1..].iter().map(|a| format!("mu_age_effect[{a}]")));
        names.extend(ASSAF_AGES[1..].iter().map(|a| format!("var_age_effect[{a}]")));
        names.extend(super::GLOBAL_NAMES.iter().map(|s| s.to_string()));
        names
    }

    fn blocks(&self) -> Vec<BlockSpec> {
        let curve_bounds = vec![
            Bounds::POSITIVE,
            Bounds::REAL,
            Bounds::POSITIVE,
            Bounds::REAL,
            Bounds::REAL,
            Bounds::REAL,
        ];
        let mut blocks: Vec<BlockSpec> = self
            .countries
            .iter()
            .map(|d| BlockSpec::new(format!("curve[{}]", d.name), vec![0.02, 2.0, 0.02, 2.0, 0.02, 1.0], curve_bounds.clone()))
            .collect();
        blocks.push(BlockSpec::scalar("mu_rise_rate", 0.3, Bounds::REAL));
        blocks.push(BlockSpec::scalar("mu_fall_rate", 0.3, Bounds::REAL));
        blocks.push(BlockSpec::scalar("noise_scale", 0.3, Bounds::REAL));
        debug_assert_eq!(blocks.len(), self.countries.len() + GLOBAL_BLOCKS);
        blocks
    }

    fn initialize(&self, chain: usize, rng: &mut SimRng) -> Result<AssafState, McmcError> {
        self.initial_state(chain, rng).map_err(|e| McmcError::Model(e.to_string()))
    }

    fn sweep(&self, state: &mut AssafState, ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
        for i in 0..self.countries.len() {
            let g = state.global.clone();
            self.update_country(i, &mut state.countries[i], &g, ctx, rng)?;
        }
        self.update_globals(state, ctx, rng)
    }

    fn write_draw(&self, state: &AssafState, out: &mut Vec<f64>) {
        for c in &state.countries {
            out.extend_from_slice(&c.age_effect);
            out.extend_from_slice(&c.cohort_effect);
            out.extend_from_slice(&c.cohort_effect_old);
            out.extend_from_slice(&c.curve.to_array());
            out.push(c.noise_var);
        }
        let g = &state.global;
        out.extend_from_slice(&g.mu_age_effect[1..]);
        out.extend_from_slice(&g.var_age_effect[1..]);
        out.extend_from_slice(&[
            g.noise_scale,
            g.var_cohort,
            g.mu_rise_rate,
            g.mu_onset,
            g.var_onset,
            g.mu_fall_rate,
            g.mu_duration,
            g.var_duration,
            g.mu_peak,
            g.var_peak,
            g.mu_shift,
            g.var_shift,
        ]);
    }
}

/// Brute-force Level-1 log-likelihood, one cell at a time, used as a check.
pub fn loglik_by_cells(data: &[CountryData], state: &AssafState) -> f64 {
    let mut total = 0.0;
    for (d, s) in data.iter().zip(&state.countries) {
        for (row, &age) in ASSAF_AGES.iter().enumerate() {
            for &c in d.matrix.cohorts() {
                if let Some(y) = d.matrix.get(age, c) {
                    let tau = if row == OLD {
                        s.cohort_effect_old[d.old_cohorts.iter().position(|&k| k == c).unwrap()]
                    } else {
                        s.cohort_effect[d.cohorts.iter().position(|&k| k == c).unwrap()]
                    };
                    let r = y - s.age_effect[row] * tau;
                    total += -0.5 * (2.0 * PI * s.noise_var).ln() - r * r / (2.0 * s.noise_var);
                }
            }
        }
    }
    total
}

/// Simulated panel drawn from the model with known parameters.
pub struct SyntheticAssaf {
    pub matrices: Vec<AgeCohortMatrix>,
    pub truth: Vec<CountryState>,
}

/// Draws `n_countries` countries from the model with fixed hyperparameters,
/// observed over the `labels` periods.
pub fn simulate_assaf_panel(n_countries: usize, labels: &[i32], rng: &mut SimRng) -> SyntheticAssaf {
    let mut matrices = Vec::new();
    let mut truth = Vec::new();
    let age_means = [1.0, 1.1, 1.15, 1.1, 1.0, 0.9, 0.75, 0.6, 0.55];
    for i in 0..n_countries {
        let name = format!("C{i:02}");
        let curve = DoubleLogisticParams {
            rise_rate: 0.15 + 0.03 * sample_std_normal(rng).abs(),
            onset: 25.0 + 3.0 * sample_std_normal(rng),
            fall_rate: 0.12 + 0.03 * sample_std_normal(rng).abs(),
            duration: 35.0 + 3.0 * sample_std_normal(rng),
            peak: 0.35 + 0.05 * sample_std_normal(rng),
            shift: -5.0 + 2.0 * sample_std_normal(rng),
        };
        let mut age_effect = [1.0; N_AGES];
        for (row, m) in age_means.iter().enumerate().skip(1) {
            age_effect[row] = sample_normal(*m, 0.01, rng);
        }
        let noise_var: f64 = 0.01f64.powi(2);
        let var_cohort: f64 = 0.015f64.powi(2);
        let first = labels[0];
        let last = labels[labels.len() - 1];
        let cohorts: Vec<i32> = (first - 80..=last - 40).step_by(5).collect();
        let tau: BTreeMap<i32, f64> = cohorts
            .iter()
            .map(|&c| (c, sample_normal(curve.eval(c as f64), var_cohort, rng)))
            .collect();
        let tau_old: BTreeMap<i32, f64> = cohorts
            .iter()
            .map(|&c| (c, sample_normal(curve.eval_old(c as f64), var_cohort, rng)))
            .collect();
        let obs: Vec<(i32, [f64; 9])> = labels
            .iter()
            .map(|&t| {
                let mut v = [0.0; 9];
                for (row, &age) in ASSAF_AGES.iter().enumerate() {
                    let c = t - age as i32;
                    let base = if row == OLD { tau_old[&c] } else { tau[&c] };
                    v[row] = sample_normal(age_effect[row] * base, noise_var, rng);
                }
                (t, v)
            })
            .collect();
        let matrix = AgeCohortMatrix::from_periods(name, crate::data::Sex::Male, &obs).expect("non-empty");
        let data = CountryData::new(matrix.clone()).expect("enough periods");
        truth.push(CountryState {
            age_effect,
            cohort_effect: data.cohorts.iter().map(|c| tau[c]).collect(),
            cohort_effect_old: data.old_cohorts.iter().map(|c| tau_old[c]).collect(),
            curve,
            noise_var,
        });
        matrices.push(matrix);
    }
    SyntheticAssaf { matrices, truth }
}
