//! Synthetic mortality, ASSAF and e0 panels generated from the two
//! hierarchical models with known parameters.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Error;
use crate::assaf::DoubleLogisticParams;
use crate::data::{
    write_e0_csv, write_surface_csv, AgeGrid, AssafSurface, E0Series, MortalitySurface, Period, Sex, SliceKey, ASSAF_AGES,
};
use crate::e0ns::{step, GainCurveParams};
use crate::gap::GapCoefficients;
use crate::lifetable::{allcause_from_nonsmoking, asaf_from_assaf, life_table_e0, MAX_ATTRIBUTION};
use crate::mcmc::dist::sample_std_normal;
use crate::mcmc::{label_stream, stream_rng, SimRng};
use crate::reconstruct::{rates_for_target_e0, solve_index_for_e0, LeeCarterParams};

/// ASSAF model parameters of one country and sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssafTruth {
    pub curve: DoubleLogisticParams,
    /// Age effects for 40..80; the first is fixed at one.
    pub age_effect: [f64; 9],
    /// Standard deviation of cohort effects around the curve.
    pub cohort_sd: f64,
    /// Standard deviation of observations around their mean.
    pub noise_sd: f64,
}

/// Male non-smoking e0 model parameters of one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E0nsTruth {
    pub gain: GainCurveParams,
    pub noise_sd: f64,
    /// Level in the first period.
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryTruth {
    pub name: String,
    pub male_assaf: AssafTruth,
    pub female_assaf: AssafTruth,
    pub male_e0ns: E0nsTruth,
    /// Female minus male e0 in the first period.
    pub initial_gap: f64,
}

impl CountryTruth {
    pub fn assaf(&self, sex: Sex) -> &AssafTruth {
        match sex {
            Sex::Male => &self.male_assaf,
            Sex::Female => &self.female_assaf,
        }
    }
}

/// Full parameter set of a synthetic panel. Female e0 follows male e0
/// through the gap regression with `gap` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub seed: u64,
    /// Number of periods from 1950-1955 onward.
    pub n_periods: usize,
    pub gap: GapCoefficients,
    pub countries: Vec<CountryTruth>,
}

/// Realized latent values, kept for recovery scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub truth: SyntheticTruth,
    /// `(cohort, young-age effect, 80-84 effect)` per country and sex.
    pub cohort_effects: BTreeMap<String, Vec<(i32, f64, f64)>>,
    /// Non-smoking e0 of both sexes.
    pub e0ns: E0Series,
}

pub struct SyntheticData {
    pub mortality: MortalitySurface,
    pub assaf: AssafSurface,
    pub e0: E0Series,
    pub record: TruthRecord,
}

impl SyntheticTruth {
    /// Random but plausible parameters for `n_countries` countries over the
    /// thirteen estimation periods.
    pub fn desk(n_countries: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, &[label_stream("truth")]);
        let age_means = [1.0, 1.1, 1.15, 1.1, 1.0, 0.9, 0.75, 0.6, 0.55];
        let assaf = |rng: &mut SimRng, female: bool| {
            let scale = if female { 0.45 } else { 1.0 };
            let delay = if female { 15.0 } else { 0.0 };
            let mut age_effect = age_means;
            for a in age_effect.iter_mut().skip(1) {
                *a += 0.05 * sample_std_normal(rng);
            }
            AssafTruth {
                curve: DoubleLogisticParams {
                    rise_rate: 0.15 + 0.03 * sample_std_normal(rng).abs(),
                    onset: 25.0 + delay + 3.0 * sample_std_normal(rng),
                    fall_rate: 0.12 + 0.03 * sample_std_normal(rng).abs(),
                    duration: 35.0 + 3.0 * sample_std_normal(rng),
                    peak: scale * (0.35 + 0.04 * sample_std_normal(rng)),
                    shift: -5.0 + 2.0 * sample_std_normal(rng),
                },
                age_effect,
                cohort_sd: 0.015,
                noise_sd: 0.01,
            }
        };
        let countries = (0..n_countries)
            .map(|i| {
                let spread = i as f64 / n_countries.max(1) as f64;
                CountryTruth {
                    name: format!("S{i:02}"),
                    male_assaf: assaf(&mut rng, false),
                    female_assaf: assaf(&mut rng, true),
                    male_e0ns: E0nsTruth {
                        gain: GainCurveParams {
                            onset: 15.0 + 3.0 * sample_std_normal(&mut rng),
                            rise_width: 40.0 + 5.0 * sample_std_normal(&mut rng),
                            plateau: 5.0 + 2.0 * sample_std_normal(&mut rng).abs(),
                            fall_width: 20.0 + 3.0 * sample_std_normal(&mut rng),
                            max_gain: 2.5 + 0.3 * sample_std_normal(&mut rng),
                            asymptote: 0.4 + 0.1 * sample_std_normal(&mut rng).abs(),
                        },
                        noise_sd: 0.3 + 0.1 * sample_std_normal(&mut rng).abs(),
                        start: 54.0 + 12.0 * spread + 1.5 * sample_std_normal(&mut rng),
                    },
                    initial_gap: 3.0 + 2.0 * spread + 0.5 * sample_std_normal(&mut rng).abs(),
                }
            })
            .collect();
        SyntheticTruth {
            seed,
            n_periods: crate::data::ESTIMATION_PERIODS,
            gap: GapCoefficients::default(),
            countries,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidTruth(m));
        if self.countries.is_empty() {
            return bad("no countries".into());
        }
        if self.n_periods < 5 {
            return bad(format!("{} periods, at least 5 required", self.n_periods));
        }
        if !(self.gap.lower < self.gap.upper && self.gap.sigma >= 0.0) {
            return bad("gap bounds must be ordered and sigma non-negative".into());
        }
        for c in &self.countries {
            for sex in [Sex::Male, Sex::Female] {
                let t = c.assaf(sex);
                let at = |m: &str| format!("{} {sex}: {m}", c.name);
                if t.age_effect[0] != 1.0 {
                    return bad(at("first age effect must be 1"));
                }
                if !(t.cohort_sd >= 0.0 && t.noise_sd >= 0.0) {
                    return bad(at("negative standard deviation"));
                }
                if !(t.curve.rise_rate > 0.0 && t.curve.fall_rate > 0.0 && t.curve.peak > 0.0) {
                    return bad(at("cohort curve needs positive rates and peak"));
                }
            }
            let e = &c.male_e0ns;
            if e.gain.check().is_err() {
                return bad(format!("{}: gain parameters outside their support", c.name));
            }
            if !(e.noise_sd >= 0.0) {
                return bad(format!("{}: negative e0ns noise", c.name));
            }
            if !(e.start > 20.0 && e.start < 100.0) {
                return bad(format!("{}: starting e0 outside (20, 100)", c.name));
            }
            if !(c.initial_gap >= self.gap.lower && c.initial_gap <= self.gap.upper) {
                return bad(format!("{}: initial gap outside the gap bounds", c.name));
            }
        }
        Ok(())
    }

    pub fn periods(&self) -> Vec<Period> {
        let first = Period::estimation()[0];
        (0..self.n_periods).map(|i| first.offset(i as i32)).collect()
    }
}

/// Reference log-rate schedule and age response used to turn e0 targets
/// into age-specific rates.
fn reference_schedule(grid: &AgeGrid) -> LeeCarterParams {
    let mut ax = Vec::with_capacity(grid.len());
    let mut bx = Vec::with_capacity(grid.len());
    for g in grid.iter() {
        let mid = g.lower as f64 + g.width.map_or(5.0, |w| w as f64 / 2.0);
        let m = match g.lower {
            0 => 0.05,
            1 => 0.004,
            _ => 0.0006 + 0.00004 * (0.09 * mid).exp(),
        };
        ax.push(f64::ln(m));
        bx.push(if mid < 60.0 { 1.6 - 0.015 * mid } else { 0.7 - 0.004 * (mid - 60.0) });
    }
    let total: f64 = bx.iter().sum();
    bx.iter_mut().for_each(|b| *b /= total);
    LeeCarterParams {
        grid: grid.clone(),
        ax,
        bx,
        kt: vec![0.0],
        periods: Vec::new(),
        max_log_error: 0.0,
        floored: 0,
    }
}

type CohortEffects = Vec<(i32, f64, f64)>;

/// Cohort effects and one ASSAF observation vector per period.
fn simulate_assaf(t: &AssafTruth, labels: &[i32], rng: &mut SimRng) -> (CohortEffects, Vec<[f64; 9]>) {
    let cohorts: Vec<i32> = (labels[0] - 80..=labels[labels.len() - 1] - 40).step_by(5).collect();
    let effects: CohortEffects = cohorts
        .iter()
        .map(|&k| {
            let young = t.curve.eval(k as f64) + t.cohort_sd * sample_std_normal(rng);
            let old = t.curve.eval_old(k as f64) + t.cohort_sd * sample_std_normal(rng);
            (k, young, old)
        })
        .collect();
    let lookup: BTreeMap<i32, (f64, f64)> = effects.iter().map(|&(k, y, o)| (k, (y, o))).collect();
    let obs = labels
        .iter()
        .map(|&label| {
            let mut y = [0.0; 9];
            for (row, &age) in ASSAF_AGES.iter().enumerate() {
                let (young, old) = lookup[&(label - age as i32)];
                let base = if row == ASSAF_AGES.len() - 1 { old } else { young };
                y[row] = (t.age_effect[row] * base + t.noise_sd * sample_std_normal(rng)).clamp(0.0, MAX_ATTRIBUTION);
            }
            y
        })
        .collect();
    (effects, obs)
}

/// Draws the panel described by `truth`.
///
/// ASSAF observations are clamped to `[0, 0.99]`; with zero standard
/// deviations every output equals its deterministic mean. The ASAF gap
/// entering the female recursion weights both sexes with male rates.
pub fn simulate_synthetic(truth: &SyntheticTruth) -> Result<SyntheticData, Error> {
    truth.validate()?;
    let grid = AgeGrid::default();
    let schedule = reference_schedule(&grid);
    let core: Vec<usize> = ASSAF_AGES.iter().map(|a| grid.index_of(*a).expect("default grid")).collect();
    let periods = truth.periods();
    let labels: Vec<i32> = periods.iter().map(|p| p.label_year()).collect();
    let mut assaf_core = BTreeMap::new();
    let mut mortality = BTreeMap::new();
    let mut e0 = E0Series::new();
    let mut e0ns = E0Series::new();
    let mut cohort_effects = BTreeMap::new();
    let full = |y: &[f64; 9]| {
        let raw: BTreeMap<u32, f64> = ASSAF_AGES.iter().copied().zip(*y).collect();
        crate::data::harmonize_assaf_ages(&raw, &grid)
    };
    for c in &truth.countries {
        let stream = |label: &str| stream_rng(truth.seed, &[label_stream(&c.name), label_stream(label)]);
        let (male_effects, male_y) = simulate_assaf(&c.male_assaf, &labels, &mut stream("assaf-male"));
        let (female_effects, female_y) = simulate_assaf(&c.female_assaf, &labels, &mut stream("assaf-female"));
        cohort_effects.insert(format!("{} male", c.name), male_effects);
        cohort_effects.insert(format!("{} female", c.name), female_effects);

        let mut rng = stream("e0");
        let mut level = c.male_e0ns.start;
        let mut anchor = 0.0;
        let mut gap = c.initial_gap;
        let mut k_female = 0.0;
        for (i, &p) in periods.iter().enumerate() {
            if i > 0 {
                level = step(level, &c.male_e0ns.gain, c.male_e0ns.noise_sd, None, &mut rng);
            }
            let (_, dns) = rates_for_target_e0(&schedule, level)?;
            let male_rates = allcause_from_nonsmoking(&dns, &full(&male_y[i])?)?;
            let male_e0 = life_table_e0(&grid, &male_rates)?;
            if i == 0 {
                anchor = male_e0;
            } else {
                let weights: Vec<f64> = core.iter().map(|&j| male_rates[j]).collect();
                let h = asaf_from_assaf(&male_y[i], &weights)? - asaf_from_assaf(&female_y[i], &weights)?;
                let mean = truth.gap.predictor(anchor, gap, male_e0, h);
                gap = truth.gap.clamp(mean + truth.gap.sigma * sample_std_normal(&mut rng));
            }
            // Female rates: the reference schedule shifted until all-cause
            // e0 under the female ASSAF equals male e0 plus the gap.
            let y_female = full(&female_y[i])?;
            let female_at = |k: f64| allcause_from_nonsmoking(&schedule.rates(k), &y_female);
            k_female = solve_index_for_e0(|k| Ok(life_table_e0(&grid, &female_at(k)?)?), male_e0 + gap, k_female)?;
            let female_rates = female_at(k_female)?;

            e0ns.insert(&c.name, Sex::Male, p, level);
            e0ns.insert(&c.name, Sex::Female, p, life_table_e0(&grid, &schedule.rates(k_female))?);
            e0.insert(&c.name, Sex::Male, p, male_e0);
            e0.insert(&c.name, Sex::Female, p, life_table_e0(&grid, &female_rates)?);
            for (sex, rates, y) in [(Sex::Male, male_rates, male_y[i]), (Sex::Female, female_rates, female_y[i])] {
                let key = SliceKey::new(c.name.clone(), sex, p);
                mortality.insert(key.clone(), rates);
                assaf_core.insert(key, y);
            }
        }
    }
    Ok(SyntheticData {
        mortality: MortalitySurface::new(grid.clone(), mortality)?,
        assaf: AssafSurface::from_core(grid, assaf_core)?,
        e0,
        record: TruthRecord {
            truth: truth.clone(),
            cohort_effects,
            e0ns,
        },
    })
}

impl SyntheticData {
    /// Writes `mortality.csv`, `assaf.csv`, `e0.csv` and `truth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(dir)?;
        write_surface_csv(&self.mortality, "mx", File::create(dir.join("mortality.csv"))?)?;
        write_surface_csv(&self.assaf, "y", File::create(dir.join("assaf.csv"))?)?;
        write_e0_csv(&self.e0, File::create(dir.join("e0.csv"))?)?;
        serde_json::to_writer_pretty(File::create(dir.join("truth.json"))?, &self.record)?;
        Ok(())
    }
}
