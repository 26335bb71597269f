//! End-to-end run: ASSAF fit, per-sample e0ns fits, reconstruction of male
//! e0, and female e0 through the gap model.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{GapSource, PipelineConfig};
use super::simulate::{simulate_synthetic, SyntheticTruth};
use crate::assaf::{fit_assaf_bhm, forecast_assaf, posterior_assaf_mean_samples, AssafForecast, AssafMeanSample};
use crate::data::{
    load_assaf_surface, load_e0_series, load_mortality_surface, write_e0_csv, AssafSurface, ColumnMapping,
    E0Bounds, E0Series, MortalitySurface, Period, Schema, Sex,
};
use crate::e0ns::{fit_e0ns_bhm, forecast_e0ns, stored_jumpoffs};
use crate::gap::{gap_histories, 
    build_gap_panel, core_rates, female_e0_from_gap, fit_gap_model, forecast_gap, observed_asaf_gap, read_asaf_gap_csv,
    write_asaf_gap_csv, write_gap_panel_csv, AsafGapSeries, GapCoefficients,
};
use crate::lifetable::{asaf_from_assaf, e0ns_series};
use crate::mcmc::{stream_rng, PosteriorDraws};
use crate::reconstruct::{lee_carter_panel, reconstruct_male_e0};
use crate::stats;
use crate::trajectory::{write_quantile_csv, QuantileRow, TrajectorySet, REPORT_PROBS};
use crate::{Error, Result};

/// Validated inputs restricted to countries present in every file.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub mortality: MortalitySurface,
    pub assaf: AssafSurface,
    pub e0: E0Series,
    /// Supplied ASAF gap, replacing the female ASSAF fit.
    pub asaf_gap: Option<AsafGapSeries>,
}

impl Inputs {
    /// Keeps countries present in all three inputs and not excluded.
    pub fn restricted(self, exclude: &[String]) -> Inputs {
        let m: BTreeSet<String> = self.mortality.countries().into_iter().collect();
        let a: BTreeSet<String> = self.assaf.countries().into_iter().collect();
        let e: BTreeSet<String> = self.e0.countries(Sex::Male).into_iter().collect();
        let keep: BTreeSet<String> = m
            .intersection(&a)
            .filter(|c| e.contains(*c) && !exclude.contains(c))
            .cloned()
            .collect();
        Inputs {
            mortality: self.mortality.filtered(|k| keep.contains(&k.country)),
            assaf: self.assaf.filtered(|k| keep.contains(&k.country)),
            e0: self.e0.filtered(|k| keep.contains(&k.country)),
            asaf_gap: self.asaf_gap,
        }
    }

    /// Keeps periods before `start_year`.
    pub fn before(&self, start_year: i32) -> Inputs {
        let keep = |p: Period| p.start_year() < start_year;
        Inputs {
            mortality: self.mortality.filtered(|k| keep(k.period)),
            assaf: self.assaf.filtered(|k| keep(k.period)),
            e0: self.e0.filtered(|k| keep(k.period)),
            asaf_gap: self.asaf_gap.clone(),
        }
    }

    /// Periods of male mortality data, in order.
    pub fn periods(&self) -> Vec<Period> {
        let set: BTreeSet<Period> = self.mortality.iter().filter(|(k, _)| k.sex == Sex::Male).map(|(k, _)| k.period).collect();
        set.into_iter().collect()
    }
}

/// Loads the configured files or generates the synthetic panel.
pub fn load_inputs(config: &PipelineConfig) -> Result<Inputs> {
    config.validate()?;
    let inputs = if let Some(spec) = &config.synthetic {
        let data = simulate_synthetic(&SyntheticTruth::desk(spec.countries, spec.seed))?;
        data.write(&config.out_dir.join("inputs"))?;
        Inputs {
            mortality: data.mortality,
            assaf: data.assaf,
            e0: data.e0,
            asaf_gap: None,
        }
    } else {
        let d = config.data.as_ref().expect("validated");
        Inputs {
            mortality: load_mortality_surface(&d.mortality, &Schema::mortality())?,
            assaf: load_assaf_surface(&d.assaf, &Schema::assaf())?,
            e0: load_e0_series(&d.e0, &ColumnMapping::e0(), E0Bounds::default())?,
            asaf_gap: d
                .asaf_gap
                .as_ref()
                .map(|p| read_asaf_gap_csv(File::open(p)?).map_err(Error::from))
                .transpose()?,
        }
    };
    Ok(inputs.restricted(&config.exclude))
}

/// One completed stage and the checksums of what it wrote.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// SHA-256 per artifact path, relative to the output directory.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Tracks which stages can be reused and keeps the manifest on disk current.
struct Store {
    dir: PathBuf,
    previous: Option<Manifest>,
    current: Manifest,
    reusing: bool,
}

impl Store {
    fn open(dir: &Path, config_hash: String) -> Result<Store> {
        std::fs::create_dir_all(dir)?;
        let previous = Manifest::load(&dir.join("manifest.json"))
            .ok()
            .filter(|m| m.config_hash == config_hash);
        Ok(Store {
            dir: dir.to_path_buf(),
            previous,
            current: Manifest {
                config_hash,
                ..Manifest::default()
            },
            reusing: true,
        })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// True when `stage` and every stage before it are intact on disk.
    fn reusable(&mut self, stage: &str) -> bool {
        let intact = self.reusing
            && self.previous.as_ref().and_then(|m| m.stage(stage)).is_some_and(|rec| {
                rec.artifacts
                    .iter()
                    .all(|(rel, sum)| file_sha256(&self.dir.join(rel)).is_ok_and(|s| &s == sum))
            });
        if intact {
            let rec = self.previous.as_ref().and_then(|m| m.stage(stage)).cloned().expect("checked");
            self.current.stages.push(rec);
        } else {
            self.reusing = false;
        }
        intact
    }

    fn record(&mut self, stage: &str, artifacts: &[String]) -> Result<()> {
        let mut sums = BTreeMap::new();
        for rel in artifacts {
            sums.insert(rel.clone(), file_sha256(&self.path(rel))?);
        }
        self.current.stages.push(StageRecord {
            name: stage.to_string(),
            artifacts: sums,
        });
        self.write()
    }

    fn write(&self) -> Result<()> {
        let f = BufWriter::new(File::create(self.path("manifest.json"))?);
        serde_json::to_writer_pretty(f, &self.current)?;
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    serde_json::to_writer(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Forecast trajectories and tables written by a run.
#[derive(Debug, Clone)]
pub struct ForecastBundle {
    pub male: TrajectorySet,
    pub female: TrajectorySet,
    pub gap: TrajectorySet,
    pub coefficients: GapCoefficients,
    /// Observed rows followed by forecast rows, male then female.
    pub quantiles: Vec<QuantileRow>,
    pub manifest: Manifest,
}

impl ForecastBundle {
    pub fn trajectories(&self, sex: Sex) -> &TrajectorySet {
        match sex {
            Sex::Male => &self.male,
            Sex::Female => &self.female,
        }
    }
}

/// Runs every stage, reusing intact artifacts from an earlier run with the
/// same configuration.
pub fn run_full_pipeline(config: &PipelineConfig) -> Result<ForecastBundle> {
    let inputs = load_inputs(config).map_err(Error::at("inputs"))?;
    run_with_inputs(config, &inputs)
}

fn sample_dir(s: usize) -> String {
    format!("sample_{s:02}")
}

/// Runs the stages on already loaded inputs.
pub fn run_with_inputs(config: &PipelineConfig, inputs: &Inputs) -> Result<ForecastBundle> {
    config.validate()?;
    let mut store = Store::open(&config.out_dir, config.hash())?;
    let grid = inputs.mortality.grid().clone();
    let observed = inputs.periods();
    let last = *observed.last().ok_or_else(|| Error::InvalidConfig("no mortality data".into()))?;
    let future: Vec<Period> = (1..=config.horizon as i32).map(|i| last.offset(i)).collect();
    let all_periods: Vec<Period> = observed.iter().chain(&future).copied().collect();
    let male_mortality = inputs.mortality.filtered(|k| k.sex == Sex::Male);
    let need_female = inputs.asaf_gap.is_none();

    let mut seed = |labels: &[&str]| {
        let s = config.stage_seed(labels);
        store.current.seeds.insert(labels.join("/"), s);
        s
    };
    let assaf_seeds = [seed(&["assaf", "male"]), seed(&["assaf", "female"]), seed(&["assaf", "forecast"])];
    let e0ns_seeds: Vec<(u64, u64)> = (0..config.samples)
        .map(|s| (seed(&["e0ns", &s.to_string()]), seed(&["e0ns-forecast", &s.to_string()])))
        .collect();
    let gap_seed = seed(&["gap"]);

    // Stage 1: ASSAF posterior for males (and females when the ASAF gap is
    // not supplied).
    let assaf_files: Vec<String> = if need_female {
        vec!["assaf_male.bin".into(), "assaf_female.bin".into()]
    } else {
        vec!["assaf_male.bin".into()]
    };
    let stage = "assaf";
    if !store.reusable(stage) {
        let fit = |sex: Sex, s: u64, rel: &str| -> Result<()> {
            let draws = fit_assaf_bhm(&inputs.assaf, sex, &config.assaf_chain.with_seed(s))?;
            draws.save(&store.path(rel))?;
            Ok(())
        };
        fit(Sex::Male, assaf_seeds[0], &assaf_files[0]).map_err(Error::at(stage))?;
        if need_female {
            fit(Sex::Female, assaf_seeds[1], &assaf_files[1]).map_err(Error::at(stage))?;
        }
        store.record(stage, &assaf_files)?;
    }
    let assaf_male = PosteriorDraws::load(&store.path("assaf_male.bin")).map_err(|e| Error::at(stage)(e.into()))?;
    let samples = posterior_assaf_mean_samples(&assaf_male, config.samples, &all_periods, &grid)
        .map_err(|e| Error::at(stage)(e.into()))?;
    let estimation_part = |s: &AssafMeanSample| {
        let keep: BTreeSet<Period> = observed.iter().copied().collect();
        s.surface.filtered(|k| keep.contains(&k.period))
    };

    // Stage 2: per sample, non-smoking e0 history, fit and forecast.
    let stage = "e0ns";
    let e0ns_files: Vec<[String; 3]> = (0..config.samples)
        .map(|s| {
            let d = sample_dir(s);
            [format!("{d}/e0ns_series.csv"), format!("{d}/e0ns.bin"), format!("{d}/e0ns_forecast.json")]
        })
        .collect();
    if !store.reusable(stage) {
        samples
            .par_iter()
            .enumerate()
            .map(|(s, sample)| -> Result<()> {
                let files = &e0ns_files[s];
                std::fs::create_dir_all(store.path(&sample_dir(s)))?;
                let series = e0ns_series(&male_mortality, &estimation_part(sample))?;
                write_e0_csv(&series, File::create(store.path(&files[0]))?)?;
                let draws = fit_e0ns_bhm(&series, Sex::Male, &config.e0ns_chain.with_seed(e0ns_seeds[s].0))?;
                draws.save(&store.path(&files[1]))?;
                let traj = forecast_e0ns(
                    &draws,
                    &stored_jumpoffs(&draws),
                    config.horizon,
                    &mut stream_rng(e0ns_seeds[s].1, &[]),
                )?;
                write_json(&store.path(&files[2]), &traj)
            })
            .collect::<Result<Vec<()>>>()
            .map_err(Error::at(stage))?;
        store.record(stage, &e0ns_files.concat())?;
    }

    // Stage 3: male e0 per sample, then pooled with equal weight.
    let stage = "reconstruct";
    let male_files: Vec<String> = (0..config.samples).map(|s| format!("{}/male_e0.json", sample_dir(s))).collect();
    let pooled_file = "male_e0.json".to_string();
    if !store.reusable(stage) {
        let per_sample = samples
            .par_iter()
            .enumerate()
            .map(|(s, sample)| -> Result<TrajectorySet> {
                let e0ns: TrajectorySet = read_json(&store.path(&e0ns_files[s][2]))?;
                if e0ns.periods != future {
                    return Err(Error::InvalidConfig(format!(
                        "e0ns forecast starts at {}, expected {}",
                        e0ns.periods[0], future[0]
                    )));
                }
                let lc = lee_carter_panel(&male_mortality, &estimation_part(sample), Sex::Male, config.coherence)?;
                let assaf = mean_sample_forecast(sample, &e0ns)?;
                let male = reconstruct_male_e0(&e0ns, &assaf, &lc)?;
                write_json(&store.path(&male_files[s]), &male)?;
                Ok(male)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(Error::at(stage))?;
        let pooled = TrajectorySet::pool(&per_sample).map_err(|e| Error::at(stage)(e.into()))?;
        write_json(&store.path(&pooled_file), &pooled)?;
        let mut files = male_files.clone();
        files.push(pooled_file.clone());
        store.record(stage, &files)?;
    }
    let male: TrajectorySet = read_json(&store.path(&pooled_file)).map_err(Error::at(stage))?;

    // Stage 4: gap model and female e0.
    let stage = "gap";
    let gap_files = ["asaf_gap.csv", "gap_coefficients.json", "gap.json", "female_e0.json", "gap_panel.csv"].map(String::from);
    if !store.reusable(stage) {
        let run = || -> Result<()> {
            let asaf_gap = match &inputs.asaf_gap {
                Some(h) => h.clone(),
                None => {
                    let mut h = observed_asaf_gap(&inputs.mortality, &inputs.assaf)?;
                    let female = PosteriorDraws::load(&store.path("assaf_female.bin"))?;
                    let projected = projected_asaf_gap(inputs, &assaf_male, &female, &future, assaf_seeds[2])?;
                    for (c, s) in projected {
                        h.entry(c).or_default().extend(s);
                    }
                    h
                }
            };
            write_asaf_gap_csv(&asaf_gap, File::create(store.path(&gap_files[0]))?)?;
            let panel = build_gap_panel(&inputs.e0, &asaf_gap);
            write_gap_panel_csv(&panel, File::create(store.path(&gap_files[4]))?)?;
            let coef = match (&config.gap.coefficients, config.gap.source) {
                (Some(path), _) => read_json::<GapCoefficients>(path)?,
                (None, GapSource::Shipped) => GapCoefficients::default(),
                (None, GapSource::Fit) => {
                    fit_gap_model(&panel, config.gap.hinge)?.coefficients
                }
            };
            write_json(&store.path(&gap_files[1]), &coef)?;
            let history = gap_histories(&inputs.e0, &male, &asaf_gap, last);
            let gap = forecast_gap(&coef, &male, &history, gap_seed)?;
            write_json(&store.path(&gap_files[2]), &gap)?;
            write_json(&store.path(&gap_files[3]), &female_e0_from_gap(&male, &gap)?)
        };
        run().map_err(Error::at(stage))?;
        store.record(stage, &gap_files)?;
    }
    let load = || -> Result<(GapCoefficients, TrajectorySet, TrajectorySet)> {
        Ok((
            read_json(&store.path(&gap_files[1]))?,
            read_json(&store.path(&gap_files[2]))?,
            read_json(&store.path(&gap_files[3]))?,
        ))
    };
    let (coefficients, gap, female) = load().map_err(Error::at(stage))?;

    // Stage 5: quantile tables.
    let stage = "summary";
    let mut quantiles = Vec::new();
    let mut files = Vec::new();
    for (sex, traj) in [(Sex::Male, &male), (Sex::Female, &female)] {
        let mut rows = observed_rows(&inputs.e0, sex, &traj.countries);
        rows.extend(traj.quantile_summary(&REPORT_PROBS).map_err(|e| Error::at(stage)(e.into()))?);
        let rel = format!("quantiles_{sex}.csv");
        write_quantile_csv(&rows, &REPORT_PROBS, File::create(store.path(&rel))?)?;
        files.push(rel);
        quantiles.extend(rows);
    }
    store.reusing = false;
    store.record(stage, &files)?;
    Ok(ForecastBundle {
        male,
        female,
        gap,
        coefficients,
        quantiles,
        manifest: store.current,
    })
}

/// The mean ASSAF sample repeated for every e0ns draw, over the forecast
/// periods.
fn mean_sample_forecast(sample: &AssafMeanSample, e0ns: &TrajectorySet) -> Result<AssafForecast> {
    let mut cells = Vec::with_capacity(e0ns.countries.len() * e0ns.periods.len());
    for c in &e0ns.countries {
        for p in &e0ns.periods {
            cells.push(
                sample
                    .surface
                    .core_values(c, Sex::Male, *p)
                    .ok_or_else(|| Error::InvalidConfig(format!("no ASSAF sample for {c} {p}")))?,
            );
        }
    }
    let np = e0ns.periods.len();
    Ok(AssafForecast::from_fn(
        Sex::Male,
        e0ns.countries.clone(),
        e0ns.periods.clone(),
        vec![sample.draw_index; e0ns.n_draws()],
        |_, c, p| cells[c * np + p],
    ))
}

/// Male-minus-female posterior median ASAF over `periods`, aggregating the
/// ASSAF forecasts with each sex's last observed mortality rates.
pub fn projected_asaf_gap(
    inputs: &Inputs,
    male: &PosteriorDraws,
    female: &PosteriorDraws,
    periods: &[Period],
    seed: u64,
) -> Result<AsafGapSeries> {
    let mut medians: [BTreeMap<String, Vec<f64>>; 2] = Default::default();
    for (slot, (sex, draws)) in [(Sex::Male, male), (Sex::Female, female)].into_iter().enumerate() {
        let fc = forecast_assaf(draws, periods, None, &mut stream_rng(seed, &[slot as u64]))?;
        for (ci, country) in fc.countries.iter().enumerate() {
            let Some(&last) = inputs.mortality.periods(country, sex).last() else {
                continue;
            };
            let m = core_rates(&inputs.mortality, country, sex, last)?.expect("listed period");
            let mut per_period = Vec::with_capacity(periods.len());
            for pi in 0..periods.len() {
                let values: Vec<f64> = (0..fc.n_draws())
                    .map(|d| asaf_from_assaf(fc.get(d, ci, pi), &m))
                    .collect::<Result<_, _>>()?;
                per_period.push(stats::quantile(&values, 0.5));
            }
            medians[slot].insert(country.clone(), per_period);
        }
    }
    let [m, f] = medians;
    Ok(m
        .into_iter()
        .filter_map(|(c, mv)| {
            let fv = f.get(&c)?;
            let s = periods.iter().zip(mv.iter().zip(fv)).map(|(p, (a, b))| (*p, a - b)).collect();
            Some((c, s))
        })
        .collect())
}

fn observed_rows(e0: &E0Series, sex: Sex, countries: &[String]) -> Vec<QuantileRow> {
    let mut rows = Vec::new();
    for c in countries {
        for (period, v) in e0.series(c, sex) {
            rows.push(QuantileRow {
                country: c.clone(),
                sex,
                period,
                observed: Some(v),
                quantiles: Vec::new(),
            });
        }
    }
    rows
}
