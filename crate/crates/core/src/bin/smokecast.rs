use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use smokecast::assaf::{effect_summaries, fit_assaf_bhm, forecast_assaf, mean_sample_indices, posterior_assaf_mean_samples};
use smokecast::data::{
    load_assaf_surface, load_e0_series, load_mortality_surface, validate_inputs, write_e0_csv, AgeGrid, ColumnMapping,
    E0Bounds, Period, Schema, Sex, ASSAF_AGES,
};
use smokecast::e0ns::{fit_e0ns_bhm, forecast_e0ns, stored_jumpoffs, stored_spline};
use smokecast::gap::{
    fit_gap_model, forecast_gap, female_e0_from_gap, gap_histories, read_asaf_gap_csv, read_gap_panel_csv, GapCoefficients,
};
use smokecast::lifetable::{e0ns_series, life_table, AxRule};
use smokecast::mcmc::{format_two_quantile_table, raftery_lewis_report, stream_rng, ChainConfig, PosteriorDraws};
use smokecast::pipeline::{
    out_of_sample_validate, run_full_pipeline, simulate_synthetic, ChainSettings, PipelineConfig, SyntheticTruth,
};
use smokecast::reconstruct::{lee_carter_panel, reconstruct_male_e0, Coherence};
use smokecast::stats;
use smokecast::trajectory::{write_quantile_csv, TrajectorySet, REPORT_PROBS};
use smokecast::{Error, Result};

#[derive(Parser)]
#[command(name = "smokecast", version, about = "Smoking-aware probabilistic life expectancy forecasts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Input file checks.
    #[command(subcommand)]
    Data(DataCmd),
    /// Prints the life table and e0 for one `age_lower,mx` rate schedule.
    Lifetable {
        #[arg(long)]
        rates: PathBuf,
    },
    /// Non-smoking e0 series from mortality and ASSAF files.
    E0ns {
        #[command(subcommand)]
        command: Option<E0nsCmd>,
        #[arg(long)]
        mortality: Option<PathBuf>,
        #[arg(long)]
        assaf: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Mcmc(McmcCmd),
    #[command(subcommand)]
    Assaf(AssafCmd),
    /// Male all-cause e0 trajectories from e0ns and ASSAF draws.
    Reconstruct {
        #[arg(long)]
        e0ns: PathBuf,
        #[arg(long)]
        assaf: PathBuf,
        /// Mortality CSV of the estimation periods.
        #[arg(long)]
        history: PathBuf,
        /// Observed ASSAF CSV; defaults to the posterior mean surface.
        #[arg(long)]
        assaf_data: Option<PathBuf>,
        #[arg(long, default_value_t = 9)]
        horizon: usize,
        #[arg(long, value_enum, default_value = "shared-bx")]
        coherence: CoherenceArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Trajectory JSON; quantiles go next to it as CSV.
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Gap(GapCmd),
    /// Full pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Out-of-sample validation against a Lee-Carter baseline.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        split: i32,
    },
    /// Synthetic inputs from a truth JSON file.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        /// Writes a random truth for this many countries to `--truth` first.
        #[arg(long)]
        template: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Prints one JSON line per issue; exits nonzero if any.
    Validate {
        #[arg(long)]
        mortality: Option<PathBuf>,
        #[arg(long)]
        assaf: Option<PathBuf>,
        #[arg(long)]
        e0: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum McmcCmd {
    /// Raftery-Lewis table for the 0.025 and 0.975 quantiles.
    Diag {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long, default_value_t = 0)]
        chain: usize,
        /// Only parameters whose name contains this.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Subcommand)]
enum AssafCmd {
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// TOML chain settings (`n_iterations`, `burn_in`, `thin`, ...).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "male")]
        sex: Sex,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Age and cohort effect summaries.
        #[arg(long)]
        effects: Option<PathBuf>,
    },
    Forecast {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long, default_value_t = 9)]
        horizon: usize,
        /// First forecast period start year.
        #[arg(long, default_value_t = 2015)]
        from: i32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum E0nsCmd {
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "male")]
        sex: Sex,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Knots and coefficients of the noise spline.
        #[arg(long)]
        spline: Option<PathBuf>,
    },
    Forecast {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long, default_value_t = 9)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        spline: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GapCmd {
    Fit {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value_t = 61.0)]
        hinge: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Forecast {
        #[arg(long)]
        coef: PathBuf,
        /// Male trajectory JSON.
        #[arg(long)]
        male: PathBuf,
        #[arg(long)]
        asafgap: PathBuf,
        /// Observed e0 CSV, for the anchor and last gap.
        #[arg(long)]
        e0: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Female trajectory JSON; quantiles go next to it as CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CoherenceArg {
    None,
    SharedBx,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn chain_config(path: Option<&Path>, seed: u64) -> Result<ChainConfig> {
    let settings = match path {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
        None => ChainSettings::desk(),
    };
    let config = settings.with_seed(seed);
    config.validate()?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_trajectories(set: &TrajectorySet, out: &Path) -> Result<()> {
    serde_json::to_writer(create(out)?, set)?;
    let rows = set.quantile_summary(&REPORT_PROBS)?;
    write_quantile_csv(&rows, &REPORT_PROBS, create(&out.with_extension("csv"))?)?;
    Ok(())
}

fn read_trajectories(path: &Path) -> Result<TrajectorySet> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Data(DataCmd::Validate { mortality, assaf, e0 }) => {
            let (ms, as_, ec) = (Schema::mortality(), Schema::assaf(), ColumnMapping::e0());
            let issues = validate_inputs(
                mortality.as_deref().map(|p| (p, &ms)),
                assaf.as_deref().map(|p| (p, &as_)),
                e0.as_deref().map(|p| (p, &ec, E0Bounds::default())),
            );
            for i in &issues {
                println!("{}", i.to_json());
            }
            return Ok(if issues.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Lifetable { rates } => {
            let mut ages = Vec::new();
            let mut mx = Vec::new();
            for rec in csv::Reader::from_path(&rates).map_err(std::io::Error::from)?.deserialize() {
                let (age, m): (u32, f64) = rec.map_err(std::io::Error::from)?;
                ages.push(age);
                mx.push(m);
            }
            let grid = AgeGrid::from_lower_bounds(&ages)?;
            let t = life_table(&grid, &mx, AxRule::default())?;
            println!("age\tmx\tax\tqx\tlx\tdx\tLx\tTx\tex");
            for i in 0..t.ages.len() {
                println!(
                    "{}\t{:.6}\t{:.4}\t{:.6}\t{:.2}\t{:.2}\t{:.2}\t{:.1}\t{:.3}",
                    t.ages[i], t.mx[i], t.ax[i], t.qx[i], t.lx[i], t.dx[i], t.big_lx[i], t.tx[i], t.ex[i]
                );
            }
            println!("e0\t{:.4}", t.e0());
        }
        Command::E0ns { command: Some(cmd), .. } => e0ns_command(cmd)?,
        Command::E0ns { command: None, mortality, assaf, out } => {
            let (Some(m), Some(a)) = (mortality, assaf) else {
                return Err(Error::InvalidConfig("e0ns needs --mortality and --assaf, or a subcommand".into()));
            };
            let series = e0ns_series(&load_mortality_surface(&m, &Schema::mortality())?, &load_assaf_surface(&a, &Schema::assaf())?)?;
            match out {
                Some(p) => write_e0_csv(&series, create(&p)?)?,
                None => write_e0_csv(&series, std::io::stdout().lock())?,
            }
        }
        Command::Mcmc(McmcCmd::Diag { draws, chain, filter }) => {
            let draws = PosteriorDraws::load(&draws)?;
            let keep = |n: &str| filter.as_deref().is_none_or(|f| n.contains(f));
            let lower = raftery_lewis_report(&draws, chain, 0.025, 0.0125, 0.95, keep)?;
            let upper = raftery_lewis_report(&draws, chain, 0.975, 0.0125, 0.95, keep)?;
            print!("{}", format_two_quantile_table(&lower, &upper));
        }
        Command::Assaf(cmd) => assaf_command(cmd)?,
        Command::Reconstruct {
            e0ns,
            assaf,
            history,
            assaf_data,
            horizon,
            coherence,
            seed,
            out,
        } => {
            let e0ns_draws = PosteriorDraws::load(&e0ns)?;
            let assaf_draws = PosteriorDraws::load(&assaf)?;
            let mortality = load_mortality_surface(&history, &Schema::mortality())?;
            let observed = match assaf_data {
                Some(p) => load_assaf_surface(&p, &Schema::assaf())?,
                None => {
                    let periods = mortality.periods(&mortality.countries()[0], Sex::Male);
                    posterior_assaf_mean_samples(&assaf_draws, 1, &periods, mortality.grid())?.remove(0).surface
                }
            };
            let coherence = match coherence {
                CoherenceArg::None => Coherence::None,
                CoherenceArg::SharedBx => Coherence::SharedBx,
            };
            let params = lee_carter_panel(&mortality, &observed, Sex::Male, coherence)?;
            let e0ns_fc = forecast_e0ns(&e0ns_draws, &stored_jumpoffs(&e0ns_draws), horizon, &mut stream_rng(seed, &[0]))?;
            // Cycle evenly spaced ASSAF draws to match the e0ns draw count.
            let n = e0ns_fc.n_draws();
            let spaced = mean_sample_indices(assaf_draws.n_rows(), n.min(assaf_draws.n_rows()))?;
            let rows: Vec<usize> = (0..n).map(|i| spaced[i % spaced.len()]).collect();
            let assaf_fc = forecast_assaf(&assaf_draws, &e0ns_fc.periods, Some(&rows), &mut stream_rng(seed, &[1]))?;
            write_trajectories(&reconstruct_male_e0(&e0ns_fc, &assaf_fc, &params)?, &out)?;
        }
        Command::Gap(cmd) => gap_command(cmd)?,
        Command::Run { config } => {
            let config = PipelineConfig::load(&config)?;
            let bundle = run_full_pipeline(&config)?;
            println!(
                "{} countries, {} draws per cell; outputs in {}",
                bundle.male.countries.len(),
                bundle.male.n_draws(),
                config.out_dir.display()
            );
        }
        Command::Validate { config, split } => {
            let config = PipelineConfig::load(&config)?;
            let report = out_of_sample_validate(&config, split)?;
            report.write_csv(std::io::stdout().lock())?;
        }
        Command::Simulate { truth, template, seed, out } => {
            if let Some(n) = template {
                serde_json::to_writer_pretty(create(&truth)?, &SyntheticTruth::desk(n, seed))?;
            }
            let t: SyntheticTruth = serde_json::from_reader(BufReader::new(File::open(&truth)?))?;
            let data = simulate_synthetic(&t)?;
            let dir = out.unwrap_or_else(|| truth.with_extension(""));
            data.write(&dir)?;
            println!("wrote {}", dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn assaf_command(cmd: AssafCmd) -> Result<()> {
    match cmd {
        AssafCmd::Fit {
            data,
            config,
            sex,
            seed,
            out,
            effects,
        } => {
            let surface = load_assaf_surface(&data, &Schema::assaf())?;
            let draws = fit_assaf_bhm(&surface, sex, &chain_config(config.as_deref(), seed)?)?;
            draws.save(&out)?;
            let path = effects.unwrap_or_else(|| out.with_extension("effects.csv"));
            let mut w = csv::Writer::from_writer(create(&path)?);
            for s in effect_summaries(&draws)? {
                w.serialize(s).map_err(std::io::Error::from)?;
            }
            w.flush()?;
        }
        AssafCmd::Forecast {
            draws,
            horizon,
            from,
            seed,
            out,
        } => {
            let draws = PosteriorDraws::load(&draws)?;
            let periods = Period::range(from, horizon)?;
            let fc = forecast_assaf(&draws, &periods, None, &mut stream_rng(seed, &[]))?;
            let mut w = create(&out)?;
            let header: Vec<String> = REPORT_PROBS.iter().map(|p| format!("q{p}")).collect();
            writeln!(w, "country,sex,period_start,age_lower,{}", header.join(","))?;
            for (c, country) in fc.countries.iter().enumerate() {
                for (p, period) in fc.periods.iter().enumerate() {
                    for (row, age) in ASSAF_AGES.iter().enumerate() {
                        let q: Vec<String> =
                            stats::quantiles(&fc.cell(c, p, row), &REPORT_PROBS).iter().map(|v| v.to_string()).collect();
                        writeln!(w, "{country},{},{},{age},{}", fc.sex, period.start_year(), q.join(","))?;
                    }
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn e0ns_command(cmd: E0nsCmd) -> Result<()> {
    let dump_spline = |draws: &PosteriorDraws, path: Option<PathBuf>| -> Result<()> {
        if let Some(path) = path {
            let spline = stored_spline(draws).ok_or_else(|| Error::InvalidConfig("draws carry no spline".into()))?;
            let mut w = create(&path)?;
            spline.write_csv(&mut w)?;
            w.flush()?;
        }
        Ok(())
    };
    match cmd {
        E0nsCmd::Fit {
            series,
            config,
            sex,
            seed,
            out,
            spline,
        } => {
            let e0 = load_e0_series(&series, &ColumnMapping::e0(), E0Bounds::default())?;
            let draws = fit_e0ns_bhm(&e0, sex, &chain_config(config.as_deref(), seed)?)?;
            draws.save(&out)?;
            dump_spline(&draws, spline)?;
        }
        E0nsCmd::Forecast {
            draws,
            horizon,
            seed,
            out,
            spline,
        } => {
            let draws = PosteriorDraws::load(&draws)?;
            let fc = forecast_e0ns(&draws, &stored_jumpoffs(&draws), horizon, &mut stream_rng(seed, &[]))?;
            write_quantile_csv(&fc.quantile_summary(&REPORT_PROBS)?, &REPORT_PROBS, create(&out)?)?;
            dump_spline(&draws, spline)?;
        }
    }
    Ok(())
}

fn gap_command(cmd: GapCmd) -> Result<()> {
    match cmd {
        GapCmd::Fit { panel, hinge, out } => {
            let panel = read_gap_panel_csv(File::open(&panel)?)?;
            let fit = fit_gap_model(&panel, hinge)?;
            serde_json::to_writer_pretty(create(&out)?, &fit.coefficients)?;
            println!("n = {}, R^2 = {:.4}, condition = {:.1}", fit.n, fit.r_squared, fit.condition_number);
        }
        GapCmd::Forecast {
            coef,
            male,
            asafgap,
            e0,
            seed,
            out,
        } => {
            let coef: GapCoefficients = serde_json::from_reader(BufReader::new(File::open(&coef)?))?;
            let male = read_trajectories(&male)?;
            let asaf_gap = read_asaf_gap_csv(File::open(&asafgap)?)?;
            let e0 = load_e0_series(&e0, &ColumnMapping::e0(), E0Bounds::default())?;
            let last = male.periods[0].offset(-1);
            let history: BTreeMap<_, _> = gap_histories(&e0, &male, &asaf_gap, last);
            let gap = forecast_gap(&coef, &male, &history, seed)?;
            write_trajectories(&female_e0_from_gap(&male, &gap)?, &out)?;
        }
    }
    Ok(())
}
