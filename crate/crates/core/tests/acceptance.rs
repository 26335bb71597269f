//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to
//! see the report.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use smokecast::assaf::{double_logistic_cohort, simulate_assaf_panel, AssafLayout, AssafModel};
use smokecast::data::{AgeGrid, Period, Sex};
use smokecast::e0ns::{country_columns, fit_e0ns_bhm, gain_curve, simulate_e0ns_panel, GainCurveParams};
use smokecast::gap::{fit_gap_model, forecast_gap, simulate_gap_panel, GapCoefficients, GapHistory};
use smokecast::lifetable::{allcause_from_nonsmoking, e0_with_rule, life_table, life_table_e0, nonsmoking_rates, AxRule};
use smokecast::mcmc::dist::{normal_ln_pdf, sample_std_normal};
use smokecast::mcmc::{
    conjugate_update, minimum_iid_length, raftery_lewis, run_chain, stream_rng, BlockSpec, Bounds, ChainConfig,
    ConjugateKind, McmcError, Model, NormalMeanStats, NormalPrior, SimRng, SweepContext,
};
use smokecast::pipeline::{mean_absolute_error, run_full_pipeline, score_cells, ChainSettings, IntervalCell, PipelineConfig};
use smokecast::reconstruct::{lee_carter_fit, rates_for_target_e0, solve_index_for_e0};
use smokecast::stats::{mean, quantile, variance};
use smokecast::trajectory::TrajectorySet;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Three groups 0-5, 5-10, 10+ at m = (0.02, 0.01, 0.10) with mid-interval
// deaths, evaluated in exact rational arithmetic.
const TOY_E0: f64 = 17.781_649_245_063_878_689;

fn life_tables() -> Outcome {
    let toy = AgeGrid::from_lower_bounds(&[0, 5, 10]).map_err(|e| e.to_string())?;
    let e_toy = e0_with_rule(&toy, &[0.02, 0.01, 0.10], AxRule::Midpoint).map_err(|e| e.to_string())?;
    let grid = AgeGrid::default();
    let mut m = vec![0.0; grid.len()];
    *m.last_mut().unwrap() = 0.5;
    let e_zero = life_table_e0(&grid, &m).map_err(|e| e.to_string())?;

    let mut rng = stream_rng(1, &[]);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let rates: Vec<f64> = (0..grid.len())
            .map(|i| 0.0005 * (0.08 * 5.0 * i as f64).exp() * rng.random_range(0.5..2.0))
            .collect();
        let t = life_table(&grid, &rates, AxRule::default()).map_err(|e| e.to_string())?;
        let n = t.ages.len();
        for x in 0..n {
            let tail: f64 = t.big_lx[x..].iter().sum();
            worst = worst.max((t.tx[x] - tail).abs() / tail);
            worst = worst.max((t.ex[x] - t.tx[x] / t.lx[x]).abs() / t.ex[x]);
            if x + 1 < n {
                let next = t.lx[x] * (1.0 - t.qx[x]);
                worst = worst.max((t.lx[x + 1] - next).abs() / t.lx[x]);
            }
        }
    }
    ensure(
        (e_toy - TOY_E0).abs() < 1e-9 && (e_zero - 102.0).abs() < 1e-9 && worst < 1e-10,
        format!("toy e0 {e_toy:.12}, zero-mortality e0 {e_zero}, worst identity error {worst:.1e}"),
    )
}

fn round_trip() -> Outcome {
    let mut rng = stream_rng(2, &[]);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let d: Vec<f64> = (0..22).map(|_| rng.random_range(1e-5..0.5)).collect();
        let y: Vec<f64> = (0..22).map(|_| rng.random_range(0.0..=0.9)).collect();
        let back = allcause_from_nonsmoking(&nonsmoking_rates(&d, &y).unwrap(), &y).unwrap();
        for (a, b) in back.iter().zip(&d) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    ensure(worst < 1e-12, format!("max relative error {worst:.1e} over 10^4 vectors"))
}

fn curve_tails() -> Outcome {
    let mut rng = stream_rng(3, &[]);
    let (mut tail, mut asym) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (r1, on, r2, dur, k): (f64, f64, f64, f64, f64) = (
            rng.random_range(0.02..2.0),
            rng.random_range(-20.0..100.0),
            rng.random_range(0.02..2.0),
            rng.random_range(0.0..80.0),
            rng.random_range(-1.0..1.0),
        );
        // One transition width is 4.4 / rate.
        let (w1, w2) = (4.4 / r1, 4.4 / r2);
        let origin = 1873.0 + on;
        let below = origin + (-10.0 * w1).min(dur - 10.0 * w2);
        let above = origin + (10.0 * w1).max(dur + 10.0 * w2);
        for c in [below, below - 100.0, above, above + 100.0] {
            tail = tail.max(double_logistic_cohort(c, r1, on, r2, dur, k).abs());
        }
        let p = GainCurveParams {
            onset: rng.random_range(0.0..100.0),
            rise_width: rng.random_range(0.5..100.0),
            plateau: rng.random_range(0.0..100.0),
            fall_width: rng.random_range(0.5..100.0),
            max_gain: rng.random_range(0.0..15.0),
            asymptote: rng.random_range(0.0..1.15),
        };
        let e = p.onset + p.rise_width + p.plateau + p.fall_width + 10.0 * p.rise_width.max(p.fall_width);
        asym = asym.max((gain_curve(e, &p) - p.asymptote).abs());
    }
    ensure(
        tail < 1e-6 && asym < 1e-6,
        format!("max |g| beyond 10 widths {tail:.1e}, max |gain - z| {asym:.1e}"),
    )
}

// y_i ~ N(mu, 1), mu ~ N(0, 10).
struct NormalNormal(Vec<f64>);

impl Model for NormalNormal {
    type State = f64;
    fn parameter_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }
    fn blocks(&self) -> Vec<BlockSpec> {
        Vec::new()
    }
    fn initialize(&self, _: usize, _: &mut SimRng) -> Result<f64, McmcError> {
        Ok(0.0)
    }
    fn sweep(&self, mu: &mut f64, _: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
        let stats = NormalMeanStats::from_observations(&self.0, 1.0);
        let prior = NormalPrior { mean: 0.0, variance: 10.0 };
        *mu = conjugate_update(ConjugateKind::NormalMean { stats, prior }, rng)?.value;
        Ok(())
    }
    fn write_draw(&self, mu: &f64, out: &mut Vec<f64>) {
        out.push(*mu);
    }
}

struct StandardNormal;

impl Model for StandardNormal {
    type State = f64;
    fn parameter_names(&self) -> Vec<String> {
        vec!["x".into()]
    }
    fn blocks(&self) -> Vec<BlockSpec> {
        vec![BlockSpec::scalar("x", 0.1, Bounds::REAL)]
    }
    fn initialize(&self, _: usize, _: &mut SimRng) -> Result<f64, McmcError> {
        Ok(0.0)
    }
    fn sweep(&self, x: &mut f64, ctx: &mut SweepContext, rng: &mut SimRng) -> Result<(), McmcError> {
        let mut v = [*x];
        ctx.mh(0, &mut v, &mut |v| normal_ln_pdf(v[0], 0.0, 1.0), rng)?;
        *x = v[0];
        Ok(())
    }
    fn write_draw(&self, x: &f64, out: &mut Vec<f64>) {
        out.push(*x);
    }
}

fn chain(n_iterations: usize, burn_in: usize, thin: usize, n_chains: usize, seed: u64) -> ChainConfig {
    ChainConfig {
        n_iterations,
        burn_in,
        thin,
        n_chains,
        seed,
        adaptation_window: 100,
    }
}

fn mcmc_exactness() -> Outcome {
    let y = vec![1.2, 0.7, 2.1, 1.9, 1.4];
    let precision = 0.1 + y.len() as f64;
    let (post_mean, post_var) = (y.iter().sum::<f64>() / precision, 1.0 / precision);
    let draws = run_chain(&NormalNormal(y), &chain(50_000, 1_000, 1, 1, 11)).map_err(|e| e.to_string())?;
    let mu = draws.column("mu").unwrap();
    let n = mu.len() as f64;
    let (m, v) = (mean(&mu), variance(&mu));
    let mean_ok = (m - post_mean).abs() < 3.0 * (post_var / n).sqrt();
    let var_ok = (v - post_var).abs() < 3.0 * post_var * (2.0 / (n - 1.0)).sqrt();

    let draws = run_chain(&StandardNormal, &chain(400_000, 5_000, 1, 4, 12)).map_err(|e| e.to_string())?;
    let x = draws.column("x").unwrap();
    let mh_var = variance(&x);
    ensure(
        mean_ok && var_ok && (mh_var - 1.0).abs() < 0.02,
        format!("conjugate mean {m:.4} (exact {post_mean:.4}), variance {v:.5} (exact {post_var:.5}); MH variance {mh_var:.4}"),
    )
}

fn raftery_lewis_sanity() -> Outcome {
    let mut rng = stream_rng(5, &[]);
    let iid: Vec<f64> = (0..100_000).map(|_| sample_std_normal(&mut rng)).collect();
    let mut ar = Vec::with_capacity(100_000);
    let mut x = 0.0;
    for _ in 0..100_000 {
        x = 0.95 * x + (1.0f64 - 0.95 * 0.95).sqrt() * sample_std_normal(&mut rng);
        ar.push(x);
    }
    let a = raftery_lewis(&iid, 0.025, 0.0125, 0.95).map_err(|e| e.to_string())?;
    let b = raftery_lewis(&ar, 0.025, 0.0125, 0.95).map_err(|e| e.to_string())?;
    let n_min = minimum_iid_length(0.025, 0.0125, 0.95);
    ensure(
        (0.8..=1.5).contains(&a.dependence) && b.dependence > a.dependence && (500..=700).contains(&n_min),
        format!("iid dependence {:.2}, AR(0.95) dependence {:.2}, N_min {n_min}", a.dependence, b.dependence),
    )
}

fn coverage(intervals: &[(Vec<f64>, f64)]) -> f64 {
    let hits = intervals
        .iter()
        .filter(|(c, t)| quantile(c, 0.025) <= *t && *t <= quantile(c, 0.975))
        .count();
    hits as f64 / intervals.len() as f64
}

fn recovery() -> Outcome {
    let desk = ChainSettings::desk();
    let labels: Vec<i32> = (0..13).map(|i| 1953 + 5 * i).collect();
    let sim = simulate_assaf_panel(10, &labels, &mut stream_rng(2024, &[]));
    let model = AssafModel::new(sim.matrices.clone()).map_err(|e| e.to_string())?;
    let draws = run_chain(&model, &desk.with_seed(77)).map_err(|e| e.to_string())?;
    let layout = AssafLayout::from_names(draws.names()).map_err(|e| e.to_string())?;
    let mut assaf = Vec::new();
    for (c, t) in layout.countries.iter().zip(&sim.truth) {
        for row in 1..9 {
            assaf.push((draws.column_at(c.age_effect[row]), t.age_effect[row]));
        }
        assaf.push((draws.column_at(c.curve[4]), t.curve.peak));
    }

    let sim = simulate_e0ns_panel(10, 13, Sex::Male, &mut stream_rng(2024, &[]));
    let draws = fit_e0ns_bhm(&sim.series, Sex::Male, &desk.with_seed(7)).map_err(|e| e.to_string())?;
    let cols = country_columns(draws.names()).map_err(|e| e.to_string())?;
    let mut e0ns = Vec::new();
    for (name, truth, _) in &sim.truth {
        let c = cols.iter().find(|c| &c.name == name).ok_or("missing country")?;
        e0ns.push((draws.column_at(c.params[4]), truth.max_gain));
        e0ns.push((draws.column_at(c.params[5]), truth.asymptote));
    }
    let (a, e) = (coverage(&assaf), coverage(&e0ns));
    let all: Vec<_> = assaf.into_iter().chain(e0ns).collect();
    let pooled = coverage(&all);
    ensure(
        a >= 0.8 && e >= 0.8,
        format!("95% coverage: ASSAF age effects and peaks {a:.3}, e0ns gain parameters {e:.3}, pooled {pooled:.3}"),
    )
}

// Root of e0 = 10 with every rate at exp(k) on the three-group toy grid,
// evaluated independently at 50 digits.
const TOY_ROOT: f64 = -2.302_585_092_994_045_684;

fn bisection() -> Outcome {
    let grid = AgeGrid::default();
    let history: Vec<Vec<f64>> = (0..8)
        .map(|t| {
            (0..grid.len())
                .map(|i| 0.0004 * (0.4 * i as f64).exp() * (-0.1 * t as f64 * (1.0 - i as f64 / 30.0)).exp())
                .collect()
        })
        .collect();
    let params = lee_carter_fit(&grid, &Period::estimation()[..8], &history).map_err(|e| e.to_string())?;
    let mut rng = stream_rng(7, &[]);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let target = rng.random_range(30.0..95.0);
        let (_, rates) = rates_for_target_e0(&params, target).map_err(|e| e.to_string())?;
        worst = worst.max((life_table_e0(&grid, &rates).unwrap() - target).abs());
    }
    let toy = AgeGrid::from_lower_bounds(&[0, 5, 10]).unwrap();
    let k = solve_index_for_e0(|k| Ok(e0_with_rule(&toy, &[k.exp(); 3], AxRule::Midpoint)?), 10.0, 0.0)
        .map_err(|e| e.to_string())?;
    ensure(
        worst < 1e-6 && (k - TOY_ROOT).abs() < 1e-8,
        format!("worst |e0 - target| {worst:.1e} over 10^3 targets; toy root error {:.1e}", (k - TOY_ROOT).abs()),
    )
}

fn gap_model() -> Outcome {
    let truth = GapCoefficients::default();
    let panel = simulate_gap_panel(&truth, 60, 13, &mut stream_rng(5, &[]));
    let fit = fit_gap_model(&panel, truth.hinge).map_err(|e| e.to_string())?;
    let se = fit.coefficients.std_errors.ok_or("no standard errors")?;
    let within = (0..6)
        .filter(|&i| (fit.coefficients.beta[i] - truth.beta[i]).abs() <= 2.0 * se[i])
        .count();

    // Male paths from 40 to 95 years with extreme ASAF gaps.
    let countries: Vec<String> = (0..20).map(|i| format!("C{i}")).collect();
    let male = TrajectorySet::from_fn(Sex::Male, countries.clone(), Period::forecast(), 200, |c, d| {
        (0..9).map(|p| 40.0 + 2.5 * c as f64 + 0.8 * p as f64 + 0.01 * d as f64).collect()
    });
    let history: BTreeMap<String, GapHistory> = countries
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let h = if i % 2 == 0 { 3.0 } else { -3.0 };
            (c.clone(), GapHistory { anchor: 45.0 + i as f64, last_gap: 0.5 * i as f64, asaf_gap: vec![h; 9] })
        })
        .collect();
    let gaps = forecast_gap(&truth, &male, &history, 9).map_err(|e| e.to_string())?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in 0..countries.len() {
        for p in 0..9 {
            for &g in gaps.cell(c, p) {
                lo = lo.min(g);
                hi = hi.max(g);
            }
        }
    }
    let bounded = lo >= 0.03 && hi <= 13.35;

    let b = truth.beta;
    let term = |e0: f64| truth.predictor(0.0, 0.0, e0, 0.0) - b[0] - b[3] * e0;
    let hinge_ok = (term(81.0) - b[4] * 20.0).abs() < 1e-12
        && (term(81.000_001) - b[4] * 20.0).abs() < 1e-12
        && (term(95.0) - b[4] * 20.0).abs() < 1e-12
        && (term(70.0) - b[4] * 9.0).abs() < 1e-12;
    ensure(
        within >= 5 && bounded && hinge_ok,
        format!("{within}/6 coefficients within 2 SE; forecast gaps in [{lo:.3}, {hi:.3}]; hinge frozen above 81: {hinge_ok}"),
    )
}

fn validation_metrics() -> Outcome {
    let cell = |observed: f64, median: f64, h: f64| IntervalCell {
        observed,
        median,
        lower80: median - h,
        upper80: median + h,
        lower95: median - 2.0 * h,
        upper95: median + 2.0 * h,
    };
    let errors = [cell(70.0, 71.0, 0.3), cell(72.0, 70.0, 0.4), cell(75.0, 78.0, 2.0), cell(80.0, 80.0, 0.5)];
    let mae = mean_absolute_error(&errors);
    let mut reordered = errors;
    reordered.reverse();
    for c in reordered.iter_mut() {
        c.median = 2.0 * c.observed - c.median;
    }
    let symmetric = mean_absolute_error(&reordered) == mae;
    let m = score_cells(&errors).map_err(|e| e.to_string())?;
    // Inside 80%: cell 4 only; inside 95%: cells 3 and 4. Halfwidths
    // (0.3, 0.4, 2.0, 0.5) have median 0.45.
    let ok = mae == 1.5
        && symmetric
        && m.coverage80 == 0.25
        && m.coverage95 == 0.5
        && (m.halfwidth80 - 0.45).abs() < 1e-12
        && (m.halfwidth95 - 0.9).abs() < 1e-12;
    let empty = score_cells(&[]).is_err();
    ensure(
        ok && empty,
        format!(
            "MAE {mae}, coverage 80/95 {}/{}, halfwidth 80/95 {:.2}/{:.2}, empty test set rejected: {empty}",
            m.coverage80, m.coverage95, m.halfwidth80, m.halfwidth95
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut tables = Vec::new();
    for name in ["first", "second"] {
        let dir = tmp.path().join(name);
        run_full_pipeline(&PipelineConfig::desk(&dir, 5, 2024)).map_err(|e| e.to_string())?;
        let read = |sex: &str| std::fs::read(dir.join(format!("quantiles_{sex}.csv"))).map_err(|e| e.to_string());
        tables.push((read("male")?, read("female")?));
    }
    let rows = tables[0].0.iter().filter(|b| **b == b'\n').count();
    ensure(tables[0] == tables[1], format!("two desk runs, {rows} male table lines, bitwise equal: {}", tables[0] == tables[1]))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("life-table oracle and identities", life_tables),
        ("non-smoking rate round trip", round_trip),
        ("double-logistic tails and gain asymptote", curve_tails),
        ("MCMC exactness", mcmc_exactness),
        ("Raftery-Lewis sanity", raftery_lewis_sanity),
        ("simulation-based recovery", recovery),
        ("e0-matching root finding", bisection),
        ("gap model", gap_model),
        ("validation metrics", validation_metrics),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(i + 1);
                ("FAIL", d)
            }
        };
        println!("{status} {:>2} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
