//! From forecast non-smoking life expectancy back to age-specific rates,
//! then to all-cause life expectancy with smoking mortality re-added.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assaf::AssafForecast;
use crate::data::{harmonize_assaf_ages, AgeGrid, AssafSurface, DataError, MortalitySurface, Period, Sex, ASSAF_AGES};
use crate::lifetable::{allcause_from_nonsmoking, life_table_e0, nonsmoking_rates, LifeTableError};
use crate::trajectory::{TrajectoryError, TrajectorySet};

/// Floor applied to rates before taking logs.
pub const RATE_FLOOR: f64 = 1e-6;
/// Required accuracy of the life expectancy matched by the index solver.
pub const E0_TOLERANCE: f64 = 1e-6;
const INDEX_LIMIT: f64 = 200.0;
const MIN_PERIODS: usize = 5;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("{found} historical periods, at least 5 required")]
    TooFewPeriods { found: usize },
    #[error("centered log-rate matrix has no time variation")]
    RankDeficient,
    #[error("target e0 {0} outside [20, 110]")]
    TargetOutOfRange(f64),
    #[error("no index in [-200, 200] reaches e0 {target}")]
    BracketFailure { target: f64 },
    #[error("{0}: no Lee-Carter parameters")]
    MissingCountry(String),
    #[error("{e0ns} e0ns draws but {assaf} ASSAF draws")]
    DrawMismatch { e0ns: usize, assaf: usize },
    #[error("period {0} missing from ASSAF forecast")]
    MissingPeriod(i32),
    #[error(transparent)]
    LifeTable(#[from] LifeTableError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// How age responses are shared across countries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coherence {
    None,
    #[default]
    SharedBx,
}

/// Log rates modelled as `ax + bx * kt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeeCarterParams {
    pub grid: AgeGrid,
    /// Mean log rate by age.
    pub ax: Vec<f64>,
    /// Age response, summing to one.
    pub bx: Vec<f64>,
    /// Period index, summing to zero over the fitted periods.
    pub kt: Vec<f64>,
    pub periods: Vec<Period>,
    /// Largest absolute difference between fitted and observed log rates.
    pub max_log_error: f64,
    /// Number of rates raised to the floor before fitting.
    pub floored: usize,
}

impl LeeCarterParams {
    pub fn rates(&self, k: f64) -> Vec<f64> {
        self.ax.iter().zip(&self.bx).map(|(a, b)| (a + b * k).exp()).collect()
    }

    pub fn last_index(&self) -> f64 {
        *self.kt.last().expect("fitted periods")
    }

    fn log_matrix(&self, history: &[Vec<f64>]) -> Vec<Vec<f64>> {
        history.iter().map(|r| r.iter().map(|m| m.max(RATE_FLOOR).ln()).collect()).collect()
    }

    /// Refits the period index with a fixed age response, by least squares.
    fn with_age_response(mut self, bx: Vec<f64>, history: &[Vec<f64>]) -> Self {
        let logs = self.log_matrix(history);
        let bb: f64 = bx.iter().map(|b| b * b).sum();
        self.kt = logs
            .iter()
            .map(|row| row.iter().zip(&self.ax).zip(&bx).map(|((l, a), b)| b * (l - a)).sum::<f64>() / bb)
            .collect();
        self.bx = bx;
        self.max_log_error = max_error(&logs, &self.ax, &self.bx, &self.kt);
        self
    }
}

fn max_error(logs: &[Vec<f64>], ax: &[f64], bx: &[f64], kt: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (row, k) in logs.iter().zip(kt) {
        for ((l, a), b) in row.iter().zip(ax).zip(bx) {
            worst = worst.max((l - a - b * k).abs());
        }
    }
    worst
}

/// Fits one country's history: one rate vector per period, in period order.
pub fn lee_carter_fit(grid: &AgeGrid, periods: &[Period], history: &[Vec<f64>]) -> Result<LeeCarterParams, ReconstructError> {
    if history.len() < MIN_PERIODS {
        return Err(ReconstructError::TooFewPeriods { found: history.len() });
    }
    let n_ages = grid.len();
    let floored = history.iter().flatten().filter(|&&m| m < RATE_FLOOR).count();
    let logs: Vec<Vec<f64>> = history.iter().map(|r| r.iter().map(|m| m.max(RATE_FLOOR).ln()).collect()).collect();
    let n_t = logs.len() as f64;
    let ax: Vec<f64> = (0..n_ages).map(|x| logs.iter().map(|r| r[x]).sum::<f64>() / n_t).collect();
    let centered = DMatrix::from_fn(n_ages, logs.len(), |x, t| logs[t][x] - ax[x]);
    let scale = centered.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let svd = centered.svd(true, true);
    let (i, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    if !(s > 1e-10 * scale.max(1.0)) || scale == 0.0 {
        return Err(ReconstructError::RankDeficient);
    }
    let u = svd.u.as_ref().expect("requested").column(i);
    let v = svd.v_t.as_ref().expect("requested").row(i);
    let sum_u: f64 = u.iter().sum();
    if sum_u.abs() < 1e-12 {
        return Err(ReconstructError::RankDeficient);
    }
    let bx: Vec<f64> = u.iter().map(|b| b / sum_u).collect();
    let kt: Vec<f64> = v.iter().map(|k| k * s * sum_u).collect();
    let max_log_error = max_error(&logs, &ax, &bx, &kt);
    Ok(LeeCarterParams {
        grid: grid.clone(),
        ax,
        bx,
        kt,
        periods: periods.to_vec(),
        max_log_error,
        floored,
    })
}

/// Historical non-smoking rates of one country: all-cause rates with the
/// attributable share removed, for periods present in both surfaces.
pub fn nonsmoking_history(
    mortality: &MortalitySurface,
    assaf: &AssafSurface,
    country: &str,
    sex: Sex,
) -> Result<(Vec<Period>, Vec<Vec<f64>>), ReconstructError> {
    let mut periods = Vec::new();
    let mut rows = Vec::new();
    for p in mortality.periods(country, sex) {
        if let (Some(d), Some(y)) = (mortality.slice(country, sex, p), assaf.slice(country, sex, p)) {
            periods.push(p);
            rows.push(nonsmoking_rates(d, y)?);
        }
    }
    Ok((periods, rows))
}

/// Lee-Carter fits for every country of `sex`, optionally with a common age
/// response (the renormalized average of the country responses).
pub fn lee_carter_panel(
    mortality: &MortalitySurface,
    assaf: &AssafSurface,
    sex: Sex,
    coherence: Coherence,
) -> Result<BTreeMap<String, LeeCarterParams>, ReconstructError> {
    let grid = mortality.grid();
    let mut histories = BTreeMap::new();
    let mut fits = BTreeMap::new();
    for country in mortality.countries() {
        let (periods, rows) = nonsmoking_history(mortality, assaf, &country, sex)?;
        if periods.is_empty() {
            continue;
        }
        fits.insert(country.clone(), lee_carter_fit(grid, &periods, &rows)?);
        histories.insert(country, rows);
    }
    if coherence == Coherence::None || fits.is_empty() {
        return Ok(fits);
    }
    let mut shared = vec![0.0; grid.len()];
    for f in fits.values() {
        for (s, b) in shared.iter_mut().zip(&f.bx) {
            *s += b;
        }
    }
    let total: f64 = shared.iter().sum();
    shared.iter_mut().for_each(|s| *s /= total);
    Ok(fits
        .into_iter()
        .map(|(c, f)| {
            let f = f.with_age_response(shared.clone(), &histories[&c]);
            (c, f)
        })
        .collect())
}

/// Root of `e0_of(k) = target` by the Illinois variant of regula falsi,
/// expanding the bracket around `start` up to `[-200, 200]`.
pub fn solve_index_for_e0(
    mut e0_of: impl FnMut(f64) -> Result<f64, ReconstructError>,
    target: f64,
    start: f64,
) -> Result<f64, ReconstructError> {
    let fail = || ReconstructError::BracketFailure { target };
    let mut f = |k: f64| e0_of(k).map(|e| e - target);
    let start = start.clamp(-INDEX_LIMIT, INDEX_LIMIT);
    let f0 = f(start)?;
    if f0.abs() < E0_TOLERANCE * 0.1 {
        return Ok(start);
    }
    // Expand outwards from the start until the sign changes.
    let (mut a, mut fa, mut b, mut fb) = (start, f0, start, f0);
    let mut width = 1.0;
    loop {
        let lo = (start - width).max(-INDEX_LIMIT);
        let hi = (start + width).min(INDEX_LIMIT);
        let flo = f(lo)?;
        if flo.signum() != f0.signum() {
            (a, fa) = (lo, flo);
            break;
        }
        let fhi = f(hi)?;
        if fhi.signum() != f0.signum() {
            (b, fb) = (hi, fhi);
            break;
        }
        if lo == -INDEX_LIMIT && hi == INDEX_LIMIT {
            return Err(fail());
        }
        width *= 2.0;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = if fb != fa { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c)?;
        if fc.abs() < E0_TOLERANCE * 0.1 || (b - a).abs() < 1e-13 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            (b, fb) = (c, fc);
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            (a, fa) = (c, fc);
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(fail())
}

/// Rates on the fitted age pattern whose life expectancy equals `target`,
/// and the index that produces them.
pub fn rates_for_target_e0(params: &LeeCarterParams, target: f64) -> Result<(f64, Vec<f64>), ReconstructError> {
    rates_for_target_from(params, target, params.last_index())
}

fn rates_for_target_from(params: &LeeCarterParams, target: f64, start: f64) -> Result<(f64, Vec<f64>), ReconstructError> {
    if !(20.0..=110.0).contains(&target) {
        return Err(ReconstructError::TargetOutOfRange(target));
    }
    let k = solve_index_for_e0(|k| Ok(life_table_e0(&params.grid, &params.rates(k))?), target, start)?;
    Ok((k, params.rates(k)))
}

/// Core ASSAF values spread onto `grid`: zero below 40, the 80-84 value
/// carried upward.
fn spread(core: &[f64; 9], grid: &AgeGrid) -> Result<Vec<f64>, ReconstructError> {
    let raw: BTreeMap<u32, f64> = ASSAF_AGES.iter().copied().zip(core.iter().copied()).collect();
    Ok(harmonize_assaf_ages(&raw, grid)?)
}

/// All-cause life expectancy paired draw by draw with the non-smoking
/// trajectories and the ASSAF forecast.
///
/// Draw `i` of the result uses draw `i` of both inputs.
pub fn reconstruct_male_e0(
    e0ns: &TrajectorySet,
    assaf: &AssafForecast,
    params: &BTreeMap<String, LeeCarterParams>,
) -> Result<TrajectorySet, ReconstructError> {
    if e0ns.n_draws() != assaf.n_draws() {
        return Err(ReconstructError::DrawMismatch {
            e0ns: e0ns.n_draws(),
            assaf: assaf.n_draws(),
        });
    }
    let period_idx: Vec<usize> = e0ns
        .periods
        .iter()
        .map(|p| {
            assaf
                .periods
                .iter()
                .position(|q| q == p)
                .ok_or(ReconstructError::MissingPeriod(p.start_year()))
        })
        .collect::<Result<_, _>>()?;
    let per_country: Vec<Vec<Vec<f64>>> = e0ns
        .countries
        .par_iter()
        .enumerate()
        .map(|(ci, name)| {
            let lc = params.get(name).ok_or_else(|| ReconstructError::MissingCountry(name.clone()))?;
            let ai = assaf
                .countries
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| ReconstructError::MissingCountry(name.clone()))?;
            (0..e0ns.n_draws())
                .map(|d| {
                    let mut k = lc.last_index();
                    period_idx
                        .iter()
                        .enumerate()
                        .map(|(pi, &api)| {
                            let (k_new, dns) = rates_for_target_from(lc, e0ns.get(ci, pi, d), k)?;
                            k = k_new;
                            let y = spread(assaf.get(d, ai, api), &lc.grid)?;
                            Ok(life_table_e0(&lc.grid, &allcause_from_nonsmoking(&dns, &y)?)?)
                        })
                        .collect::<Result<Vec<f64>, ReconstructError>>()
                })
                .collect()
        })
        .collect::<Result<_, ReconstructError>>()?;
    Ok(TrajectorySet::from_fn(
        Sex::Male,
        e0ns.countries.clone(),
        e0ns.periods.clone(),
        e0ns.n_draws(),
        |c, d| per_country[c][d].clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifetable::{e0_with_rule, AxRule};
    use proptest::prelude::*;

    fn rank_one(grid: &AgeGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let n = grid.len();
        let ax: Vec<f64> = (0..n).map(|i| -9.0 + 0.35 * i as f64).collect();
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin().abs()).collect();
        let total: f64 = raw.iter().sum();
        let bx: Vec<f64> = raw.iter().map(|b| b / total).collect();
        let kt: Vec<f64> = (0..8).map(|t| 3.0 - 6.0 * t as f64 / 7.0).collect();
        let history = kt
            .iter()
            .map(|k| ax.iter().zip(&bx).map(|(a, b)| (a + b * k).exp()).collect())
            .collect();
        (ax, bx, kt, history)
    }

    #[test]
    fn recovers_rank_one_surface() {
        let grid = AgeGrid::default();
        let (ax, bx, kt, history) = rank_one(&grid);
        let periods = Period::estimation()[..8].to_vec();
        let f = lee_carter_fit(&grid, &periods, &history).unwrap();
        assert!((f.bx.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(f.kt.iter().sum::<f64>().abs() < 1e-10);
        for (x, y) in f.ax.iter().zip(&ax) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in f.bx.iter().zip(&bx) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in f.kt.iter().zip(&kt) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(f.max_log_error < 1e-10);
    }

    #[test]
    fn constant_rates_are_rank_deficient() {
        let grid = AgeGrid::default();
        let row: Vec<f64> = (0..grid.len()).map(|i| 0.001 * (1.0 + i as f64)).collect();
        let history = vec![row; 6];
        let periods = Period::estimation()[..6].to_vec();
        assert!(matches!(lee_carter_fit(&grid, &periods, &history), Err(ReconstructError::RankDeficient)));
        assert!(matches!(
            lee_carter_fit(&grid, &periods[..4], &history[..4]),
            Err(ReconstructError::TooFewPeriods { found: 4 })
        ));
    }

    #[test]
    fn jumpoff_target_is_a_fixed_point() {
        let grid = AgeGrid::default();
        let (_, _, _, history) = rank_one(&grid);
        let f = lee_carter_fit(&grid, &Period::estimation()[..8], &history).unwrap();
        let last = life_table_e0(&grid, history.last().unwrap()).unwrap();
        let (k, rates) = rates_for_target_e0(&f, last).unwrap();
        assert!((k - f.last_index()).abs() < 1e-6);
        for (a, b) in rates.iter().zip(history.last().unwrap()) {
            assert!((a / b - 1.0).abs() < 1e-6);
        }
        let (_, up) = rates_for_target_e0(&f, last + 5.0).unwrap();
        assert!((life_table_e0(&grid, &up).unwrap() - last - 5.0).abs() < E0_TOLERANCE);
        assert!(matches!(rates_for_target_e0(&f, 120.0), Err(ReconstructError::TargetOutOfRange(_))));
    }

    #[test]
    fn toy_root_matches_oracle() {
        // Three groups 0, 5, 10+, all at rate exp(k), mid-interval deaths.
        // Root of e0 = 10 evaluated independently at 50 digits.
        let grid = AgeGrid::from_lower_bounds(&[0, 5, 10]).unwrap();
        let k = solve_index_for_e0(|k| Ok(e0_with_rule(&grid, &[k.exp(); 3], AxRule::Midpoint)?), 10.0, 0.0).unwrap();
        assert!((k - TOY_ROOT).abs() < 1e-8, "{k}");
    }

    fn panel() -> BTreeMap<String, LeeCarterParams> {
        let grid = AgeGrid::default();
        let (_, _, _, history) = rank_one(&grid);
        let f = lee_carter_fit(&grid, &Period::estimation()[..8], &history).unwrap();
        BTreeMap::from([("A".to_string(), f)])
    }

    fn e0ns_draws(n: usize) -> TrajectorySet {
        TrajectorySet::from_fn(Sex::Male, vec!["A".into()], Period::forecast(), n, |_, d| {
            (0..9).map(|p| 70.0 + 0.8 * p as f64 + 0.3 * d as f64).collect()
        })
    }

    fn assaf(n: usize, f: impl Fn(usize, usize) -> f64) -> AssafForecast {
        AssafForecast::from_fn(Sex::Male, vec!["A".into()], Period::forecast(), (0..n).collect(), |d, _, p| [f(d, p); 9])
    }

    #[test]
    fn no_smoking_round_trips() {
        let e0ns = e0ns_draws(4);
        let out = reconstruct_male_e0(&e0ns, &assaf(4, |_, _| 0.0), &panel()).unwrap();
        for p in 0..9 {
            for d in 0..4 {
                assert!((out.get(0, p, d) - e0ns.get(0, p, d)).abs() < E0_TOLERANCE);
            }
        }
    }

    #[test]
    fn smoking_lowers_e0_and_fades_with_it() {
        let e0ns = e0ns_draws(4);
        // Attribution shrinking to zero over the horizon.
        let out = reconstruct_male_e0(&e0ns, &assaf(4, |d, p| (0.3 + 0.02 * d as f64) * (8 - p) as f64 / 8.0), &panel()).unwrap();
        for d in 0..4 {
            for p in 0..8 {
                assert!(out.get(0, p, d) < e0ns.get(0, p, d));
            }
            assert!((out.get(0, 8, d) - e0ns.get(0, 8, d)).abs() < E0_TOLERANCE);
            let gaps: Vec<f64> = (0..9).map(|p| e0ns.get(0, p, d) - out.get(0, p, d)).collect();
            assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn unpaired_draws_are_rejected() {
        assert!(matches!(
            reconstruct_male_e0(&e0ns_draws(3), &assaf(4, |_, _| 0.0), &panel()),
            Err(ReconstructError::DrawMismatch { .. })
        ));
    }

    const TOY_ROOT: f64 = -2.302_585_092_994_045_684;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn solver_meets_tolerance(target in 25.0f64..95.0) {
            let grid = AgeGrid::default();
            let (_, _, _, history) = rank_one(&grid);
            let f = lee_carter_fit(&grid, &Period::estimation()[..8], &history).unwrap();
            let (_, rates) = rates_for_target_e0(&f, target).unwrap();
            prop_assert!((life_table_e0(&grid, &rates).unwrap() - target).abs() < E0_TOLERANCE);
        }
    }
}
