//! Abridged period life tables, removal and re-addition of smoking-attributable
//! mortality, and all-age aggregation of attributable fractions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AgeGrid, AssafSurface, E0Series, MortalitySurface, Period, Sex};

/// Life table radix.
pub const RADIX: f64 = 100_000.0;

/// Largest attributable fraction accepted when re-adding smoking mortality.
pub const MAX_ATTRIBUTION: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LifeTableError {
    #[error("rate vector has {got} entries, grid has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("open age group has rate {0}; it must be positive")]
    OpenGroupZeroRate(f64),
    #[error("rate {value} at position {index} is not a finite nonnegative number")]
    NonFiniteRate { index: usize, value: f64 },
    #[error("attributable fraction {value} at position {index} reaches 1")]
    AttributionAtUnity { index: usize, value: f64 },
    #[error("attributable fraction {value} at position {index} outside [0, 1)")]
    InvalidFraction { index: usize, value: f64 },
    #[error("total mortality is zero")]
    ZeroTotalMortality,
    #[error("{country} {sex} {period}: no matching {what} slice")]
    PeriodMismatch {
        country: String,
        sex: Sex,
        period: Period,
        what: &'static str,
    },
}

/// How the average years lived in the interval by those dying (a_x) is set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "sex")]
pub enum AxRule {
    /// a_x = n/2 for every closed group.
    Midpoint,
    /// Coale-Demeny West formulas for the 0 and 1-4 groups (when the grid
    /// starts 0, 1, 5), n/2 elsewhere.
    CoaleDemeny(Sex),
    /// Male Coale-Demeny coefficients, applied regardless of the population's sex.
    #[default]
    CoaleDemenyDefault,
}

impl AxRule {
    fn values(self, grid: &AgeGrid, rates: &[f64]) -> Vec<f64> {
        let mut ax: Vec<f64> = grid
            .iter()
            .map(|g| g.width.map(|w| w as f64 / 2.0).unwrap_or(0.0))
            .collect();
        let sex = match self {
            AxRule::Midpoint => return ax,
            AxRule::CoaleDemeny(s) => s,
            AxRule::CoaleDemenyDefault => Sex::Male,
        };
        let groups = grid.groups();
        let infant = groups.len() > 2
            && groups[0].lower == 0
            && groups[0].width == Some(1)
            && groups[1].width == Some(4);
        if infant {
            let m0 = rates[0];
            let (a0, a1) = match (sex, m0 >= 0.107) {
                (Sex::Male, true) => (0.330, 1.352),
                (Sex::Male, false) => (0.045 + 2.684 * m0, 1.651 - 2.816 * m0),
                (Sex::Female, true) => (0.350, 1.361),
                (Sex::Female, false) => (0.053 + 2.800 * m0, 1.522 - 1.518 * m0),
            };
            ax[0] = a0;
            ax[1] = a1;
        }
        ax
    }
}

/// Full period life table; columns are indexed like the age grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifeTable {
    pub ages: Vec<u32>,
    pub mx: Vec<f64>,
    pub ax: Vec<f64>,
    pub qx: Vec<f64>,
    pub lx: Vec<f64>,
    pub dx: Vec<f64>,
    #[serde(rename = "Lx")]
    pub big_lx: Vec<f64>,
    #[serde(rename = "Tx")]
    pub tx: Vec<f64>,
    pub ex: Vec<f64>,
}

impl LifeTable {
    pub fn e0(&self) -> f64 {
        self.ex[0]
    }
}

fn check_rates(grid: &AgeGrid, rates: &[f64]) -> Result<(), LifeTableError> {
    if rates.len() != grid.len() {
        return Err(LifeTableError::ShapeMismatch {
            expected: grid.len(),
            got: rates.len(),
        });
    }
    if let Some((index, &value)) = rates
        .iter()
        .enumerate()
        .find(|(_, m)| !m.is_finite() || **m < 0.0)
    {
        return Err(LifeTableError::NonFiniteRate { index, value });
    }
    let open = rates[rates.len() - 1];
    if open <= 0.0 {
        return Err(LifeTableError::OpenGroupZeroRate(open));
    }
    Ok(())
}

/// Builds the full life table from central death rates.
pub fn life_table(grid: &AgeGrid, rates: &[f64], rule: AxRule) -> Result<LifeTable, LifeTableError> {
    check_rates(grid, rates)?;
    let n = grid.len();
    let ax = rule.values(grid, rates);
    let mut qx = vec![0.0; n];
    let mut lx = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut big_lx = vec![0.0; n];
    let mut l = RADIX;
    for (i, g) in grid.iter().enumerate() {
        lx[i] = l;
        let m = rates[i];
        match g.width {
            Some(w) => {
                let w = w as f64;
                let q = (w * m / (1.0 + (w - ax[i]) * m)).min(1.0);
                let d = l * q;
                qx[i] = q;
                dx[i] = d;
                big_lx[i] = w * (l - d) + ax[i] * d;
                l -= d;
            }
            None => {
                qx[i] = 1.0;
                dx[i] = l;
                big_lx[i] = l / m;
            }
        }
    }
    let mut tx = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += big_lx[i];
        tx[i] = acc;
    }
    let ex = tx
        .iter()
        .zip(&lx)
        .map(|(&t, &l)| if l > 0.0 { t / l } else { 0.0 })
        .collect();
    Ok(LifeTable {
        ages: grid.lower_bounds(),
        mx: rates.to_vec(),
        ax,
        qx,
        lx,
        dx,
        big_lx,
        tx,
        ex,
    })
}

/// Life expectancy at birth under the default a_x convention.
pub fn life_table_e0(grid: &AgeGrid, rates: &[f64]) -> Result<f64, LifeTableError> {
    e0_with_rule(grid, rates, AxRule::default())
}

/// Life expectancy at birth without materializing the table.
pub fn e0_with_rule(grid: &AgeGrid, rates: &[f64], rule: AxRule) -> Result<f64, LifeTableError> {
    check_rates(grid, rates)?;
    let ax = rule.values(grid, rates);
    let mut l = 1.0;
    let mut total = 0.0;
    for (i, g) in grid.iter().enumerate() {
        let m = rates[i];
        match g.width {
            Some(w) => {
                let w = w as f64;
                let q = (w * m / (1.0 + (w - ax[i]) * m)).min(1.0);
                let d = l * q;
                total += w * (l - d) + ax[i] * d;
                l -= d;
            }
            None => total += l / m,
        }
    }
    Ok(total)
}

fn check_fractions(y: &[f64]) -> Result<(), LifeTableError> {
    match y.iter().enumerate().find(|(_, v)| !(0.0..1.0).contains(*v)) {
        Some((index, &value)) if value >= 1.0 => Err(LifeTableError::AttributionAtUnity { index, value }),
        Some((index, &value)) => Err(LifeTableError::InvalidFraction { index, value }),
        None => Ok(()),
    }
}

/// Non-smoking rates `(1 - y) * d`.
pub fn nonsmoking_rates(d: &[f64], y: &[f64]) -> Result<Vec<f64>, LifeTableError> {
    if d.len() != y.len() {
        return Err(LifeTableError::ShapeMismatch {
            expected: d.len(),
            got: y.len(),
        });
    }
    check_fractions(y)?;
    Ok(d.iter().zip(y).map(|(d, y)| (1.0 - y) * d).collect())
}

/// All-cause rates `d_ns / (1 - y)`, the inverse of [`nonsmoking_rates`].
pub fn allcause_from_nonsmoking(dns: &[f64], y: &[f64]) -> Result<Vec<f64>, LifeTableError> {
    if dns.len() != y.len() {
        return Err(LifeTableError::ShapeMismatch {
            expected: dns.len(),
            got: y.len(),
        });
    }
    check_fractions(y)?;
    Ok(dns.iter().zip(y).map(|(d, y)| d / (1.0 - y)).collect())
}

/// Clamps forecast fractions into `[0, MAX_ATTRIBUTION]`.
pub fn clamp_attribution(y: &mut [f64]) {
    for v in y {
        *v = v.clamp(0.0, MAX_ATTRIBUTION);
    }
}

/// All-age attributable fraction: ASSAF averaged with mortality-rate weights.
pub fn asaf_from_assaf(y: &[f64], m: &[f64]) -> Result<f64, LifeTableError> {
    if y.len() != m.len() {
        return Err(LifeTableError::ShapeMismatch {
            expected: m.len(),
            got: y.len(),
        });
    }
    let total: f64 = m.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(LifeTableError::ZeroTotalMortality);
    }
    Ok(y.iter().zip(m).map(|(y, m)| y * m).sum::<f64>() / total)
}

/// Non-smoking life expectancy for every period of `mortality` with a
/// matching ASSAF slice, for one country and sex.
pub fn e0ns_for_slice(
    mortality: &MortalitySurface,
    assaf: &AssafSurface,
    country: &str,
    sex: Sex,
) -> Result<Vec<(Period, f64)>, LifeTableError> {
    let grid = mortality.grid();
    mortality
        .periods(country, sex)
        .into_iter()
        .map(|p| {
            let d = mortality.slice(country, sex, p).expect("listed period");
            let y = assaf
                .slice(country, sex, p)
                .ok_or_else(|| LifeTableError::PeriodMismatch {
                    country: country.to_string(),
                    sex,
                    period: p,
                    what: "ASSAF",
                })?;
            let dns = nonsmoking_rates(d, y)?;
            Ok((p, life_table_e0(grid, &dns)?))
        })
        .collect()
}

/// Non-smoking e0 for every country/sex/period of the mortality surface.
pub fn e0ns_series(mortality: &MortalitySurface, assaf: &AssafSurface) -> Result<E0Series, LifeTableError> {
    let mut out = E0Series::new();
    for sex in mortality.sexes() {
        for country in mortality.countries() {
            for (p, e) in e0ns_for_slice(mortality, assaf, &country, sex)? {
                out.insert(&country, sex, p, e);
            }
        }
    }
    Ok(out)
}
