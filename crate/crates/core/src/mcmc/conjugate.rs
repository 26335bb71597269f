use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{sample_inv_gamma, sample_normal};
use super::McmcError;

/// Data summary for a normal mean with known observation variances:
/// total data precision and precision-weighted sum of observations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalMeanStats {
    pub precision: f64,
    pub weighted_sum: f64,
}

impl NormalMeanStats {
    /// `n` observations with sample mean `mean`, each with variance `variance`.
    pub fn from_sample(n: usize, mean: f64, variance: f64) -> Self {
        NormalMeanStats {
            precision: n as f64 / variance,
            weighted_sum: n as f64 * mean / variance,
        }
    }

    pub fn from_observations(obs: &[f64], variance: f64) -> Self {
        NormalMeanStats {
            precision: obs.len() as f64 / variance,
            weighted_sum: obs.iter().sum::<f64>() / variance,
        }
    }

    /// Regression through the origin, `y_i ~ N(x_i * b, variance)`.
    pub fn add_regression(&mut self, x: f64, y: f64, variance: f64) {
        self.precision += x * x / variance;
        self.weighted_sum += x * y / variance;
    }

    pub fn add(&mut self, y: f64, variance: f64) {
        self.add_regression(1.0, y, variance);
    }
}

/// Sum of squared deviations and their count for a variance update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VarianceStats {
    pub n: f64,
    pub sum_sq: f64,
}

impl VarianceStats {
    pub fn from_residuals(residuals: impl IntoIterator<Item = f64>) -> Self {
        residuals.into_iter().fold(VarianceStats::default(), |mut s, r| {
            s.n += 1.0;
            s.sum_sq += r * r;
            s
        })
    }

    pub fn push(&mut self, residual: f64) {
        self.n += 1.0;
        self.sum_sq += residual * residual;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConjugateKind {
    NormalMean { stats: NormalMeanStats, prior: NormalPrior },
    InvGammaVariance { stats: VarianceStats, prior: InvGammaPrior },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateDraw {
    pub value: f64,
    /// No data contributed; the value is a prior draw.
    pub prior_only: bool,
}

pub fn normal_mean_posterior(stats: NormalMeanStats, prior: NormalPrior) -> (f64, f64) {
    let precision = 1.0 / prior.variance + stats.precision;
    let mean = (prior.mean / prior.variance + stats.weighted_sum) / precision;
    (mean, 1.0 / precision)
}

pub fn inv_gamma_posterior(stats: VarianceStats, prior: InvGammaPrior) -> (f64, f64) {
    (prior.shape + stats.n / 2.0, prior.scale + stats.sum_sq / 2.0)
}

pub fn conjugate_update<R: Rng + ?Sized>(kind: ConjugateKind, rng: &mut R) -> Result<ConjugateDraw, McmcError> {
    match kind {
        ConjugateKind::NormalMean { stats, prior } => {
            if !(stats.precision >= 0.0 && stats.precision.is_finite() && stats.weighted_sum.is_finite()) {
                return Err(McmcError::DegenerateStats(format!("normal mean stats {stats:?}")));
            }
            if !(prior.variance > 0.0) {
                return Err(McmcError::DegenerateStats(format!("prior variance {}", prior.variance)));
            }
            let (mean, var) = normal_mean_posterior(stats, prior);
            Ok(ConjugateDraw {
                value: sample_normal(mean, var, rng),
                prior_only: stats.precision == 0.0,
            })
        }
        ConjugateKind::InvGammaVariance { stats, prior } => {
            if !(stats.n >= 0.0 && stats.sum_sq >= 0.0 && stats.sum_sq.is_finite()) {
                return Err(McmcError::DegenerateStats(format!("variance stats {stats:?}")));
            }
            let (shape, scale) = inv_gamma_posterior(stats, prior);
            Ok(ConjugateDraw {
                value: sample_inv_gamma(shape, scale, rng)?,
                prior_only: stats.n == 0.0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::stream_rng;

    #[test]
    fn flat_prior_limit() {
        let stats = NormalMeanStats::from_sample(100, 3.0, 1.0);
        let (m, v) = normal_mean_posterior(stats, NormalPrior { mean: 0.0, variance: 1e6 });
        assert!((m - 3.0).abs() < 1e-5);
        assert!((v - 0.01).abs() < 1e-7);
    }

    #[test]
    fn hand_computed_posterior() {
        let stats = NormalMeanStats::from_sample(4, 2.0, 1.0);
        let (m, v) = normal_mean_posterior(stats, NormalPrior { mean: 1.0, variance: 5.0 });
        assert!((m - 1.952_380_952_380_952_4).abs() < 1e-14);
        assert!((v - 0.238_095_238_095_238_1).abs() < 1e-14);
    }

    #[test]
    fn no_data_is_a_prior_draw() {
        let mut rng = stream_rng(2, &[]);
        let prior = InvGammaPrior { shape: 2.0, scale: 0.01 };
        let mut draws: Vec<f64> = (0..20_000)
            .map(|_| {
                let d = conjugate_update(
                    ConjugateKind::InvGammaVariance { stats: VarianceStats::default(), prior },
                    &mut rng,
                )
                .unwrap();
                assert!(d.prior_only);
                d.value
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        // IG(2, s) median is s / Gamma(2,1) median (1.678346990016661).
        let median = draws[draws.len() / 2];
        assert!((median - 0.01 / 1.678_346_990_016_661).abs() < 3e-4, "{median}");
    }

    #[test]
    fn inverse_gamma_update_shape() {
        let stats = VarianceStats::from_residuals([1.0, -2.0, 0.5]);
        let (shape, scale) = inv_gamma_posterior(stats, InvGammaPrior { shape: 2.0, scale: 1.0 });
        assert_eq!(shape, 3.5);
        assert_eq!(scale, 1.0 + 5.25 / 2.0);
    }

    #[test]
    fn negative_precision_rejected() {
        let mut rng = stream_rng(2, &[]);
        let kind = ConjugateKind::NormalMean {
            stats: NormalMeanStats { precision: -1.0, weighted_sum: 0.0 },
            prior: NormalPrior { mean: 0.0, variance: 1.0 },
        };
        assert!(matches!(conjugate_update(kind, &mut rng), Err(McmcError::DegenerateStats(_))));
    }
}
