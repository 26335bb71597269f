//! Densities and samplers. Gamma is (shape, rate); inverse-Gamma is
//! (shape, scale), so their means are shape/rate and scale/(shape - 1).

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use super::McmcError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - cdf(x)`, accurate far into the tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn norm_isf(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

pub fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    -0.5 * z * z / variance - 0.5 * variance.ln() - LN_SQRT_2PI
}

/// Log probability that a standard normal lies in `[a, b]`.
pub fn ln_normal_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    let mass = if a > 0.0 {
        norm_sf(a) - norm_sf(b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    };
    if mass > 0.0 {
        mass.ln()
    } else {
        // Far-tail interval: bound from the density at the nearer endpoint.
        let near = if a > 0.0 { a } else { -b };
        -0.5 * near * near - LN_SQRT_2PI + (b - a).ln()
    }
}

/// Log density of N(mean, variance) truncated to `[lower, upper]`.
pub fn truncated_normal_ln_pdf(x: f64, mean: f64, variance: f64, lower: f64, upper: f64) -> f64 {
    if x < lower || x > upper {
        return f64::NEG_INFINITY;
    }
    let sd = variance.sqrt();
    normal_ln_pdf(x, mean, variance) - ln_normal_mass((lower - mean) / sd, (upper - mean) / sd)
}

pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_normal<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    mean + variance.sqrt() * sample_std_normal(rng)
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64, McmcError> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|_| McmcError::DegenerateStats(format!("gamma(shape {shape}, rate {rate})")))?;
    Ok(g.sample(rng))
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64, McmcError> {
    let g = Gamma::new(shape, 1.0)
        .map_err(|_| McmcError::DegenerateStats(format!("inverse-gamma(shape {shape}, scale {scale})")))?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(McmcError::DegenerateStats(format!("inverse-gamma scale {scale}")));
    }
    Ok(scale / g.sample(rng))
}

// Standardized truncated draw on [a, b] with a > TAIL: exponential or uniform
// rejection, whichever is efficient for the interval width.
fn tail_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a < 1.0 / a {
        loop {
            let x = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>().ln() <= 0.5 * (a * a - x * x) {
                return x;
            }
        }
    }
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / rate;
        if x > b {
            continue;
        }
        let d = x - rate;
        if rng.random::<f64>().ln() <= -0.5 * d * d {
            return x;
        }
    }
}

const TAIL: f64 = 7.0;

/// Draw from N(mean, variance) truncated to `[lower, upper]`; either bound may
/// be infinite.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    variance: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64, McmcError> {
    if lower.is_nan() || upper.is_nan() || lower >= upper {
        return Err(McmcError::EmptySupport { lower, upper });
    }
    if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
        return Err(McmcError::DegenerateStats(format!(
            "truncated normal mean {mean} variance {variance}"
        )));
    }
    let sd = variance.sqrt();
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = if a == f64::NEG_INFINITY && b == f64::INFINITY {
        sample_std_normal(rng)
    } else if a > TAIL {
        tail_draw(a, b, rng)
    } else if b < -TAIL {
        -tail_draw(-b, -a, rng)
    } else if a > 0.0 {
        let (sa, sb) = (norm_sf(a), norm_sf(b));
        let u: f64 = rng.random();
        norm_isf(sb + u * (sa - sb))
    } else {
        let (fa, fb) = (norm_cdf(a), norm_cdf(b));
        let u: f64 = rng.random();
        norm_quantile(fa + u * (fb - fa))
    };
    let x = mean + sd * z;
    Ok(if x.is_finite() { x.clamp(lower, upper) } else { 0.5 * (lower + upper) })
}

/// Mean of the truncated standard normal on `[a, b]`.
pub fn truncated_std_normal_mean(a: f64, b: f64) -> f64 {
    let pdf = |x: f64| {
        if x.is_infinite() {
            0.0
        } else {
            (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
        }
    };
    (pdf(a) - pdf(b)) / ln_normal_mass(a, b).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::stream_rng;

    #[test]
    fn unbounded_is_plain_normal() {
        let mut r1 = stream_rng(1, &[]);
        let mut r2 = stream_rng(1, &[]);
        let x = sample_truncated_normal(2.0, 4.0, f64::NEG_INFINITY, f64::INFINITY, &mut r1).unwrap();
        let y = 2.0 + 2.0 * sample_std_normal(&mut r2);
        assert_eq!(x, y);
    }

    #[test]
    fn half_normal_mean() {
        let mut rng = stream_rng(11, &[]);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_truncated_normal(0.0, 1.0, 0.0, f64::INFINITY, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - (2.0 / PI).sqrt()).abs() < 0.005, "{mean}");
    }

    #[test]
    fn sliver_and_far_tail() {
        let mut rng = stream_rng(3, &[]);
        for mean in [-50.0, 0.0, 5.00005, 80.0] {
            for _ in 0..200 {
                let x = sample_truncated_normal(mean, 1.0, 5.0, 5.0001, &mut rng).unwrap();
                assert!((5.0..=5.0001).contains(&x));
            }
        }
        let n = 100_000;
        let m = (0..n)
            .map(|_| sample_truncated_normal(0.0, 1.0, 10.0, f64::INFINITY, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let expected = truncated_std_normal_mean(10.0, f64::INFINITY);
        assert!((m - expected).abs() < 0.01, "{m} vs {expected}");
        let m = (0..n)
            .map(|_| sample_truncated_normal(0.0, 1.0, f64::NEG_INFINITY, -9.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((m + truncated_std_normal_mean(9.0, f64::INFINITY)).abs() < 0.01);
    }

    #[test]
    fn interval_moments() {
        let mut rng = stream_rng(5, &[]);
        let n = 200_000;
        let (lo, hi) = (-0.5, 2.0);
        let m = (0..n)
            .map(|_| sample_truncated_normal(1.0, 4.0, lo, hi, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let expected = 1.0 + 2.0 * truncated_std_normal_mean((lo - 1.0) / 2.0, (hi - 1.0) / 2.0);
        assert!((m - expected).abs() < 0.005, "{m} vs {expected}");
    }

    #[test]
    fn empty_support() {
        let mut rng = stream_rng(0, &[]);
        assert!(matches!(
            sample_truncated_normal(0.0, 1.0, 1.0, 1.0, &mut rng),
            Err(McmcError::EmptySupport { .. })
        ));
        assert!(matches!(
            sample_truncated_normal(0.0, 1.0, 2.0, 1.0, &mut rng),
            Err(McmcError::EmptySupport { .. })
        ));
    }

    #[test]
    fn gamma_and_inverse_gamma_means() {
        let mut rng = stream_rng(9, &[]);
        let n = 200_000;
        let g = (0..n).map(|_| sample_gamma(2.0, 4.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((g - 0.5).abs() < 0.005, "{g}");
        let ig = (0..n).map(|_| sample_inv_gamma(4.0, 3.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((ig - 1.0).abs() < 0.02, "{ig}");
    }

    #[test]
    fn log_densities_normalize() {
        let h = 1e-3;
        let grid = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
            let n = ((hi - lo) / h) as usize;
            (0..n).map(|i| f(lo + (i as f64 + 0.5) * h).exp() * h).sum::<f64>()
        };
        assert!((grid(&|x| gamma_ln_pdf(x, 2.0, 3.0), 0.0, 40.0) - 1.0).abs() < 1e-4);
        assert!((grid(&|x| inv_gamma_ln_pdf(x, 3.0, 1.0), 0.0, 200.0) - 1.0).abs() < 1e-3);
        assert!((grid(&|x| truncated_normal_ln_pdf(x, 2.0, 9.0, 0.0, 15.0), 0.0, 15.0) - 1.0).abs() < 1e-5);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
    }
}
