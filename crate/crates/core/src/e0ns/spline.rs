use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::E0nsError;
use crate::stats;

/// Positivity floor of the fitted standard-deviation multiplier.
pub const SPLINE_FLOOR: f64 = 0.01;
const DEGREE: usize = 3;
const MIN_PAIRS: usize = 20;
const MIN_SPAN: f64 = 10.0;

/// Cubic regression spline of absolute residuals on the level, used as the
/// level-dependent noise multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSpline {
    /// Knots at equally spaced quantiles, boundaries included.
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Evaluation is clamped into `[lower, clamp]`.
    pub lower: f64,
    pub clamp: f64,
}

// Full knot vector: boundary knots repeated DEGREE + 1 times.
fn knot_vector(knots: &[f64]) -> Vec<f64> {
    let mut t = vec![knots[0]; DEGREE];
    t.extend_from_slice(knots);
    t.extend(std::iter::repeat_n(knots[knots.len() - 1], DEGREE));
    t
}

/// B-spline basis values at `x` (Cox-de Boor), for `x` inside the boundary knots.
fn basis(t: &[f64], x: f64) -> Vec<f64> {
    let n = t.len() - DEGREE - 1;
    let last = t[t.len() - 1];
    let mut b: Vec<f64> = (0..t.len() - 1)
        .map(|i| {
            let inside = t[i] <= x && x < t[i + 1];
            // Close the final non-empty interval on the right.
            let at_end = x == last && t[i] < t[i + 1] && t[i + 1] == last;
            (inside || at_end) as u8 as f64
        })
        .collect();
    for k in 1..=DEGREE {
        for i in 0..t.len() - 1 - k {
            let left = if t[i + k] > t[i] {
                (x - t[i]) / (t[i + k] - t[i]) * b[i]
            } else {
                0.0
            };
            let right = if t[i + k + 1] > t[i + 1] {
                (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(n);
    b
}

impl VarianceSpline {
    /// Multiplier at level `e`, clamped to the fitted range and floored.
    pub fn eval(&self, e: f64) -> f64 {
        let x = e.clamp(self.lower, self.clamp);
        let t = knot_vector(&self.knots);
        let v: f64 = basis(&t, x).iter().zip(&self.coefficients).map(|(b, c)| b * c).sum();
        v.max(SPLINE_FLOOR)
    }

    /// Knots and coefficients as two-column CSV sections.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,index,value")?;
        for (i, k) in self.knots.iter().enumerate() {
            writeln!(w, "knot,{i},{k}")?;
        }
        for (i, c) in self.coefficients.iter().enumerate() {
            writeln!(w, "coefficient,{i},{c}")?;
        }
        writeln!(w, "clamp,0,{}", self.clamp)?;
        writeln!(w, "lower,0,{}", self.lower)
    }
}

/// Least-squares cubic spline through `(level, |residual|)` pairs with
/// `n_knots` knots at equally spaced quantiles of the level.
pub fn fit_variance_spline(pairs: &[(f64, f64)], n_knots: usize) -> Result<VarianceSpline, E0nsError> {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if pairs.len() < MIN_PAIRS || !(hi - lo > MIN_SPAN) {
        return Err(E0nsError::InsufficientSpread {
            pairs: pairs.len(),
            span: if pairs.is_empty() { 0.0 } else { hi - lo },
        });
    }
    let n_knots = n_knots.max(2);
    let mut knots = stats::quantiles(&xs, &(0..n_knots).map(|i| i as f64 / (n_knots - 1) as f64).collect::<Vec<_>>());
    knots.dedup();
    let t = knot_vector(&knots);
    let n_basis = t.len() - DEGREE - 1;
    let design = DMatrix::from_fn(pairs.len(), n_basis, |r, c| basis(&t, xs[r])[c]);
    let y = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
    let coef = design
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| E0nsError::SplineFit(e.to_string()))?;
    Ok(VarianceSpline {
        knots,
        coefficients: coef.iter().copied().collect(),
        lower: lo,
        clamp: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_pairs(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..60).map(|i| 40.0 + 0.7 * i as f64).map(|e| (e, f(e))).collect()
    }

    #[test]
    fn basis_is_partition_of_unity() {
        let t = knot_vector(&[0.0, 1.0, 2.5, 4.0, 7.0]);
        for x in [0.0, 0.3, 1.0, 2.0, 5.5, 7.0] {
            let s: f64 = basis(&t, x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{x}: {s}");
        }
    }

    #[test]
    fn constant_residuals_give_flat_fit() {
        let s = fit_variance_spline(&grid_pairs(|_| 0.5), 5).unwrap();
        for e in [40.0, 55.0, 70.0, 81.3] {
            assert!((s.eval(e) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn clamped_beyond_largest_level() {
        let s = fit_variance_spline(&grid_pairs(|e| 0.02 * e), 5).unwrap();
        assert_eq!(s.eval(s.clamp + 15.0), s.eval(s.clamp));
        assert_eq!(s.eval(s.lower - 15.0), s.eval(s.lower));
    }

    #[test]
    fn linear_residuals_give_increasing_fit() {
        let s = fit_variance_spline(&grid_pairs(|e| 0.1 + 0.02 * (e - 40.0)), 5).unwrap();
        let vals: Vec<f64> = (0..100).map(|i| s.eval(40.0 + 0.413 * i as f64)).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn floor_applies() {
        let s = fit_variance_spline(&grid_pairs(|_| 0.0), 5).unwrap();
        assert_eq!(s.eval(60.0), SPLINE_FLOOR);
    }

    #[test]
    fn insufficient_spread() {
        let narrow: Vec<(f64, f64)> = (0..30).map(|i| (60.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(matches!(fit_variance_spline(&narrow, 5), Err(E0nsError::InsufficientSpread { .. })));
        assert!(matches!(
            fit_variance_spline(&grid_pairs(|_| 1.0)[..10], 5),
            Err(E0nsError::InsufficientSpread { .. })
        ));
    }
}
