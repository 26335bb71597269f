use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::sample_std_normal;
use super::McmcError;

/// Closed support interval for one parameter; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const REAL: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const POSITIVE: Bounds = Bounds {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Bounds { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Folds `x` back into the interval by mirror reflection at the bounds.
    pub fn reflect(&self, x: f64) -> f64 {
        let (lo, hi) = (self.lower, self.upper);
        if self.contains(x) {
            return x;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, false) => 2.0 * lo - x,
            (false, true) => 2.0 * hi - x,
            (true, true) => {
                let w = hi - lo;
                let t = (x - lo).rem_euclid(2.0 * w);
                if t <= w {
                    lo + t
                } else {
                    hi - (t - w)
                }
            }
            (false, false) => x,
        }
    }
}

/// One random-walk Metropolis step on `current` with a reflected Gaussian
/// proposal. Returns whether the proposal was accepted.
pub fn mh_step<R: Rng + ?Sized>(
    current: &mut [f64],
    log_target: &mut dyn FnMut(&[f64]) -> f64,
    scales: &[f64],
    bounds: &[Bounds],
    rng: &mut R,
) -> Result<bool, McmcError> {
    let here = log_target(current);
    if !here.is_finite() {
        return Err(McmcError::NonFiniteTarget {
            block: String::new(),
            value: here,
        });
    }
    let proposal: Vec<f64> = current
        .iter()
        .zip(scales)
        .zip(bounds)
        .map(|((&x, &s), b)| b.reflect(x + s * sample_std_normal(rng)))
        .collect();
    let there = log_target(&proposal);
    if there.is_nan() || there == f64::NEG_INFINITY {
        return Ok(false);
    }
    let accept = there >= here || rng.random::<f64>().ln() < there - here;
    if accept {
        current.copy_from_slice(&proposal);
    }
    Ok(accept)
}

/// Target acceptance band for scale adaptation.
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.2, 0.4);

/// A Metropolis block whose proposal scales adapt during burn-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveBlock {
    pub name: String,
    pub bounds: Vec<Bounds>,
    /// Per-coordinate proposal shape, multiplied by `exp(log_scale)`.
    shape: Vec<f64>,
    log_scale: f64,
    window: usize,
    window_proposed: usize,
    window_accepted: usize,
    // Welford accumulators of the visited points during burn-in.
    n_seen: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    shape_from_history: bool,
    pub proposed: usize,
    pub accepted: usize,
}

impl AdaptiveBlock {
    pub fn new(name: impl Into<String>, scales: Vec<f64>, bounds: Vec<Bounds>, window: usize) -> Self {
        assert_eq!(scales.len(), bounds.len());
        let d = scales.len();
        AdaptiveBlock {
            name: name.into(),
            bounds,
            shape: scales,
            log_scale: 0.0,
            window: window.max(1),
            window_proposed: 0,
            window_accepted: 0,
            n_seen: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
            shape_from_history: false,
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn scales(&self) -> Vec<f64> {
        let f = self.log_scale.exp();
        self.shape.iter().map(|s| s * f).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counts(&mut self) {
        self.proposed = 0;
        self.accepted = 0;
    }

    /// Runs one step; when `adapt` is set the scales are tuned at window ends.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        current: &mut [f64],
        log_target: &mut dyn FnMut(&[f64]) -> f64,
        adapt: bool,
        rng: &mut R,
    ) -> Result<bool, McmcError> {
        let scales = self.scales();
        let accepted = mh_step(current, log_target, &scales, &self.bounds, rng).map_err(|e| match e {
            McmcError::NonFiniteTarget { value, .. } => McmcError::NonFiniteTarget {
                block: self.name.clone(),
                value,
            },
            other => other,
        })?;
        self.proposed += 1;
        self.accepted += accepted as usize;
        if adapt {
            self.record(current);
            self.window_proposed += 1;
            self.window_accepted += accepted as usize;
            if self.window_proposed >= self.window {
                self.adapt();
            }
        }
        Ok(accepted)
    }

    fn record(&mut self, x: &[f64]) {
        self.n_seen += 1;
        let n = self.n_seen as f64;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    fn adapt(&mut self) {
        let rate = self.window_accepted as f64 / self.window_proposed as f64;
        self.window_proposed = 0;
        self.window_accepted = 0;
        let d = self.dim();
        if d > 1 && self.n_seen >= 2 * self.window.max(50) {
            let sds: Vec<f64> = self.m2.iter().map(|m| (m / (self.n_seen - 1) as f64).sqrt()).collect();
            if sds.iter().all(|s| *s > 0.0 && s.is_finite()) {
                if !self.shape_from_history {
                    self.log_scale = (2.38 / (d as f64).sqrt()).ln();
                    self.shape_from_history = true;
                }
                self.shape = sds;
            }
        }
        if rate < TARGET_ACCEPTANCE.0 || rate > TARGET_ACCEPTANCE.1 {
            self.log_scale += (2.0 * (rate - 0.3)).clamp(-1.0, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::stream_rng;

    #[test]
    fn reflection_stays_inside() {
        let b = Bounds::new(0.0, 1.0);
        for x in [-0.3, 1.2, 2.7, -5.1, 0.5] {
            let r = b.reflect(x);
            assert!(b.contains(r), "{x} -> {r}");
        }
        assert!((b.reflect(1.2) - 0.8).abs() < 1e-12);
        assert!((Bounds::POSITIVE.reflect(-0.4) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn flat_target_always_accepts() {
        let mut rng = stream_rng(1, &[]);
        let mut block = AdaptiveBlock::new("flat", vec![1.0], vec![Bounds::REAL], 50);
        let mut x = [0.0];
        for _ in 0..1000 {
            block.step(&mut x, &mut |_| 0.0, false, &mut rng).unwrap();
        }
        assert_eq!(block.acceptance_rate(), 1.0);
    }

    #[test]
    fn standard_normal_variance() {
        let mut rng = stream_rng(4, &[]);
        let mut block = AdaptiveBlock::new("z", vec![0.1], vec![Bounds::REAL], 100);
        let mut x = [0.0];
        let mut target = |v: &[f64]| -0.5 * v[0] * v[0];
        for _ in 0..20_000 {
            block.step(&mut x, &mut target, true, &mut rng).unwrap();
        }
        block.reset_counts();
        let n = 400_000;
        let mut s = 0.0;
        let mut ss = 0.0;
        for _ in 0..n {
            block.step(&mut x, &mut target, false, &mut rng).unwrap();
            s += x[0];
            ss += x[0] * x[0];
        }
        let mean = s / n as f64;
        let var = ss / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.02, "{var}");
        let rate = block.acceptance_rate();
        assert!((0.15..0.6).contains(&rate), "{rate}");
    }

    #[test]
    fn reflection_respects_support() {
        let mut rng = stream_rng(8, &[]);
        let mut block = AdaptiveBlock::new("pos", vec![50.0], vec![Bounds::POSITIVE], 100);
        let mut x = [0.001];
        for _ in 0..5000 {
            block.step(&mut x, &mut |v| -v[0], false, &mut rng).unwrap();
            assert!(x[0] >= 0.0);
        }
    }

    #[test]
    fn non_finite_current_is_an_error() {
        let mut rng = stream_rng(8, &[]);
        let mut block = AdaptiveBlock::new("bad", vec![1.0], vec![Bounds::REAL], 10);
        let err = block.step(&mut [0.0], &mut |_| f64::NAN, false, &mut rng).unwrap_err();
        assert!(matches!(err, McmcError::NonFiniteTarget { ref block, .. } if block == "bad"));
    }

    #[test]
    fn adaptation_freezes_outside_burn_in() {
        let mut rng = stream_rng(8, &[]);
        let mut block = AdaptiveBlock::new("z", vec![100.0], vec![Bounds::REAL], 20);
        let mut x = [0.0];
        let before = block.scales();
        for _ in 0..500 {
            block.step(&mut x, &mut |v| -0.5 * v[0] * v[0], false, &mut rng).unwrap();
        }
        assert_eq!(block.scales(), before);
        for _ in 0..500 {
            block.step(&mut x, &mut |v| -0.5 * v[0] * v[0], true, &mut rng).unwrap();
        }
        assert!(block.scales()[0] < before[0]);
    }
}
