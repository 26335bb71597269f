use serde::{Deserialize, Serialize};

/// Birth cohort at which the cohort curve's onset offset is measured.
pub const COHORT_ORIGIN: f64 = 1873.0;

/// Logistic function, evaluated without overflow for any finite input.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Parameters of the rise-peak-decline cohort curve. The old-age cohort curve
/// uses the same parameters with `duration + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleLogisticParams {
    pub rise_rate: f64,
    /// Years after the origin cohort at which the rise is centred.
    pub onset: f64,
    pub fall_rate: f64,
    /// Years between the rise and the decline.
    pub duration: f64,
    pub peak: f64,
    pub shift: f64,
}

impl DoubleLogisticParams {
    pub fn to_array(&self) -> [f64; 6] {
        [self.rise_rate, self.onset, self.fall_rate, self.duration, self.peak, self.shift]
    }

    pub fn from_array(v: &[f64]) -> Self {
        DoubleLogisticParams {
            rise_rate: v[0],
            onset: v[1],
            fall_rate: v[2],
            duration: v[3],
            peak: v[4],
            shift: v[5],
        }
    }

    /// Curve value at birth cohort `c`.
    pub fn eval(&self, c: f64) -> f64 {
        double_logistic_cohort(c, self.rise_rate, self.onset, self.fall_rate, self.duration, self.peak)
    }

    /// Curve for the oldest age group, shifted by `shift` years.
    pub fn eval_old(&self, c: f64) -> f64 {
        double_logistic_cohort(
            c,
            self.rise_rate,
            self.onset,
            self.fall_rate,
            self.duration + self.shift,
            self.peak,
        )
    }
}

pub fn double_logistic_cohort(c: f64, rise_rate: f64, onset: f64, fall_rate: f64, duration: f64, peak: f64) -> f64 {
    let x = c - COHORT_ORIGIN - onset;
    peak * logistic(rise_rate * x) - peak * logistic(fall_rate * (x - duration))
}
