use serde::{Deserialize, Serialize};

use super::E0nsError;
use crate::assaf::logistic;

/// Steepness constant of both logistic terms.
const STEEPNESS: f64 = 4.4;

/// Parameters of the five-year gain curve, as a function of the current level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCurveParams {
    /// Level at which the first rise starts.
    pub onset: f64,
    /// Width of the first rise.
    pub rise_width: f64,
    /// Length of the plateau between the two transitions.
    pub plateau: f64,
    /// Width of the second transition.
    pub fall_width: f64,
    /// Gain level reached after the first rise.
    pub max_gain: f64,
    /// Long-run gain per period.
    pub asymptote: f64,
}

/// Truncation bounds of each parameter, in storage order.
pub const GAIN_BOUNDS: [(f64, f64); 6] = [
    (0.0, 100.0),
    (0.0, 100.0),
    (0.0, 100.0),
    (0.0, 100.0),
    (0.0, 15.0),
    (0.0, 1.15),
];

pub const GAIN_NAMES: [&str; 6] = ["onset", "rise_width", "plateau", "fall_width", "max_gain", "asymptote"];

impl GainCurveParams {
    pub fn to_array(&self) -> [f64; 6] {
        [self.onset, self.rise_width, self.plateau, self.fall_width, self.max_gain, self.asymptote]
    }

    pub fn from_array(v: &[f64]) -> Self {
        GainCurveParams {
            onset: v[0],
            rise_width: v[1],
            plateau: v[2],
            fall_width: v[3],
            max_gain: v[4],
            asymptote: v[5],
        }
    }

    /// Rejects zero transition widths; [`gain_curve`] treats them as steps.
    pub fn check(&self) -> Result<(), E0nsError> {
        if self.rise_width == 0.0 || self.fall_width == 0.0 {
            return Err(E0nsError::DegenerateWidth);
        }
        Ok(())
    }

    pub fn gain(&self, e: f64) -> f64 {
        gain_curve(e, self)
    }
}

fn transition(e: f64, start: f64, width: f64) -> f64 {
    let centre = start + 0.5 * width;
    if width == 0.0 {
        return if e > centre {
            1.0
        } else if e < centre {
            0.0
        } else {
            0.5
        };
    }
    logistic(STEEPNESS / width * (e - centre))
}

/// Expected five-year gain at level `e`.
pub fn gain_curve(e: f64, p: &GainCurveParams) -> f64 {
    p.max_gain * transition(e, p.onset, p.rise_width)
        + (p.asymptote - p.max_gain) * transition(e, p.onset + p.rise_width + p.plateau, p.fall_width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: [f64; 6]) -> GainCurveParams {
        GainCurveParams::from_array(&v)
    }

    #[test]
    fn oracle_value() {
        // Independent 40-digit evaluation.
        let g = gain_curve(55.0, &p([15.0, 40.0, 0.0, 20.0, 3.0, 0.4]));
        assert!((g - 2.441_397_260_929_763_2).abs() < 1e-12, "{g}");
    }

    #[test]
    fn limits() {
        let q = p([15.0, 40.0, 5.0, 20.0, 3.0, 0.4]);
        assert!((q.gain(1e9) - 0.4).abs() < 1e-12);
        assert!(q.gain(-1e9).abs() < 1e-12);
    }

    #[test]
    fn zero_width_is_a_step() {
        let q = p([10.0, 0.0, 0.0, 5.0, 3.0, 0.4]);
        assert!(matches!(q.check(), Err(E0nsError::DegenerateWidth)));
        assert!((q.gain(9.0) + 2.6 * transition(9.0, 10.0, 5.0)).abs() < 1e-12);
        assert!((q.gain(10.5) - (3.0 - 2.6 * transition(10.5, 10.0, 5.0))).abs() < 1e-12);
        assert!(p([15.0, 40.0, 0.0, 20.0, 3.0, 0.4]).check().is_ok());
    }

    proptest! {
        #[test]
        fn asymptote_tail_bound(
            a1 in 0.0f64..100.0, a2 in 0.5f64..100.0, a3 in 0.0f64..100.0, a4 in 0.5f64..100.0,
            w in 0.0f64..15.0, z in 0.0f64..1.15,
        ) {
            let q = p([a1, a2, a3, a4, w, z]);
            let e = a1 + a2 + a3 + 10.0 * a4 + 1.0;
            // Far beyond both transitions the gain settles on z.
            prop_assert!((q.gain(e + 10.0 * a2) - z).abs() < 1e-6);
        }

        #[test]
        fn terms_are_bounded_monotone(
            a1 in 0.0f64..100.0, a2 in 0.5f64..100.0, a4 in 0.5f64..100.0, e1 in -50.0f64..250.0, d in 0.0f64..50.0,
        ) {
            let t1 = transition(e1, a1, a2);
            let t2 = transition(e1 + d, a1, a2);
            prop_assert!((0.0..=1.0).contains(&t1) && t2 >= t1);
            let s1 = transition(e1, a1, a4);
            prop_assert!((0.0..=1.0).contains(&s1));
        }
    }
}
