//! Corruption of test results by defect overlooking.
//!
//! Testing never invents a defect. A truly defective module is overlooked
//! (observed as non-defective) with probability `type1_prob` when the
//! effective prediction is negative, and `type2_prob` when it is positive.

use rand::Rng;

use crate::error::{Error, Result};
use crate::{Label, Prediction};

pub const DEFAULT_TYPE2_PROB: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlookConfig {
    /// Overlooking probability after a negative prediction (lightly tested).
    pub type1_prob: f64,
    /// Overlooking probability after a positive prediction (thoroughly tested).
    pub type2_prob: f64,
}

impl OverlookConfig {
    /// Validates `0 <= type2_prob <= type1_prob <= 1`.
    pub fn new(type1_prob: f64, type2_prob: f64) -> Result<Self> {
        let config = Self {
            type1_prob,
            type2_prob,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn none() -> Self {
        Self {
            type1_prob: 0.0,
            type2_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.type1_prob) {
            return Err(Error::InvalidProbability {
                name: "type1_prob",
                value: self.type1_prob,
            });
        }
        if !(0.0..=1.0).contains(&self.type2_prob) {
            return Err(Error::InvalidProbability {
                name: "type2_prob",
                value: self.type2_prob,
            });
        }
        if self.type2_prob > self.type1_prob {
            return Err(Error::InvalidParameter {
                name: "type1_prob",
                reason: format!(
                    "type 1 probability {} is below type 2 probability {}",
                    self.type1_prob, self.type2_prob
                ),
            });
        }
        Ok(())
    }
}

/// Draws the observed test result. Consumes exactly one uniform draw from
/// `rng` when the module is truly defective and none otherwise.
pub fn observe<R: Rng + ?Sized>(
    true_label: Label,
    effective_prediction: Prediction,
    config: &OverlookConfig,
    rng: &mut R,
) -> Label {
    if !true_label.is_defective() {
        return Label::NonDefective;
    }
    let p = match effective_prediction {
        Prediction::Negative => config.type1_prob,
        Prediction::Positive => config.type2_prob,
    };
    let u: f64 = rng.random();
    if u < p {
        Label::NonDefective
    } else {
        Label::Defective
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::Label::{Defective as D, NonDefective as N};
    use crate::Prediction::{Negative as Neg, Positive as Pos};
    use rand::RngCore;

    #[test]
    fn validation() {
        assert!(OverlookConfig::new(1.0, 0.2).is_ok());
        assert!(OverlookConfig::new(0.2, 0.2).is_ok());
        assert!(OverlookConfig::new(0.1, 0.2).is_err());
        assert!(OverlookConfig::new(1.1, 0.2).is_err());
        assert!(OverlookConfig::new(0.5, -0.1).is_err());
        assert!(OverlookConfig::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn deterministic_corners() {
        let mut rng = rng_from_seed(1);
        let c = OverlookConfig::new(1.0, 0.2).unwrap();
        assert_eq!(observe(N, Neg, &c, &mut rng), N);
        assert_eq!(observe(D, Neg, &c, &mut rng), N);
        let c = OverlookConfig::new(0.7, 0.0).unwrap();
        for _ in 0..100 {
            assert_eq!(observe(D, Pos, &c, &mut rng), D);
        }
    }

    #[test]
    fn never_invents_defects() {
        let mut rng = rng_from_seed(3);
        for n in [0.0, 0.5, 1.0] {
            for q in [0.0, 0.5, 1.0] {
                let c = OverlookConfig {
                    type1_prob: n,
                    type2_prob: q,
                };
                for pred in [Pos, Neg] {
                    for _ in 0..50 {
                        assert_eq!(observe(N, pred, &c, &mut rng), N);
                    }
                }
            }
        }
    }

    #[test]
    fn draw_budget_is_one_per_defective_module() {
        let c = OverlookConfig::new(0.5, 0.2).unwrap();
        let mut a = rng_from_seed(9);
        let mut b = rng_from_seed(9);
        observe(N, Neg, &c, &mut a);
        observe(N, Pos, &c, &mut a);
        assert_eq!(a.next_u64(), b.next_u64());

        let mut a = rng_from_seed(9);
        let mut b = rng_from_seed(9);
        observe(D, Neg, &c, &mut a);
        let _: f64 = b.random();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn type1_frequency() {
        let c = OverlookConfig::new(0.6, 0.2).unwrap();
        let mut rng = rng_from_seed(2024);
        let trials = 10_000;
        let defective = (0..trials)
            .filter(|_| observe(D, Neg, &c, &mut rng) == D)
            .count();
        let frac = defective as f64 / trials as f64;
        assert!((frac - 0.4).abs() <= 0.015, "{frac}");
    }
}
