//! Simulation of online-learning defect prediction under defect overlooking.
//!
//! Each run walks a dataset of software modules in a fixed order. For every
//! module the latest logistic-regression model predicts defectiveness, a
//! prediction strategy may force the prediction to positive, the module is
//! "tested" (defects may be overlooked with a probability that depends on the
//! effective prediction), and the observed result joins the training pool
//! before the model is rebuilt.
//!
//! The modules map onto that loop:
//!
//! - [`dataset`]: CSV loading and seeded synthetic datasets.
//! - [`preprocessing`]: standardization and correlation-based feature selection.
//! - [`classifier`]: L2-regularized logistic regression fitted by gradient descent.
//! - [`overlook`]: corruption of test results (Type 1 / Type 2 overlooking).
//! - [`strategy`]: ordinary, fixed-prediction and adaptive-quit strategies.
//! - [`simulator`]: a single online run producing a [`simulator::RunTrace`].
//! - [`metrics`]: confusion counts, precision/recall/F1, AUC and aggregation.
//! - [`experiment`]: the full grid, seeding policy, config files and reports.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod overlook;
pub mod preprocessing;
pub mod seed;
pub mod simulator;
pub mod strategy;

pub use error::{Error, Result};

/// Binary defect label of a module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonDefective,
    Defective,
}

impl Label {
    pub fn is_defective(self) -> bool {
        matches!(self, Label::Defective)
    }

    pub fn from_defective(defective: bool) -> Self {
        if defective {
            Label::Defective
        } else {
            Label::NonDefective
        }
    }

    /// 1.0 for defective, 0.0 otherwise.
    pub fn as_f64(self) -> f64 {
        if self.is_defective() {
            1.0
        } else {
            0.0
        }
    }
}

/// A positive/negative prediction as emitted by a model or a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prediction {
    Positive,
    Negative,
}

impl Prediction {
    pub fn is_positive(self) -> bool {
        matches!(self, Prediction::Positive)
    }
}
