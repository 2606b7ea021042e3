//! Strategies turning a model's raw prediction into the effective prediction
//! that decides how thoroughly a module is tested.
//!
//! - `Ordinary` passes predictions through.
//! - `Fixed` forces the first `m` negative predictions to positive, where `m`
//!   is 10% of the modules under test.
//! - `Proposed` forces like `Fixed` but quits once at least `ceil(m / 2)`
//!   forced modules have been tested and the share of them observed
//!   defective drops below `quit_threshold`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::{Label, Prediction};

pub const DEFAULT_QUIT_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Ordinary,
    Fixed,
    Proposed,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::Ordinary,
        StrategyKind::Fixed,
        StrategyKind::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Ordinary => "ordinary",
            StrategyKind::Fixed => "fixed",
            StrategyKind::Proposed => "proposed",
        }
    }

    pub fn forces(self) -> bool {
        !matches!(self, StrategyKind::Ordinary)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ordinary" => Ok(StrategyKind::Ordinary),
            "fixed" => Ok(StrategyKind::Fixed),
            "proposed" => Ok(StrategyKind::Proposed),
            other => Err(Error::InvalidParameter {
                name: "strategy",
                reason: format!("unknown strategy `{other}`"),
            }),
        }
    }
}

/// Forced-prediction budget: 10% of `total_modules`, rounded half up, at least 1.
pub fn forced_budget(total_modules: usize) -> usize {
    ((total_modules + 5) / 10).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyState {
    pub kind: StrategyKind,
    pub m: usize,
    pub forced_so_far: usize,
    pub forced_tested: usize,
    pub forced_defective: usize,
    pub warmup: usize,
    pub quit: bool,
    pub quit_threshold: f64,
}

impl StrategyState {
    pub fn new(kind: StrategyKind, total_modules: usize) -> Result<Self> {
        Self::with_threshold(kind, total_modules, DEFAULT_QUIT_THRESHOLD)
    }

    pub fn with_threshold(
        kind: StrategyKind,
        total_modules: usize,
        quit_threshold: f64,
    ) -> Result<Self> {
        if total_modules == 0 {
            return Err(Error::InvalidParameter {
                name: "total_modules",
                reason: "must be positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&quit_threshold) {
            return Err(Error::InvalidProbability {
                name: "quit_threshold",
                value: quit_threshold,
            });
        }
        let m = if kind.forces() {
            forced_budget(total_modules)
        } else {
            0
        };
        Ok(Self {
            kind,
            m,
            forced_so_far: 0,
            forced_tested: 0,
            forced_defective: 0,
            warmup: m.div_ceil(2),
            quit: false,
            quit_threshold,
        })
    }

    /// Returns the effective prediction and whether it was forced.
    pub fn effective_prediction(&mut self, raw: Prediction) -> (Prediction, bool) {
        match raw {
            Prediction::Positive => (Prediction::Positive, false),
            Prediction::Negative => {
                if self.kind.forces() && !self.quit && self.forced_so_far < self.m {
                    self.forced_so_far += 1;
                    (Prediction::Positive, true)
                } else {
                    (Prediction::Negative, false)
                }
            }
        }
    }

    /// Records the observed test result of a module. Only forced modules
    /// change the state; for `Proposed` the quit rule is re-checked after
    /// every forced outcome once the warm-up is reached.
    pub fn record_outcome(&mut self, forced: bool, observed: Label) -> Result<()> {
        if !forced {
            return Ok(());
        }
        if !self.kind.forces() || self.forced_tested >= self.forced_so_far {
            return Err(Error::ForcedOutcomeWithoutForcing);
        }
        self.forced_tested += 1;
        if observed.is_defective() {
            self.forced_defective += 1;
        }
        if self.kind == StrategyKind::Proposed && self.forced_tested >= self.warmup {
            if let Some(rate) = self.overlook_rate_estimate() {
                if rate < self.quit_threshold {
                    self.quit = true;
                }
            }
        }
        Ok(())
    }

    /// Share of tested forced modules whose result was defective.
    pub fn overlook_rate_estimate(&self) -> Option<f64> {
        (self.forced_tested > 0).then(|| self.forced_defective as f64 / self.forced_tested as f64)
    }
}
