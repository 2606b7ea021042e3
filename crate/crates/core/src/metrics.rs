//! Confusion counts, precision/recall/F1, Mann-Whitney AUC, and aggregation
//! over repetitions.
//!
//! Binary metrics score the *effective* predictions against the true labels.
//! AUC ranks the *raw* model scores.

use crate::error::{Error, Result};
use crate::simulator::RunTrace;
use crate::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(trace: &RunTrace) -> Result<Confusion> {
    if trace.rows.is_empty() {
        return Err(Error::EmptyInput("trace"));
    }
    let mut c = Confusion::default();
    for r in &trace.rows {
        match (
            r.effective_prediction.is_positive(),
            r.true_label.is_defective(),
        ) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(precision, recall, f1)`; each is 0 when its denominator is 0.
pub fn precision_recall_f1(c: &Confusion) -> (f64, f64, f64) {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    (precision, recall, f1_score(precision, recall))
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    let den = precision + recall;
    if den > 0.0 {
        2.0 * precision * recall / den
    } else {
        0.0
    }
}

/// Mann-Whitney AUC: the share of (defective, non-defective) pairs in which
/// the defective module scores higher, ties counting one half. `None` when
/// either class is absent.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    let mut pairs: Vec<(f64, bool)> = scores
        .iter()
        .copied()
        .zip(labels.iter().map(|l| l.is_defective()))
        .collect();
    let n_pos = pairs.iter().filter(|p| p.1).count() as u128;
    let n_neg = pairs.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the U statistic, accumulated exactly over groups of tied scores.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < pairs.len() && pairs[j].0.total_cmp(&pairs[i].0).is_eq() {
            if pairs[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(Some(twice_u as f64 / (2 * n_pos * n_neg) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the run's true labels contain a single class.
    pub auc: Option<f64>,
}

impl RunMetrics {
    pub fn from_trace(trace: &RunTrace) -> Result<Self> {
        let confusion = confusion(trace)?;
        let (precision, recall, f1) = precision_recall_f1(&confusion);
        let scores: Vec<f64> = trace.rows.iter().map(|r| r.raw_score).collect();
        let labels: Vec<Label> = trace.rows.iter().map(|r| r.true_label).collect();
        Ok(Self {
            confusion,
            precision,
            recall,
            f1,
            auc: auc(&scores, &labels)?,
        })
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Sample standard deviation uses divisor n - 1; a single value has std 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub repetitions: usize,
    pub tp: Summary,
    pub fp: Summary,
    pub tn: Summary,
    pub fn_: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    /// Over the runs with a defined AUC; `None` if there were none.
    pub auc: Option<Summary>,
    pub auc_undefined: usize,
}

/// Fieldwise mean and sample standard deviation over runs.
///
/// Runs are first sorted into a canonical order so the result does not
/// depend on the order in which parallel workers finished.
pub fn aggregate(runs: &[RunMetrics]) -> Result<AggregateMetrics> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("runs"));
    }
    let mut runs = runs.to_vec();
    runs.sort_by_key(canonical_key);

    let field = |f: &dyn Fn(&RunMetrics) -> f64| -> Summary {
        Summary::of(&runs.iter().map(f).collect::<Vec<_>>()).expect("nonempty")
    };
    let aucs: Vec<f64> = runs.iter().filter_map(|r| r.auc).collect();
    Ok(AggregateMetrics {
        repetitions: runs.len(),
        tp: field(&|r| r.confusion.tp as f64),
        fp: field(&|r| r.confusion.fp as f64),
        tn: field(&|r| r.confusion.tn as f64),
        fn_: field(&|r| r.confusion.fn_ as f64),
        precision: field(&|r| r.precision),
        recall: field(&|r| r.recall),
        f1: field(&|r| r.f1),
        auc: Summary::of(&aucs),
        auc_undefined: runs.len() - aucs.len(),
    })
}

fn canonical_key(r: &RunMetrics) -> (u64, u64, u64, u64, u64, u64, u64, u64) {
    (
        r.auc.map_or(u64::MAX, f64::to_bits),
        r.precision.to_bits(),
        r.recall.to_bits(),
        r.f1.to_bits(),
        r.confusion.tp as u64,
        r.confusion.fp as u64,
        r.confusion.tn as u64,
        r.confusion.fn_ as u64,
    )
}

/// Signed differences `other - base` of the mean metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDiff {
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn diff(base: &AggregateMetrics, other: &AggregateMetrics) -> MetricDiff {
    MetricDiff {
        auc: match (base.auc, other.auc) {
            (Some(b), Some(o)) => Some(o.mean - b.mean),
            _ => None,
        },
        precision: other.precision.mean - base.precision.mean,
        recall: other.recall.mean - base.recall.mean,
        f1: other.f1.mean - base.f1.mean,
    }
}
