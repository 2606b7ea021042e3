//! One online-learning run over a dataset in a given module order.

use std::fmt::Write as _;

use crate::classifier::{classify, fit_detailed, ModelSnapshot, TrainConfig, DEFAULT_THRESHOLD};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::overlook::{observe, OverlookConfig};
use crate::preprocessing::FeatureSubset;
use crate::seed::rng_from_seed;
use crate::strategy::{StrategyKind, StrategyState, DEFAULT_QUIT_THRESHOLD};
use crate::{Label, Prediction};

/// Prediction policy while the training pool lacks one of the classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColdStart {
    /// Use the Laplace-smoothed constant model.
    #[default]
    ModelFallback,
    /// Test every module thoroughly (effective positive, not counted as
    /// forced) until the model can be trained.
    ForcePositive,
}

impl std::str::FromStr for ColdStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "model-fallback" => Ok(ColdStart::ModelFallback),
            "force-positive" => Ok(ColdStart::ForcePositive),
            other => Err(Error::InvalidParameter {
                name: "cold_start",
                reason: format!("expected model-fallback or force-positive, got `{other}`"),
            }),
        }
    }
}

impl ColdStart {
    pub fn as_str(self) -> &'static str {
        match self {
            ColdStart::ModelFallback => "model-fallback",
            ColdStart::ForcePositive => "force-positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub train: TrainConfig,
    pub threshold: f64,
    /// Feature selection runs on every k-th retrain; weights are refitted every step.
    pub cfs_every_k_steps: usize,
    pub cold_start: ColdStart,
    pub quit_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            cfs_every_k_steps: 1,
            cold_start: ColdStart::default(),
            quit_threshold: DEFAULT_QUIT_THRESHOLD,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidProbability {
                name: "threshold",
                value: self.threshold,
            });
        }
        if self.cfs_every_k_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "cfs_every_k_steps",
                reason: "must be positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.quit_threshold) {
            return Err(Error::InvalidProbability {
                name: "quit_threshold",
                value: self.quit_threshold,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub module_id: String,
    pub true_label: Label,
    pub raw_score: f64,
    pub raw_prediction: Prediction,
    pub effective_prediction: Prediction,
    pub forced: bool,
    pub observed_label: Label,
    /// False while the constant fallback model is in use.
    pub model_trained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub dataset_name: String,
    pub strategy: StrategyKind,
    pub overlook: OverlookConfig,
    /// Seed of the run's overlooking stream.
    pub seed: u64,
    pub rows: Vec<TraceRow>,
}

pub const TRACE_CSV_HEADER: &str =
    "step,module_id,true_label,raw_score,raw_prediction,effective_prediction,forced,observed_label,model_trained";

fn label_str(l: Label) -> &'static str {
    if l.is_defective() {
        "1"
    } else {
        "0"
    }
}

fn prediction_str(p: Prediction) -> &'static str {
    if p.is_positive() {
        "positive"
    } else {
        "negative"
    }
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.module_id,
                label_str(r.true_label),
                r.raw_score,
                prediction_str(r.raw_prediction),
                prediction_str(r.effective_prediction),
                r.forced,
                label_str(r.observed_label),
                r.model_trained
            );
        }
        out
    }
}

/// Parses trace rows written by [`RunTrace::to_csv`].
pub fn parse_trace_rows(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TRACE_CSV_HEADER => {}
        _ => return Err(Error::MissingHeader),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let bad = |message: String| Error::Csv { row, message };
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, found {}", f.len())));
        }
        let label = |s: &str| match s {
            "1" => Ok(Label::Defective),
            "0" => Ok(Label::NonDefective),
            _ => Err(bad(format!("bad label `{s}`"))),
        };
        let pred = |s: &str| match s {
            "positive" => Ok(Prediction::Positive),
            "negative" => Ok(Prediction::Negative),
            _ => Err(bad(format!("bad prediction `{s}`"))),
        };
        let flag = |s: &str| {
            s.parse::<bool>()
                .map_err(|_| bad(format!("bad flag `{s}`")))
        };
        let raw_score = f[3]
            .parse::<f64>()
            .ok()
            .filter(|p| (0.0..=1.0).contains(p))
            .ok_or_else(|| bad(format!("bad score `{}`", f[3])))?;
        rows.push(TraceRow {
            step: f[0]
                .parse()
                .map_err(|_| bad(format!("bad step `{}`", f[0])))?,
            module_id: f[1].to_string(),
            true_label: label(f[2])?,
            raw_score,
            raw_prediction: pred(f[4])?,
            effective_prediction: pred(f[5])?,
            forced: flag(f[6])?,
            observed_label: label(f[7])?,
            model_trained: flag(f[8])?,
        });
    }
    Ok(rows)
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidPermutation(n));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPermutation(n));
        }
    }
    Ok(())
}

/// Training pool of observed `(features, label)` pairs plus the model fitted on it.
struct OnlineModel<'a> {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    n_features: usize,
    config: &'a ModelConfig,
    subset: Option<FeatureSubset>,
    fits_since_selection: usize,
    model: ModelSnapshot,
}

impl<'a> OnlineModel<'a> {
    fn new(n_features: usize, config: &'a ModelConfig) -> Self {
        Self {
            features: Vec::new(),
            labels: Vec::new(),
            n_features,
            config,
            subset: None,
            fits_since_selection: 0,
            model: ModelSnapshot::constant(n_features, 0, 0),
        }
    }

    fn push(&mut self, features: &[f64], label: Label) {
        self.features.push(features.to_vec());
        self.labels.push(label);
    }

    fn retrain(&mut self) -> Result<()> {
        if self.features.is_empty() {
            self.model = ModelSnapshot::constant(self.n_features, 0, 0);
            return Ok(());
        }
        let reuse = match &self.subset {
            Some(s)
                if !self
                    .fits_since_selection
                    .is_multiple_of(self.config.cfs_every_k_steps) =>
            {
                Some(s)
            }
            _ => None,
        };
        let (model, _) = fit_detailed(
            &self.features,
            &self.labels,
            &self.config.train,
            reuse,
            false,
        )?;
        if !model.is_degenerate() {
            if reuse.is_none() {
                self.subset = Some(model.feature_subset.clone());
                self.fits_since_selection = 0;
            }
            self.fits_since_selection += 1;
        }
        self.model = model;
        Ok(())
    }
}

/// Runs the online loop once.
///
/// For each module in `order`: score it with the model trained on every
/// previously observed pair, threshold the score, let the strategy adjust
/// the prediction, draw the observed result, update the strategy and the
/// training pool, and retrain. True labels only feed the overlooking draw
/// and the trace.
pub fn run_once(
    dataset: &Dataset,
    order: &[usize],
    strategy: StrategyKind,
    overlook: &OverlookConfig,
    model_config: &ModelConfig,
    seed: u64,
) -> Result<RunTrace> {
    run_with_bootstrap(dataset, order, strategy, overlook, model_config, seed, None)
}

/// [`run_once`] with an optional bootstrap dataset whose records enter the
/// training pool with their true labels before the first step.
pub fn run_with_bootstrap(
    dataset: &Dataset,
    order: &[usize],
    strategy: StrategyKind,
    overlook: &OverlookConfig,
    model_config: &ModelConfig,
    seed: u64,
    bootstrap: Option<&Dataset>,
) -> Result<RunTrace> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    check_permutation(order, dataset.len())?;
    overlook.validate()?;
    model_config.validate()?;

    let n_features = dataset.n_features();
    let mut state =
        StrategyState::with_threshold(strategy, dataset.len(), model_config.quit_threshold)?;
    let mut rng = rng_from_seed(seed);
    let mut online = OnlineModel::new(n_features, model_config);

    if let Some(boot) = bootstrap {
        if boot.n_features() != n_features {
            return Err(Error::LengthMismatch {
                expected: n_features,
                actual: boot.n_features(),
            });
        }
        for rec in &boot.records {
            online.push(&rec.features, rec.true_label);
        }
        online.retrain()?;
    }

    let mut rows = Vec::with_capacity(order.len());
    for (step, &idx) in order.iter().enumerate() {
        let record = &dataset.records[idx];
        let model_trained = !online.model.is_degenerate();
        let raw_score = online.model.predict_proba(&record.features)?;
        let raw_prediction = classify(raw_score, model_config.threshold);
        let (effective_prediction, forced) =
            if !model_trained && model_config.cold_start == ColdStart::ForcePositive {
                (Prediction::Positive, false)
            } else {
                state.effective_prediction(raw_prediction)
            };
        let observed_label = observe(record.true_label, effective_prediction, overlook, &mut rng);
        state.record_outcome(forced, observed_label)?;
        online.push(&record.features, observed_label);
        if step + 1 < order.len() {
            online.retrain()?;
        }
        rows.push(TraceRow {
            step,
            module_id: record.id.clone(),
            true_label: record.true_label,
            raw_score,
            raw_prediction,
            effective_prediction,
            forced,
            observed_label,
            model_trained,
        });
    }

    Ok(RunTrace {
        dataset_name: dataset.name.clone(),
        strategy,
        overlook: *overlook,
        seed,
        rows,
    })
}

/// An overlooking-free ordinary run: the evaluation baseline.
pub fn run_reference(
    dataset: &Dataset,
    order: &[usize],
    model_config: &ModelConfig,
    seed: u64,
) -> Result<RunTrace> {
    run_once(
        dataset,
        order,
        StrategyKind::Ordinary,
        &OverlookConfig::none(),
        model_config,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, ModuleRecord, SyntheticSpec};

    fn small() -> Dataset {
        let spec = SyntheticSpec {
            n_modules: 40,
            defect_rate: 0.3,
            n_features: 3,
            separation: 2.0,
        };
        generate_synthetic("small", &spec, 5).unwrap()
    }

    fn identity(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn no_overlooking_keeps_true_labels() {
        let ds = small();
        let t = run_once(
            &ds,
            &identity(ds.len()),
            StrategyKind::Ordinary,
            &OverlookConfig::none(),
            &ModelConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(t.rows.len(), ds.len());
        assert!(t.rows.iter().all(|r| r.observed_label == r.true_label));
    }

    #[test]
    fn certain_type1_hides_negatives() {
        let ds = small();
        let c = OverlookConfig::new(1.0, 0.2).unwrap();
        let t = run_once(
            &ds,
            &identity(ds.len()),
            StrategyKind::Ordinary,
            &c,
            &ModelConfig::default(),
            2,
        )
        .unwrap();
        for r in &t.rows {
            if r.true_label.is_defective() && r.raw_prediction == Prediction::Negative {
                assert_eq!(r.observed_label, Label::NonDefective);
            }
        }
    }

    #[test]
    fn single_module_uses_empty_pool_fallback() {
        let ds = Dataset {
            name: "one".into(),
            feature_names: vec!["x".into()],
            records: vec![ModuleRecord {
                id: "a".into(),
                features: vec![1.0],
                true_label: Label::Defective,
            }],
        };
        let t = run_reference(&ds, &[0], &ModelConfig::default(), 0).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].raw_score, 0.5);
        assert!(!t.rows[0].model_trained);
    }

    #[test]
    fn rejects_bad_permutations() {
        let ds = small();
        let mut order = identity(ds.len());
        order[1] = 0;
        assert!(matches!(
            run_reference(&ds, &order, &ModelConfig::default(), 0),
            Err(Error::InvalidPermutation(_))
        ));
        assert!(run_reference(&ds, &order[..3], &ModelConfig::default(), 0).is_err());
    }

    #[test]
    fn rejects_invalid_overlook_config() {
        let ds = small();
        let c = OverlookConfig {
            type1_prob: 0.1,
            type2_prob: 0.2,
        };
        assert!(run_once(
            &ds,
            &identity(ds.len()),
            StrategyKind::Fixed,
            &c,
            &ModelConfig::default(),
            0
        )
        .is_err());
    }

    #[test]
    fn fixed_forcing_count() {
        let spec = SyntheticSpec {
            n_modules: 100,
            ..SyntheticSpec::default()
        };
        let ds = generate_synthetic("hundred", &spec, 17).unwrap();
        let c = OverlookConfig::new(0.6, 0.2).unwrap();
        let t = run_once(
            &ds,
            &identity(100),
            StrategyKind::Fixed,
            &c,
            &ModelConfig::default(),
            3,
        )
        .unwrap();
        let forced = t.rows.iter().filter(|r| r.forced).count();
        // Forcing consumes the first negatives until the budget of 10 is spent.
        let mut negatives_seen = 0;
        for r in &t.rows {
            if r.raw_prediction == Prediction::Negative {
                negatives_seen += 1;
                assert_eq!(r.forced, negatives_seen <= 10);
            } else {
                assert!(!r.forced);
            }
        }
        assert_eq!(forced, negatives_seen.min(10));
    }

    #[test]
    fn force_positive_cold_start() {
        let ds = small();
        let config = ModelConfig {
            cold_start: ColdStart::ForcePositive,
            ..ModelConfig::default()
        };
        let t = run_once(
            &ds,
            &identity(ds.len()),
            StrategyKind::Ordinary,
            &OverlookConfig::none(),
            &config,
            0,
        )
        .unwrap();
        for r in &t.rows {
            if !r.model_trained {
                assert_eq!(r.effective_prediction, Prediction::Positive);
                assert!(!r.forced);
            }
        }
    }

    #[test]
    fn bootstrap_pool_trains_from_the_first_step() {
        let ds = small();
        let boot = generate_synthetic(
            "boot",
            &SyntheticSpec {
                n_modules: 30,
                n_features: 3,
                ..SyntheticSpec::default()
            },
            9,
        )
        .unwrap();
        let t = run_with_bootstrap(
            &ds,
            &identity(ds.len()),
            StrategyKind::Ordinary,
            &OverlookConfig::none(),
            &ModelConfig::default(),
            0,
            Some(&boot),
        )
        .unwrap();
        assert!(t.rows[0].model_trained);
        let wrong = generate_synthetic(
            "boot",
            &SyntheticSpec {
                n_features: 2,
                ..SyntheticSpec::default()
            },
            9,
        )
        .unwrap();
        assert!(run_with_bootstrap(
            &ds,
            &identity(ds.len()),
            StrategyKind::Ordinary,
            &OverlookConfig::none(),
            &ModelConfig::default(),
            0,
            Some(&wrong),
        )
        .is_err());
    }

    #[test]
    fn sparse_feature_selection_changes_little() {
        let ds = small();
        let config = ModelConfig {
            cfs_every_k_steps: 5,
            ..ModelConfig::default()
        };
        let t = run_reference(&ds, &identity(ds.len()), &config, 0).unwrap();
        assert_eq!(t.rows.len(), ds.len());
    }

    #[test]
    fn trace_csv_round_trip() {
        let ds = small();
        let c = OverlookConfig::new(0.6, 0.2).unwrap();
        let t = run_once(
            &ds,
            &identity(ds.len()),
            StrategyKind::Proposed,
            &c,
            &ModelConfig::default(),
            4,
        )
        .unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        assert_eq!(parse_trace_rows(&csv).unwrap(), t.rows);
        assert!(parse_trace_rows("nope\n").is_err());
    }
}
