//! Binary logistic regression, retrained from scratch at every online step.
//!
//! Features are standardized on the training pool, reduced with CFS, and the
//! L2-regularized mean negative log-likelihood is minimized by full-batch
//! gradient descent. The intercept is not regularized.

use crate::error::{Error, Result};
use crate::preprocessing::{
    select_features, standardize_fit, FeatureSubset, StandardizationParams,
};
use crate::{Label, Prediction};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// L2 strength on the weights.
    pub lambda: f64,
    pub step_size: f64,
    pub max_iter: usize,
    /// Stop once every gradient component is below this in absolute value.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            step_size: 0.1,
            max_iter: 500,
            tolerance: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", "must be finite and nonnegative");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size", "must be finite and positive");
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad("tolerance", "must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub feature_subset: FeatureSubset,
    pub standardization: StandardizationParams,
    /// One weight per selected feature, in `feature_subset` order.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub trained_on: usize,
    /// Constant probability used instead of the linear model.
    pub degenerate: Option<f64>,
    pub n_features: usize,
}

impl ModelSnapshot {
    /// Laplace-smoothed constant model `(k + 1) / (n + 2)` for a pool of `n`
    /// records of which `k` are defective. Also covers the empty pool.
    pub fn constant(n_features: usize, defective: usize, total: usize) -> Self {
        Self {
            feature_subset: FeatureSubset {
                indices: Vec::new(),
                merit: 0.0,
            },
            standardization: StandardizationParams {
                means: vec![0.0; n_features],
                std_devs: vec![1.0; n_features],
            },
            weights: Vec::new(),
            intercept: 0.0,
            trained_on: total,
            degenerate: Some((defective as f64 + 1.0) / (total as f64 + 2.0)),
            n_features,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                actual: features.len(),
            });
        }
        if let Some(p) = self.degenerate {
            return Ok(p);
        }
        let s = &self.standardization;
        let t = self
            .feature_subset
            .indices
            .iter()
            .zip(&self.weights)
            .fold(self.intercept, |acc, (&j, w)| {
                acc + w * (features[j] - s.means[j]) / s.std_devs[j]
            });
        Ok(sigmoid(t))
    }
}

pub fn predict_proba(model: &ModelSnapshot, features: &[f64]) -> Result<f64> {
    model.predict_proba(features)
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Positive iff `p >= threshold`.
pub fn classify(p: f64, threshold: f64) -> Prediction {
    if p >= threshold {
        Prediction::Positive
    } else {
        Prediction::Negative
    }
}

/// Regularized logistic loss over a dense design matrix (no intercept column).
///
/// Parameters are laid out as `[intercept, w_1, ..., w_k]`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    design: Vec<f64>,
    targets: Vec<f64>,
    n_cols: usize,
    lambda: f64,
}

impl LogisticObjective {
    pub fn new(rows: &[Vec<f64>], labels: &[Label], lambda: f64) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let n_cols = rows.first().ok_or(Error::EmptyInput("training set"))?.len();
        let mut design = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::LengthMismatch {
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            design.extend_from_slice(r);
        }
        Ok(Self {
            design,
            targets: labels.iter().map(|l| l.as_f64()).collect(),
            n_cols,
            lambda,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_cols + 1
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        let k = self.n_cols;
        self.targets
            .iter()
            .enumerate()
            .map(move |(i, &y)| (&self.design[i * k..(i + 1) * k], y))
    }

    fn margin(params: &[f64], x: &[f64]) -> f64 {
        x.iter()
            .zip(&params[1..])
            .fold(params[0], |acc, (xi, wi)| acc + xi * wi)
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        0.5 * self.lambda * params[1..].iter().map(|w| w * w).sum::<f64>()
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.n_rows() as f64;
        let nll: f64 = self
            .rows()
            .map(|(x, y)| {
                let t = Self::margin(params, x);
                softplus(t) - y * t
            })
            .sum();
        nll / n + self.penalty(params)
    }

    /// Writes the gradient into `grad` and returns the loss when `with_loss`.
    pub fn gradient_into(&self, params: &[f64], grad: &mut [f64], with_loss: bool) -> Option<f64> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut nll = 0.0;
        for (x, y) in self.rows() {
            let t = Self::margin(params, x);
            let e = (-t.abs()).exp();
            let p = if t >= 0.0 {
                1.0 / (1.0 + e)
            } else {
                e / (1.0 + e)
            };
            let r = p - y;
            grad[0] += r;
            for (g, xi) in grad[1..].iter_mut().zip(x) {
                *g += r * xi;
            }
            if with_loss {
                nll += t.max(0.0) + e.ln_1p() - y * t;
            }
        }
        let n = self.n_rows() as f64;
        for g in grad.iter_mut() {
            *g /= n;
        }
        for (g, w) in grad[1..].iter_mut().zip(&params[1..]) {
            *g += self.lambda * w;
        }
        with_loss.then(|| nll / n + self.penalty(params))
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        self.gradient_into(params, &mut g, false);
        g
    }
}

/// Result of a gradient-descent run.
#[derive(Debug, Clone)]
pub struct Descent {
    pub params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Loss at each visited iterate when history was requested.
    pub loss_history: Vec<f64>,
}

/// Full-batch gradient descent from `init`.
///
/// The intercept moves with `config.step_size`. The weights move with the
/// same step unless it exceeds `1 / L`, where `L = (1 + k) / 4 + lambda`
/// bounds the curvature of the loss on standardized features; only very
/// large `lambda` or very wide subsets hit that cap.
pub fn gradient_descent(
    objective: &LogisticObjective,
    init: Vec<f64>,
    config: &TrainConfig,
    record_history: bool,
) -> Descent {
    let k = objective.n_cols as f64;
    let curvature = 0.25 * (1.0 + k) + objective.lambda;
    let weight_step = config.step_size.min(1.0 / curvature);

    let mut params = init;
    let mut grad = vec![0.0; objective.n_params()];
    let mut loss_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let loss = objective.gradient_into(&params, &mut grad, record_history);
        if let Some(l) = loss {
            loss_history.push(l);
        }
        let max_abs = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if max_abs < config.tolerance {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        params[0] -= config.step_size * grad[0];
        for (p, g) in params[1..].iter_mut().zip(&grad[1..]) {
            *p -= weight_step * g;
        }
        iterations += 1;
    }
    Descent {
        params,
        iterations,
        converged,
        loss_history,
    }
}

/// Fits a model on `matrix` / `labels`, running feature selection.
pub fn fit(matrix: &[Vec<f64>], labels: &[Label], config: &TrainConfig) -> Result<ModelSnapshot> {
    fit_detailed(matrix, labels, config, None, false).map(|(m, _)| m)
}

/// Like [`fit`], optionally reusing a previously selected subset and
/// returning the descent trace.
pub fn fit_detailed(
    matrix: &[Vec<f64>],
    labels: &[Label],
    config: &TrainConfig,
    subset: Option<&FeatureSubset>,
    record_history: bool,
) -> Result<(ModelSnapshot, Option<Descent>)> {
    if matrix.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: matrix.len(),
            actual: labels.len(),
        });
    }
    let n_features = matrix
        .first()
        .ok_or(Error::EmptyInput("training set"))?
        .len();
    let defective = labels.iter().filter(|l| l.is_defective()).count();
    if defective == 0 || defective == labels.len() {
        return Ok((
            ModelSnapshot::constant(n_features, defective, labels.len()),
            None,
        ));
    }

    let standardization = standardize_fit(matrix)?;
    let standardized: Vec<Vec<f64>> = matrix
        .iter()
        .map(|r| standardization.apply(r))
        .collect::<Result<_>>()?;
    let feature_subset = match subset {
        Some(s) => s.clone(),
        None => select_features(&standardized, labels)?,
    };
    if let Some(&bad) = feature_subset.indices.iter().find(|&&j| j >= n_features) {
        return Err(Error::LengthMismatch {
            expected: n_features,
            actual: bad + 1,
        });
    }
    let selected: Vec<Vec<f64>> = standardized
        .iter()
        .map(|r| feature_subset.indices.iter().map(|&j| r[j]).collect())
        .collect();

    let objective = LogisticObjective::new(&selected, labels, config.lambda)?;
    let prior = defective as f64 / labels.len() as f64;
    let mut init = vec![0.0; objective.n_params()];
    init[0] = (prior / (1.0 - prior)).ln();
    let descent = gradient_descent(&objective, init, config, record_history);

    let model = ModelSnapshot {
        feature_subset,
        standardization,
        weights: descent.params[1..].to_vec(),
        intercept: descent.params[0],
        trained_on: labels.len(),
        degenerate: None,
        n_features,
    };
    Ok((model, Some(descent)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Label::{Defective as D, NonDefective as N};

    #[test]
    fn separable_ordering() {
        let m = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let model = fit(&m, &[N, N, D, D], &TrainConfig::default()).unwrap();
        assert!(!model.is_degenerate());
        let lo = model.predict_proba(&[-1.0]).unwrap();
        let hi = model.predict_proba(&[1.0]).unwrap();
        assert!(lo < 0.5 && 0.5 < hi, "{lo} {hi}");
    }

    #[test]
    fn single_class_is_laplace_constant() {
        let m = vec![vec![1.0], vec![2.0], vec![3.0]];
        let model = fit(&m, &[N, N, N], &TrainConfig::default()).unwrap();
        assert_eq!(model.degenerate, Some(0.2));
        assert_eq!(model.predict_proba(&[100.0]).unwrap(), 0.2);
        let model = fit(&m, &[D, D, D], &TrainConfig::default()).unwrap();
        assert_eq!(model.degenerate, Some(0.8));
        assert_eq!(ModelSnapshot::constant(1, 0, 0).degenerate, Some(0.5));
    }

    #[test]
    fn empty_training_set() {
        assert!(matches!(
            fit(&[], &[], &TrainConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    fn hand_model(weights: Vec<f64>, intercept: f64) -> ModelSnapshot {
        let k = weights.len();
        ModelSnapshot {
            feature_subset: FeatureSubset {
                indices: (0..k).collect(),
                merit: 0.0,
            },
            standardization: StandardizationParams {
                means: vec![0.0; k],
                std_devs: vec![1.0; k],
            },
            weights,
            intercept,
            trained_on: 0,
            degenerate: None,
            n_features: k,
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(
            hand_model(vec![0.0, 0.0], 0.0)
                .predict_proba(&[3.0, -7.0])
                .unwrap(),
            0.5
        );
        assert!(hand_model(vec![0.0], 20.0).predict_proba(&[1.0]).unwrap() > 0.999999);
        let p = hand_model(vec![1.0], 0.0).predict_proba(&[0.5]).unwrap();
        assert!((p - 1.0 / (1.0 + (-0.5f64).exp())).abs() < 1e-15);
        assert!((p - 0.622_459_331_201_854_6).abs() < 1e-12);
        assert!(matches!(
            hand_model(vec![1.0], 0.0).predict_proba(&[0.5, 1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.5, 0.5), Prediction::Positive);
        assert_eq!(classify(0.49, 0.5), Prediction::Negative);
        assert_eq!(classify(0.99, 0.5), Prediction::Positive);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(-1000.0)).abs() < 1e-300);
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn strong_regularization_gives_class_prior() {
        let m: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, (i * i % 7) as f64])
            .collect();
        let labels: Vec<Label> = (0..20)
            .map(|i| Label::from_defective(i % 4 == 0 || i > 15))
            .collect();
        let config = TrainConfig {
            lambda: 1e6,
            ..TrainConfig::default()
        };
        let model = fit(&m, &labels, &config).unwrap();
        assert!(
            model.weights.iter().all(|w| w.abs() < 1e-6),
            "{:?}",
            model.weights
        );
        let prior = labels.iter().filter(|l| l.is_defective()).count() as f64 / 20.0;
        for row in &m {
            assert!((model.predict_proba(row).unwrap() - prior).abs() < 1e-3);
        }
    }

    #[test]
    fn reuses_given_subset() {
        let m: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64), 1.0]).collect();
        let labels: Vec<Label> = (0..10).map(|i| Label::from_defective(i >= 5)).collect();
        let subset = FeatureSubset {
            indices: vec![1, 2],
            merit: 0.0,
        };
        let (model, _) =
            fit_detailed(&m, &labels, &TrainConfig::default(), Some(&subset), false).unwrap();
        assert_eq!(model.feature_subset.indices, vec![1, 2]);
        assert_eq!(model.weights.len(), 2);
        let bad = FeatureSubset {
            indices: vec![5],
            merit: 0.0,
        };
        assert!(fit_detailed(&m, &labels, &TrainConfig::default(), Some(&bad), false).is_err());
    }
}
