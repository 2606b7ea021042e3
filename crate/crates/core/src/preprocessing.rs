//! Feature standardization and correlation-based feature selection (CFS).

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::Label;

/// Consecutive non-improving expansions after which best-first search stops.
pub const CFS_MAX_STALE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    /// Strictly positive; zero-variance columns are mapped to 1.
    pub std_devs: Vec<f64>,
}

/// Columnwise sample mean and sample standard deviation (divisor n - 1).
pub fn standardize_fit(matrix: &[Vec<f64>]) -> Result<StandardizationParams> {
    let first = matrix.first().ok_or(Error::EmptyInput("matrix"))?;
    let n_features = first.len();
    for row in matrix {
        if row.len() != n_features {
            return Err(Error::LengthMismatch {
                expected: n_features,
                actual: row.len(),
            });
        }
    }
    let n = matrix.len() as f64;
    let mut means = vec![0.0; n_features];
    for row in matrix {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut std_devs = vec![0.0; n_features];
    for row in matrix {
        for ((s, v), m) in std_devs.iter_mut().zip(row).zip(&means) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut std_devs {
        let sd = if matrix.len() > 1 {
            (*s / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        *s = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    }
    Ok(StandardizationParams { means, std_devs })
}

impl StandardizationParams {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_len(features)?;
        Ok(features
            .iter()
            .zip(&self.means)
            .zip(&self.std_devs)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn inverse(&self, standardized: &[f64]) -> Result<Vec<f64>> {
        self.check_len(standardized)?;
        Ok(standardized
            .iter()
            .zip(&self.means)
            .zip(&self.std_devs)
            .map(|((z, m), s)| z * s + m)
            .collect())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.means.len() {
            return Err(Error::LengthMismatch {
                expected: self.means.len(),
                actual: v.len(),
            });
        }
        Ok(())
    }
}

pub fn standardize_apply(params: &StandardizationParams, features: &[f64]) -> Result<Vec<f64>> {
    params.apply(features)
}

/// Pearson correlation; 0 when either input is constant.
fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of `x` with the labels encoded as 0/1.
pub fn point_biserial_correlation(x: &[f64], y: &[Label]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!("correlation needs at least 2 points, got {}", x.len()),
        });
    }
    let y: Vec<f64> = y.iter().map(|l| l.as_f64()).collect();
    Ok(pearson(x, &y))
}

/// CFS merit `k r_cf / sqrt(k + k (k - 1) r_ff)` of a `k`-feature subset with
/// mean absolute feature-class correlation `r_cf` and mean absolute
/// feature-feature correlation `r_ff`.
pub fn cfs_merit(
    k: usize,
    mean_feature_class_corr: f64,
    mean_feature_feature_corr: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "subset size must be positive".into(),
        });
    }
    let k = k as f64;
    let denom = k + k * (k - 1.0) * mean_feature_feature_corr;
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(k * mean_feature_class_corr / denom.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSubset {
    /// Strictly increasing feature positions.
    pub indices: Vec<usize>,
    pub merit: f64,
}

impl FeatureSubset {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Every feature, with merit left undefined (NaN).
    pub fn all(n_features: usize) -> Self {
        Self {
            indices: (0..n_features).collect(),
            merit: f64::NAN,
        }
    }
}

/// Absolute correlation tables consumed by the subset search.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    pub class_corr: Vec<f64>,
    /// Row-major `n_features x n_features`, unit diagonal.
    pub feature_corr: Vec<f64>,
    pub n_features: usize,
}

impl CorrelationTable {
    pub fn compute(matrix: &[Vec<f64>], labels: &[Label]) -> Result<Self> {
        check_selection_input(matrix, labels)?;
        let n_features = matrix[0].len();
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|j| matrix.iter().map(|row| row[j]).collect())
            .collect();
        let y: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
        let class_corr = columns.iter().map(|c| pearson(c, &y).abs()).collect();
        let mut feature_corr = vec![1.0; n_features * n_features];
        for i in 0..n_features {
            for j in (i + 1)..n_features {
                let r = pearson(&columns[i], &columns[j]).abs();
                feature_corr[i * n_features + j] = r;
                feature_corr[j * n_features + i] = r;
            }
        }
        Ok(Self {
            class_corr,
            feature_corr,
            n_features,
        })
    }

    pub fn feature_pair(&self, i: usize, j: usize) -> f64 {
        self.feature_corr[i * self.n_features + j]
    }

    /// Merit of a nonempty subset of feature positions.
    pub fn merit(&self, subset: &[usize]) -> f64 {
        let k = subset.len();
        let mean_cf = subset.iter().map(|&j| self.class_corr[j]).sum::<f64>() / k as f64;
        let mean_ff = if k > 1 {
            let mut sum = 0.0;
            for (a, &i) in subset.iter().enumerate() {
                for &j in &subset[a + 1..] {
                    sum += self.feature_pair(i, j);
                }
            }
            sum / (k * (k - 1) / 2) as f64
        } else {
            0.0
        };
        cfs_merit(k, mean_cf, mean_ff).unwrap_or(0.0)
    }
}

fn check_selection_input(matrix: &[Vec<f64>], labels: &[Label]) -> Result<()> {
    if matrix.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: matrix.len(),
            actual: labels.len(),
        });
    }
    if matrix.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "matrix",
            reason: format!(
                "feature selection needs at least 2 records, got {}",
                matrix.len()
            ),
        });
    }
    let n_features = matrix[0].len();
    if n_features == 0 {
        return Err(Error::EmptyInput("feature columns"));
    }
    if let Some(row) = matrix.iter().find(|r| r.len() != n_features) {
        return Err(Error::LengthMismatch {
            expected: n_features,
            actual: row.len(),
        });
    }
    let defective = labels.iter().filter(|l| l.is_defective()).count();
    if defective == 0 || defective == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

struct Node {
    subset: Vec<usize>,
    merit: f64,
}

/// Higher merit first; equal merit prefers the lexicographically smaller subset.
fn node_order(a: &Node, b: &Node) -> Ordering {
    b.merit
        .total_cmp(&a.merit)
        .then_with(|| a.subset.cmp(&b.subset))
}

/// Forward best-first search over feature subsets maximizing the CFS merit.
///
/// The open list keeps every evaluated subset; the best one is expanded by
/// adding each absent feature in turn. The search stops once
/// [`CFS_MAX_STALE`] consecutive expansions fail to improve the best merit,
/// or when the open list is exhausted.
pub fn select_features(matrix: &[Vec<f64>], labels: &[Label]) -> Result<FeatureSubset> {
    let table = CorrelationTable::compute(matrix, labels)?;
    Ok(best_first_search(&table))
}

pub fn best_first_search(table: &CorrelationTable) -> FeatureSubset {
    let n = table.n_features;
    let mut open: Vec<Node> = vec![Node {
        subset: Vec::new(),
        merit: 0.0,
    }];
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    visited.insert(Vec::new());
    let mut best: Option<Node> = None;
    let mut stale = 0;

    while stale < CFS_MAX_STALE {
        // Pop the most promising node.
        let Some(pos) = open
            .iter()
            .enumerate()
            .min_by(|a, b| node_order(a.1, b.1))
            .map(|(i, _)| i)
        else {
            break;
        };
        let node = open.swap_remove(pos);

        let mut improved = false;
        for f in 0..n {
            if node.subset.contains(&f) {
                continue;
            }
            let mut child = node.subset.clone();
            let at = child.partition_point(|&x| x < f);
            child.insert(at, f);
            if !visited.insert(child.clone()) {
                continue;
            }
            let merit = table.merit(&child);
            let candidate = Node {
                subset: child,
                merit,
            };
            match &best {
                Some(b) if merit > b.merit => {
                    improved = true;
                    best = Some(Node {
                        subset: candidate.subset.clone(),
                        merit,
                    });
                }
                Some(b) if merit == b.merit && candidate.subset < b.subset => {
                    best = Some(Node {
                        subset: candidate.subset.clone(),
                        merit,
                    });
                }
                None => {
                    improved = true;
                    best = Some(Node {
                        subset: candidate.subset.clone(),
                        merit,
                    });
                }
                _ => {}
            }
            open.push(candidate);
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
        }
    }

    let best = best.unwrap_or(Node {
        subset: vec![0],
        merit: 0.0,
    });
    FeatureSubset {
        indices: best.subset,
        merit: best.merit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Label::{Defective as D, NonDefective as N};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn fit_two_points() {
        let p = standardize_fit(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(p.means, vec![2.0]);
        assert!(close(p.std_devs[0], 2f64.sqrt(), 1e-15));
    }

    #[test]
    fn fit_constant_column() {
        let p = standardize_fit(&[vec![5.0], vec![5.0], vec![5.0]]).unwrap();
        assert_eq!(p.means, vec![5.0]);
        assert_eq!(p.std_devs, vec![1.0]);
    }

    #[test]
    fn fit_single_row_and_empty() {
        let p = standardize_fit(&[vec![4.0, -1.0]]).unwrap();
        assert_eq!(p.std_devs, vec![1.0, 1.0]);
        assert!(matches!(standardize_fit(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn apply_examples() {
        let p = StandardizationParams {
            means: vec![2.0],
            std_devs: vec![2.0],
        };
        assert_eq!(p.apply(&[4.0]).unwrap(), vec![1.0]);
        assert_eq!(p.apply(&[2.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            standardize_apply(&p, &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn correlation_examples() {
        assert!(close(
            point_biserial_correlation(&[0.0, 1.0], &[N, D]).unwrap(),
            1.0,
            1e-15
        ));
        assert_eq!(
            point_biserial_correlation(&[3.0, 3.0, 3.0], &[N, D, N]).unwrap(),
            0.0
        );
        assert_eq!(
            point_biserial_correlation(&[1.0, 2.0], &[D, D]).unwrap(),
            0.0
        );
        assert!(point_biserial_correlation(&[1.0], &[D]).is_err());
        assert!(point_biserial_correlation(&[1.0, 2.0], &[D]).is_err());
    }

    #[test]
    fn merit_examples() {
        assert!(close(cfs_merit(1, 0.6, 0.9).unwrap(), 0.6, 1e-15));
        assert!(close(
            cfs_merit(2, 0.5, 0.0).unwrap(),
            1.0 / 2f64.sqrt(),
            1e-15
        ));
        assert!(close(cfs_merit(2, 0.5, 1.0).unwrap(), 0.5, 1e-15));
        assert!(cfs_merit(0, 0.5, 0.5).is_err());
    }

    #[test]
    fn minimal_two_by_two() {
        // Feature 1 is perfectly aligned with the labels, feature 0 is constant.
        let m = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let s = select_features(&m, &[N, D]).unwrap();
        assert_eq!(s.indices, vec![1]);
        // Equal |correlation| picks the lower index.
        let m = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let s = select_features(&m, &[N, D]).unwrap();
        assert_eq!(s.indices, vec![0]);
    }

    #[test]
    fn duplicate_columns_collapse_to_one() {
        let col: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64).collect();
        let labels: Vec<Label> = col
            .iter()
            .map(|&v| Label::from_defective(v > 5.0))
            .collect();
        let m: Vec<Vec<f64>> = col.iter().map(|&v| vec![v; 4]).collect();
        let s = select_features(&m, &labels).unwrap();
        assert_eq!(s.indices, vec![0]);
    }

    #[test]
    fn selection_errors() {
        assert!(matches!(
            select_features(&[vec![1.0], vec![2.0]], &[D, D]),
            Err(Error::SingleClass)
        ));
        assert!(select_features(&[vec![1.0]], &[D]).is_err());
    }
}
