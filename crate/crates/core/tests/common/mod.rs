//! Test-only reference implementations, kept independent of the library code.
#![allow(dead_code)]

use overlook_sim::Label;
use rand::Rng;

pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<Label> {
    loop {
        let labels: Vec<Label> = (0..n)
            .map(|_| Label::from_defective(rng.random_bool(0.4)))
            .collect();
        let pos = labels.iter().filter(|l| l.is_defective()).count();
        if pos > 0 && pos < n {
            return labels;
        }
    }
}

/// O(N^2) pair enumeration; ties count one half.
pub fn brute_force_auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, li) in labels.iter().enumerate() {
        if !li.is_defective() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_defective() {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                total += 1.0;
            } else if scores[i] == scores[j] {
                total += 0.5;
            }
        }
    }
    (pairs > 0).then(|| total / pairs as f64)
}

/// `r = (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2))`, 0 for constant inputs.
pub fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    if den <= 1e-12 {
        0.0
    } else {
        (n * sxy - sx * sy) / den
    }
}

/// Absolute correlations computed column-by-column with the textbook formula.
fn correlations(matrix: &[Vec<f64>], labels: &[Label]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = matrix[0].len();
    let col = |j: usize| -> Vec<f64> { matrix.iter().map(|r| r[j]).collect() };
    let y: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
    let constant = |c: &[f64]| c.iter().all(|v| *v == c[0]);
    let corr = |a: &[f64], b: &[f64]| {
        if constant(a) || constant(b) {
            0.0
        } else {
            textbook_pearson(a, b).abs().min(1.0)
        }
    };
    let rcf = (0..k).map(|j| corr(&col(j), &y)).collect();
    let rff = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { 1.0 } else { corr(&col(i), &col(j)) })
                .collect()
        })
        .collect();
    (rcf, rff)
}

fn merit_from(rcf: &[f64], rff: &[Vec<f64>], subset: &[usize]) -> f64 {
    let num: f64 = subset.iter().map(|&j| rcf[j]).sum();
    let mut pair_sum = 0.0;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            pair_sum += rff[i][j];
        }
    }
    let den = (subset.len() as f64 + 2.0 * pair_sum).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// CFS merit `sum(r_cf) / sqrt(k + 2 * sum_{i<j} r_ff)` of one subset.
pub fn merit_of(matrix: &[Vec<f64>], labels: &[Label], subset: &[usize]) -> f64 {
    let (rcf, rff) = correlations(matrix, labels);
    merit_from(&rcf, &rff, subset)
}

/// Best CFS merit over every nonempty subset of at most `max_size` features.
pub fn exhaustive_best_merit(
    matrix: &[Vec<f64>],
    labels: &[Label],
    max_size: usize,
) -> (f64, Vec<usize>) {
    let k = matrix[0].len();
    let (rcf, rff) = correlations(matrix, labels);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 1u32..(1 << k) {
        let subset: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        if subset.len() > max_size {
            continue;
        }
        let merit = merit_from(&rcf, &rff, &subset);
        if merit > best.0 {
            best = (merit, subset);
        }
    }
    best
}

/// Random features with a few shared latent factors so that redundancy
/// between features actually matters.
pub fn random_selection_problem<R: Rng>(
    rng: &mut R,
    n: usize,
    n_features: usize,
) -> (Vec<Vec<f64>>, Vec<Label>) {
    let labels = random_labels(rng, n);
    let loadings: Vec<(f64, f64, f64)> = (0..n_features)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..2.0),
            )
        })
        .collect();
    let matrix = labels
        .iter()
        .map(|l| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0) + l.as_f64();
            loadings
                .iter()
                .map(|&(la, lb, noise)| la * a + lb * b + noise * rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    (matrix, labels)
}
