//! Evaluation metrics and the repeated sub-sampling experiment harness.

mod experiment;
mod synthetic;

pub use experiment::{run_experiment, ExperimentReport, ExperimentSetting, RepeatOutcome};
pub use synthetic::{generate_synthetic_dataset, Dataset, SyntheticConfig};

use std::collections::BTreeMap;

use crate::domain::{CellKey, RequirementId};
use crate::error::{Error, Result};
use crate::stakerare::RankedList;

/// 1-based ranks, highest value first, with tied values sharing the mean of
/// the positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

fn pearson_of(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - mean_a) * (y - mean_b);
        var_a += (x - mean_a) * (x - mean_a);
        var_b += (y - mean_b) * (y - mean_b);
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    cov / (var_a * var_b).sqrt()
}

/// Spearman correlation of two paired score vectors (Pearson correlation of
/// their average ranks). Returns 0 when either side is constant.
pub fn spearman_scores(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(pearson_of(&average_ranks(a), &average_ranks(b)))
}

/// Spearman correlation between two rankings of the same requirements,
/// computed on importance values so that equal importances tie.
pub fn spearman(a: &RankedList, b: &RankedList) -> Result<f64> {
    let (ia, ib) = (a.importance(), b.importance());
    if ia.len() != ib.len() || ia.keys().ne(ib.keys()) {
        return Err(Error::SetMismatch(format!(
            "rankings cover {} and {} requirements with different ids",
            ia.len(),
            ib.len()
        )));
    }
    let va: Vec<f64> = ia.values().copied().collect();
    let vb: Vec<f64> = ib.values().copied().collect();
    spearman_scores(&va, &vb)
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptySet);
    }
    let sum: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// RMSE over two cell maps that must cover the same cells.
pub fn rmse_cells(predicted: &BTreeMap<CellKey, f64>, actual: &BTreeMap<CellKey, f64>) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.keys().ne(actual.keys()) {
        return Err(Error::SetMismatch(format!(
            "{} predicted cells vs {} actual cells",
            predicted.len(),
            actual.len()
        )));
    }
    let p: Vec<f64> = predicted.values().copied().collect();
    let a: Vec<f64> = actual.values().copied().collect();
    rmse(&p, &a)
}

/// Percentage fewer stakeholders contacted than the baseline, unrounded.
pub fn interaction_reduction(baseline_users: usize, saffron_users: usize) -> Result<f64> {
    if baseline_users == 0 || saffron_users > baseline_users {
        return Err(Error::InvalidBaseline {
            baseline: baseline_users,
            saffron: saffron_users,
        });
    }
    Ok(100.0 * (baseline_users - saffron_users) as f64 / baseline_users as f64)
}

/// Rounds a percentage to one decimal place for reporting.
pub fn round_one_decimal(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

/// Requirement ids shared by two rankings, in ascending order.
pub fn common_requirements(a: &RankedList, b: &RankedList) -> Vec<RequirementId> {
    let ib = b.importance();
    a.importance().into_keys().filter(|k| ib.contains_key(k)).collect()
}

/// Mean and (population) variance, summed in input order.
pub fn mean_and_variance(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var))
}
