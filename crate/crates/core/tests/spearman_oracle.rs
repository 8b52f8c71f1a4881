//! Spearman correlation against a counting-based definition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saffron_core::domain::RequirementId;
use saffron_core::evaluation::{spearman, spearman_scores};
use saffron_core::stakerare::RankedList;

/// Rank of element i = 1 + (#strictly greater) + (#equal others) / 2, i.e.
/// the mean of the positions its tie group occupies.
fn rank_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let greater = v.iter().filter(|&&y| y > x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson_def(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn spearman_def(a: &[f64], b: &[f64]) -> f64 {
    pearson_def(&rank_by_counting(a), &rank_by_counting(b))
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut tail in permutations(rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn list(values: &[f64]) -> RankedList {
    RankedList::from_importance(
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (RequirementId::from(format!("q{i}")), v))
            .collect(),
    )
}

#[test]
fn all_120_permutations_of_five_match_exactly() {
    let base = [5.0, 4.0, 3.0, 2.0, 1.0];
    let perms = permutations((0..5).collect());
    assert_eq!(perms.len(), 120);
    for p in perms {
        let other: Vec<f64> = p.iter().map(|&i| base[i]).collect();
        let got = spearman(&list(&base), &list(&other)).unwrap();
        // without ties rho = 1 - 6 sum d^2 / (n (n^2 - 1)); written over one
        // integer denominator, a single division gives the correctly rounded value
        let d2: i64 = rank_by_counting(&base)
            .iter()
            .zip(rank_by_counting(&other))
            .map(|(a, b)| ((a - b) as i64).pow(2))
            .sum();
        let closed = (120 - 6 * d2) as f64 / 120.0;
        assert_eq!(got, closed, "{p:?}");
        assert!((got - spearman_def(&base, &other)).abs() <= 1e-15, "{p:?}");
    }
}

#[test]
fn fifty_random_tied_cases_within_1e_12() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.random_range(4..=12);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if constant(&a) || constant(&b) {
            continue;
        }
        let got = spearman(&list(&a), &list(&b)).unwrap();
        let expected = spearman_def(&a, &b);
        assert!((got - expected).abs() <= 1e-12, "{a:?} {b:?}: {got} vs {expected}");
        assert!((spearman_scores(&a, &b).unwrap() - expected).abs() <= 1e-12);
        checked += 1;
    }
}

#[test]
fn one_tied_pair() {
    let a = [3.0, 2.0, 2.0, 1.0];
    let b = [4.0, 3.0, 1.0, 2.0];
    let got = spearman(&list(&a), &list(&b)).unwrap();
    assert!((got - spearman_def(&a, &b)).abs() <= 1e-12);
}
