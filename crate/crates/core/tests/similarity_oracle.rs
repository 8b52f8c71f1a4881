//! Similarity measures against brute-force textbook formulas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saffron_core::domain::{build_relation_matrix, Provenance, RatingMatrix, RatingScale, RequirementId};
use saffron_core::similarity::{cosine, jaccard, pearson, pearson_co_rated, similarity_matrix, SimilarityMethod};

const N: usize = 10;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// r = sum (x - mx)(y - my) / (sqrt(sum (x - mx)^2) * sqrt(sum (y - my)^2))
fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    if sx == 0.0 || sy == 0.0 {
        0.0
    } else {
        num / (sx * sy)
    }
}

fn cosine_oracle(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx * ny)
    }
}

fn jaccard_oracle(x: &[bool], y: &[bool]) -> f64 {
    let a: Vec<usize> = (0..x.len()).filter(|&i| x[i]).collect();
    let b: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let inter = a.iter().filter(|i| b.contains(i)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Random 10 x 10 matrix; `cells[s][q]` is `Some(rating)` when present.
fn random_cells(rng: &mut ChaCha8Rng) -> Vec<Vec<Option<f64>>> {
    let density = rng.random_range(0.2..0.95);
    (0..N)
        .map(|_| {
            (0..N)
                .map(|_| rng.random_bool(density).then(|| rng.random_range(0..=5) as f64))
                .collect()
        })
        .collect()
}

fn matrix(cells: &[Vec<Option<f64>>]) -> RatingMatrix {
    let mut m = RatingMatrix::new(RatingScale::default());
    for s in 0..N {
        m.add_stakeholder(format!("s{s}").into());
    }
    for q in 0..N {
        m.add_requirement(format!("q{q}").into());
    }
    for (s, row) in cells.iter().enumerate() {
        for (q, v) in row.iter().enumerate() {
            if let Some(v) = v {
                m.insert(format!("s{s}").into(), format!("q{q}").into(), *v, Provenance::Elicited)
                    .unwrap();
            }
        }
    }
    m
}

fn column<T>(cells: &[Vec<Option<f64>>], q: usize, f: impl Fn(Option<f64>) -> T) -> Vec<T> {
    cells.iter().map(|row| f(row[q])).collect()
}

#[test]
fn matrices_match_pairwise_oracles_over_200_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let cells = random_cells(&mut rng);
        let ratings = matrix(&cells);
        let relation = build_relation_matrix(&ratings);
        for method in SimilarityMethod::ALL {
            let sim = similarity_matrix(&ratings, &relation, method).unwrap();
            for a in 0..N {
                for b in 0..N {
                    let expected = match method {
                        SimilarityMethod::PearsonBinary => pearson_oracle(
                            &column(&cells, a, |v| v.is_some() as u8 as f64),
                            &column(&cells, b, |v| v.is_some() as u8 as f64),
                        ),
                        SimilarityMethod::Cosine => cosine_oracle(
                            &column(&cells, a, |v| v.is_some() as u8 as f64),
                            &column(&cells, b, |v| v.is_some() as u8 as f64),
                        ),
                        SimilarityMethod::Jaccard => {
                            jaccard_oracle(&column(&cells, a, |v| v.is_some()), &column(&cells, b, |v| v.is_some()))
                        }
                        SimilarityMethod::PearsonRatings => {
                            let (x, y): (Vec<f64>, Vec<f64>) =
                                (0..N).filter_map(|s| Some((cells[s][a]?, cells[s][b]?))).unzip();
                            pearson_oracle(&x, &y)
                        }
                    };
                    let qa = RequirementId::from(format!("q{a}"));
                    let qb = RequirementId::from(format!("q{b}"));
                    let got = sim.get(&qa, &qb).unwrap();
                    assert!(
                        (got - expected).abs() <= 1e-12,
                        "{method} ({a},{b}): {got} vs {expected}"
                    );
                }
            }
        }
    }
}

#[test]
fn dense_rating_vectors_match_oracles_over_200_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let x: Vec<f64> = (0..N).map(|_| rng.random_range(0.0..5.0)).collect();
        let y: Vec<f64> = (0..N).map(|_| rng.random_range(0.0..5.0)).collect();
        assert!((pearson(&x, &y).unwrap() - pearson_oracle(&x, &y)).abs() <= 1e-12);
        assert!((cosine(&x, &y).unwrap() - cosine_oracle(&x, &y)).abs() <= 1e-12);
        let bx: Vec<bool> = x.iter().map(|v| *v > 2.5).collect();
        let by: Vec<bool> = y.iter().map(|v| *v > 2.5).collect();
        assert_eq!(jaccard(&bx, &by).unwrap(), jaccard_oracle(&bx, &by));
        let ox: Vec<Option<f64>> = x.iter().map(|&v| (v > 1.0).then_some(v)).collect();
        let oy: Vec<Option<f64>> = y.iter().map(|&v| (v > 1.0).then_some(v)).collect();
        let (cx, cy): (Vec<f64>, Vec<f64>) = ox.iter().zip(&oy).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
        assert!((pearson_co_rated(&ox, &oy).unwrap() - pearson_oracle(&cx, &cy)).abs() <= 1e-12);
    }
}

#[test]
fn pearson_ignores_positive_affine_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..200 {
        let x1: Vec<f64> = (0..N).map(|_| rng.random_range(0.0..5.0)).collect();
        let x2: Vec<f64> = (0..N).map(|_| rng.random_range(0.0..5.0)).collect();
        let shifted: Vec<f64> = x2.iter().map(|v| 2.0 * v + 3.0).collect();
        let a = pearson(&x1, &x2).unwrap();
        let b = pearson(&x1, &shifted).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}
