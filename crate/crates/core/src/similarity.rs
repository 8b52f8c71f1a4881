//! Requirement-to-requirement similarity.
//!
//! The default measure is the Pearson correlation of two binary relation
//! columns over every stakeholder (the phi coefficient). Restricting a 0/1
//! column to co-raters would leave two all-ones vectors, so the co-rated
//! form is only offered on rating values (`PearsonRatings`). Cosine and
//! Jaccard are available as comparators.
//!
//! Undefined similarities (zero variance or norm, fewer than two co-raters,
//! empty union) are reported as 0.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{RatingMatrix, RelationMatrix, RequirementId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMethod {
    /// Pearson over all stakeholders on the 0/1 relation columns.
    #[default]
    PearsonBinary,
    /// Pearson over co-rating stakeholders on the rating values.
    PearsonRatings,
    /// Cosine of the 0/1 relation columns.
    Cosine,
    /// `|A ∩ B| / |A ∪ B|` of the rater sets (1 - Jaccard distance).
    Jaccard,
}

impl SimilarityMethod {
    pub const ALL: [SimilarityMethod; 4] = [
        SimilarityMethod::PearsonBinary,
        SimilarityMethod::PearsonRatings,
        SimilarityMethod::Cosine,
        SimilarityMethod::Jaccard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMethod::PearsonBinary => "pearson_binary",
            SimilarityMethod::PearsonRatings => "pearson_ratings",
            SimilarityMethod::Cosine => "cosine",
            SimilarityMethod::Jaccard => "jaccard",
        }
    }

    /// Closed range every similarity of this method lies in.
    pub fn range(self) -> (f64, f64) {
        match self {
            SimilarityMethod::Jaccard => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for SimilarityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SimilarityMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown similarity method `{s}` (expected one of pearson_binary, pearson_ratings, cosine, jaccard)"))
    }
}

fn same_len<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Pearson correlation over paired samples. Returns 0 for fewer than two
/// pairs or when either side has zero variance.
fn correlation(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let (mut n, mut sum_a, mut sum_b) = (0usize, 0.0, 0.0);
    for (a, b) in pairs.clone() {
        n += 1;
        sum_a += a;
        sum_b += b;
    }
    if n < 2 {
        return 0.0;
    }
    let (mean_a, mean_b) = (sum_a / n as f64, sum_b / n as f64);
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        let (da, db) = (a - mean_a, b - mean_b);
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    // sqrt of the product keeps sim(x, x) at exactly 1.
    (cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of two equally long vectors over all entries.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    Ok(correlation(a.iter().copied().zip(b.iter().copied())))
}

/// Pearson correlation restricted to entries present in both vectors, with
/// means taken over that co-rated set.
pub fn pearson_co_rated(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64> {
    same_len(a, b)?;
    Ok(correlation(a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?)))))
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a, b)?;
    let (mut dot, mut norm_a, mut norm_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (norm_a * norm_b).sqrt()).clamp(-1.0, 1.0))
}

/// Jaccard similarity of two presence vectors; 0 when both are empty.
pub fn jaccard(a: &[bool], b: &[bool]) -> Result<f64> {
    same_len(a, b)?;
    let (mut both, mut either) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        both += (x && y) as usize;
        either += (x || y) as usize;
    }
    if either == 0 {
        return Ok(0.0);
    }
    Ok(both as f64 / either as f64)
}

/// Dense symmetric requirement x requirement similarity matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    method: SimilarityMethod,
    requirements: Vec<RequirementId>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from explicit values (row-major, `n * n`). Labels must
    /// be strictly ascending and the values symmetric.
    pub fn from_parts(method: SimilarityMethod, requirements: Vec<RequirementId>, values: Vec<f64>) -> Result<Self> {
        let n = requirements.len();
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n * n,
            });
        }
        if requirements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(
                "similarity labels must be strictly ascending".into(),
            ));
        }
        for i in 0..n {
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidParams(format!("similarity not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            method,
            requirements,
            values,
        })
    }

    pub fn method(&self) -> SimilarityMethod {
        self.method
    }

    /// Row/column labels in ascending id order.
    pub fn requirements(&self) -> &[RequirementId] {
        &self.requirements
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    pub fn index_of(&self, id: &RequirementId) -> Option<usize> {
        self.requirements.binary_search(id).ok()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.requirements.len() + j]
    }

    pub fn get(&self, a: &RequirementId, b: &RequirementId) -> Option<f64> {
        Some(self.at(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.requirements.len();
        &self.values[i * n..(i + 1) * n]
    }
}

enum Columns {
    Binary(Vec<Vec<f64>>),
    Presence(Vec<Vec<bool>>),
    Ratings(Vec<Vec<Option<f64>>>),
}

/// Pairwise similarity of every requirement column.
///
/// Rows are the stakeholder universe of `relation`; binary columns come from
/// `relation` and rating columns from `ratings`. Pairs are evaluated in
/// parallel; only the upper triangle is computed and mirrored, so the
/// result is exactly symmetric and independent of scheduling.
pub fn similarity_matrix(
    ratings: &RatingMatrix,
    relation: &RelationMatrix,
    method: SimilarityMethod,
) -> Result<SimilarityMatrix> {
    let requirements: Vec<RequirementId> = relation.requirements().union(ratings.requirements()).cloned().collect();
    let n = requirements.len();
    if n < 2 {
        return Err(Error::TooFewRequirements(n));
    }
    let stakeholders: Vec<_> = relation.stakeholders().union(ratings.stakeholders()).collect();

    let columns = match method {
        SimilarityMethod::PearsonBinary | SimilarityMethod::Cosine => Columns::Binary(
            requirements
                .iter()
                .map(|q| stakeholders.iter().map(|s| relation.indicator(s, q)).collect())
                .collect(),
        ),
        SimilarityMethod::Jaccard => Columns::Presence(
            requirements
                .iter()
                .map(|q| stakeholders.iter().map(|s| relation.contains(s, q)).collect())
                .collect(),
        ),
        SimilarityMethod::PearsonRatings => Columns::Ratings(
            requirements
                .iter()
                .map(|q| stakeholders.iter().map(|s| ratings.value(s, q)).collect())
                .collect(),
        ),
    };

    let pair = |i: usize, j: usize| -> f64 {
        let sim = match &columns {
            Columns::Binary(cols) if method == SimilarityMethod::Cosine => cosine(&cols[i], &cols[j]),
            Columns::Binary(cols) => pearson(&cols[i], &cols[j]),
            Columns::Presence(cols) => jaccard(&cols[i], &cols[j]),
            Columns::Ratings(cols) => pearson_co_rated(&cols[i], &cols[j]),
        };
        sim.expect("columns share the stakeholder universe")
    };

    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| pair(i, j)).collect())
        .collect();

    let mut values = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, sim) in row.into_iter().enumerate() {
            let j = i + offset;
            values[i * n + j] = sim;
            values[j * n + i] = sim;
        }
    }

    Ok(SimilarityMatrix {
        method,
        requirements,
        values,
    })
}
