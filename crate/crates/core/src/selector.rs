//! Picks which missing (stakeholder, new requirement) cells get a predicted
//! rating.
//!
//! The likelihood that stakeholder `u` would rate new requirement `i` is the
//! similarity-weighted share of `i`'s neighbours that `u` has rated:
//!
//! ```text
//! P(u, i) = sum_N sim(i, N) * rated(u, N) / sum_N |sim(i, N)|
//! ```
//!
//! where `N` ranges over the already elicited requirements with positive
//! similarity to `i` (optionally only the `top_k` most similar) and
//! `rated` is the 0/1 relation indicator.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{Project, RelationMatrix, RequirementId, RequirementStatus, StakeholderId};
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodScore {
    pub stakeholder_id: StakeholderId,
    pub requirement_id: RequirementId,
    pub score: f64,
}

/// Descending score, then ascending (stakeholder, requirement).
fn plan_order(a: &LikelihoodScore, b: &LikelihoodScore) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.stakeholder_id.cmp(&b.stakeholder_id))
        .then_with(|| a.requirement_id.cmp(&b.requirement_id))
}

/// Scores missing cells of new requirements against the elicited ones.
#[derive(Debug)]
pub struct Selector<'a> {
    similarity: &'a SimilarityMatrix,
    relation: &'a RelationMatrix,
    elicited: BTreeSet<RequirementId>,
    new: BTreeSet<RequirementId>,
    stakeholders: BTreeSet<StakeholderId>,
    top_k: Option<usize>,
}

impl<'a> Selector<'a> {
    /// `top_k = None` keeps every positively similar elicited requirement.
    pub fn new(
        project: &Project,
        similarity: &'a SimilarityMatrix,
        relation: &'a RelationMatrix,
        top_k: Option<usize>,
    ) -> Self {
        Self {
            similarity,
            relation,
            elicited: project.requirement_ids_with(RequirementStatus::Elicited),
            new: project.requirement_ids_with(RequirementStatus::New),
            stakeholders: project.stakeholder_ids(),
            top_k,
        }
    }

    /// Positively similar elicited requirements of `requirement`, most
    /// similar first (ties by id), truncated to `top_k`.
    pub fn neighbors(&self, requirement: &RequirementId) -> Result<Vec<(RequirementId, f64)>> {
        let row = self
            .similarity
            .index_of(requirement)
            .ok_or_else(|| Error::UnknownRequirement(requirement.to_string()))?;
        let mut neighbors: Vec<(RequirementId, f64)> = self
            .similarity
            .requirements()
            .iter()
            .zip(self.similarity.row(row))
            .filter(|(id, &sim)| sim > 0.0 && *id != requirement && self.elicited.contains(*id))
            .map(|(id, &sim)| (id.clone(), sim))
            .collect();
        neighbors.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(k) = self.top_k {
            neighbors.truncate(k);
        }
        Ok(neighbors)
    }

    fn check_target(&self, requirement: &RequirementId) -> Result<()> {
        if self.similarity.index_of(requirement).is_none() {
            return Err(Error::UnknownRequirement(requirement.to_string()));
        }
        if !self.new.contains(requirement) {
            return Err(Error::NotNewRequirement(requirement.to_string()));
        }
        Ok(())
    }

    fn weighted_share(&self, stakeholder: &StakeholderId, neighbors: &[(RequirementId, f64)]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (n, sim) in neighbors {
            num += sim * self.relation.indicator(stakeholder, n);
            den += sim.abs();
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Likelihood that `stakeholder` would rate the new `requirement`.
    pub fn likelihood(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> Result<f64> {
        self.check_target(requirement)?;
        if !self.stakeholders.contains(stakeholder) {
            return Err(Error::UnknownStakeholder(stakeholder.to_string()));
        }
        if self.relation.contains(stakeholder, requirement) {
            return Err(Error::AlreadyRated {
                stakeholder: stakeholder.to_string(),
                requirement: requirement.to_string(),
            });
        }
        let neighbors = self.neighbors(requirement)?;
        Ok(self.weighted_share(stakeholder, &neighbors))
    }

    /// Scores for every stakeholder that has not rated `requirement`, in plan
    /// order.
    pub fn scores_for(&self, requirement: &RequirementId) -> Result<Vec<LikelihoodScore>> {
        self.check_target(requirement)?;
        let neighbors = self.neighbors(requirement)?;
        let mut scores: Vec<LikelihoodScore> = self
            .stakeholders
            .iter()
            .filter(|s| !self.relation.contains(s, requirement))
            .map(|s| LikelihoodScore {
                stakeholder_id: s.clone(),
                requirement_id: requirement.clone(),
                score: self.weighted_share(s, &neighbors),
            })
            .collect();
        scores.sort_by(plan_order);
        Ok(scores)
    }

    /// Scores for every missing cell of every new requirement.
    pub fn candidate_scores(&self) -> Result<Vec<LikelihoodScore>> {
        let mut all = Vec::new();
        for requirement in &self.new {
            all.extend(self.scores_for(requirement)?);
        }
        all.sort_by(plan_order);
        Ok(all)
    }
}

/// Cells chosen for prediction, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionPlan {
    pub cells: Vec<LikelihoodScore>,
    pub fraction: f64,
    pub candidate_count: usize,
}

impl PredictionPlan {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// `ceil(fraction * n)`, ignoring representation error in the product
/// (0.1 * 30 must give 3, not 4).
pub fn planned_count(fraction: f64, candidates: usize) -> usize {
    let exact = fraction * candidates as f64;
    let nearest = exact.round();
    let count = if (exact - nearest).abs() < 1e-9 {
        nearest
    } else {
        exact.ceil()
    };
    (count as usize).min(candidates)
}

/// Keeps the top `ceil(fraction * n)` candidates by likelihood.
pub fn build_prediction_plan(mut likelihoods: Vec<LikelihoodScore>, fraction: f64) -> Result<PredictionPlan> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let candidate_count = likelihoods.len();
    likelihoods.sort_by(plan_order);
    likelihoods.truncate(planned_count(fraction, candidate_count));
    Ok(PredictionPlan {
        cells: likelihoods,
        fraction,
        candidate_count,
    })
}
