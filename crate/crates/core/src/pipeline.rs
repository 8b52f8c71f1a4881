//! Rank-reversal flow: prioritize an elicited project, accept new
//! requirements with ratings from a subset of stakeholders, predict the most
//! likely missing ratings and re-prioritize.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::{
    build_relation_matrix, merge_rating_matrices, Project, Provenance, RatingMatrix, RelationMatrix, Requirement,
    RequirementId, RequirementStatus, StakeholderId,
};
use crate::error::{Error, Result};
use crate::latent::{init_factors, train, CostReport, FactorIndex, TrainConfig};
use crate::selector::{build_prediction_plan, PredictionPlan, Selector};
use crate::similarity::{similarity_matrix, SimilarityMethod};
use crate::stakerare::{prioritize, RankedList};

/// A project at one revision.
///
/// Invariants: `relation` mirrors `ratings`; `ranking` covers exactly the
/// requirements whose status is `elicited`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectState {
    project: Project,
    ratings: RatingMatrix,
    relation: RelationMatrix,
    ranking: RankedList,
    revision: u64,
}

impl ProjectState {
    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn ratings(&self) -> &RatingMatrix {
        &self.ratings
    }

    pub fn relation(&self) -> &RelationMatrix {
        &self.relation
    }

    pub fn ranking(&self) -> &RankedList {
        &self.ranking
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn new_requirements(&self) -> BTreeSet<RequirementId> {
        self.project.requirement_ids_with(RequirementStatus::New)
    }

    /// Rebuilds a state from persisted parts; the ranking is recomputed.
    pub fn restore(project: Project, ratings: RatingMatrix, revision: u64) -> Result<Self> {
        let ratings = with_project_universe(&project, ratings)?;
        let ranking = rank_elicited(&project, &ratings)?;
        Ok(Self {
            relation: build_relation_matrix(&ratings),
            project,
            ratings,
            ranking,
            revision,
        })
    }

    /// Registers requirements (as status=new) without ratings. The ranking is
    /// unchanged; the revision advances.
    pub fn add_requirements(&self, requirements: Vec<Requirement>) -> Result<Self> {
        self.add_requirements_with_ratings(requirements, None)
    }

    fn add_requirements_with_ratings(
        &self,
        requirements: Vec<Requirement>,
        partial: Option<&RatingMatrix>,
    ) -> Result<Self> {
        let added: BTreeSet<RequirementId> = requirements.iter().map(|r| r.id.clone()).collect();
        let project = self.project.with_requirements(requirements.into_iter().map(|mut r| {
            r.status = RequirementStatus::New;
            r
        }))?;
        let mut columns = RatingMatrix::with_universe(self.ratings.scale(), std::iter::empty(), added.iter().cloned());
        if let Some(partial) = partial {
            for ((s, q), rating) in partial.cells() {
                if !added.contains(q) {
                    return Err(Error::NotNewRequirement(q.to_string()));
                }
                if project.stakeholder(s).is_none() {
                    return Err(Error::UnknownStakeholder(s.to_string()));
                }
                if partial.scale() != self.ratings.scale() {
                    return Err(Error::ScaleMismatch {
                        left_min: self.ratings.scale().min(),
                        left_max: self.ratings.scale().max(),
                        right_min: partial.scale().min(),
                        right_max: partial.scale().max(),
                    });
                }
                columns.insert(s.clone(), q.clone(), rating.value, Provenance::Elicited)?;
            }
        }
        let ratings = merge_rating_matrices(&self.ratings, &columns)?;
        Ok(Self {
            relation: build_relation_matrix(&ratings),
            project,
            ratings,
            ranking: self.ranking.clone(),
            revision: self.revision + 1,
        })
    }

    /// Records elicited ratings, replacing any earlier value (including a
    /// prediction) for the same cell. Elicited requirements are re-ranked.
    pub fn record_ratings(&self, cells: impl IntoIterator<Item = (StakeholderId, RequirementId, f64)>) -> Result<Self> {
        let mut ratings = self.ratings.clone();
        for (s, q, value) in cells {
            if self.project.stakeholder(&s).is_none() {
                return Err(Error::UnknownStakeholder(s.to_string()));
            }
            if self.project.requirement(&q).is_none() {
                return Err(Error::UnknownRequirement(q.to_string()));
            }
            ratings.upsert(s, q, value, Provenance::Elicited)?;
        }
        let ranking = rank_elicited(&self.project, &ratings)?;
        Ok(Self {
            relation: build_relation_matrix(&ratings),
            project: self.project.clone(),
            ratings,
            ranking,
            revision: self.revision + 1,
        })
    }
}

fn with_project_universe(project: &Project, ratings: RatingMatrix) -> Result<RatingMatrix> {
    project.check_ratings(&ratings)?;
    let mut full = RatingMatrix::with_universe(ratings.scale(), project.stakeholder_ids(), project.requirement_ids());
    for ((s, q), rating) in ratings.cells() {
        full.insert(s.clone(), q.clone(), rating.value, rating.provenance)?;
    }
    Ok(full)
}

fn rank_elicited(project: &Project, ratings: &RatingMatrix) -> Result<RankedList> {
    let elicited = project.requirement_ids_with(RequirementStatus::Elicited);
    prioritize(
        &ratings.restrict_requirements(&elicited),
        project.roles(),
        project.stakeholders(),
    )
}

/// Ranks the elicited requirements of a freshly loaded project (revision 1).
/// Requirements still marked `new` stay out of the ranking until the next
/// re-prioritization.
pub fn initial_prioritization(project: Project, ratings: RatingMatrix) -> Result<ProjectState> {
    ProjectState::restore(project, ratings, 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IncorporateOptions {
    /// Share of missing new-requirement cells to predict, in (0, 1].
    pub fraction: f64,
    pub method: SimilarityMethod,
    /// Restrict each new requirement to its `top_k` most similar neighbours.
    pub top_k: Option<usize>,
    pub train: TrainConfig,
}

impl Default for IncorporateOptions {
    fn default() -> Self {
        Self {
            fraction: 0.25,
            method: SimilarityMethod::default(),
            top_k: None,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedCell {
    pub stakeholder_id: StakeholderId,
    pub requirement_id: RequirementId,
    pub value: f64,
    pub likelihood: f64,
}

/// Outcome of one re-prioritization.
#[derive(Clone, Debug, PartialEq)]
pub struct Incorporation {
    pub state: ProjectState,
    pub plan: PredictionPlan,
    pub predictions: Vec<PredictedCell>,
    /// Distinct stakeholders who gave an elicited rating to a new requirement.
    pub interaction_count: usize,
    pub cost_report: Option<CostReport>,
}

impl Incorporation {
    pub fn ranking(&self) -> &RankedList {
        self.state.ranking()
    }
}

/// Adds `new_requirements` with the ratings collected so far and runs the
/// prediction / re-prioritization steps.
pub fn incorporate_new_requirements(
    state: &ProjectState,
    new_requirements: Vec<Requirement>,
    partial_ratings: &RatingMatrix,
    options: &IncorporateOptions,
) -> Result<Incorporation> {
    let merged = state.add_requirements_with_ratings(new_requirements, Some(partial_ratings))?;
    // the merge step and the re-prioritization count as one revision
    let merged = ProjectState {
        revision: state.revision,
        ..merged
    };
    reprioritize(&merged, options)
}

/// Number of distinct stakeholders holding an elicited rating for any of
/// `requirements`.
pub fn interaction_count(ratings: &RatingMatrix, requirements: &BTreeSet<RequirementId>) -> usize {
    ratings
        .cells()
        .filter(|((_, q), r)| r.provenance == Provenance::Elicited && requirements.contains(q))
        .map(|((s, _), _)| s)
        .collect::<BTreeSet<_>>()
        .len()
}

/// Predicts the planned cells of every status=new requirement, marks them
/// elicited and ranks the whole project.
pub fn reprioritize(state: &ProjectState, options: &IncorporateOptions) -> Result<Incorporation> {
    if state.ratings.count_with(Provenance::Elicited) == 0 {
        return Err(Error::NoElicitedData);
    }
    let new = state.new_requirements();
    let interaction_count = interaction_count(&state.ratings, &new);

    let plan = if new.is_empty() {
        build_prediction_plan(Vec::new(), options.fraction)?
    } else {
        let similarity = similarity_matrix(&state.ratings, &state.relation, options.method)?;
        let selector = Selector::new(&state.project, &similarity, &state.relation, options.top_k);
        build_prediction_plan(selector.candidate_scores()?, options.fraction)?
    };

    let mut ratings = state.ratings.clone();

    let mut predictions = Vec::with_capacity(plan.len());
    let mut cost_report = None;
    if !plan.is_empty() {
        // Only elicited cells train the model, so earlier predictions never
        // feed back into later ones.
        let index = FactorIndex::of_matrix(&state.ratings);
        let observed = index.observations(&state.ratings, Some(Provenance::Elicited))?;
        let model = init_factors(index.n_stakeholders(), index.n_requirements(), &options.train)?;
        let (model, report) = train(model, &observed, &options.train)?;
        for cell in &plan.cells {
            let user = index
                .stakeholder_row(&cell.stakeholder_id)
                .ok_or_else(|| Error::UnknownStakeholder(cell.stakeholder_id.to_string()))?;
            let item = index
                .requirement_row(&cell.requirement_id)
                .ok_or_else(|| Error::UnknownRequirement(cell.requirement_id.to_string()))?;
            let value = model.predict_rating(user, item, ratings.scale())?;
            ratings.insert(
                cell.stakeholder_id.clone(),
                cell.requirement_id.clone(),
                value,
                Provenance::Predicted,
            )?;
            predictions.push(PredictedCell {
                stakeholder_id: cell.stakeholder_id.clone(),
                requirement_id: cell.requirement_id.clone(),
                value,
                likelihood: cell.score,
            });
        }
        cost_report = Some(report);
    }

    let project = state.project.mark_elicited(&new);
    let ranking = rank_elicited(&project, &ratings)?;
    Ok(Incorporation {
        state: ProjectState {
            relation: build_relation_matrix(&ratings),
            project,
            ratings,
            ranking,
            revision: state.revision + 1,
        },
        plan,
        predictions,
        interaction_count,
        cost_report,
    })
}
