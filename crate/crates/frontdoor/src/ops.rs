//! Operations and report shapes shared by the command line and the HTTP
//! service, so both paths run the same core calls.

use clap::Args;
use saffron_core::domain::{Project, Provenance, RatingMatrix, RequirementId, RequirementStatus};
use saffron_core::evaluation::ExperimentReport;
use saffron_core::latent::TrainConfig;
use saffron_core::pipeline::{IncorporateOptions, Incorporation, PredictedCell, ProjectState};
use saffron_core::selector::Selector;
use saffron_core::similarity::{similarity_matrix, SimilarityMatrix, SimilarityMethod};
use saffron_core::stakerare::InfluenceTable;
use serde::{Deserialize, Serialize};

/// Prediction and factor-model knobs. Unset fields take the library
/// defaults; `seed` drives factor initialisation.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionParams {
    /// Share of missing new-requirement cells to predict, in (0, 1]
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Requirement similarity measure
    #[arg(long)]
    pub method: Option<SimilarityMethod>,
    /// Only the k most similar elicited requirements vote on likelihood
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_features: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub regularization: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub convergence_tol: Option<f64>,
    #[arg(long)]
    pub init_half_width: Option<f64>,
}

impl PredictionParams {
    pub fn train_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            n_features: self.n_features.unwrap_or(d.n_features),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            regularization: self.regularization.unwrap_or(d.regularization),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            convergence_tol: self.convergence_tol.unwrap_or(d.convergence_tol),
            init_half_width: self.init_half_width.unwrap_or(d.init_half_width),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    pub fn options(&self) -> IncorporateOptions {
        let d = IncorporateOptions::default();
        IncorporateOptions {
            fraction: self.fraction.unwrap_or(d.fraction),
            method: self.method.unwrap_or(d.method),
            top_k: self.top_k.or(d.top_k),
            train: self.train_config(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub requirement_id: RequirementId,
    pub title: String,
    pub importance: f64,
    pub elicited_ratings: usize,
    pub predicted_ratings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub revision: u64,
    pub ranked_requirements: usize,
    /// Requirements added but not yet re-prioritized.
    pub pending_requirements: Vec<RequirementId>,
    pub ranking: Vec<RankingRow>,
}

pub fn ranking_rows(state: &ProjectState) -> Vec<RankingRow> {
    let ratings = state.ratings();
    state
        .ranking()
        .entries()
        .iter()
        .map(|e| {
            let count = |p: Provenance| {
                ratings
                    .cells()
                    .filter(|((_, q), r)| q == &e.requirement_id && r.provenance == p)
                    .count()
            };
            RankingRow {
                rank: e.rank,
                requirement_id: e.requirement_id.clone(),
                title: state
                    .project()
                    .requirement(&e.requirement_id)
                    .map(|q| q.title.clone())
                    .unwrap_or_default(),
                importance: e.importance,
                elicited_ratings: count(Provenance::Elicited),
                predicted_ratings: count(Provenance::Predicted),
            }
        })
        .collect()
}

pub fn ranking_report(state: &ProjectState) -> RankingReport {
    let ranking = ranking_rows(state);
    RankingReport {
        revision: state.revision(),
        ranked_requirements: ranking.len(),
        pending_requirements: state.new_requirements().into_iter().collect(),
        ranking,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncorporationReport {
    pub revision: u64,
    pub previous_revision: u64,
    pub fraction: f64,
    pub method: SimilarityMethod,
    pub seed: u64,
    pub candidate_cells: usize,
    pub predicted_cells: usize,
    /// Distinct stakeholders who were asked about the new requirements.
    pub interaction_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
    pub predictions: Vec<PredictedCell>,
    pub ranking: Vec<RankingRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn incorporation_report(
    previous: &ProjectState,
    out: &Incorporation,
    options: &IncorporateOptions,
) -> IncorporationReport {
    IncorporationReport {
        revision: out.state.revision(),
        previous_revision: previous.revision(),
        fraction: options.fraction,
        method: options.method,
        seed: options.train.seed,
        candidate_cells: out.plan.candidate_count,
        predicted_cells: out.plan.len(),
        interaction_count: out.interaction_count,
        training: out.cost_report.as_ref().map(|r| TrainingSummary {
            initial_cost: r.initial_cost(),
            final_cost: r.final_cost(),
            iterations: r.iterations_used,
            converged: r.converged,
        }),
        predictions: out.predictions.clone(),
        ranking: ranking_rows(&out.state),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRow {
    pub stakeholder_id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub revision: u64,
    pub requirement_id: RequirementId,
    pub method: SimilarityMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    /// Stakeholders without a rating for the requirement, most likely first.
    pub scores: Vec<LikelihoodRow>,
}

pub fn likelihoods(
    state: &ProjectState,
    requirement: &RequirementId,
    method: SimilarityMethod,
    top_k: Option<usize>,
) -> saffron_core::Result<LikelihoodReport> {
    let similarity = similarity_matrix(state.ratings(), state.relation(), method)?;
    let selector = Selector::new(state.project(), &similarity, state.relation(), top_k);
    let scores = selector.scores_for(requirement)?;
    Ok(LikelihoodReport {
        revision: state.revision(),
        requirement_id: requirement.clone(),
        method,
        top_k,
        scores: scores
            .into_iter()
            .map(|s| LikelihoodRow {
                stakeholder_id: s.stakeholder_id.to_string(),
                score: s.score,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub method: SimilarityMethod,
    pub requirements: Vec<RequirementId>,
    /// Row-major, one row per requirement in `requirements` order.
    pub rows: Vec<Vec<f64>>,
}

pub fn similarity_report(ratings: &RatingMatrix, method: SimilarityMethod) -> saffron_core::Result<SimilarityReport> {
    let relation = saffron_core::domain::build_relation_matrix(ratings);
    let sim: SimilarityMatrix = similarity_matrix(ratings, &relation, method)?;
    Ok(SimilarityReport {
        method,
        requirements: sim.requirements().to_vec(),
        rows: (0..sim.len()).map(|i| sim.row(i).to_vec()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    pub stakeholder_id: String,
    pub role_id: String,
    pub role_influence: f64,
    pub within_role_influence: f64,
    pub project_influence: f64,
}

pub fn influence_rows(project: &Project) -> saffron_core::Result<Vec<InfluenceRow>> {
    let table = InfluenceTable::compute(project.roles(), project.stakeholders())?;
    Ok(project
        .stakeholders()
        .iter()
        .map(|s| InfluenceRow {
            stakeholder_id: s.id.to_string(),
            role_id: s.role_id.to_string(),
            role_influence: table.role_influence[&s.role_id],
            within_role_influence: table.stakeholder_influence[&s.id],
            project_influence: table.project_influence[&s.id],
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectCounts {
    pub stakeholders: usize,
    pub requirements: usize,
    pub new_requirements: usize,
    pub elicited_ratings: usize,
    pub predicted_ratings: usize,
}

pub fn project_counts(state: &ProjectState) -> ProjectCounts {
    ProjectCounts {
        stakeholders: state.project().stakeholders().len(),
        requirements: state.project().requirements().len(),
        new_requirements: state.project().requirement_ids_with(RequirementStatus::New).len(),
        elicited_ratings: state.ratings().count_with(Provenance::Elicited),
        predicted_ratings: state.ratings().count_with(Provenance::Predicted),
    }
}

/// Flat per-repeat table of an experiment, for plotting tools.
pub fn experiment_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "repeat,spearman,stakerare_spearman,rmse,predicted_cells,candidate_cells,baseline_users,saffron_users,reduction_percent\n",
    );
    let opt = |v: Option<f64>| v.map(crate::bundle::format_number).unwrap_or_default();
    for r in &report.repeats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.repeat,
            r.spearman,
            r.stakerare_spearman,
            opt(r.rmse),
            r.predicted_cells,
            r.candidate_cells,
            r.baseline_users,
            r.saffron_users,
            opt(r.reduction_percent),
        ));
    }
    out
}
