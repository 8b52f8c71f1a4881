use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synthetic::Dataset;
use super::{interaction_reduction, mean_and_variance, rmse_cells, spearman};
use crate::domain::{Project, Requirement, RequirementId, RequirementStatus, StakeholderId};
use crate::error::{Error, Result};
use crate::pipeline::{incorporate_new_requirements, initial_prioritization, interaction_count, IncorporateOptions};
use crate::stakerare::prioritize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSetting {
    pub n_train_requirements: usize,
    pub n_manual_users: usize,
    pub n_new_requirements: usize,
    pub prediction_fraction: f64,
    pub repeats: usize,
    pub rng_seed: u64,
    /// Similarity, neighbourhood and training options; its `fraction` is
    /// replaced by `prediction_fraction`.
    pub options: IncorporateOptions,
}

impl Default for ExperimentSetting {
    fn default() -> Self {
        Self {
            n_train_requirements: 50,
            n_manual_users: 40,
            n_new_requirements: 15,
            prediction_fraction: 0.25,
            repeats: 30,
            rng_seed: 0,
            options: IncorporateOptions::default(),
        }
    }
}

impl ExperimentSetting {
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let n_q = dataset.project.requirements().len();
        let n_s = dataset.project.stakeholders().len();
        let bad = |m: String| Err(Error::InvalidSetting(m));
        if self.n_train_requirements == 0 || self.n_new_requirements == 0 {
            return bad("train and new requirement counts must be positive".into());
        }
        if self.n_train_requirements + self.n_new_requirements > n_q {
            return bad(format!(
                "{} train + {} new requirements exceed the {n_q} available",
                self.n_train_requirements, self.n_new_requirements
            ));
        }
        if self.n_manual_users > n_s {
            return bad(format!(
                "{} manual users exceed the {n_s} stakeholders",
                self.n_manual_users
            ));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if !(self.prediction_fraction > 0.0 && self.prediction_fraction <= 1.0) {
            return Err(Error::InvalidFraction(self.prediction_fraction));
        }
        self.options.train.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub new_requirements: Vec<RequirementId>,
    pub manual_users: Vec<StakeholderId>,
    /// SAFFRON's augmented ranking vs ground truth.
    pub spearman: f64,
    /// Plain prioritization of every elicited rating vs ground truth.
    pub stakerare_spearman: f64,
    /// Over the predicted cells; absent when nothing was predicted or no
    /// ground-truth value exists for the predicted cells.
    pub rmse: Option<f64>,
    pub predicted_cells: usize,
    pub candidate_cells: usize,
    pub baseline_users: usize,
    pub saffron_users: usize,
    pub reduction_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub setting: ExperimentSetting,
    pub repeats: Vec<RepeatOutcome>,
    pub mean_spearman: f64,
    pub spearman_variance: f64,
    pub mean_stakerare_spearman: f64,
    pub mean_rmse: Option<f64>,
    pub mean_reduction_percent: Option<f64>,
}

impl ExperimentReport {
    /// Standard error of the mean SAFFRON correlation.
    pub fn spearman_std_error(&self) -> f64 {
        let n = self.repeats.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        // sample variance from the population variance
        (self.spearman_variance * n / (n - 1.0) / n).sqrt()
    }
}

/// Repeated random sub-sampling: each repeat draws disjoint train and new
/// requirement sets plus the manual raters, incorporates the new
/// requirements and scores the outcome against the complete matrix.
pub fn run_experiment(dataset: &Dataset, setting: &ExperimentSetting) -> Result<ExperimentReport> {
    setting.validate(dataset)?;
    let outcomes = (0..setting.repeats)
        .into_par_iter()
        .map(|i| run_repeat(dataset, setting, i))
        .collect::<Result<Vec<_>>>()?;

    let rhos: Vec<f64> = outcomes.iter().map(|o| o.spearman).collect();
    let (mean_spearman, spearman_variance) = mean_and_variance(&rhos).expect("repeats >= 1");
    let baseline: Vec<f64> = outcomes.iter().map(|o| o.stakerare_spearman).collect();
    let mean_of = |values: Vec<f64>| mean_and_variance(&values).map(|(m, _)| m);
    Ok(ExperimentReport {
        setting: setting.clone(),
        mean_stakerare_spearman: mean_of(baseline).expect("repeats >= 1"),
        mean_rmse: mean_of(outcomes.iter().filter_map(|o| o.rmse).collect()),
        mean_reduction_percent: mean_of(outcomes.iter().filter_map(|o| o.reduction_percent).collect()),
        repeats: outcomes,
        mean_spearman,
        spearman_variance,
    })
}

fn run_repeat(dataset: &Dataset, setting: &ExperimentSetting, repeat: usize) -> Result<RepeatOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(setting.rng_seed);
    rng.set_stream(repeat as u64);

    let mut requirement_ids: Vec<RequirementId> = dataset.project.requirements().iter().map(|r| r.id.clone()).collect();
    requirement_ids.shuffle(&mut rng);
    let mut stakeholder_ids: Vec<StakeholderId> = dataset.project.stakeholder_ids().into_iter().collect();
    stakeholder_ids.shuffle(&mut rng);

    let train: BTreeSet<RequirementId> = requirement_ids[..setting.n_train_requirements]
        .iter()
        .cloned()
        .collect();
    let new: BTreeSet<RequirementId> = requirement_ids
        [setting.n_train_requirements..setting.n_train_requirements + setting.n_new_requirements]
        .iter()
        .cloned()
        .collect();
    let manual: BTreeSet<StakeholderId> = stakeholder_ids[..setting.n_manual_users].iter().cloned().collect();
    let universe: BTreeSet<RequirementId> = train.union(&new).cloned().collect();

    let project = &dataset.project;
    let ground_truth = prioritize(
        &dataset.ground_truth.restrict_requirements(&universe),
        project.roles(),
        project.stakeholders(),
    )?;
    let stakerare = prioritize(
        &dataset.elicited.restrict_requirements(&universe),
        project.roles(),
        project.stakeholders(),
    )?;

    let pick = |ids: &BTreeSet<RequirementId>, status: RequirementStatus| -> Vec<Requirement> {
        ids.iter()
            .map(|id| {
                let mut r = project.requirement(id).expect("id from project").clone();
                r.status = status;
                r
            })
            .collect()
    };
    let initial = Project::new(
        project.roles().to_vec(),
        project.stakeholders().to_vec(),
        pick(&train, RequirementStatus::Elicited),
    )?;
    let state = initial_prioritization(initial, dataset.elicited.restrict_requirements(&train))?;
    let new_columns = dataset.elicited.restrict_requirements(&new);
    let partial = new_columns.restrict_raters(&manual);
    let options = IncorporateOptions {
        fraction: setting.prediction_fraction,
        ..setting.options.clone()
    };
    let outcome = incorporate_new_requirements(&state, pick(&new, RequirementStatus::New), &partial, &options)?;

    let mut predicted = BTreeMap::new();
    let mut actual = BTreeMap::new();
    for cell in &outcome.predictions {
        if let Some(truth) = dataset.ground_truth.value(&cell.stakeholder_id, &cell.requirement_id) {
            let key = (cell.stakeholder_id.clone(), cell.requirement_id.clone());
            predicted.insert(key.clone(), cell.value);
            actual.insert(key, truth);
        }
    }
    let rmse = if predicted.is_empty() {
        None
    } else {
        Some(rmse_cells(&predicted, &actual)?)
    };

    let baseline_users = interaction_count(&new_columns, &new);
    let saffron_users = outcome.interaction_count;
    Ok(RepeatOutcome {
        repeat,
        new_requirements: new.into_iter().collect(),
        manual_users: manual.into_iter().collect(),
        spearman: spearman(outcome.ranking(), &ground_truth)?,
        stakerare_spearman: spearman(&stakerare, &ground_truth)?,
        rmse,
        predicted_cells: outcome.plan.len(),
        candidate_cells: outcome.plan.candidate_count,
        baseline_users,
        saffron_users,
        reduction_percent: interaction_reduction(baseline_users, saffron_users).ok(),
    })
}
