//! Latent-factor rating model.
//!
//! Every stakeholder `u` owns a parameter vector `theta_u` and every
//! requirement `i` a feature vector `x_i`, both of length `n_features`.
//! A rating is predicted as the plain inner product `theta_u . x_i` (no bias
//! terms, no mean centering), clamped to the rating scale. Both factor sets
//! are learned together by full-batch gradient descent on
//!
//! ```text
//! J = 1/2 * sum_{(u,i) observed} (theta_u . x_i - y_ui)^2
//!   + lambda/2 * (|theta|^2 + |x|^2)
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Provenance, RatingMatrix, RatingScale, RequirementId, StakeholderId};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_features: usize,
    pub learning_rate: f64,
    /// lambda; 0 disables regularisation.
    pub regularization: f64,
    pub max_iterations: usize,
    /// Stop once `|J_prev - J| / J_prev` drops below this.
    pub convergence_tol: f64,
    /// Initial entries are uniform on `[-w, w]`.
    pub init_half_width: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_features: 10,
            learning_rate: 0.005,
            regularization: 0.02,
            max_iterations: 5000,
            convergence_tol: 1e-6,
            init_half_width: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_owned()));
        if self.n_features == 0 {
            return bad("n_features must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return bad("regularization must be non-negative");
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return bad("convergence_tol must be positive");
        }
        if !(self.init_half_width.is_finite() && self.init_half_width >= 0.0) {
            return bad("init_half_width must be non-negative");
        }
        Ok(())
    }
}

/// Row-major factor matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    n_users: usize,
    n_items: usize,
    n_features: usize,
    theta: Vec<f64>,
    x: Vec<f64>,
    trained: bool,
}

impl FactorModel {
    pub fn from_parts(n_users: usize, n_items: usize, n_features: usize, theta: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidConfig("n_features must be at least 1".into()));
        }
        if theta.len() != n_users * n_features || x.len() != n_items * n_features {
            return Err(Error::InvalidConfig(format!(
                "factor shapes do not match {n_users}x{n_features} and {n_items}x{n_features}"
            )));
        }
        if theta.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("factor entries must be finite".into()));
        }
        Ok(Self {
            n_users,
            n_items,
            n_features,
            theta,
            x,
            trained: false,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Marks a hand-built model as usable for prediction.
    pub fn into_trained(mut self) -> Self {
        self.trained = true;
        self
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn user_factors(&self, user: usize) -> &[f64] {
        &self.theta[user * self.n_features..(user + 1) * self.n_features]
    }

    pub fn item_factors(&self, item: usize) -> &[f64] {
        &self.x[item * self.n_features..(item + 1) * self.n_features]
    }

    /// `theta_u . x_i` without clamping.
    pub fn raw_prediction(&self, user: usize, item: usize) -> f64 {
        dot(self.user_factors(user), self.item_factors(item))
    }

    pub fn predict_rating(&self, user: usize, item: usize, scale: RatingScale) -> Result<f64> {
        if !self.trained {
            return Err(Error::UntrainedModel);
        }
        if user >= self.n_users || item >= self.n_items {
            return Err(Error::UnknownCell {
                user,
                item,
                n_users: self.n_users,
                n_items: self.n_items,
            });
        }
        Ok(scale.clamp(self.raw_prediction(user, item)))
    }

    /// Same model with the roles of users and items swapped.
    pub fn transposed(&self) -> Self {
        Self {
            n_users: self.n_items,
            n_items: self.n_users,
            n_features: self.n_features,
            theta: self.x.clone(),
            x: self.theta.clone(),
            trained: self.trained,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Entries uniform on `[-init_half_width, init_half_width]`, user factors
/// drawn first, from a ChaCha8 stream seeded with `config.seed`.
pub fn init_factors(n_users: usize, n_items: usize, config: &TrainConfig) -> Result<FactorModel> {
    config.validate()?;
    if n_users == 0 || n_items == 0 {
        return Err(Error::InvalidConfig(
            "model needs at least one user and one item".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let w = config.init_half_width;
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| if w == 0.0 { 0.0 } else { rng.random_range(-w..=w) })
            .collect()
    };
    let theta = draw(n_users * config.n_features);
    let x = draw(n_items * config.n_features);
    FactorModel::from_parts(n_users, n_items, config.n_features, theta, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Index-addressed observed ratings for a `n_users x n_items` model.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    n_users: usize,
    n_items: usize,
    cells: Vec<Observation>,
}

impl Observations {
    pub fn new(n_users: usize, n_items: usize, cells: Vec<Observation>) -> Result<Self> {
        if let Some(bad) = cells.iter().find(|c| c.user >= n_users || c.item >= n_items) {
            return Err(Error::UnknownCell {
                user: bad.user,
                item: bad.item,
                n_users,
                n_items,
            });
        }
        Ok(Self {
            n_users,
            n_items,
            cells,
        })
    }

    pub fn cells(&self) -> &[Observation] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn transposed(&self) -> Self {
        Self {
            n_users: self.n_items,
            n_items: self.n_users,
            cells: self
                .cells
                .iter()
                .map(|c| Observation {
                    user: c.item,
                    item: c.user,
                    value: c.value,
                })
                .collect(),
        }
    }

    fn check(&self, model: &FactorModel) -> Result<()> {
        if self.n_users != model.n_users || self.n_items != model.n_items {
            return Err(Error::InvalidConfig(format!(
                "observations are {}x{} but the model is {}x{}",
                self.n_users, self.n_items, model.n_users, model.n_items
            )));
        }
        Ok(())
    }
}

/// Maps stakeholder / requirement ids onto model rows.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorIndex {
    stakeholders: Vec<StakeholderId>,
    requirements: Vec<RequirementId>,
    stakeholder_rows: BTreeMap<StakeholderId, usize>,
    requirement_rows: BTreeMap<RequirementId, usize>,
}

impl FactorIndex {
    pub fn new(
        stakeholders: impl IntoIterator<Item = StakeholderId>,
        requirements: impl IntoIterator<Item = RequirementId>,
    ) -> Self {
        let stakeholders: Vec<_> = stakeholders.into_iter().collect();
        let requirements: Vec<_> = requirements.into_iter().collect();
        Self {
            stakeholder_rows: stakeholders.iter().cloned().zip(0..).collect(),
            requirement_rows: requirements.iter().cloned().zip(0..).collect(),
            stakeholders,
            requirements,
        }
    }

    /// Index over the matrix's own row and column universes.
    pub fn of_matrix(matrix: &RatingMatrix) -> Self {
        Self::new(
            matrix.stakeholders().iter().cloned(),
            matrix.requirements().iter().cloned(),
        )
    }

    pub fn n_stakeholders(&self) -> usize {
        self.stakeholders.len()
    }

    pub fn n_requirements(&self) -> usize {
        self.requirements.len()
    }

    pub fn stakeholder_row(&self, id: &StakeholderId) -> Option<usize> {
        self.stakeholder_rows.get(id).copied()
    }

    pub fn requirement_row(&self, id: &RequirementId) -> Option<usize> {
        self.requirement_rows.get(id).copied()
    }

    /// Observations for the cells of `matrix`, optionally keeping only one
    /// provenance.
    pub fn observations(&self, matrix: &RatingMatrix, only: Option<Provenance>) -> Result<Observations> {
        let mut cells = Vec::with_capacity(matrix.len());
        for ((s, q), rating) in matrix.cells() {
            if only.is_some_and(|p| p != rating.provenance) {
                continue;
            }
            let user = self
                .stakeholder_row(s)
                .ok_or_else(|| Error::UnknownStakeholder(s.to_string()))?;
            let item = self
                .requirement_row(q)
                .ok_or_else(|| Error::UnknownRequirement(q.to_string()))?;
            cells.push(Observation {
                user,
                item,
                value: rating.value,
            });
        }
        Observations::new(self.n_stakeholders(), self.n_requirements(), cells)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

/// Cost and gradient at the current parameters in one pass over the data.
fn cost_and_gradient(model: &FactorModel, observed: &Observations, lambda: f64) -> (f64, Gradient) {
    let k = model.n_features;
    let mut grad_theta: Vec<f64> = model.theta.iter().map(|v| lambda * v).collect();
    let mut grad_x: Vec<f64> = model.x.iter().map(|v| lambda * v).collect();
    let mut squared = 0.0;
    for obs in &observed.cells {
        let theta_u = model.user_factors(obs.user);
        let x_i = model.item_factors(obs.item);
        let err = dot(theta_u, x_i) - obs.value;
        squared += err * err;
        let (gu, gi) = (obs.user * k, obs.item * k);
        for f in 0..k {
            grad_theta[gu + f] += err * x_i[f];
            grad_x[gi + f] += err * theta_u[f];
        }
    }
    let norms = model.theta.iter().chain(&model.x).map(|v| v * v).sum::<f64>();
    let cost = 0.5 * squared + 0.5 * lambda * norms;
    (
        cost,
        Gradient {
            theta: grad_theta,
            x: grad_x,
        },
    )
}

pub fn cost(model: &FactorModel, observed: &Observations, lambda: f64) -> Result<f64> {
    observed.check(model)?;
    let squared: f64 = observed
        .cells
        .iter()
        .map(|o| {
            let err = model.raw_prediction(o.user, o.item) - o.value;
            err * err
        })
        .sum();
    let norms = model.theta.iter().chain(&model.x).map(|v| v * v).sum::<f64>();
    Ok(0.5 * squared + 0.5 * lambda * norms)
}

/// Partial derivatives of the cost with respect to every factor entry.
pub fn gradient(model: &FactorModel, observed: &Observations, lambda: f64) -> Result<Gradient> {
    observed.check(model)?;
    Ok(cost_and_gradient(model, observed, lambda).1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// `costs[k]` is the cost after `k` updates.
    pub costs: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl CostReport {
    pub fn initial_cost(&self) -> f64 {
        self.costs[0]
    }

    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("at least the initial cost")
    }
}

/// Full-batch gradient descent updating both factor sets from the same
/// gradient evaluation.
pub fn train(
    mut model: FactorModel,
    observed: &Observations,
    config: &TrainConfig,
) -> Result<(FactorModel, CostReport)> {
    config.validate()?;
    observed.check(&model)?;
    if observed.is_empty() {
        return Err(Error::InvalidConfig("training needs at least one observed cell".into()));
    }
    if config.n_features != model.n_features {
        return Err(Error::InvalidConfig(format!(
            "config has {} features but the model has {}",
            config.n_features, model.n_features
        )));
    }

    let lambda = config.regularization;
    let lr = config.learning_rate;
    let mut costs: Vec<f64> = Vec::with_capacity(config.max_iterations.min(1 << 16) + 1);
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let (cost, grad) = cost_and_gradient(&model, observed, lambda);
        if !cost.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        if let Some(&prev) = costs.last() {
            let change = (prev - cost).abs();
            if change == 0.0 || change / f64::max(prev, f64::MIN_POSITIVE) < config.convergence_tol {
                converged = true;
            }
        }
        costs.push(cost);
        if converged || cost == 0.0 || iterations == config.max_iterations {
            converged |= cost == 0.0;
            break;
        }
        for (p, g) in model.theta.iter_mut().zip(&grad.theta) {
            *p -= lr * g;
        }
        for (p, g) in model.x.iter_mut().zip(&grad.x) {
            *p -= lr * g;
        }
        iterations += 1;
    }

    model.trained = true;
    Ok((
        model,
        CostReport {
            costs,
            converged,
            iterations_used: iterations,
        },
    ))
}
