use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    Project, Provenance, RatingMatrix, RatingScale, Requirement, RequirementStatus, Role, Stakeholder,
};
use crate::error::{Error, Result};

/// Parameters of the planted low-rank generator. The defaults give a
/// 62 x 82 universe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_stakeholders: usize,
    pub n_requirements: usize,
    pub n_roles: usize,
    pub planted_rank: usize,
    pub noise_std: f64,
    /// Approximate share of cells that carry an elicited rating, in (0, 1].
    pub density: f64,
    pub seed: u64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_stakeholders: 62,
            n_requirements: 82,
            n_roles: 6,
            planted_rank: 3,
            noise_std: 0.0,
            density: 0.5,
            seed: 0,
            scale_min: 0.0,
            scale_max: 5.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<RatingScale> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.n_stakeholders == 0 || self.n_requirements == 0 || self.n_roles == 0 || self.planted_rank == 0 {
            return bad("sizes and planted rank must be positive");
        }
        if self.n_roles > self.n_stakeholders {
            return bad("more roles than stakeholders");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and >= 0");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        RatingScale::new(self.scale_min, self.scale_max).map_err(|e| Error::InvalidParams(e.to_string()))
    }
}

/// A project together with its sampled elicited ratings and the complete
/// matrix they were drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub project: Project,
    pub elicited: RatingMatrix,
    pub ground_truth: RatingMatrix,
}

fn padded(prefix: &str, i: usize, n: usize) -> String {
    let width = n.to_string().len().max(2);
    format!("{prefix}{:0width$}", i + 1)
}

fn uniform_factors(rng: &mut ChaCha8Rng, rows: usize, rank: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..rows * rank).map(|_| rng.random_range(lo..hi)).collect()
}

/// Ratings are `min + span/r * theta.x` with factors uniform on [0,1]^r, so
/// the noise-free matrix has rank r and never needs clamping. Gaussian noise
/// is added and the result clamped to the scale.
///
/// Presence follows an independent rank-1 propensity `a_u * b_i`: a cell is
/// kept with probability `1 - (1 - density)^(w / mean w)`, which equals
/// `density` for an average cell and is 1 everywhere when density is 1.
pub fn generate_synthetic_dataset(config: &SyntheticConfig) -> Result<Dataset> {
    let scale = config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n_s, n_q, r) = (config.n_stakeholders, config.n_requirements, config.planted_rank);

    let mut role_ranks: Vec<u32> = (1..=config.n_roles as u32).collect();
    role_ranks.shuffle(&mut rng);
    let roles: Vec<Role> = role_ranks
        .iter()
        .enumerate()
        .map(|(i, &rank)| Role {
            id: padded("R", i, config.n_roles).into(),
            name: format!("Role {}", i + 1),
            rank,
        })
        .collect();

    let mut order: Vec<usize> = (0..n_s).collect();
    order.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.n_roles];
    for (k, &s) in order.iter().enumerate() {
        members[k % config.n_roles].push(s);
    }
    let mut assignment = vec![(0usize, 0u32); n_s];
    for (role, group) in members.iter().enumerate() {
        let mut ranks: Vec<u32> = (1..=group.len() as u32).collect();
        ranks.shuffle(&mut rng);
        for (&s, &rank) in group.iter().zip(&ranks) {
            assignment[s] = (role, rank);
        }
    }
    let stakeholders: Vec<Stakeholder> = (0..n_s)
        .map(|s| Stakeholder {
            id: padded("S", s, n_s).into(),
            name: format!("Stakeholder {}", s + 1),
            role_id: roles[assignment[s].0].id.clone(),
            within_role_rank: assignment[s].1,
        })
        .collect();
    let requirements: Vec<Requirement> = (0..n_q)
        .map(|q| {
            Requirement::new(
                padded("Q", q, n_q),
                format!("Requirement {}", q + 1),
                RequirementStatus::Elicited,
            )
        })
        .collect();

    let theta = uniform_factors(&mut rng, n_s, r, 0.0, 1.0);
    let x = uniform_factors(&mut rng, n_q, r, 0.0, 1.0);
    let propensity_u = uniform_factors(&mut rng, n_s, 1, 0.5, 1.5);
    let propensity_q = uniform_factors(&mut rng, n_q, 1, 0.5, 1.5);
    let mean_w = propensity_u.iter().sum::<f64>() / n_s as f64 * propensity_q.iter().sum::<f64>() / n_q as f64;
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let step = (scale.max() - scale.min()) / r as f64;

    let mut ground_truth = RatingMatrix::new(scale);
    let mut elicited = RatingMatrix::new(scale);
    for s in 0..n_s {
        for q in 0..n_q {
            let dot: f64 = theta[s * r..(s + 1) * r]
                .iter()
                .zip(&x[q * r..(q + 1) * r])
                .map(|(a, b)| a * b)
                .sum();
            let mut value = scale.min() + step * dot;
            if config.noise_std > 0.0 {
                value += noise.sample(&mut rng);
            }
            let value = scale.clamp(value);
            let w = propensity_u[s] * propensity_q[q] / mean_w;
            let keep = 1.0 - (1.0 - config.density).powf(w);
            // always draw so the stream does not depend on density
            let present = rng.random::<f64>() < keep;
            let (sid, qid) = (&stakeholders[s].id, &requirements[q].id);
            ground_truth.insert(sid.clone(), qid.clone(), value, Provenance::Elicited)?;
            if present {
                elicited.insert(sid.clone(), qid.clone(), value, Provenance::Elicited)?;
            }
        }
    }
    for s in &stakeholders {
        elicited.add_stakeholder(s.id.clone());
    }
    for q in &requirements {
        elicited.add_requirement(q.id.clone());
    }

    Ok(Dataset {
        project: Project::new(roles, stakeholders, requirements)?,
        elicited,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_universe_is_62_by_82() {
        let d = generate_synthetic_dataset(&SyntheticConfig::default()).unwrap();
        assert_eq!(d.project.stakeholders().len(), 62);
        assert_eq!(d.project.requirements().len(), 82);
        assert_eq!(d.ground_truth.len(), 62 * 82);
        assert_eq!(d.elicited.stakeholders().len(), 62);
        assert_eq!(d.elicited.requirements().len(), 82);
        let share = d.elicited.len() as f64 / (62.0 * 82.0);
        assert!((0.4..0.6).contains(&share), "{share}");
    }

    #[test]
    fn full_density_keeps_every_cell() {
        let d = generate_synthetic_dataset(&SyntheticConfig {
            density: 1.0,
            noise_std: 0.7,
            ..SyntheticConfig::default()
        })
        .unwrap();
        assert_eq!(d.elicited, d.ground_truth);
    }

    #[test]
    fn noise_free_values_stay_inside_scale_without_clamping() {
        let d = generate_synthetic_dataset(&SyntheticConfig::default()).unwrap();
        assert!(d.ground_truth.cells().all(|(_, r)| (0.0..=5.0).contains(&r.value)));
        assert!(d.ground_truth.cells().any(|(_, r)| r.value > 0.0 && r.value < 5.0));
    }

    #[test]
    fn seeded_and_seed_sensitive() {
        let c = SyntheticConfig {
            noise_std: 0.5,
            ..SyntheticConfig::default()
        };
        assert_eq!(
            generate_synthetic_dataset(&c).unwrap(),
            generate_synthetic_dataset(&c).unwrap()
        );
        let other = SyntheticConfig { seed: 1, ..c.clone() };
        assert_ne!(
            generate_synthetic_dataset(&c).unwrap(),
            generate_synthetic_dataset(&other).unwrap()
        );
    }

    #[test]
    fn roles_and_ranks_are_permutations() {
        let d = generate_synthetic_dataset(&SyntheticConfig {
            n_stakeholders: 7,
            n_requirements: 3,
            n_roles: 3,
            ..SyntheticConfig::default()
        })
        .unwrap();
        // Project::new already rejects non-permutations; check sizes here
        let mut ranks: Vec<u32> = d.project.roles().iter().map(|r| r.rank).collect();
        ranks.sort();
        assert_eq!(ranks, vec![1, 2, 3]);
        for role in d.project.roles() {
            let n = d.project.stakeholders().iter().filter(|s| s.role_id == role.id).count();
            assert!(n == 2 || n == 3);
        }
    }

    #[test]
    fn invalid_params() {
        for c in [
            SyntheticConfig {
                density: 0.0,
                ..Default::default()
            },
            SyntheticConfig {
                density: 1.5,
                ..Default::default()
            },
            SyntheticConfig {
                n_roles: 0,
                ..Default::default()
            },
            SyntheticConfig {
                n_roles: 70,
                ..Default::default()
            },
            SyntheticConfig {
                noise_std: -1.0,
                ..Default::default()
            },
            SyntheticConfig {
                scale_min: 5.0,
                scale_max: 5.0,
                ..Default::default()
            },
        ] {
            assert!(
                matches!(generate_synthetic_dataset(&c), Err(Error::InvalidParams(_))),
                "{c:?}"
            );
        }
    }
}
