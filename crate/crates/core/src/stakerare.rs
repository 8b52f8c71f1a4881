//! Influence-weighted requirement scoring.
//!
//! Roles and stakeholders are weighted linearly by rank: an entity with rank
//! `r` among `n` gets weight `(n + 1 - r) / sum_j (n + 1 - r_j)`. A
//! stakeholder's project influence is their role weight times their weight
//! within the role, and a requirement's importance is the influence-weighted
//! sum of the ratings it received. Unrated cells contribute nothing.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{check_permutation, RatingMatrix, RequirementId, Role, RoleId, Stakeholder, StakeholderId};
use crate::error::{Error, Result};

/// Normalised linear rank weights. `ranks` must be a permutation of `1..=n`.
fn rank_weights(ranks: &[u32], what: &str) -> Result<Vec<f64>> {
    check_permutation(ranks.iter().copied(), what)?;
    let max = u64::from(*ranks.iter().max().expect("non-empty after permutation check"));
    let total: u64 = ranks.iter().map(|&r| max + 1 - u64::from(r)).sum();
    Ok(ranks
        .iter()
        .map(|&r| (max + 1 - u64::from(r)) as f64 / total as f64)
        .collect())
}

pub fn role_influence(roles: &[Role]) -> Result<BTreeMap<RoleId, f64>> {
    let ranks: Vec<u32> = roles.iter().map(|r| r.rank).collect();
    let weights = rank_weights(&ranks, "role ranks")?;
    Ok(roles.iter().map(|r| r.id.clone()).zip(weights).collect())
}

/// Influence of each member within a single role.
pub fn stakeholder_influence<'a>(
    members: impl IntoIterator<Item = &'a Stakeholder>,
) -> Result<BTreeMap<StakeholderId, f64>> {
    let members: Vec<&Stakeholder> = members.into_iter().collect();
    let ranks: Vec<u32> = members.iter().map(|s| s.within_role_rank).collect();
    let what = match members.first() {
        Some(s) => format!("within-role ranks of role `{}`", s.role_id),
        None => "within-role ranks".to_owned(),
    };
    let weights = rank_weights(&ranks, &what)?;
    Ok(members.iter().map(|s| s.id.clone()).zip(weights).collect())
}

pub fn project_influence(
    role_influence: &BTreeMap<RoleId, f64>,
    stakeholder_influence: &BTreeMap<StakeholderId, f64>,
    stakeholders: &[Stakeholder],
) -> Result<BTreeMap<StakeholderId, f64>> {
    stakeholders
        .iter()
        .map(|s| {
            let role = role_influence.get(&s.role_id).ok_or_else(|| Error::MissingRole {
                stakeholder: s.id.to_string(),
                role: s.role_id.to_string(),
            })?;
            let own = stakeholder_influence
                .get(&s.id)
                .ok_or_else(|| Error::UnknownStakeholder(s.id.to_string()))?;
            Ok((s.id.clone(), role * own))
        })
        .collect()
}

/// Role, within-role and project influence for a whole roster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    pub role_influence: BTreeMap<RoleId, f64>,
    pub stakeholder_influence: BTreeMap<StakeholderId, f64>,
    pub project_influence: BTreeMap<StakeholderId, f64>,
}

impl InfluenceTable {
    pub fn compute(roles: &[Role], stakeholders: &[Stakeholder]) -> Result<Self> {
        let role_influence = role_influence(roles)?;
        let mut by_role: BTreeMap<&RoleId, Vec<&Stakeholder>> = BTreeMap::new();
        for s in stakeholders {
            if !role_influence.contains_key(&s.role_id) {
                return Err(Error::MissingRole {
                    stakeholder: s.id.to_string(),
                    role: s.role_id.to_string(),
                });
            }
            by_role.entry(&s.role_id).or_default().push(s);
        }
        let mut stakeholder_influence = BTreeMap::new();
        for members in by_role.into_values() {
            stakeholder_influence.extend(self::stakeholder_influence(members)?);
        }
        let project_influence = project_influence(&role_influence, &stakeholder_influence, stakeholders)?;
        Ok(Self {
            role_influence,
            stakeholder_influence,
            project_influence,
        })
    }
}

/// Importance of every requirement in the matrix's column universe.
///
/// Each requirement sums `influence(s) * rating(s, q)` over the stakeholders
/// `s` that hold a cell for it, in ascending stakeholder order.
pub fn requirement_importance(
    ratings: &RatingMatrix,
    influence: &BTreeMap<StakeholderId, f64>,
) -> Result<BTreeMap<RequirementId, f64>> {
    let mut importance: BTreeMap<RequirementId, f64> =
        ratings.requirements().iter().map(|q| (q.clone(), 0.0)).collect();
    for ((s, q), rating) in ratings.cells() {
        let weight = influence
            .get(s)
            .ok_or_else(|| Error::UnknownStakeholder(s.to_string()))?;
        *importance.entry(q.clone()).or_insert(0.0) += weight * rating.value;
    }
    Ok(importance)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub requirement_id: RequirementId,
    pub importance: f64,
    pub rank: usize,
}

/// Requirements ordered by importance, highest first; ties by ascending id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn from_importance(importance: BTreeMap<RequirementId, f64>) -> Self {
        let mut scored: Vec<(RequirementId, f64)> = importance.into_iter().collect();
        scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            other => other,
        });
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (requirement_id, importance))| RankedEntry {
                requirement_id,
                importance,
                rank: i + 1,
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &RequirementId> {
        self.entries.iter().map(|e| &e.requirement_id)
    }

    pub fn entry(&self, id: &RequirementId) -> Option<&RankedEntry> {
        self.entries.iter().find(|e| &e.requirement_id == id)
    }

    pub fn rank_of(&self, id: &RequirementId) -> Option<usize> {
        self.entry(id).map(|e| e.rank)
    }

    /// Importance keyed by requirement id.
    pub fn importance(&self) -> BTreeMap<RequirementId, f64> {
        self.entries
            .iter()
            .map(|e| (e.requirement_id.clone(), e.importance))
            .collect()
    }
}

pub fn prioritize(ratings: &RatingMatrix, roles: &[Role], stakeholders: &[Stakeholder]) -> Result<RankedList> {
    let table = InfluenceTable::compute(roles, stakeholders)?;
    let importance = requirement_importance(ratings, &table.project_influence)?;
    Ok(RankedList::from_importance(importance))
}
