//! Core data model shared by every stage of the pipeline: roles,
//! stakeholders, requirements, and the sparse stakeholder x requirement
//! rating and relation matrices.
//!
//! All values are immutable once built; "mutation" produces a new value.
//! Maps are ordered (`BTreeMap`/`BTreeSet`) so that every iteration order,
//! and therefore every floating-point reduction, is deterministic.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                Self(id.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(id: String) -> Self {
                Self(id)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Opaque role identifier.
    RoleId
);
id_type!(
    /// Opaque stakeholder identifier.
    StakeholderId
);
id_type!(
    /// Opaque requirement identifier. Ordering is plain lexicographic and is
    /// used as the deterministic tie-break throughout the crate.
    RequirementId
);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Role {
    pub id: RoleId,
    pub name: String,
    /// 1 = most influential role.
    pub rank: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stakeholder {
    pub id: StakeholderId,
    pub name: String,
    pub role_id: RoleId,
    /// 1 = most influential within the role.
    pub within_role_rank: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequirementStatus {
    Elicited,
    New,
}

impl RequirementStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RequirementStatus::Elicited => "elicited",
            RequirementStatus::New => "new",
        }
    }
}

impl std::str::FromStr for RequirementStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "elicited" => Ok(RequirementStatus::Elicited),
            "new" => Ok(RequirementStatus::New),
            other => Err(format!("unknown requirement status `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: RequirementId,
    pub title: String,
    pub status: RequirementStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Requirement {
    pub fn new(id: impl Into<RequirementId>, title: impl Into<String>, status: RequirementStatus) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            status,
            description: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Elicited,
    Predicted,
}

/// Closed rating interval `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    min: f64,
    max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidScale { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self { min: 0.0, max: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub value: f64,
    pub provenance: Provenance,
}

pub type CellKey = (StakeholderId, RequirementId);

/// Sparse stakeholder x requirement matrix of ratings.
///
/// Besides the stored cells the matrix carries its row and column universes,
/// so that a requirement nobody rated still exists (with importance 0) and a
/// stakeholder without ratings still counts as a row of the relation matrix.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RatingMatrix {
    scale: RatingScale,
    stakeholders: BTreeSet<StakeholderId>,
    requirements: BTreeSet<RequirementId>,
    cells: BTreeMap<CellKey, Rating>,
}

impl RatingMatrix {
    pub fn new(scale: RatingScale) -> Self {
        Self {
            scale,
            ..Self::default()
        }
    }

    /// Empty matrix over explicit row/column universes.
    pub fn with_universe<S, R>(scale: RatingScale, stakeholders: S, requirements: R) -> Self
    where
        S: IntoIterator<Item = StakeholderId>,
        R: IntoIterator<Item = RequirementId>,
    {
        Self {
            scale,
            stakeholders: stakeholders.into_iter().collect(),
            requirements: requirements.into_iter().collect(),
            cells: BTreeMap::new(),
        }
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn stakeholders(&self) -> &BTreeSet<StakeholderId> {
        &self.stakeholders
    }

    pub fn requirements(&self) -> &BTreeSet<RequirementId> {
        &self.requirements
    }

    pub fn add_stakeholder(&mut self, id: StakeholderId) {
        self.stakeholders.insert(id);
    }

    pub fn add_requirement(&mut self, id: RequirementId) {
        self.requirements.insert(id);
    }

    fn check_value(&self, stakeholder: &StakeholderId, requirement: &RequirementId, value: f64) -> Result<()> {
        if !value.is_finite() || !self.scale.contains(value) {
            return Err(Error::RatingOutOfScale {
                stakeholder: stakeholder.to_string(),
                requirement: requirement.to_string(),
                value,
                min: self.scale.min,
                max: self.scale.max,
            });
        }
        Ok(())
    }

    /// Stores a new cell. Fails if the cell already exists or the value is
    /// outside the scale. Row and column are added to the universes.
    pub fn insert(
        &mut self,
        stakeholder: StakeholderId,
        requirement: RequirementId,
        value: f64,
        provenance: Provenance,
    ) -> Result<()> {
        self.check_value(&stakeholder, &requirement, value)?;
        let key = (stakeholder, requirement);
        if self.cells.contains_key(&key) {
            return Err(Error::DuplicateCell {
                stakeholder: key.0.to_string(),
                requirement: key.1.to_string(),
            });
        }
        self.stakeholders.insert(key.0.clone());
        self.requirements.insert(key.1.clone());
        self.cells.insert(key, Rating { value, provenance });
        Ok(())
    }

    /// Stores or replaces a cell.
    pub fn upsert(
        &mut self,
        stakeholder: StakeholderId,
        requirement: RequirementId,
        value: f64,
        provenance: Provenance,
    ) -> Result<Option<Rating>> {
        self.check_value(&stakeholder, &requirement, value)?;
        self.stakeholders.insert(stakeholder.clone());
        self.requirements.insert(requirement.clone());
        Ok(self
            .cells
            .insert((stakeholder, requirement), Rating { value, provenance }))
    }

    pub fn get(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> Option<&Rating> {
        // BTreeMap lookups need an owned tuple key.
        self.cells.get(&(stakeholder.clone(), requirement.clone()))
    }

    pub fn value(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> Option<f64> {
        self.get(stakeholder, requirement).map(|r| r.value)
    }

    pub fn contains(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> bool {
        self.get(stakeholder, requirement).is_some()
    }

    /// Cells in ascending (stakeholder, requirement) order.
    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &Rating)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn count_with(&self, provenance: Provenance) -> usize {
        self.cells.values().filter(|r| r.provenance == provenance).count()
    }

    /// Sub-matrix keeping only the given requirements (columns). Requirements
    /// not in this matrix's universe are ignored.
    pub fn restrict_requirements(&self, keep: &BTreeSet<RequirementId>) -> RatingMatrix {
        self.filter(|_, r| keep.contains(r), |r| keep.contains(r), |_| true)
    }

    /// Sub-matrix keeping only cells whose stakeholder is in `keep`; the
    /// stakeholder universe is left intact.
    pub fn restrict_raters(&self, keep: &BTreeSet<StakeholderId>) -> RatingMatrix {
        self.filter(|s, _| keep.contains(s), |_| true, |_| true)
    }

    fn filter(
        &self,
        cell: impl Fn(&StakeholderId, &RequirementId) -> bool,
        column: impl Fn(&RequirementId) -> bool,
        row: impl Fn(&StakeholderId) -> bool,
    ) -> RatingMatrix {
        RatingMatrix {
            scale: self.scale,
            stakeholders: self.stakeholders.iter().filter(|s| row(s)).cloned().collect(),
            requirements: self.requirements.iter().filter(|r| column(r)).cloned().collect(),
            cells: self
                .cells
                .iter()
                .filter(|((s, r), _)| row(s) && column(r) && cell(s, r))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

/// Binary stakeholder x requirement "has rated" matrix.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RelationMatrix {
    stakeholders: BTreeSet<StakeholderId>,
    requirements: BTreeSet<RequirementId>,
    pairs: BTreeSet<CellKey>,
}

impl RelationMatrix {
    pub fn stakeholders(&self) -> &BTreeSet<StakeholderId> {
        &self.stakeholders
    }

    pub fn requirements(&self) -> &BTreeSet<RequirementId> {
        &self.requirements
    }

    pub fn contains(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> bool {
        self.pairs.contains(&(stakeholder.clone(), requirement.clone()))
    }

    /// 1.0 if the stakeholder rated the requirement, else 0.0.
    pub fn indicator(&self, stakeholder: &StakeholderId, requirement: &RequirementId) -> f64 {
        if self.contains(stakeholder, requirement) {
            1.0
        } else {
            0.0
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CellKey> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Presence indicator of every stored cell, regardless of value or provenance.
pub fn build_relation_matrix(ratings: &RatingMatrix) -> RelationMatrix {
    RelationMatrix {
        stakeholders: ratings.stakeholders.clone(),
        requirements: ratings.requirements.clone(),
        pairs: ratings.cells.keys().cloned().collect(),
    }
}

/// Merges an existing rating matrix with the matrix collected for newly
/// arrived requirements. The requirement sets must be disjoint.
pub fn merge_rating_matrices(old: &RatingMatrix, new: &RatingMatrix) -> Result<RatingMatrix> {
    if old.scale != new.scale {
        return Err(Error::ScaleMismatch {
            left_min: old.scale.min,
            left_max: old.scale.max,
            right_min: new.scale.min,
            right_max: new.scale.max,
        });
    }
    if let Some(dup) = old.requirements.intersection(&new.requirements).next() {
        return Err(Error::DuplicateRequirement(dup.to_string()));
    }
    let mut merged = old.clone();
    merged.stakeholders.extend(new.stakeholders.iter().cloned());
    merged.requirements.extend(new.requirements.iter().cloned());
    merged.cells.extend(new.cells.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(merged)
}

/// Validated roster of roles, stakeholders and requirements.
#[derive(Clone, Debug, PartialEq)]
pub struct Project {
    roles: Vec<Role>,
    stakeholders: Vec<Stakeholder>,
    requirements: Vec<Requirement>,
}

impl Project {
    /// Checks id uniqueness, rank permutations and role references.
    /// Entries are stored sorted by id.
    pub fn new(
        mut roles: Vec<Role>,
        mut stakeholders: Vec<Stakeholder>,
        mut requirements: Vec<Requirement>,
    ) -> Result<Self> {
        roles.sort_by(|a, b| a.id.cmp(&b.id));
        stakeholders.sort_by(|a, b| a.id.cmp(&b.id));
        requirements.sort_by(|a, b| a.id.cmp(&b.id));

        check_unique("role", roles.iter().map(|r| r.id.as_str()))?;
        check_unique("stakeholder", stakeholders.iter().map(|s| s.id.as_str()))?;
        check_unique("requirement", requirements.iter().map(|r| r.id.as_str()))?;

        check_permutation(roles.iter().map(|r| r.rank), "role ranks")?;

        let role_ids: BTreeSet<&RoleId> = roles.iter().map(|r| &r.id).collect();
        for s in &stakeholders {
            if !role_ids.contains(&s.role_id) {
                return Err(Error::UnknownRole {
                    stakeholder: s.id.to_string(),
                    role: s.role_id.to_string(),
                });
            }
        }
        for role in &roles {
            let ranks = stakeholders
                .iter()
                .filter(|s| s.role_id == role.id)
                .map(|s| s.within_role_rank);
            // Roles without members are allowed; they simply carry no stakeholders.
            check_permutation_or_empty(ranks, &format!("within-role ranks of role `{}`", role.id))?;
        }

        Ok(Self {
            roles,
            stakeholders,
            requirements,
        })
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn stakeholders(&self) -> &[Stakeholder] {
        &self.stakeholders
    }

    pub fn requirements(&self) -> &[Requirement] {
        &self.requirements
    }

    pub fn stakeholder(&self, id: &StakeholderId) -> Option<&Stakeholder> {
        self.stakeholders
            .binary_search_by(|s| s.id.cmp(id))
            .ok()
            .map(|i| &self.stakeholders[i])
    }

    pub fn requirement(&self, id: &RequirementId) -> Option<&Requirement> {
        self.requirements
            .binary_search_by(|r| r.id.cmp(id))
            .ok()
            .map(|i| &self.requirements[i])
    }

    pub fn stakeholder_ids(&self) -> BTreeSet<StakeholderId> {
        self.stakeholders.iter().map(|s| s.id.clone()).collect()
    }

    pub fn requirement_ids_with(&self, status: RequirementStatus) -> BTreeSet<RequirementId> {
        self.requirements
            .iter()
            .filter(|r| r.status == status)
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn requirement_ids(&self) -> BTreeSet<RequirementId> {
        self.requirements.iter().map(|r| r.id.clone()).collect()
    }

    /// Adds requirements (typically status=new). Ids must be fresh.
    pub fn with_requirements(&self, extra: impl IntoIterator<Item = Requirement>) -> Result<Self> {
        let mut requirements = self.requirements.clone();
        requirements.extend(extra);
        Project::new(self.roles.clone(), self.stakeholders.clone(), requirements)
    }

    /// Marks the given requirements as elicited.
    pub fn mark_elicited(&self, ids: &BTreeSet<RequirementId>) -> Self {
        let mut next = self.clone();
        for r in next.requirements.iter_mut().filter(|r| ids.contains(&r.id)) {
            r.status = RequirementStatus::Elicited;
        }
        next
    }

    /// Checks that every cell of `ratings` references a known stakeholder and
    /// requirement.
    pub fn check_ratings(&self, ratings: &RatingMatrix) -> Result<()> {
        for ((s, r), _) in ratings.cells() {
            if self.stakeholder(s).is_none() {
                return Err(Error::UnknownStakeholder(s.to_string()));
            }
            if self.requirement(r).is_none() {
                return Err(Error::UnknownRequirement(r.to_string()));
            }
        }
        Ok(())
    }
}

fn check_unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                kind,
                id: id.to_owned(),
            });
        }
    }
    Ok(())
}

/// Ranks must be exactly `1..=n` for some `n >= 1`.
pub(crate) fn check_permutation(ranks: impl Iterator<Item = u32>, what: &str) -> Result<()> {
    let mut ranks: Vec<u32> = ranks.collect();
    if ranks.is_empty() {
        return Err(Error::InvalidRanks(format!("{what}: empty")));
    }
    ranks.sort_unstable();
    for (expected, &rank) in (1u32..).zip(&ranks) {
        if rank != expected {
            return Err(Error::InvalidRanks(format!(
                "{what}: expected 1..={} but got {ranks:?}",
                ranks.len()
            )));
        }
    }
    Ok(())
}

fn check_permutation_or_empty(ranks: impl Iterator<Item = u32>, what: &str) -> Result<()> {
    let mut ranks = ranks.peekable();
    if ranks.peek().is_none() {
        return Ok(());
    }
    check_permutation(ranks, what)
}
