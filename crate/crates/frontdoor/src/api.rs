//! JSON HTTP API over the project store.
//!
//! ```text
//! GET  /projects
//! POST /projects
//! GET  /projects/{id}/ranking
//! POST /projects/{id}/requirements
//! PUT  /projects/{id}/ratings
//! GET  /projects/{id}/requirements/{rid}/likelihoods?method=&top_k=
//! POST /projects/{id}/incorporate
//! GET  /projects/{id}/report
//! ```
//!
//! Mutations accept an optional `expected_revision`; a stale value is
//! rejected with `409 revision_conflict`. Mutations of one project are
//! serialized; reads see the last committed revision.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use saffron_core::domain::{
    Provenance, RatingMatrix, RatingScale, Requirement, RequirementId, RequirementStatus, Role, Stakeholder,
    StakeholderId,
};
use saffron_core::pipeline::{initial_prioritization, reprioritize, ProjectState};
use saffron_core::similarity::SimilarityMethod;
use saffron_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bundle::{add_rating_rows, build_project, BundleError, Located, Manifest, RatingRow, ScaleSpec};
use crate::ops::{
    incorporation_report, influence_rows, likelihoods, project_counts, ranking_report, ranking_rows,
    IncorporationReport, InfluenceRow, LikelihoodReport, PredictionParams, ProjectCounts, RankingReport, RankingRow,
};
use crate::store::{Committed, LogEntry, Slot, Store, StoreError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, field: Option<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.to_owned(),
            message: message.into(),
            field,
        }
    }

    fn conflict(expected: u64, actual: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "revision_conflict",
            format!("expected revision {expected} but the project is at {actual}"),
            Some("expected_revision".into()),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// One code per core error variant.
impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        use CoreError::*;
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        let (status, code, field) = match &e {
            InvalidScale { .. } => (unprocessable, "invalid_scale", Some("scale")),
            ScaleMismatch { .. } => (unprocessable, "scale_mismatch", Some("scale")),
            DuplicateRequirement(_) => (StatusCode::CONFLICT, "duplicate_requirement", Some("requirements")),
            DuplicateCell { .. } => (unprocessable, "duplicate_rating", Some("ratings")),
            RatingOutOfScale { .. } => (unprocessable, "rating_out_of_scale", Some("ratings")),
            DuplicateId { .. } => (unprocessable, "duplicate_id", None),
            InvalidRanks(_) => (unprocessable, "invalid_ranks", None),
            UnknownRole { .. } => (unprocessable, "unknown_role", Some("stakeholders")),
            MissingRole { .. } => (unprocessable, "missing_role", Some("stakeholders")),
            UnknownStakeholder(_) => (unprocessable, "unknown_stakeholder", Some("stakeholder_id")),
            UnknownRequirement(_) => (StatusCode::NOT_FOUND, "unknown_requirement", Some("requirement_id")),
            LengthMismatch { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "length_mismatch", None),
            TooFewRequirements(_) => (unprocessable, "too_few_requirements", None),
            NotNewRequirement(_) => (unprocessable, "not_new_requirement", Some("requirement_id")),
            AlreadyRated { .. } => (unprocessable, "already_rated", None),
            InvalidFraction(_) => (unprocessable, "invalid_fraction", Some("fraction")),
            InvalidConfig(_) => (unprocessable, "invalid_config", None),
            UnknownCell { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "unknown_cell", None),
            Divergence { .. } => (unprocessable, "divergence", Some("learning_rate")),
            UntrainedModel => (StatusCode::INTERNAL_SERVER_ERROR, "untrained_model", None),
            NoElicitedData => (unprocessable, "no_elicited_data", Some("ratings")),
            SetMismatch(_) => (unprocessable, "set_mismatch", None),
            EmptySet => (unprocessable, "empty_set", None),
            InvalidBaseline { .. } => (unprocessable, "invalid_baseline", None),
            InvalidParams(_) => (unprocessable, "invalid_params", None),
            InvalidSetting(_) => (unprocessable, "invalid_setting", None),
        };
        ApiError::new(status, code, e.to_string(), field.map(str::to_owned))
    }
}

/// Bundle validation reports positions as `file:line`; request bodies use
/// the same validators with `line` set to the array index.
fn body_field(file: &str, index: Option<u64>, suffix: &str) -> String {
    let key = file.trim_end_matches(".csv").trim_end_matches(".toml");
    match index {
        Some(i) => format!("{key}[{i}]{suffix}"),
        None => key.to_owned(),
    }
}

impl From<BundleError> for ApiError {
    fn from(e: BundleError) -> Self {
        let unprocessable = StatusCode::UNPROCESSABLE_ENTITY;
        match &e {
            BundleError::Parse { file, line, .. } => ApiError::new(
                StatusCode::BAD_REQUEST,
                "parse_error",
                e.to_string(),
                Some(body_field(file, Some(*line), "")),
            ),
            BundleError::Integrity { file, line, message } => ApiError::new(
                unprocessable,
                "integrity_error",
                message.clone(),
                Some(body_field(file, *line, "")),
            ),
            BundleError::Scale {
                file,
                line,
                stakeholder,
                requirement,
                value,
                min,
                max,
            } => ApiError::new(
                unprocessable,
                "scale_error",
                format!("rating {value} for ({stakeholder}, {requirement}) is outside the scale [{min}, {max}]"),
                Some(body_field(file, Some(*line), ".rating")),
            ),
            BundleError::Io { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string(), None)
            }
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Exists(_) => ApiError::new(
                StatusCode::CONFLICT,
                "project_exists",
                e.to_string(),
                Some("project_id".into()),
            ),
            StoreError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "project_not_found", e.to_string(), None),
            StoreError::InvalidId(_) => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_project_id",
                e.to_string(),
                Some("project_id".into()),
            ),
            StoreError::Bundle(b) => b.into(),
            StoreError::Io { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string(), None)
            }
        }
    }
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text(), None))
}

pub type AppState = Arc<Store>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}/ranking", get(get_ranking))
        .route("/projects/{id}/requirements", post(add_requirements))
        .route("/projects/{id}/ratings", put(put_ratings))
        .route("/projects/{id}/requirements/{rid}/likelihoods", get(get_likelihoods))
        .route("/projects/{id}/incorporate", post(incorporate))
        .route("/projects/{id}/report", get(get_report))
        .with_state(store)
}

#[derive(Serialize)]
struct ProjectSummary {
    project_id: String,
    name: Option<String>,
    revision: u64,
}

async fn list_projects(State(store): State<AppState>) -> Json<serde_json::Value> {
    let projects: Vec<ProjectSummary> = store
        .ids()
        .into_iter()
        .filter_map(|id| {
            let c = store.slot(&id).ok()?.current();
            Some(ProjectSummary {
                project_id: id,
                name: c.manifest.name.clone(),
                revision: c.state.revision(),
            })
        })
        .collect();
    Json(json!({ "projects": projects }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleBody {
    pub role_id: String,
    #[serde(default)]
    pub name: String,
    pub rank: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderBody {
    pub stakeholder_id: String,
    #[serde(default)]
    pub name: String,
    pub role_id: String,
    pub within_role_rank: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementBody {
    pub requirement_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default = "elicited")]
    pub status: RequirementStatus,
}

fn elicited() -> RequirementStatus {
    RequirementStatus::Elicited
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingBody {
    pub stakeholder_id: String,
    pub requirement_id: String,
    pub rating: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateProject {
    pub project_id: Option<String>,
    pub name: Option<String>,
    pub description: Option<String>,
    #[serde(default)]
    pub scale: ScaleSpec,
    pub roles: Vec<RoleBody>,
    pub stakeholders: Vec<StakeholderBody>,
    pub requirements: Vec<RequirementBody>,
    #[serde(default)]
    pub ratings: Vec<RatingBody>,
}

fn indexed<T, U>(items: Vec<T>, f: impl Fn(T) -> U) -> Vec<Located<U>> {
    items
        .into_iter()
        .enumerate()
        .map(|(i, t)| Located {
            line: i as u64,
            row: f(t),
        })
        .collect()
}

fn rating_rows(ratings: Vec<RatingBody>) -> Vec<Located<RatingRow>> {
    indexed(ratings, |r| RatingRow {
        stakeholder_id: r.stakeholder_id.into(),
        requirement_id: r.requirement_id.into(),
        rating: r.rating,
    })
}

#[derive(Serialize)]
struct Created {
    project_id: String,
    #[serde(flatten)]
    ranking: RankingReport,
}

async fn create_project(
    State(store): State<AppState>,
    body: Result<Json<CreateProject>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let body = json_body(body)?;
    let scale = RatingScale::new(body.scale.min, body.scale.max).map_err(ApiError::from)?;
    for (i, r) in body.ratings.iter().enumerate() {
        if !r.rating.is_finite() {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_body",
                "ratings must be finite numbers",
                Some(format!("ratings[{i}].rating")),
            ));
        }
    }
    let project = build_project(
        indexed(body.roles, |r| Role {
            id: r.role_id.into(),
            name: r.name,
            rank: r.rank,
        }),
        indexed(body.stakeholders, |s| Stakeholder {
            id: s.stakeholder_id.into(),
            name: s.name,
            role_id: s.role_id.into(),
            within_role_rank: s.within_role_rank,
        }),
        indexed(body.requirements, |q| {
            Requirement::new(q.requirement_id, q.title, q.status)
        }),
    )?;
    let mut ratings = RatingMatrix::with_universe(scale, project.stakeholder_ids(), project.requirement_ids());
    add_rating_rows(
        "ratings",
        rating_rows(body.ratings),
        &project,
        &mut ratings,
        Provenance::Elicited,
    )?;
    let manifest = Manifest {
        name: body.name,
        description: body.description,
        scale: body.scale,
        metadata: Default::default(),
    };
    let id = body.project_id.unwrap_or_else(|| store.next_id());
    let committed = tokio::task::spawn_blocking(move || -> Result<(String, Arc<Committed>), ApiError> {
        let state = initial_prioritization(project, ratings)?;
        let committed = store.create(&id, manifest, state)?;
        Ok((id, committed))
    })
    .await
    .map_err(join_error)??;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            project_id: committed.0,
            ranking: ranking_report(&committed.1.state),
        }),
    ))
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None)
}

async fn get_ranking(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<RankingReport>, ApiError> {
    let current = store.slot(&id)?.current();
    Ok(Json(ranking_report(&current.state)))
}

/// Runs `mutate` against the latest revision while holding the project's
/// writer lock, then persists and publishes the result.
async fn mutate<T, F>(
    store: AppState,
    id: String,
    expected: Option<u64>,
    action: &'static str,
    mutate: F,
) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&ProjectState) -> Result<(ProjectState, serde_json::Map<String, serde_json::Value>, T), ApiError>
        + Send
        + 'static,
{
    let slot: Arc<Slot> = store.slot(&id)?;
    let _guard = slot.writer.lock().await;
    let current = slot.current();
    if let Some(expected) = expected {
        if expected != current.state.revision() {
            return Err(ApiError::conflict(expected, current.state.revision()));
        }
    }
    let slot_for_task = slot.clone();
    tokio::task::spawn_blocking(move || {
        let (next, detail, out) = mutate(&current.state)?;
        store.commit(&id, &slot_for_task, next, action, detail)?;
        Ok(out)
    })
    .await
    .map_err(join_error)?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewRequirementBody {
    pub requirement_id: String,
    #[serde(default)]
    pub title: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddRequirements {
    pub expected_revision: Option<u64>,
    pub requirements: Vec<NewRequirementBody>,
}

#[derive(Serialize)]
struct Added {
    revision: u64,
    added: Vec<String>,
    pending_requirements: Vec<RequirementId>,
}

async fn add_requirements(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AddRequirements>, JsonRejection>,
) -> Result<(StatusCode, Json<Added>), ApiError> {
    let body = json_body(body)?;
    for (i, q) in body.requirements.iter().enumerate() {
        if q.requirement_id.is_empty() {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_body",
                "empty requirement_id",
                Some(format!("requirements[{i}].requirement_id")),
            ));
        }
    }
    let added: Vec<String> = body.requirements.iter().map(|q| q.requirement_id.clone()).collect();
    let requirements: Vec<Requirement> = body
        .requirements
        .into_iter()
        .map(|q| Requirement::new(q.requirement_id, q.title, RequirementStatus::New))
        .collect();
    let out = mutate(store, id, body.expected_revision, "add_requirements", move |state| {
        let next = state.add_requirements(requirements)?;
        let detail = json!({ "requirements": added })
            .as_object()
            .cloned()
            .unwrap_or_default();
        let out = Added {
            revision: next.revision(),
            added,
            pending_requirements: next.new_requirements().into_iter().collect(),
        };
        Ok((next, detail, out))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutRatings {
    pub expected_revision: Option<u64>,
    pub ratings: Vec<RatingBody>,
}

#[derive(Serialize)]
struct Recorded {
    revision: u64,
    recorded: usize,
    ranking: Vec<RankingRow>,
}

async fn put_ratings(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<PutRatings>, JsonRejection>,
) -> Result<Json<Recorded>, ApiError> {
    let body = json_body(body)?;
    let rows = body.ratings;
    let out = mutate(store, id, body.expected_revision, "record_ratings", move |state| {
        let project = state.project();
        let scale = state.ratings().scale();
        let mut seen = std::collections::BTreeSet::new();
        for (i, r) in rows.iter().enumerate() {
            let at = |suffix: &str| Some(format!("ratings[{i}].{suffix}"));
            let sid = StakeholderId::from(r.stakeholder_id.as_str());
            let rid = RequirementId::from(r.requirement_id.as_str());
            if project.stakeholder(&sid).is_none() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "unknown_stakeholder",
                    format!("unknown stakeholder `{sid}`"),
                    at("stakeholder_id"),
                ));
            }
            if project.requirement(&rid).is_none() {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "unknown_requirement",
                    format!("unknown requirement `{rid}`"),
                    at("requirement_id"),
                ));
            }
            if !scale.contains(r.rating) {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "scale_error",
                    format!(
                        "rating {} for ({sid}, {rid}) is outside the scale [{}, {}]",
                        r.rating,
                        scale.min(),
                        scale.max()
                    ),
                    at("rating"),
                ));
            }
            if !seen.insert((sid, rid)) {
                return Err(ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "duplicate_rating",
                    "the same cell appears twice in one batch",
                    at("requirement_id"),
                ));
            }
        }
        let recorded = rows.len();
        let next = state.record_ratings(
            rows.into_iter()
                .map(|r| (r.stakeholder_id.into(), r.requirement_id.into(), r.rating)),
        )?;
        let detail = json!({ "ratings": recorded }).as_object().cloned().unwrap_or_default();
        let out = Recorded {
            revision: next.revision(),
            recorded,
            ranking: ranking_rows(&next),
        };
        Ok((next, detail, out))
    })
    .await?;
    Ok(Json(out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodQuery {
    pub method: Option<SimilarityMethod>,
    pub top_k: Option<usize>,
}

async fn get_likelihoods(
    State(store): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
    query: Result<Query<LikelihoodQuery>, QueryRejection>,
) -> Result<Json<LikelihoodReport>, ApiError> {
    let Query(query) =
        query.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text(), None))?;
    let current = store.slot(&id)?.current();
    let rid = RequirementId::from(rid);
    if current.state.project().requirement(&rid).is_none() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_requirement",
            format!("unknown requirement `{rid}`"),
            Some("requirement_id".into()),
        ));
    }
    let report = tokio::task::spawn_blocking(move || {
        likelihoods(&current.state, &rid, query.method.unwrap_or_default(), query.top_k)
    })
    .await
    .map_err(join_error)??;
    Ok(Json(report))
}

async fn incorporate(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<serde_json::Value>, JsonRejection>,
) -> Result<Json<IncorporationReport>, ApiError> {
    // serde cannot combine `flatten` with `deny_unknown_fields`; split by hand
    let mut value = json_body(body)?;
    let expected_revision = match value.as_object_mut() {
        Some(map) => match map.remove("expected_revision") {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(serde_json::from_value::<u64>(v).map_err(|e| {
                ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "invalid_body",
                    e.to_string(),
                    Some("expected_revision".into()),
                )
            })?),
        },
        None => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_body",
                "expected a JSON object",
                None,
            ));
        }
    };
    let params: PredictionParams = serde_json::from_value(value)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string(), None))?;
    let options = params.options();
    let out = mutate(store, id, expected_revision, "incorporate", move |state| {
        let result = reprioritize(state, &options)?;
        let report = incorporation_report(state, &result, &options);
        let detail = json!({
            "fraction": report.fraction,
            "method": report.method,
            "seed": report.seed,
            "candidate_cells": report.candidate_cells,
            "predicted_cells": report.predicted_cells,
            "interaction_count": report.interaction_count,
            "final_cost": report.training.as_ref().map(|t| t.final_cost),
        })
        .as_object()
        .cloned()
        .unwrap_or_default();
        Ok((result.state, detail, report))
    })
    .await?;
    Ok(Json(out))
}

#[derive(Serialize)]
struct ProjectReport {
    project_id: String,
    name: Option<String>,
    description: Option<String>,
    revision: u64,
    scale: ScaleSpec,
    counts: ProjectCounts,
    influence: Vec<InfluenceRow>,
    ranking: Vec<RankingRow>,
    pending_requirements: Vec<RequirementId>,
    history: Vec<LogEntry>,
}

async fn get_report(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<ProjectReport>, ApiError> {
    let current = store.slot(&id)?.current();
    let state = &current.state;
    Ok(Json(ProjectReport {
        project_id: id,
        name: current.manifest.name.clone(),
        description: current.manifest.description.clone(),
        revision: state.revision(),
        scale: current.manifest.scale,
        counts: project_counts(state),
        influence: influence_rows(state.project())?,
        ranking: ranking_rows(state),
        pending_requirements: state.new_requirements().into_iter().collect(),
        history: current.history.clone(),
    }))
}
