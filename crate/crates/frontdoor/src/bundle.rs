//! Dataset bundles: a directory of CSV tables plus a TOML manifest.
//!
//! | file               | header                                             |
//! |--------------------|----------------------------------------------------|
//! | `roles.csv`        | `role_id,name,rank`                                |
//! | `stakeholders.csv` | `stakeholder_id,name,role_id,within_role_rank`     |
//! | `requirements.csv` | `requirement_id,title,status`                      |
//! | `ratings.csv`      | `stakeholder_id,requirement_id,rating` (elicited)  |
//! | `predicted.csv`    | same as ratings, predicted cells (optional)        |
//! | `truth.csv`        | same as ratings, complete matrix (optional)        |
//! | `manifest.toml`    | name, description, `[scale]`, `[metadata]` (optional) |
//!
//! Writing is canonical: rows sorted by id, LF line endings, shortest
//! round-tripping number format. Loading a canonical bundle and saving it
//! again reproduces the same bytes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use saffron_core::domain::{
    CellKey, Project, Provenance, RatingMatrix, RatingScale, Requirement, RequirementId, RequirementStatus, Role,
    RoleId, Stakeholder, StakeholderId,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ROLES: &str = "roles.csv";
pub const STAKEHOLDERS: &str = "stakeholders.csv";
pub const REQUIREMENTS: &str = "requirements.csv";
pub const RATINGS: &str = "ratings.csv";
pub const PREDICTED: &str = "predicted.csv";
pub const TRUTH: &str = "truth.csv";
pub const MANIFEST: &str = "manifest.toml";

const ROLE_HEADER: [&str; 3] = ["role_id", "name", "rank"];
const STAKEHOLDER_HEADER: [&str; 4] = ["stakeholder_id", "name", "role_id", "within_role_rank"];
const REQUIREMENT_HEADER: [&str; 3] = ["requirement_id", "title", "status"];
const RATING_HEADER: [&str; 3] = ["stakeholder_id", "requirement_id", "rating"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: u64,
        column: u64,
        message: String,
    },
    #[error("{file}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Integrity {
        file: String,
        line: Option<u64>,
        message: String,
    },
    #[error("{file}:{line}: rating {value} for ({stakeholder}, {requirement}) is outside the scale [{min}, {max}]")]
    Scale {
        file: String,
        line: u64,
        stakeholder: String,
        requirement: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl BundleError {
    fn integrity(file: &str, line: Option<u64>, message: impl Into<String>) -> Self {
        BundleError::Integrity {
            file: file.to_owned(),
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        BundleError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

type Result<T, E = BundleError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub min: f64,
    pub max: f64,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        let s = RatingScale::default();
        Self {
            min: s.min(),
            max: s.max(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Manifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub scale: ScaleSpec,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Manifest {
    pub fn rating_scale(&self) -> Result<RatingScale> {
        RatingScale::new(self.scale.min, self.scale.max)
            .map_err(|e| BundleError::integrity(MANIFEST, None, e.to_string()))
    }
}

/// A validated project with its ratings. `ratings` holds elicited and
/// predicted cells; `truth`, when present, is a complete reference matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub manifest: Manifest,
    pub project: Project,
    pub ratings: RatingMatrix,
    pub truth: Option<RatingMatrix>,
}

/// A row with the 1-based line it came from.
pub struct Located<T> {
    pub line: u64,
    pub row: T,
}

fn parse_error(file: &str, line: u64, column: u64, message: impl Into<String>) -> BundleError {
    BundleError::Parse {
        file: file.to_owned(),
        line,
        column,
        message: message.into(),
    }
}

/// Reads a headed CSV table as raw string records.
fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Located<Vec<String>>>> {
    let file = file_label(path);
    let bytes = fs::read(path).map_err(|e| BundleError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let found = reader.headers().map_err(|e| csv_error(&file, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_error(
            &file,
            1,
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&file, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(Located {
            line,
            row: record.iter().map(str::to_owned).collect(),
        });
    }
    Ok(rows)
}

fn csv_error(file: &str, err: csv::Error) -> BundleError {
    let line = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => err.to_string(),
    };
    parse_error(file, line, 1, message)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn field<T: FromStr>(file: &str, line: u64, column: usize, name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| parse_error(file, line, column as u64 + 1, format!("invalid {name} `{raw}`: {e}")))
}

fn non_empty<'a>(file: &str, line: u64, column: usize, name: &str, raw: &'a str) -> Result<&'a str> {
    if raw.is_empty() {
        return Err(parse_error(file, line, column as u64 + 1, format!("empty {name}")));
    }
    Ok(raw)
}

pub fn read_roles(path: &Path) -> Result<Vec<Located<Role>>> {
    let file = file_label(path);
    read_table(path, &ROLE_HEADER)?
        .into_iter()
        .map(|Located { line, row }| {
            Ok(Located {
                line,
                row: Role {
                    id: non_empty(&file, line, 0, "role_id", &row[0])?.into(),
                    name: row[1].clone(),
                    rank: field(&file, line, 2, "rank", &row[2])?,
                },
            })
        })
        .collect()
}

pub fn read_stakeholders(path: &Path) -> Result<Vec<Located<Stakeholder>>> {
    let file = file_label(path);
    read_table(path, &STAKEHOLDER_HEADER)?
        .into_iter()
        .map(|Located { line, row }| {
            Ok(Located {
                line,
                row: Stakeholder {
                    id: non_empty(&file, line, 0, "stakeholder_id", &row[0])?.into(),
                    name: row[1].clone(),
                    role_id: non_empty(&file, line, 2, "role_id", &row[2])?.into(),
                    within_role_rank: field(&file, line, 3, "within_role_rank", &row[3])?,
                },
            })
        })
        .collect()
}

pub fn read_requirements(path: &Path) -> Result<Vec<Located<Requirement>>> {
    let file = file_label(path);
    read_table(path, &REQUIREMENT_HEADER)?
        .into_iter()
        .map(|Located { line, row }| {
            let status: RequirementStatus = field(&file, line, 2, "status", &row[2])?;
            Ok(Located {
                line,
                row: Requirement::new(
                    non_empty(&file, line, 0, "requirement_id", &row[0])?,
                    row[1].clone(),
                    status,
                ),
            })
        })
        .collect()
}

pub struct RatingRow {
    pub stakeholder_id: StakeholderId,
    pub requirement_id: RequirementId,
    pub rating: f64,
}

pub fn read_ratings(path: &Path) -> Result<Vec<Located<RatingRow>>> {
    let file = file_label(path);
    read_table(path, &RATING_HEADER)?
        .into_iter()
        .map(|Located { line, row }| {
            let rating: f64 = field(&file, line, 2, "rating", &row[2])?;
            if !rating.is_finite() {
                return Err(parse_error(
                    &file,
                    line,
                    3,
                    format!("rating `{}` is not a finite number", row[2]),
                ));
            }
            Ok(Located {
                line,
                row: RatingRow {
                    stakeholder_id: non_empty(&file, line, 0, "stakeholder_id", &row[0])?.into(),
                    requirement_id: non_empty(&file, line, 1, "requirement_id", &row[1])?.into(),
                    rating,
                },
            })
        })
        .collect()
}

fn check_unique<'a>(file: &str, kind: &str, ids: impl Iterator<Item = (u64, &'a str)>) -> Result<()> {
    let mut seen: HashMap<&str, u64> = HashMap::new();
    for (line, id) in ids {
        if let Some(first) = seen.insert(id, line) {
            return Err(BundleError::integrity(
                file,
                Some(line),
                format!("duplicate {kind} `{id}` (first on line {first})"),
            ));
        }
    }
    Ok(())
}

fn check_permutation(file: &str, what: &str, ranks: &[(u64, u32)]) -> Result<()> {
    let mut sorted: Vec<u32> = ranks.iter().map(|r| r.1).collect();
    sorted.sort_unstable();
    if sorted.iter().enumerate().any(|(i, &r)| r as usize != i + 1) {
        return Err(BundleError::integrity(
            file,
            None,
            format!(
                "ranks not a permutation: {what} are {sorted:?}, expected 1..={}",
                ranks.len()
            ),
        ));
    }
    Ok(())
}

/// Checks references, ranks and uniqueness, then builds the project.
pub fn build_project(
    roles: Vec<Located<Role>>,
    stakeholders: Vec<Located<Stakeholder>>,
    requirements: Vec<Located<Requirement>>,
) -> Result<Project> {
    check_unique(ROLES, "role_id", roles.iter().map(|r| (r.line, r.row.id.as_str())))?;
    check_unique(
        STAKEHOLDERS,
        "stakeholder_id",
        stakeholders.iter().map(|s| (s.line, s.row.id.as_str())),
    )?;
    check_unique(
        REQUIREMENTS,
        "requirement_id",
        requirements.iter().map(|q| (q.line, q.row.id.as_str())),
    )?;
    check_permutation(
        ROLES,
        "role ranks",
        &roles.iter().map(|r| (r.line, r.row.rank)).collect::<Vec<_>>(),
    )?;
    let role_ids: BTreeSet<&RoleId> = roles.iter().map(|r| &r.row.id).collect();
    let mut members: BTreeMap<&RoleId, Vec<(u64, u32)>> = BTreeMap::new();
    for s in &stakeholders {
        if !role_ids.contains(&s.row.role_id) {
            return Err(BundleError::integrity(
                STAKEHOLDERS,
                Some(s.line),
                format!("stakeholder `{}` references unknown role `{}`", s.row.id, s.row.role_id),
            ));
        }
        members
            .entry(&s.row.role_id)
            .or_default()
            .push((s.line, s.row.within_role_rank));
    }
    for (role, ranks) in &members {
        check_permutation(STAKEHOLDERS, &format!("within-role ranks of `{role}`"), ranks)?;
    }
    Project::new(
        roles.into_iter().map(|r| r.row).collect(),
        stakeholders.into_iter().map(|s| s.row).collect(),
        requirements.into_iter().map(|q| q.row).collect(),
    )
    .map_err(|e| BundleError::integrity(STAKEHOLDERS, None, e.to_string()))
}

/// Adds rating rows to `matrix`, checking references, duplicates and scale.
pub fn add_rating_rows(
    file: &str,
    rows: Vec<Located<RatingRow>>,
    project: &Project,
    matrix: &mut RatingMatrix,
    provenance: Provenance,
) -> Result<()> {
    let scale = matrix.scale();
    for Located { line, row } in rows {
        if project.stakeholder(&row.stakeholder_id).is_none() {
            return Err(BundleError::integrity(
                file,
                Some(line),
                format!("unknown stakeholder `{}`", row.stakeholder_id),
            ));
        }
        if project.requirement(&row.requirement_id).is_none() {
            return Err(BundleError::integrity(
                file,
                Some(line),
                format!("unknown requirement `{}`", row.requirement_id),
            ));
        }
        if !scale.contains(row.rating) {
            return Err(BundleError::Scale {
                file: file.to_owned(),
                line,
                stakeholder: row.stakeholder_id.to_string(),
                requirement: row.requirement_id.to_string(),
                value: row.rating,
                min: scale.min(),
                max: scale.max(),
            });
        }
        if matrix.contains(&row.stakeholder_id, &row.requirement_id) {
            return Err(BundleError::integrity(
                file,
                Some(line),
                format!("duplicate rating for ({}, {})", row.stakeholder_id, row.requirement_id),
            ));
        }
        matrix
            .insert(row.stakeholder_id, row.requirement_id, row.rating, provenance)
            .map_err(|e| BundleError::integrity(file, Some(line), e.to_string()))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| BundleError::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        let (line, column) = e.span().map(|span| line_column(&text, span.start)).unwrap_or((1, 1));
        parse_error(MANIFEST, line, column, e.message())
    })
}

fn line_column(text: &str, offset: usize) -> (u64, u64) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() as u64 + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u64 + 1;
    (line, column)
}

pub fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let manifest_path = dir.join(MANIFEST);
    let manifest = if manifest_path.exists() {
        read_manifest(&manifest_path)?
    } else {
        Manifest::default()
    };
    let scale = manifest.rating_scale()?;
    let project = build_project(
        read_roles(&dir.join(ROLES))?,
        read_stakeholders(&dir.join(STAKEHOLDERS))?,
        read_requirements(&dir.join(REQUIREMENTS))?,
    )?;
    let universe = |p: &Project| RatingMatrix::with_universe(scale, p.stakeholder_ids(), p.requirement_ids());

    let mut ratings = universe(&project);
    add_rating_rows(
        RATINGS,
        read_ratings(&dir.join(RATINGS))?,
        &project,
        &mut ratings,
        Provenance::Elicited,
    )?;
    let predicted_path = dir.join(PREDICTED);
    if predicted_path.exists() {
        add_rating_rows(
            PREDICTED,
            read_ratings(&predicted_path)?,
            &project,
            &mut ratings,
            Provenance::Predicted,
        )?;
    }
    let truth_path = dir.join(TRUTH);
    let truth = if truth_path.exists() {
        let mut truth = universe(&project);
        add_rating_rows(
            TRUTH,
            read_ratings(&truth_path)?,
            &project,
            &mut truth,
            Provenance::Elicited,
        )?;
        Some(truth)
    } else {
        None
    };
    Ok(DatasetBundle {
        manifest,
        project,
        ratings,
        truth,
    })
}

/// Shortest decimal form that parses back to the same value.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

fn csv_bytes<'a>(header: &[&str], rows: impl Iterator<Item = Vec<String>> + 'a) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn roles_csv(project: &Project) -> Vec<u8> {
    csv_bytes(
        &ROLE_HEADER,
        project
            .roles()
            .iter()
            .map(|r| vec![r.id.to_string(), r.name.clone(), r.rank.to_string()]),
    )
}

pub fn stakeholders_csv(project: &Project) -> Vec<u8> {
    csv_bytes(
        &STAKEHOLDER_HEADER,
        project.stakeholders().iter().map(|s| {
            vec![
                s.id.to_string(),
                s.name.clone(),
                s.role_id.to_string(),
                s.within_role_rank.to_string(),
            ]
        }),
    )
}

pub fn requirements_csv(project: &Project) -> Vec<u8> {
    csv_bytes(
        &REQUIREMENT_HEADER,
        project
            .requirements()
            .iter()
            .map(|q| vec![q.id.to_string(), q.title.clone(), q.status.as_str().to_owned()]),
    )
}

/// Cells of one provenance (or all cells when `None`), sorted by
/// (stakeholder, requirement).
pub fn ratings_csv(matrix: &RatingMatrix, only: Option<Provenance>) -> Vec<u8> {
    csv_bytes(
        &RATING_HEADER,
        matrix
            .cells()
            .filter(|(_, r)| only.is_none_or(|p| r.provenance == p))
            .map(|((s, q), r)| vec![s.to_string(), q.to_string(), format_number(r.value)]),
    )
}

pub fn manifest_toml(manifest: &Manifest) -> String {
    toml::to_string(manifest).expect("manifest serializes")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    // write-then-rename so readers never observe a half-written table
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| BundleError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| BundleError::io(path, e))
}

fn remove_if_present(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(BundleError::io(path, e)),
        _ => Ok(()),
    }
}

pub fn save_bundle(dir: &Path, bundle: &DatasetBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BundleError::io(dir, e))?;
    write_file(&dir.join(MANIFEST), manifest_toml(&bundle.manifest).as_bytes())?;
    write_file(&dir.join(ROLES), &roles_csv(&bundle.project))?;
    write_file(&dir.join(STAKEHOLDERS), &stakeholders_csv(&bundle.project))?;
    write_file(&dir.join(REQUIREMENTS), &requirements_csv(&bundle.project))?;
    write_file(
        &dir.join(RATINGS),
        &ratings_csv(&bundle.ratings, Some(Provenance::Elicited)),
    )?;
    if bundle.ratings.count_with(Provenance::Predicted) > 0 {
        write_file(
            &dir.join(PREDICTED),
            &ratings_csv(&bundle.ratings, Some(Provenance::Predicted)),
        )?;
    } else {
        remove_if_present(&dir.join(PREDICTED))?;
    }
    match &bundle.truth {
        Some(truth) => write_file(&dir.join(TRUTH), &ratings_csv(truth, None))?,
        None => remove_if_present(&dir.join(TRUTH))?,
    }
    Ok(())
}

/// Standalone rating file (e.g. partial ratings for new requirements) as a
/// matrix on `scale`; references are checked later by the pipeline.
pub fn load_rating_file(path: &Path, scale: RatingScale) -> Result<RatingMatrix> {
    let file = file_label(path);
    let mut matrix = RatingMatrix::new(scale);
    let mut seen: BTreeSet<CellKey> = BTreeSet::new();
    for Located { line, row } in read_ratings(path)? {
        if !scale.contains(row.rating) {
            return Err(BundleError::Scale {
                file,
                line,
                stakeholder: row.stakeholder_id.to_string(),
                requirement: row.requirement_id.to_string(),
                value: row.rating,
                min: scale.min(),
                max: scale.max(),
            });
        }
        if !seen.insert((row.stakeholder_id.clone(), row.requirement_id.clone())) {
            return Err(BundleError::integrity(
                &file,
                Some(line),
                format!("duplicate rating for ({}, {})", row.stakeholder_id, row.requirement_id),
            ));
        }
        matrix
            .insert(row.stakeholder_id, row.requirement_id, row.rating, Provenance::Elicited)
            .map_err(|e| BundleError::integrity(&file, Some(line), e.to_string()))?;
    }
    Ok(matrix)
}
