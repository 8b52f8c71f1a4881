//! On-disk project storage: one directory per project holding the bundle
//! tables and an append-only `revisions.log` (one JSON object per line).

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use saffron_core::pipeline::ProjectState;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{load_bundle, save_bundle, BundleError, DatasetBundle, Manifest};

pub const LOG: &str = "revisions.log";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("project `{0}` already exists")]
    Exists(String),
    #[error("no project `{0}`")]
    NotFound(String),
    #[error("invalid project id `{0}`: use 1-64 letters, digits, `-` or `_`")]
    InvalidId(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub revision: u64,
    pub action: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub detail: serde_json::Map<String, serde_json::Value>,
}

/// A committed revision; readers clone the `Arc` and never block writers
/// for longer than the pointer swap.
#[derive(Clone, Debug)]
pub struct Committed {
    pub manifest: Manifest,
    pub state: ProjectState,
    pub history: Vec<LogEntry>,
}

pub struct Slot {
    /// Held for the whole read-modify-write of a mutation.
    pub writer: tokio::sync::Mutex<()>,
    committed: RwLock<Arc<Committed>>,
}

impl Slot {
    pub fn current(&self) -> Arc<Committed> {
        self.committed.read().clone()
    }
}

pub struct Store {
    root: PathBuf,
    projects: RwLock<BTreeMap<String, Arc<Slot>>>,
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn read_log(path: &Path) -> Result<Vec<LogEntry>, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| io_error(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn append_log(path: &Path, entry: &LogEntry) -> Result<(), StoreError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    let mut line = serde_json::to_string(entry).expect("log entry serializes");
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(|e| io_error(path, e))?;
    file.sync_data().map_err(|e| io_error(path, e))
}

impl Store {
    /// Opens (creating if needed) a storage root and loads every project
    /// directory that has a revision log.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        let mut projects = BTreeMap::new();
        for entry in fs::read_dir(&root).map_err(|e| io_error(&root, e))? {
            let entry = entry.map_err(|e| io_error(&root, e))?;
            let dir = entry.path();
            let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_owned) else {
                continue;
            };
            if !dir.is_dir() || !valid_id(&id) || !dir.join(LOG).exists() {
                continue;
            }
            let history = read_log(&dir.join(LOG))?;
            let revision = history.last().map_or(1, |e| e.revision);
            let bundle = load_bundle(&dir)?;
            let state =
                ProjectState::restore(bundle.project, bundle.ratings, revision).map_err(|e| io_error(&dir, e))?;
            projects.insert(
                id,
                Arc::new(Slot {
                    writer: tokio::sync::Mutex::new(()),
                    committed: RwLock::new(Arc::new(Committed {
                        manifest: bundle.manifest,
                        state,
                        history,
                    })),
                }),
            );
        }
        Ok(Self {
            root,
            projects: RwLock::new(projects),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ids(&self) -> Vec<String> {
        self.projects.read().keys().cloned().collect()
    }

    pub fn slot(&self, id: &str) -> Result<Arc<Slot>, StoreError> {
        self.projects
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))
    }

    /// First free `project-N` id.
    pub fn next_id(&self) -> String {
        let projects = self.projects.read();
        (1..)
            .map(|n| format!("project-{n}"))
            .find(|id| !projects.contains_key(id))
            .expect("unbounded range")
    }

    fn write(&self, id: &str, manifest: &Manifest, state: &ProjectState, entry: &LogEntry) -> Result<(), StoreError> {
        let dir = self.root.join(id);
        save_bundle(
            &dir,
            &DatasetBundle {
                manifest: manifest.clone(),
                project: state.project().clone(),
                ratings: state.ratings().clone(),
                truth: None,
            },
        )?;
        append_log(&dir.join(LOG), entry)
    }

    /// Persists and registers a new project at its initial revision.
    pub fn create(&self, id: &str, manifest: Manifest, state: ProjectState) -> Result<Arc<Committed>, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_owned()));
        }
        let mut projects = self.projects.write();
        if projects.contains_key(id) || self.root.join(id).exists() {
            return Err(StoreError::Exists(id.to_owned()));
        }
        let entry = LogEntry {
            revision: state.revision(),
            action: "create".into(),
            detail: serde_json::Map::new(),
        };
        self.write(id, &manifest, &state, &entry)?;
        let committed = Arc::new(Committed {
            manifest,
            state,
            history: vec![entry],
        });
        projects.insert(
            id.to_owned(),
            Arc::new(Slot {
                writer: tokio::sync::Mutex::new(()),
                committed: RwLock::new(committed.clone()),
            }),
        );
        Ok(committed)
    }

    /// Persists `state` as the next revision of `id` and publishes it. The
    /// caller must hold the slot's writer lock.
    pub fn commit(
        &self,
        id: &str,
        slot: &Slot,
        state: ProjectState,
        action: &str,
        detail: serde_json::Map<String, serde_json::Value>,
    ) -> Result<Arc<Committed>, StoreError> {
        let previous = slot.current();
        let entry = LogEntry {
            revision: state.revision(),
            action: action.to_owned(),
            detail,
        };
        self.write(id, &previous.manifest, &state, &entry)?;
        let mut history = previous.history.clone();
        history.push(entry);
        let committed = Arc::new(Committed {
            manifest: previous.manifest.clone(),
            state,
            history,
        });
        *slot.committed.write() = committed.clone();
        Ok(committed)
    }
}
