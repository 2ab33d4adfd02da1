//! Sessions on disk: one JSON-lines file per session holding the setup on
//! the first line and one answer per following line. Everything else is
//! recomputed by replaying the answers.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex as SyncMutex};

use fairdiv_core::session::{step, SessionConfig, Step};
use fairdiv_core::{Algorithm, FairDivError, Preferred, QueryLog};
use serde::{Deserialize, Serialize};
use tokio::io::AsyncWriteExt;
use tokio::sync::Mutex;
use uuid::Uuid;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("session not found")]
    NotFound,
    #[error("{0}")]
    Conflict(String),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt session file: {0}")]
    Corrupt(String),
}

/// The first line of a session file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setup {
    pub algorithm: Algorithm,
    pub n: usize,
    pub item_labels: Vec<String>,
    pub agent_labels: Vec<String>,
}

impl Setup {
    pub fn config(&self) -> SessionConfig {
        SessionConfig {
            algorithm: self.algorithm,
            n: self.n,
            m: self.item_labels.len(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AnswerLine {
    choice: Preferred,
}

/// A session with its derived state.
#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub setup: Setup,
    pub answers: Vec<Preferred>,
    pub state: Step,
    pub log: QueryLog,
}

impl Session {
    fn replay(id: String, setup: Setup, answers: Vec<Preferred>) -> Result<Self, StoreError> {
        let (state, log) = step(&setup.config(), &answers).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        Ok(Self {
            id,
            setup,
            answers,
            state,
            log,
        })
    }
}

type Slot = Arc<Mutex<Option<Session>>>;

pub struct Store {
    dir: PathBuf,
    slots: SyncMutex<HashMap<String, Slot>>,
}

fn validate_labels(labels: &[String], what: &str) -> Result<(), StoreError> {
    let mut seen = HashSet::new();
    for l in labels {
        if l.trim().is_empty() {
            return Err(StoreError::BadRequest(format!("empty {what} label")));
        }
        if !seen.insert(l) {
            return Err(StoreError::BadRequest(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            slots: SyncMutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn slot(&self, id: &str) -> Slot {
        let mut slots = self.slots.lock().expect("slot map poisoned");
        slots.entry(id.to_string()).or_default().clone()
    }

    pub async fn create(&self, setup: Setup) -> Result<Session, StoreError> {
        if setup.n == 0 {
            return Err(StoreError::BadRequest("n must be at least 1".into()));
        }
        validate_labels(&setup.item_labels, "item")?;
        validate_labels(&setup.agent_labels, "agent")?;
        if setup.agent_labels.len() != setup.n {
            return Err(StoreError::BadRequest(format!(
                "{} agent labels for {} agents",
                setup.agent_labels.len(),
                setup.n
            )));
        }
        setup
            .config()
            .validate()
            .map_err(|e| StoreError::Unprocessable(e.to_string()))?;

        let id = Uuid::new_v4().simple().to_string();
        let session = Session::replay(id.clone(), setup, Vec::new())?;
        let mut line = serde_json::to_vec(&session.setup).expect("setup serializes");
        line.push(b'\n');
        let mut file = tokio::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path(&id))
            .await?;
        file.write_all(&line).await?;
        file.sync_data().await?;

        let slot = self.slot(&id);
        *slot.lock().await = Some(session.clone());
        Ok(session)
    }

    async fn load(&self, id: &str) -> Result<Option<Session>, StoreError> {
        let text = match tokio::fs::read_to_string(self.path(id)).await {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        // a line without its newline is a write that never completed
        let complete = match text.rfind('\n') {
            Some(end) => &text[..end],
            None => return Err(StoreError::Corrupt(format!("{id} has no setup line"))),
        };
        let mut lines = complete.lines();
        let setup: Setup = serde_json::from_str(lines.next().unwrap_or_default())
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;
        let answers = lines
            .map(|l| serde_json::from_str::<AnswerLine>(l).map(|a| a.choice))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;
        Session::replay(id.to_string(), setup, answers).map(Some)
    }

    /// Runs `f` on the session with exclusive access, loading it from disk
    /// the first time.
    async fn with_session<T>(
        &self,
        id: &str,
        f: impl AsyncFnOnce(&mut Session) -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        if Uuid::try_parse(id).is_err() {
            return Err(StoreError::NotFound);
        }
        let slot = self.slot(id);
        let mut guard = slot.lock().await;
        if guard.is_none() {
            *guard = self.load(id).await?;
        }
        match guard.as_mut() {
            Some(session) => f(session).await,
            None => Err(StoreError::NotFound),
        }
    }

    pub async fn get(&self, id: &str) -> Result<Session, StoreError> {
        self.with_session(id, async |s| Ok(s.clone())).await
    }

    /// Records `choice` for the pending query. With `index`, the answer only
    /// applies if that query is still the pending one, which makes retries
    /// safe.
    pub async fn answer(&self, id: &str, choice: Preferred, index: Option<usize>) -> Result<Session, StoreError> {
        let path = self.path(id);
        self.with_session(id, async |s| {
            let Step::Pending { query } = &s.state else {
                return Err(StoreError::Conflict("session is finished".into()));
            };
            if let Some(i) = index {
                if i != query.index {
                    return Err(StoreError::Conflict(format!(
                        "query {i} is not pending; query {} is",
                        query.index
                    )));
                }
            }
            let mut answers = s.answers.clone();
            answers.push(choice);
            let (state, log) = step(&s.setup.config(), &answers).map_err(|e| match e {
                FairDivError::NoPendingQuery => StoreError::Conflict(e.to_string()),
                other => StoreError::Corrupt(other.to_string()),
            })?;

            let mut line = serde_json::to_vec(&AnswerLine { choice }).expect("answer serializes");
            line.push(b'\n');
            let mut file = tokio::fs::OpenOptions::new().append(true).open(&path).await?;
            file.write_all(&line).await?;
            file.sync_data().await?;

            s.answers = answers;
            s.state = state;
            s.log = log;
            Ok(s.clone())
        })
        .await
    }
}
