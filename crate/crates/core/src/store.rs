//! On-disk session storage.
//!
//! ```text
//! <data_dir>/sessions/<session_id>/
//!     events.log      one LogEntry JSON object per line, append-only
//!     snapshot.json   the Session as of the last persist
//!     blobs/          content-addressed images
//! ```
//!
//! The log is the source of truth; loading replays it. A torn final line
//! (crash mid-append) is dropped and trimmed from the file.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::blob::{BlobError, BlobStore};
use crate::ids::SessionId;
use crate::session::{LogEntry, ReplayError, Session};

const EVENTS_FILE: &str = "events.log";
const SNAPSHOT_FILE: &str = "snapshot.json";
const BLOBS_DIR: &str = "blobs";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage is full")]
    StorageFull,
    #[error("storage io: {0}")]
    IoError(std::io::Error),
    #[error("session `{0}` not found")]
    NotFound(SessionId),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("session `{session}` log is corrupt at line {line}: {message}")]
    Corrupt {
        session: SessionId,
        line: usize,
        message: String,
    },
    #[error("session `{session}` does not replay: {source}")]
    Replay {
        session: SessionId,
        #[source]
        source: ReplayError,
    },
    #[error(transparent)]
    Blob(#[from] BlobError),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::StorageFull {
            StoreError::StorageFull
        } else {
            StoreError::IoError(e)
        }
    }
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::StorageFull => "StorageFull",
            StoreError::NotFound(_) => "SessionNotFound",
            _ => "IoError",
        }
    }
}

/// Session ids become directory names, so they are restricted to `[A-Za-z0-9_-]`.
pub fn is_valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    /// Last durable sequence number per session.
    persisted: Mutex<HashMap<SessionId, u64>>,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let root = data_dir.join("sessions");
        std::fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            persisted: Mutex::new(HashMap::new()),
        })
    }

    pub fn session_dir(&self, id: &SessionId) -> Result<PathBuf, StoreError> {
        if !is_valid_session_id(id.as_str()) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join(id.as_str()))
    }

    pub fn blobs(&self, id: &SessionId) -> Result<BlobStore, StoreError> {
        Ok(BlobStore::open(self.session_dir(id)?.join(BLOBS_DIR))?)
    }

    /// Session ids with a directory on disk, sorted.
    pub fn list(&self) -> Result<Vec<SessionId>, StoreError> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.file_type()?.is_dir() && is_valid_session_id(&name) {
                ids.push(SessionId::new(name));
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Appends log entries not yet on disk, fsyncs, then rewrites the
    /// snapshot. Returns how many entries were appended; zero means nothing
    /// was written.
    pub fn persist(&self, session: &Session) -> Result<usize, StoreError> {
        let dir = self.session_dir(&session.id)?;
        std::fs::create_dir_all(&dir)?;
        let durable = self.durable_seq(&session.id, &dir)?;
        let fresh: Vec<&LogEntry> = session.event_log.iter().filter(|e| e.seq > durable).collect();
        if fresh.is_empty() {
            return Ok(0);
        }

        let mut buf = Vec::new();
        for entry in &fresh {
            serde_json::to_writer(&mut buf, entry).expect("log entries serialize");
            buf.push(b'\n');
        }
        let mut log = OpenOptions::new().create(true).append(true).open(dir.join(EVENTS_FILE))?;
        log.write_all(&buf)?;
        log.sync_data()?;
        self.persisted
            .lock()
            .expect("store cache poisoned")
            .insert(session.id.clone(), session.last_seq());

        let snapshot = serde_json::to_vec_pretty(session).expect("sessions serialize");
        let tmp = dir.join(".snapshot.json.tmp");
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(&snapshot)?;
        file.sync_data()?;
        std::fs::rename(&tmp, dir.join(SNAPSHOT_FILE))?;
        Ok(fresh.len())
    }

    fn durable_seq(&self, id: &SessionId, dir: &Path) -> Result<u64, StoreError> {
        if let Some(seq) = self.persisted.lock().expect("store cache poisoned").get(id) {
            return Ok(*seq);
        }
        let path = dir.join(EVENTS_FILE);
        if !path.exists() {
            return Ok(0);
        }
        let entries = self.read_log(id)?;
        Ok(entries.last().map_or(0, |e| e.seq))
    }

    /// Reads the log, dropping (and trimming) a torn final line.
    pub fn read_log(&self, id: &SessionId) -> Result<Vec<LogEntry>, StoreError> {
        let path = self.session_dir(id)?.join(EVENTS_FILE);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.clone())),
            Err(e) => return Err(e.into()),
        };

        let mut entries = Vec::new();
        let mut offset = 0;
        let mut good_len = 0;
        let lines: Vec<&[u8]> = bytes.split_inclusive(|b| *b == b'\n').collect();
        for (i, line) in lines.iter().enumerate() {
            offset += line.len();
            let complete = line.ends_with(b"\n");
            let body = line.strip_suffix(b"\n").unwrap_or(line);
            if body.iter().all(u8::is_ascii_whitespace) {
                good_len = offset;
                continue;
            }
            match serde_json::from_slice::<LogEntry>(body) {
                Ok(entry) if complete => {
                    entries.push(entry);
                    good_len = offset;
                }
                result => {
                    if i + 1 == lines.len() {
                        tracing::warn!(session = %id, "dropping torn final log line");
                        break;
                    }
                    return Err(StoreError::Corrupt {
                        session: id.clone(),
                        line: i + 1,
                        message: result.err().map_or_else(|| "unterminated line".into(), |e| e.to_string()),
                    });
                }
            }
        }
        if good_len < bytes.len() {
            let file = OpenOptions::new().write(true).open(&path)?;
            file.set_len(good_len as u64)?;
            file.sync_data()?;
        }
        Ok(entries)
    }

    /// Rebuilds a session by replaying its log.
    pub fn load(&self, id: &SessionId) -> Result<Session, StoreError> {
        let entries = self.read_log(id)?;
        let session = Session::replay(&entries).map_err(|source| StoreError::Replay {
            session: id.clone(),
            source,
        })?;
        self.persisted
            .lock()
            .expect("store cache poisoned")
            .insert(id.clone(), session.last_seq());
        Ok(session)
    }

    /// The last written snapshot, for inspection.
    pub fn read_snapshot(&self, id: &SessionId) -> Result<Session, StoreError> {
        let path = self.session_dir(id)?.join(SNAPSHOT_FILE);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.clone())),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
            session: id.clone(),
            line: 0,
            message: e.to_string(),
        })
    }
}
