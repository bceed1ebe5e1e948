//! Trial sessions persisted as an append-only JSON-lines event log per
//! session, with periodic snapshots.
//!
//! Layout under the data directory:
//!
//! ```text
//! sessions/<id>/events.jsonl
//! sessions/<id>/snapshot.json
//! ```

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use dosefind_core::{DesignParams, MtdResult, TrialState};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use uuid::Uuid;

/// A snapshot is written after every this many log records.
const SNAPSHOT_EVERY: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: Uuid,
    pub params: DesignParams,
    pub num_doses: usize,
    pub state: TrialState,
    pub version: u64,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub mtd: Option<MtdResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Created {
        id: Uuid,
        at: DateTime<Utc>,
        params: DesignParams,
        num_doses: usize,
    },
    Cohort {
        version: u64,
        at: DateTime<Utc>,
        dlt_count: u32,
        cohort_n: u32,
    },
    Finalized {
        version: u64,
        at: DateTime<Utc>,
    },
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    records: usize,
    session: Session,
}

impl Session {
    fn create(
        id: Uuid,
        at: DateTime<Utc>,
        params: DesignParams,
        num_doses: usize,
    ) -> dosefind_core::Result<Self> {
        let state = TrialState::new(num_doses, &params)?;
        Ok(Self {
            id,
            params,
            num_doses,
            state,
            version: 1,
            created_at: at,
            updated_at: at,
            mtd: None,
        })
    }

    /// The session after `record`, or an error if the record does not apply.
    pub fn apply(&self, record: &LogRecord) -> dosefind_core::Result<Self> {
        let mut next = self.clone();
        match *record {
            LogRecord::Created { .. } => {
                return Err(dosefind_core::Error::Mismatch(
                    "creation record after the start of the log".into(),
                ))
            }
            LogRecord::Cohort {
                version,
                at,
                dlt_count,
                cohort_n,
            } => {
                next.state = self.state.advance(dlt_count, cohort_n, &self.params)?.0;
                next.version = version;
                next.updated_at = at;
                if next.state.status != dosefind_core::TrialStatus::Active {
                    next.mtd = Some(next.state.select_mtd(&next.params)?);
                }
            }
            LogRecord::Finalized { version, at } => {
                next.state = self.state.finalize();
                next.mtd = Some(next.state.select_mtd(&next.params)?);
                next.version = version;
                next.updated_at = at;
            }
        }
        Ok(next)
    }
}

/// A loaded session with its open log.
pub struct Slot {
    pub session: Session,
    log: File,
    records: usize,
    dir: PathBuf,
}

impl Slot {
    /// Appends `record` durably, then installs `next` as the current session.
    pub fn commit(&mut self, record: &LogRecord, next: Session) -> io::Result<()> {
        append(&mut self.log, record)?;
        self.records += 1;
        self.session = next;
        if self.records.is_multiple_of(SNAPSHOT_EVERY) {
            if let Err(e) = write_snapshot(&self.dir, self.records, &self.session) {
                tracing::warn!(session = %self.session.id, "snapshot failed: {e}");
            }
        }
        Ok(())
    }
}

fn append(log: &mut File, record: &LogRecord) -> io::Result<()> {
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    log.write_all(&line)?;
    log.sync_data()
}

fn write_snapshot(dir: &Path, records: usize, session: &Session) -> io::Result<()> {
    let tmp = dir.join("snapshot.json.tmp");
    let mut f = File::create(&tmp)?;
    serde_json::to_writer(
        &mut f,
        &Snapshot {
            records,
            session: session.clone(),
        },
    )?;
    f.sync_all()?;
    fs::rename(&tmp, dir.join("snapshot.json"))
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

fn corrupt(path: &Path, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("{}: {msg}", path.display()),
    )
}

/// Reads the log, dropping a torn final line and trimming it from the file.
fn read_log(path: &Path) -> io::Result<(File, Vec<LogRecord>)> {
    let mut file = OpenOptions::new().read(true).append(true).open(path)?;
    let mut reader = BufReader::new(&file);
    let mut records = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        if !line.ends_with('\n') {
            break;
        }
        let record = serde_json::from_str::<LogRecord>(line.trim_end())
            .map_err(|e| corrupt(path, format!("record {}: {e}", records.len() + 1)))?;
        records.push(record);
        good_len += read as u64;
    }
    drop(reader);
    if file.metadata()?.len() > good_len {
        tracing::warn!(path = %path.display(), "dropping incomplete trailing log record");
        file.set_len(good_len)?;
        file.sync_all()?;
    }
    file.seek(SeekFrom::End(0))?;
    Ok((file, records))
}

fn load_session(dir: &Path) -> io::Result<Option<Slot>> {
    let log_path = dir.join("events.jsonl");
    let (log, records) = read_log(&log_path)?;
    let Some(LogRecord::Created {
        id,
        at,
        params,
        num_doses,
    }) = records.first().cloned()
    else {
        if records.is_empty() {
            return Ok(None);
        }
        return Err(corrupt(
            &log_path,
            "log does not start with a creation record",
        ));
    };
    let snapshot: Option<Snapshot> = fs::read(dir.join("snapshot.json"))
        .ok()
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .filter(|s: &Snapshot| s.records <= records.len() && s.session.id == id);
    let (mut session, start) = match snapshot {
        Some(s) => (s.session, s.records),
        None => (
            Session::create(id, at, params, num_doses).map_err(|e| corrupt(&log_path, e))?,
            1,
        ),
    };
    for (i, r) in records.iter().enumerate().skip(start) {
        session = session
            .apply(r)
            .map_err(|e| corrupt(&log_path, format!("record {}: {e}", i + 1)))?;
    }
    Ok(Some(Slot {
        session,
        log,
        records: records.len(),
        dir: dir.to_path_buf(),
    }))
}

pub type SlotHandle = Arc<Mutex<Slot>>;

pub struct Store {
    root: PathBuf,
    sessions: RwLock<HashMap<Uuid, SlotHandle>>,
}

impl Store {
    /// Opens the data directory and replays every session found in it.
    pub fn open(data_dir: impl Into<PathBuf>) -> io::Result<Self> {
        let root = data_dir.into().join("sessions");
        fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&root)? {
            let dir = entry?.path();
            if !dir.is_dir() {
                continue;
            }
            if let Some(slot) = load_session(&dir)? {
                sessions.insert(slot.session.id, Arc::new(Mutex::new(slot)));
            }
        }
        tracing::info!(count = sessions.len(), dir = %root.display(), "sessions loaded");
        Ok(Self {
            root,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn create(
        &self,
        params: DesignParams,
        num_doses: usize,
    ) -> Result<Session, crate::ApiError> {
        let id = Uuid::new_v4();
        let at = Utc::now();
        let session = Session::create(id, at, params.clone(), num_doses)?;
        let dir = self.root.join(id.to_string());
        fs::create_dir(&dir)?;
        let mut log = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join("events.jsonl"))?;
        append(
            &mut log,
            &LogRecord::Created {
                id,
                at,
                params,
                num_doses,
            },
        )?;
        sync_dir(&dir)?;
        sync_dir(&self.root)?;
        let slot = Slot {
            session: session.clone(),
            log,
            records: 1,
            dir,
        };
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id, Arc::new(Mutex::new(slot)));
        Ok(session)
    }

    pub fn get(&self, id: Uuid) -> Option<SlotHandle> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(&id)
            .cloned()
    }

    pub fn handles(&self) -> Vec<SlotHandle> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .values()
            .cloned()
            .collect()
    }
}
