//! Append-only JSONL event logs, one file per campaign.
//!
//! The first line of each file is a schema header; every following line is
//! one [`Event`]. Appends for one campaign are serialized behind that
//! campaign's lock, validated against the folded state, written and synced
//! before the in-memory state is advanced.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use stagewise_core::campaign::FoldError;
use stagewise_core::{Campaign, CampaignId, Event, EventKind, TransitionError};

use crate::redact::Redactor;

pub const SCHEMA: &str = "stagewise.events";
pub const SCHEMA_VERSION: u32 = 1;
const EXTENSION: &str = "jsonl";

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct Header {
    schema: String,
    version: u32,
    campaign: CampaignId,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no campaign {0}")]
    NoSuchCampaign(String),
    #[error("campaign {0} already exists")]
    AlreadyExists(CampaignId),
    #[error("event log is corrupt at seq {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
    #[error(transparent)]
    IllegalTransition(#[from] TransitionError),
    #[error("event cannot be stored once redacted: {0}")]
    Unredactable(String),
    #[error("storage failure: {0}")]
    StorageFailure(#[from] std::io::Error),
}

type Slot = Arc<Mutex<Option<Campaign>>>;

pub struct EventStore {
    dir: PathBuf,
    slots: Mutex<HashMap<CampaignId, Slot>>,
    redactor: Redactor,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl EventStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, slots: Mutex::new(HashMap::new()), redactor: Redactor::default() })
    }

    /// Secrets in event payloads are replaced before anything is written.
    pub fn with_redactor(mut self, redactor: Redactor) -> Self {
        self.redactor = redactor;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &CampaignId) -> PathBuf {
        self.dir.join(format!("{id}.{EXTENSION}"))
    }

    fn slot(&self, id: &CampaignId) -> Slot {
        let mut slots = self.slots.lock().expect("slot table poisoned");
        slots.entry(id.clone()).or_default().clone()
    }

    pub fn list(&self) -> Result<Vec<CampaignId>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            if let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| CampaignId::new(s).ok()) {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// An unused id derived from `subject`: lower-cased, anything outside
    /// the id alphabet dropped, then suffixed `-2`, `-3`, ... as needed.
    pub fn fresh_id(&self, subject: &str) -> Result<CampaignId, StoreError> {
        let base: String = subject
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
            .take(48)
            .collect::<String>()
            .to_ascii_lowercase();
        let base = if base.is_empty() { "campaign".to_string() } else { base };
        let taken = self.list()?;
        let id = (1..)
            .map(|n| if n == 1 { base.clone() } else { format!("{base}-{n}") })
            .map(|c| CampaignId::new(c).expect("built from the id alphabet"))
            .find(|id| !taken.contains(id))
            .expect("suffixes are unbounded");
        Ok(id)
    }

    /// Starts a new log. `kind` must be `CampaignCreated`.
    pub fn create(&self, kind: EventKind) -> Result<(Event, Campaign), StoreError> {
        let EventKind::CampaignCreated { id, .. } = &kind else {
            return Err(TransitionError::NotCreated.into());
        };
        let id = id.clone();
        let slot = self.slot(&id);
        let mut guard = slot.lock().expect("campaign lock poisoned");
        let path = self.path(&id);
        if guard.is_some() || path.exists() {
            return Err(StoreError::AlreadyExists(id));
        }
        let kind = self.redactor.scrub(&kind).map_err(|e| StoreError::Unredactable(e.to_string()))?;
        let event = Event { seq: 1, at: now_ms(), kind };
        let campaign = Campaign::create(&event)?;
        let header = Header { schema: SCHEMA.into(), version: SCHEMA_VERSION, campaign: id };
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path)?;
        let mut buf = serde_json::to_string(&header).expect("header serializes");
        buf.push('\n');
        buf.push_str(&serde_json::to_string(&event).expect("event serializes"));
        buf.push('\n');
        file.write_all(buf.as_bytes())?;
        file.sync_all()?;
        *guard = Some(campaign.clone());
        Ok((event, campaign))
    }

    /// Validates, persists and applies one event; returns it with the new
    /// state.
    pub fn append(&self, id: &CampaignId, kind: EventKind) -> Result<(Event, Campaign), StoreError> {
        let slot = self.slot(id);
        let mut guard = slot.lock().expect("campaign lock poisoned");
        if guard.is_none() {
            *guard = Some(self.replay(id)?);
        }
        let campaign = guard.as_mut().expect("loaded above");
        let kind = self.redactor.scrub(&kind).map_err(|e| StoreError::Unredactable(e.to_string()))?;
        campaign.check(&kind)?;
        let event = Event { seq: campaign.last_seq() + 1, at: now_ms(), kind };
        let mut line = serde_json::to_string(&event).expect("event serializes");
        line.push('\n');
        let mut file = OpenOptions::new().append(true).open(self.path(id))?;
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        campaign.apply(&event)?;
        Ok((event, campaign.clone()))
    }

    /// Current state without touching the file if it is already loaded.
    pub fn snapshot(&self, id: &CampaignId) -> Result<Campaign, StoreError> {
        let slot = self.slot(id);
        let mut guard = slot.lock().expect("campaign lock poisoned");
        if guard.is_none() {
            *guard = Some(self.replay(id)?);
        }
        Ok(guard.clone().expect("loaded above"))
    }

    pub fn events(&self, id: &CampaignId) -> Result<Vec<Event>, StoreError> {
        read_log(&self.path(id), id)
    }

    /// Folds the log on disk from scratch.
    pub fn replay(&self, id: &CampaignId) -> Result<Campaign, StoreError> {
        let events = self.events(id)?;
        Campaign::fold(&events).map_err(|e| match e {
            FoldError::Empty => StoreError::NoSuchCampaign(id.to_string()),
            FoldError::At { seq, error } => StoreError::CorruptLog { seq, reason: error.to_string() },
        })
    }
}

/// Reads and structurally checks a log file: header, then seq 1, 2, ...
pub fn read_log(path: &Path, id: &CampaignId) -> Result<Vec<Event>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(StoreError::NoSuchCampaign(id.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        None => return Err(StoreError::NoSuchCampaign(id.to_string())),
        Some(line) => line?,
    };
    let header: Header = serde_json::from_str(&header)
        .map_err(|e| StoreError::CorruptLog { seq: 0, reason: format!("bad header: {e}") })?;
    if header.schema != SCHEMA || header.version != SCHEMA_VERSION || &header.campaign != id {
        return Err(StoreError::CorruptLog { seq: 0, reason: format!("unexpected header {header:?}") });
    }
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let expected = events.len() as u64 + 1;
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| StoreError::CorruptLog { seq: expected, reason: e.to_string() })?;
        if event.seq != expected {
            return Err(StoreError::CorruptLog {
                seq: expected,
                reason: format!("found seq {} where {expected} was due", event.seq),
            });
        }
        events.push(event);
    }
    if events.is_empty() {
        return Err(StoreError::NoSuchCampaign(id.to_string()));
    }
    Ok(events)
}
