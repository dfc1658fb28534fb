//! Directory-backed template store: one record file per enrollment plus a
//! line-oriented index. Writes are atomic (temp file + rename).
//!
//! Index line format: `user_id,status,filename,timestamp` with
//! status in {active, revoked} and an RFC 3339 timestamp.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::{deserialize_record, serialize_record, EnrollmentRecord};

const INDEX_FILE: &str = "index.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Active,
    Revoked,
}

impl RecordStatus {
    fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Active => "active",
            RecordStatus::Revoked => "revoked",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(RecordStatus::Active),
            "revoked" => Ok(RecordStatus::Revoked),
            other => Err(Error::Integrity(format!("unknown record status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub user_id: String,
    pub status: RecordStatus,
    pub filename: String,
    pub created_at: String,
}

pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let index = dir.join(INDEX_FILE);
        if !index.exists() {
            atomic_write(&index, b"")?;
        }
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn index_path(&self) -> PathBuf {
        self.dir.join(INDEX_FILE)
    }

    fn read_index(&self) -> Result<Vec<IndexEntry>> {
        let text = fs::read_to_string(self.index_path())?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.splitn(4, ',').collect();
            if parts.len() != 4 {
                return Err(Error::Integrity(format!("malformed index line {}", i + 1)));
            }
            entries.push(IndexEntry {
                user_id: parts[0].to_string(),
                status: RecordStatus::parse(parts[1])?,
                filename: parts[2].to_string(),
                created_at: parts[3].to_string(),
            });
        }
        Ok(entries)
    }

    fn write_index(&self, entries: &[IndexEntry]) -> Result<()> {
        let mut text = String::new();
        for e in entries {
            if e.user_id.contains(',') || e.user_id.contains('\n') {
                return Err(Error::Policy("user_id may not contain ',' or newline".into()));
            }
            text.push_str(&format!(
                "{},{},{},{}\n",
                e.user_id,
                e.status.as_str(),
                e.filename,
                e.created_at
            ));
        }
        atomic_write(&self.index_path(), text.as_bytes())
    }

    /// Enroll a record. An existing active record for the same user is a
    /// policy error; revoke first (re-issue path).
    pub fn put(&self, record: &EnrollmentRecord) -> Result<()> {
        let mut entries = self.read_index()?;
        if entries
            .iter()
            .any(|e| e.user_id == record.user_id && e.status == RecordStatus::Active)
        {
            return Err(Error::Policy(format!(
                "user {:?} already has an active record; revoke before re-enrolling",
                record.user_id
            )));
        }
        let bytes = serialize_record(record)?;
        let filename = format!("{}-{:08x}.rec", sanitize(&record.user_id), crc32fast::hash(&bytes));
        atomic_write(&self.dir.join(&filename), &bytes)?;
        let created_at = if record.created_at.is_empty() {
            chrono::Utc::now().to_rfc3339()
        } else {
            record.created_at.clone()
        };
        entries.push(IndexEntry {
            user_id: record.user_id.clone(),
            status: RecordStatus::Active,
            filename,
            created_at,
        });
        self.write_index(&entries)
    }

    /// Latest non-revoked record for the user.
    pub fn get(&self, user_id: &str) -> Result<EnrollmentRecord> {
        let entries = self.read_index()?;
        let mine: Vec<&IndexEntry> = entries.iter().filter(|e| e.user_id == user_id).collect();
        let active = mine.iter().rev().find(|e| e.status == RecordStatus::Active);
        match active {
            Some(entry) => {
                let bytes = fs::read(self.dir.join(&entry.filename)).map_err(|e| {
                    Error::Integrity(format!("record file {} unreadable: {e}", entry.filename))
                })?;
                let mut record = deserialize_record(&bytes)?;
                record.created_at = entry.created_at.clone();
                Ok(record)
            }
            None => Err(Error::NotFound { user: user_id.to_string(), revoked: !mine.is_empty() }),
        }
    }

    pub fn list(&self) -> Result<Vec<IndexEntry>> {
        self.read_index()
    }

    pub fn revoke(&self, user_id: &str) -> Result<()> {
        let mut entries = self.read_index()?;
        let mut hit = false;
        for e in entries.iter_mut() {
            if e.user_id == user_id && e.status == RecordStatus::Active {
                e.status = RecordStatus::Revoked;
                hit = true;
            }
        }
        if !hit {
            let known = entries.iter().any(|e| e.user_id == user_id);
            return Err(Error::NotFound { user: user_id.to_string(), revoked: known });
        }
        self.write_index(&entries)
    }

    /// Projection seeds of every record (any status) for a user; used to
    /// forbid seed reuse on re-issue.
    pub fn known_projection_seeds(&self, user_id: &str) -> Result<Vec<u64>> {
        let entries = self.read_index()?;
        let mut seeds = Vec::new();
        for e in entries.iter().filter(|e| e.user_id == user_id) {
            if let Ok(bytes) = fs::read(self.dir.join(&e.filename)) {
                if let Ok(rec) = deserialize_record(&bytes) {
                    seeds.push(rec.projection_seed);
                }
            }
        }
        Ok(seeds)
    }
}

fn sanitize(user_id: &str) -> String {
    user_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
