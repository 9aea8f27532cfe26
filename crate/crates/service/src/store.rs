//! Durable annotation storage: one append-only JSONL log per annotator plus
//! a periodically rewritten snapshot of the current state. Logs are never
//! truncated, so they double as the audit history.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use streetrisk_core::annotation::AnnotationRecord;

use crate::error::{Result, ServiceError};

pub const LOG_DIR: &str = "log";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stored {
    /// 1 for the first accepted record of a key, then counting up.
    pub revision: u64,
    pub record: AnnotationRecord,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
struct Snapshot {
    /// Log lines already folded into `records`, per annotator.
    applied: BTreeMap<String, u64>,
    records: Vec<Stored>,
}

type Key = (String, String);

#[derive(Debug, Default)]
struct State {
    /// Keyed by `(annotator_id, address_id)`.
    current: BTreeMap<Key, Stored>,
    applied: BTreeMap<String, u64>,
}

impl State {
    fn apply(&mut self, entry: Stored) {
        let key = (entry.record.annotator_id.clone(), entry.record.address_id.clone());
        self.current.insert(key, entry);
    }
}

struct LogWriter {
    path: PathBuf,
    file: File,
    lines: u64,
}

pub struct Store {
    dir: PathBuf,
    state: RwLock<State>,
    writers: HashMap<String, Mutex<LogWriter>>,
    snapshot_lock: Mutex<()>,
}

fn log_path(dir: &Path, annotator_id: &str) -> PathBuf {
    dir.join(LOG_DIR).join(format!("{annotator_id}.jsonl"))
}

/// Reads complete lines, cutting off a torn final write. A line without its
/// newline was never acknowledged.
fn read_log(path: &Path) -> Result<Vec<String>> {
    let mut bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ServiceError::io(path, e)),
    };
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        bytes.truncate(keep);
        let f = OpenOptions::new().write(true).open(path).map_err(|e| ServiceError::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| ServiceError::io(path, e))?;
        f.sync_all().map_err(|e| ServiceError::io(path, e))?;
    }
    let text = String::from_utf8(bytes).map_err(|e| ServiceError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

impl Store {
    /// Opens or creates storage for `annotators`, replaying log lines the
    /// snapshot has not absorbed yet.
    pub fn open(dir: &Path, annotators: &[String]) -> Result<Self> {
        let log_dir = dir.join(LOG_DIR);
        fs::create_dir_all(&log_dir).map_err(|e| ServiceError::io(&log_dir, e))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let snapshot: Snapshot = match fs::read_to_string(&snap_path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Snapshot::default(),
            Err(e) => return Err(ServiceError::io(&snap_path, e)),
        };
        let mut state = State::default();
        for s in snapshot.records {
            state.apply(s);
        }

        let mut writers = HashMap::new();
        for a in annotators {
            let path = log_path(dir, a);
            let lines = read_log(&path)?;
            let done = snapshot.applied.get(a).copied().unwrap_or(0);
            if done > lines.len() as u64 {
                return Err(ServiceError::Corrupt {
                    path,
                    message: format!("snapshot covers {done} lines but the log has {}", lines.len()),
                });
            }
            for (i, line) in lines.iter().enumerate().skip(done as usize) {
                let entry: Stored = serde_json::from_str(line).map_err(|e| ServiceError::Corrupt {
                    path: path.clone(),
                    message: format!("line {}: {e}", i + 1),
                })?;
                if entry.record.annotator_id != *a {
                    return Err(ServiceError::Corrupt {
                        path: path.clone(),
                        message: format!("line {} belongs to `{}`", i + 1, entry.record.annotator_id),
                    });
                }
                state.apply(entry);
            }
            state.applied.insert(a.clone(), lines.len() as u64);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| ServiceError::io(&path, e))?;
            writers.insert(
                a.clone(),
                Mutex::new(LogWriter {
                    path,
                    file,
                    lines: lines.len() as u64,
                }),
            );
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            state: RwLock::new(state),
            writers,
            snapshot_lock: Mutex::new(()),
        })
    }

    /// Appends and syncs `record` to its annotator's log, then makes it the
    /// current record for its key. Returns the stored revision.
    pub fn append(&self, record: AnnotationRecord) -> Result<Stored> {
        let writer = self
            .writers
            .get(&record.annotator_id)
            .ok_or_else(|| ServiceError::UnknownAnnotator(record.annotator_id.clone()))?;
        let mut w = writer.lock();
        let key = (record.annotator_id.clone(), record.address_id.clone());
        let revision = self.state.read().current.get(&key).map_or(0, |s| s.revision) + 1;
        let stored = Stored { revision, record };
        let mut line = serde_json::to_vec(&stored)?;
        line.push(b'\n');
        w.file.write_all(&line).map_err(|e| ServiceError::io(&w.path, e))?;
        w.file.sync_data().map_err(|e| ServiceError::io(&w.path, e))?;
        w.lines += 1;
        let mut state = self.state.write();
        state.applied.insert(key.0.clone(), w.lines);
        state.current.insert(key, stored.clone());
        Ok(stored)
    }

    /// Rewrites the snapshot from the current state.
    pub fn compact(&self) -> Result<()> {
        let _one_at_a_time = self.snapshot_lock.lock();
        let snap = {
            let state = self.state.read();
            Snapshot {
                applied: state.applied.clone(),
                records: state.current.values().cloned().collect(),
            }
        };
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let mut f = File::create(&tmp).map_err(|e| ServiceError::io(&tmp, e))?;
        f.write_all(&serde_json::to_vec(&snap)?)
            .and_then(|()| f.sync_all())
            .map_err(|e| ServiceError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))
    }

    pub fn get(&self, annotator_id: &str, address_id: &str) -> Option<Stored> {
        self.state
            .read()
            .current
            .get(&(annotator_id.to_string(), address_id.to_string()))
            .cloned()
    }

    pub fn contains(&self, annotator_id: &str, address_id: &str) -> bool {
        self.state
            .read()
            .current
            .contains_key(&(annotator_id.to_string(), address_id.to_string()))
    }

    /// Current records ordered by annotator, then address.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.state.read().current.values().map(|s| s.record.clone()).collect()
    }

    /// Full submission history of one annotator, oldest first.
    pub fn history(&self, annotator_id: &str) -> Result<Vec<Stored>> {
        let writer = self
            .writers
            .get(annotator_id)
            .ok_or_else(|| ServiceError::UnknownAnnotator(annotator_id.to_string()))?;
        let w = writer.lock();
        read_log(&w.path)?
            .iter()
            .map(|l| serde_json::from_str(l).map_err(ServiceError::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use streetrisk_core::annotation::AnnotationValue;

    fn rec(annotator: &str, address: &str, wealth: f64) -> AnnotationRecord {
        AnnotationRecord {
            address_id: address.into(),
            annotator_id: annotator.into(),
            timestamp: "2019-03-01T08:00:00Z".into(),
            values: BTreeMap::from([("wealth".to_string(), AnnotationValue::Ordinal(wealth))]),
        }
    }

    #[test]
    fn replay_after_snapshot_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let ids = vec!["a".to_string(), "b".to_string()];
        {
            let s = Store::open(dir.path(), &ids).unwrap();
            s.append(rec("a", "x", 1.0)).unwrap();
            s.compact().unwrap();
            assert_eq!(s.append(rec("a", "x", 2.0)).unwrap().revision, 2);
            s.append(rec("b", "y", 3.0)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(log_path(dir.path(), "b")).unwrap();
        f.write_all(b"{\"revision\":1,\"rec").unwrap();
        drop(f);

        let s = Store::open(dir.path(), &ids).unwrap();
        assert_eq!(s.get("a", "x").unwrap().record, rec("a", "x", 2.0));
        assert_eq!(s.get("b", "y").unwrap().revision, 1);
        assert_eq!(s.history("a").unwrap().len(), 2);
        assert_eq!(s.history("b").unwrap().len(), 1);
        assert!(s.append(rec("zz", "y", 1.0)).is_err());
    }
}
