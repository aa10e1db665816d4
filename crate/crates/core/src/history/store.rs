use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{ContextEntity, EntityId};
use crate::time::{format_wire, parse_timestamp, Timestamp};

const SEGMENT_PREFIX: &str = "history-";
const SEGMENT_SUFFIX: &str = ".ndjson";

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("history storage failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}:{line}: {reason}")]
    Corrupt { file: String, line: usize, reason: String },
    #[error("invalid range: {from} is after {to}")]
    Range { from: String, to: String },
}

impl HistoryError {
    /// Storage failures may succeed on a later attempt; corruption will not.
    pub fn is_retriable(&self) -> bool {
        matches!(self, HistoryError::Io(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryEvent {
    pub sequence: u64,
    pub entity_id: EntityId,
    pub entity_type: String,
    pub changed_attributes: BTreeSet<String>,
    pub snapshot: ContextEntity,
    #[serde(with = "wire_time")]
    pub recorded_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notification_id: Option<String>,
}

mod wire_time {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_wire(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Appended {
    Stored(u64),
    /// The notification was already recorded.
    Duplicate,
}

#[derive(Default)]
struct Inner {
    next_sequence: u64,
    last_recorded: Option<Timestamp>,
    events: BTreeMap<EntityId, Vec<HistoryEvent>>,
    seen: HashSet<String>,
    writer: Option<(String, File)>,
    total: usize,
}

/// Append-only event log: one NDJSON segment per UTC day of `recordedAt`,
/// with an in-memory index rebuilt from the segments on open.
pub struct HistoryStore {
    dir: PathBuf,
    inner: RwLock<Inner>,
}

fn segment_name(day: &str) -> String {
    format!("{SEGMENT_PREFIX}{day}{SEGMENT_SUFFIX}")
}

impl HistoryStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, HistoryError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut inner = Inner {
            next_sequence: 1,
            ..Default::default()
        };
        let store = Self {
            dir,
            inner: RwLock::new(Inner::default()),
        };
        for name in store.segments()? {
            let file = File::open(store.dir.join(&name))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                let corrupt = |reason: String| HistoryError::Corrupt {
                    file: name.clone(),
                    line: n + 1,
                    reason,
                };
                let event: HistoryEvent = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if event.sequence < inner.next_sequence {
                    return Err(corrupt(format!("sequence {} out of order", event.sequence)));
                }
                if inner.last_recorded.is_some_and(|t| event.recorded_at < t) {
                    return Err(corrupt("recordedAt goes backwards".into()));
                }
                index(&mut inner, event);
            }
        }
        *store.inner.write().expect("history index") = inner;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Segment file names in chronological order.
    pub fn segments(&self) -> Result<Vec<String>, HistoryError> {
        let mut names: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.starts_with(SEGMENT_PREFIX) && n.ends_with(SEGMENT_SUFFIX))
            .collect();
        names.sort();
        Ok(names)
    }

    /// Records `snapshot` as the state after a change. `recorded_at` is
    /// raised to the previous event's time if it lags behind.
    pub fn append(
        &self,
        snapshot: ContextEntity,
        recorded_at: Timestamp,
        notification_id: Option<&str>,
    ) -> Result<Appended, HistoryError> {
        let mut inner = self.inner.write().expect("history index");
        if let Some(id) = notification_id {
            if inner.seen.contains(id) {
                return Ok(Appended::Duplicate);
            }
        }
        let recorded_at = inner.last_recorded.map_or(recorded_at, |t| t.max(recorded_at));
        let changed = match inner.events.get(&snapshot.id).and_then(|v| v.last()) {
            Some(prev) => changed_between(&prev.snapshot, &snapshot),
            None => snapshot.attributes.keys().cloned().collect(),
        };
        let event = HistoryEvent {
            sequence: inner.next_sequence,
            entity_id: snapshot.id.clone(),
            entity_type: snapshot.entity_type.clone(),
            changed_attributes: changed,
            snapshot,
            recorded_at,
            notification_id: notification_id.map(str::to_string),
        };
        let mut line = serde_json::to_string(&event).expect("event serializes");
        line.push('\n');

        let day = recorded_at.format("%Y-%m-%d").to_string();
        let path = self.dir.join(segment_name(&day));
        // A handle to a segment removed underneath us would swallow writes.
        let stale = match &inner.writer {
            Some((d, _)) => d != &day || !path.exists(),
            None => true,
        };
        if stale {
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            inner.writer = Some((day, file));
        }
        let (_, file) = inner.writer.as_mut().expect("open segment");
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        let seq = event.sequence;
        index(&mut inner, event);
        Ok(Appended::Stored(seq))
    }

    /// Events for `id` with `from <= recordedAt < to`, by sequence.
    pub fn query(
        &self,
        id: &EntityId,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    ) -> Result<Vec<HistoryEvent>, HistoryError> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(HistoryError::Range {
                    from: format_wire(&f),
                    to: format_wire(&t),
                });
            }
        }
        let inner = self.inner.read().expect("history index");
        Ok(inner
            .events
            .get(id)
            .map(|evs| {
                evs.iter()
                    .filter(|e| from.is_none_or(|f| e.recorded_at >= f))
                    .filter(|e| to.is_none_or(|t| e.recorded_at < t))
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }

    pub fn entity_ids(&self) -> Vec<EntityId> {
        self.inner
            .read()
            .expect("history index")
            .events
            .keys()
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("history index").total
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Merges the entity's snapshots in order, up to `until` (exclusive).
    pub fn replay(&self, id: &EntityId, until: Option<Timestamp>) -> Option<ContextEntity> {
        let events = self.query(id, None, until).ok()?;
        replay_events(&events)
    }

    pub fn replay_all(&self) -> BTreeMap<EntityId, ContextEntity> {
        self.entity_ids()
            .into_iter()
            .filter_map(|id| self.replay(&id, None).map(|e| (id, e)))
            .collect()
    }

    /// sha256 of each segment file's bytes.
    pub fn segment_checksums(&self) -> Result<BTreeMap<String, String>, HistoryError> {
        let _guard = self.inner.read().expect("history index");
        self.segments()?
            .into_iter()
            .map(|name| {
                let bytes = fs::read(self.dir.join(&name))?;
                Ok((name, hex::encode(Sha256::digest(&bytes))))
            })
            .collect()
    }

    /// One digest over all segments, in order.
    pub fn log_checksum(&self) -> Result<String, HistoryError> {
        let mut h = Sha256::new();
        for (name, sum) in self.segment_checksums()? {
            h.update(name.as_bytes());
            h.update(sum.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }
}

fn index(inner: &mut Inner, event: HistoryEvent) {
    inner.next_sequence = event.sequence + 1;
    inner.last_recorded = Some(event.recorded_at);
    if let Some(id) = &event.notification_id {
        inner.seen.insert(id.clone());
    }
    inner.total += 1;
    inner.events.entry(event.entity_id.clone()).or_default().push(event);
}

fn changed_between(prev: &ContextEntity, next: &ContextEntity) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = next
        .attributes
        .iter()
        .filter(|(k, v)| prev.attributes.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    out.extend(
        prev.attributes
            .keys()
            .filter(|k| !next.attributes.contains_key(*k))
            .cloned(),
    );
    out
}

/// Folds snapshots with the broker's merge rule.
pub fn replay_events(events: &[HistoryEvent]) -> Option<ContextEntity> {
    let (first, rest) = events.split_first()?;
    let mut state = first.snapshot.clone();
    for e in rest {
        state.merge_from(&e.snapshot);
    }
    Some(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_entity_id, Attribute};

    fn t(s: &str) -> Timestamp {
        parse_timestamp(&format!("2021-02-04T{s}Z")).unwrap()
    }

    fn aircraft(alt: f64) -> ContextEntity {
        ContextEntity::new(make_entity_id("Aircraft", "AAAAAA").unwrap()).with("altitude", Attribute::property(alt))
    }

    #[test]
    fn sequences_start_at_one_and_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = HistoryStore::open(dir.path()).unwrap();
        assert_eq!(
            store.append(aircraft(1.0), t("10:00:00"), Some("n1")).unwrap(),
            Appended::Stored(1)
        );
        assert_eq!(
            store.append(aircraft(2.0), t("10:00:10"), Some("n2")).unwrap(),
            Appended::Stored(2)
        );
        assert_eq!(
            store.append(aircraft(2.0), t("10:00:10"), Some("n2")).unwrap(),
            Appended::Duplicate
        );
        let sum = store.log_checksum().unwrap();
        drop(store);

        let store = HistoryStore::open(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.log_checksum().unwrap(), sum);
        assert_eq!(
            store.append(aircraft(3.0), t("10:00:20"), Some("n3")).unwrap(),
            Appended::Stored(3)
        );
        assert_eq!(
            store.append(aircraft(3.0), t("10:00:20"), Some("n2")).unwrap(),
            Appended::Duplicate
        );
    }

    #[test]
    fn half_open_windows_split_events_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = HistoryStore::open(dir.path()).unwrap();
        for (i, s) in ["10:00:00", "10:00:10", "10:00:20"].iter().enumerate() {
            store.append(aircraft(i as f64), t(s), None).unwrap();
        }
        let id = make_entity_id("Aircraft", "AAAAAA").unwrap();
        let cut = t("10:00:10");
        let left = store.query(&id, Some(t("09:00:00")), Some(cut)).unwrap();
        let right = store.query(&id, Some(cut), Some(t("11:00:00"))).unwrap();
        assert_eq!((left.len(), right.len()), (1, 2));
        assert!(store.query(&id, Some(cut), Some(cut)).unwrap().is_empty());
        assert!(store.query(&id, Some(t("11:00:00")), Some(cut)).is_err());
        let unknown = make_entity_id("Aircraft", "ZZZZZZ").unwrap();
        assert!(store.query(&unknown, None, None).unwrap().is_empty());
    }

    #[test]
    fn changed_attributes_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let store = HistoryStore::open(dir.path()).unwrap();
        store.append(aircraft(1.0), t("10:00:00"), None).unwrap();
        let moved = aircraft(1.0).with("heading", Attribute::property(90));
        store.append(moved.clone(), t("09:59:00"), None).unwrap();
        let id = moved.id.clone();
        let evs = store.query(&id, None, None).unwrap();
        assert_eq!(evs[1].changed_attributes, BTreeSet::from(["heading".to_string()]));
        assert_eq!(evs[1].recorded_at, t("10:00:00"));
        assert_eq!(store.replay(&id, None).unwrap(), moved);
    }

    #[test]
    fn segments_roll_over_by_day_and_corruption_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = HistoryStore::open(dir.path()).unwrap();
        store.append(aircraft(1.0), t("23:59:59"), None).unwrap();
        store
            .append(aircraft(2.0), parse_timestamp("2021-02-05T00:00:01Z").unwrap(), None)
            .unwrap();
        assert_eq!(
            store.segments().unwrap(),
            vec!["history-2021-02-04.ndjson", "history-2021-02-05.ndjson"]
        );
        drop(store);
        let path = dir.path().join("history-2021-02-05.ndjson");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{not json\n").unwrap();
        match HistoryStore::open(dir.path()) {
            Err(HistoryError::Corrupt { file, line, .. }) => {
                assert_eq!((file.as_str(), line), ("history-2021-02-05.ndjson", 2))
            }
            other => panic!("expected corruption, got {:?}", other.err()),
        }
    }
}
