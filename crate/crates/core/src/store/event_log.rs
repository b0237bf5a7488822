//! Append-only event log.
//!
//! Records are JSON objects, one per line, with fields in the order `ts`,
//! `user_id`, `property_id`, `action`, `listing_type`. String escaping follows
//! JSON. Files are named `events-<hour>.jsonl` where `<hour>` is the zero
//! padded count of hours since the epoch of the first record written to the
//! segment. A record whose hour is later than the open segment's rotates to a
//! new segment; late records go to the open one, so closed segments are never
//! touched again.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};

use super::StoreError;
use crate::domain::{InteractionEvent, ListingType, Timestamp, HOUR_MS};

pub const SEGMENT_PREFIX: &str = "events-";

pub fn segment_name(hour: i64) -> String {
    format!("{SEGMENT_PREFIX}{hour:010}.jsonl")
}

struct Segment {
    hour: i64,
    path: PathBuf,
    writer: BufWriter<File>,
}

#[derive(Default)]
struct Index {
    /// Hour bucket to `(sequence, event)`.
    buckets: BTreeMap<i64, Vec<(u64, InteractionEvent)>>,
    next_seq: u64,
}

pub struct EventLog {
    dir: Option<PathBuf>,
    index: RwLock<Index>,
    segment: Mutex<Option<Segment>>,
}

impl EventLog {
    /// A log that keeps events in memory only.
    pub fn in_memory() -> Self {
        EventLog { dir: None, index: RwLock::new(Index::default()), segment: Mutex::new(None) }
    }

    /// Opens (or creates) a log directory and replays its segments.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let log = EventLog { dir: Some(dir.clone()), index: RwLock::new(Index::default()), segment: Mutex::new(None) };
        let mut last_hour = None;
        for path in Self::segment_paths(&dir)? {
            let events = read_segment(&path)?;
            log.index_events(events);
            last_hour = hour_of_segment(&path).or(last_hour);
        }
        if let Some(hour) = last_hour {
            let path = dir.join(segment_name(hour));
            let file = OpenOptions::new().append(true).open(&path).map_err(|e| StoreError::io(&path, e))?;
            *log.segment.lock() = Some(Segment { hour, path, writer: BufWriter::new(file) });
        }
        Ok(log)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn segment_paths(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| StoreError::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| hour_of_segment(p).is_some())
            .collect();
        paths.sort();
        Ok(paths)
    }

    fn index_events(&self, events: impl IntoIterator<Item = InteractionEvent>) -> u64 {
        let mut index = self.index.write();
        let mut last = 0;
        for e in events {
            let seq = index.next_seq;
            index.next_seq += 1;
            index.buckets.entry(e.timestamp.div_euclid(HOUR_MS)).or_default().push((seq, e));
            last = seq;
        }
        last
    }

    /// Appends one event and flushes it. Returns its sequence number.
    pub fn append(&self, event: InteractionEvent) -> Result<u64, StoreError> {
        self.append_batch(std::slice::from_ref(&event)).map(|n| n.last().copied().unwrap_or(0))
    }

    /// Appends events in order with a single flush. Validation is the caller's
    /// job; see [`crate::domain::validate_event`].
    pub fn append_batch(&self, events: &[InteractionEvent]) -> Result<Vec<u64>, StoreError> {
        if events.is_empty() {
            return Ok(Vec::new());
        }
        // Held through indexing so file order and sequence order agree.
        let mut guard = self.segment.lock();
        if let Some(dir) = &self.dir {
            for e in events {
                let hour = e.timestamp.div_euclid(HOUR_MS);
                let rotate = guard.as_ref().is_none_or(|s| hour > s.hour);
                if rotate {
                    if let Some(mut old) = guard.take() {
                        old.writer.flush().map_err(|err| StoreError::io(&old.path, err))?;
                    }
                    let path = dir.join(segment_name(hour));
                    let file = OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(&path)
                        .map_err(|err| StoreError::io(&path, err))?;
                    *guard = Some(Segment { hour, path, writer: BufWriter::new(file) });
                }
                let seg = guard.as_mut().expect("segment open");
                serde_json::to_writer(&mut seg.writer, e).map_err(|err| StoreError::io(&seg.path, err.into()))?;
                seg.writer.write_all(b"\n").map_err(|err| StoreError::io(&seg.path, err))?;
            }
            let seg = guard.as_mut().expect("segment open");
            seg.writer.flush().map_err(|err| StoreError::io(&seg.path, err))?;
        }
        let last = self.index_events(events.iter().cloned());
        drop(guard);
        let first = last + 1 - events.len() as u64;
        Ok((first..=last).collect())
    }

    /// Events with `start <= ts < end` of one listing type, sorted by
    /// `(ts, user_id, sequence)`.
    pub fn read_window(&self, start: Timestamp, end: Timestamp, listing_type: ListingType) -> Vec<InteractionEvent> {
        self.collect_window(start, end, Some(listing_type))
    }

    /// Like [`EventLog::read_window`] for both listing types.
    pub fn read_window_all(&self, start: Timestamp, end: Timestamp) -> Vec<InteractionEvent> {
        self.collect_window(start, end, None)
    }

    fn collect_window(&self, start: Timestamp, end: Timestamp, listing_type: Option<ListingType>) -> Vec<InteractionEvent> {
        if start >= end {
            return Vec::new();
        }
        let index = self.index.read();
        let mut hits: Vec<(u64, &InteractionEvent)> = index
            .buckets
            .range(start.div_euclid(HOUR_MS)..=(end - 1).div_euclid(HOUR_MS))
            .flat_map(|(_, v)| v.iter())
            .filter(|(_, e)| e.timestamp >= start && e.timestamp < end)
            .filter(|(_, e)| listing_type.is_none_or(|lt| e.listing_type == lt))
            .map(|(seq, e)| (*seq, e))
            .collect();
        hits.sort_by(|a, b| {
            a.1.timestamp.cmp(&b.1.timestamp).then_with(|| a.1.user_id.cmp(&b.1.user_id)).then(a.0.cmp(&b.0))
        });
        hits.into_iter().map(|(_, e)| e.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.index.read().buckets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Earliest and latest timestamps held.
    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        let index = self.index.read();
        let first = index.buckets.values().next()?.iter().map(|(_, e)| e.timestamp).min()?;
        let last = index.buckets.values().next_back()?.iter().map(|(_, e)| e.timestamp).max()?;
        Some((first, last))
    }

    /// Every event in append order.
    pub fn all_in_append_order(&self) -> Vec<InteractionEvent> {
        let index = self.index.read();
        let mut all: Vec<&(u64, InteractionEvent)> = index.buckets.values().flatten().collect();
        all.sort_by_key(|(seq, _)| *seq);
        all.into_iter().map(|(_, e)| e.clone()).collect()
    }
}

fn hour_of_segment(path: &Path) -> Option<i64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix(SEGMENT_PREFIX)?.strip_suffix(".jsonl")?.parse().ok()
}

/// Parses one segment file.
pub(crate) fn read_segment(path: &Path) -> Result<Vec<InteractionEvent>, StoreError> {
    super::files::read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Action;

    fn ev(ts: Timestamp, user: &str, lt: ListingType) -> InteractionEvent {
        InteractionEvent { timestamp: ts, user_id: user.into(), property_id: "p".into(), action: Action::ImpressionDetail, listing_type: lt }
    }

    #[test]
    fn read_your_write_and_order() {
        let log = EventLog::in_memory();
        log.append(ev(10, "u", ListingType::Buy)).unwrap();
        log.append(ev(20, "u", ListingType::Buy)).unwrap();
        let got = log.read_window(0, 100, ListingType::Buy);
        assert_eq!(got.iter().map(|e| e.timestamp).collect::<Vec<_>>(), [10, 20]);
        assert!(log.read_window(0, 100, ListingType::Rent).is_empty());
        assert!(log.read_window(50, 50, ListingType::Buy).is_empty());
    }

    #[test]
    fn persists_and_rotates_by_hour() {
        let dir = tempfile::tempdir().unwrap();
        {
            let log = EventLog::open(dir.path()).unwrap();
            log.append_batch(&[ev(5, "a", ListingType::Buy), ev(HOUR_MS + 5, "b", ListingType::Rent)]).unwrap();
            // Late event lands in the open segment.
            log.append(ev(7, "c", ListingType::Buy)).unwrap();
        }
        let names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        assert_eq!(names, [segment_name(0), segment_name(1)]);
        let log = EventLog::open(dir.path()).unwrap();
        assert_eq!(log.len(), 3);
        let all = log.read_window_all(0, 2 * HOUR_MS);
        assert_eq!(all.iter().map(|e| e.user_id.as_str()).collect::<Vec<_>>(), ["a", "c", "b"]);
        log.append(ev(HOUR_MS + 9, "d", ListingType::Rent)).unwrap();
        assert_eq!(EventLog::open(dir.path()).unwrap().len(), 4);
    }
}
