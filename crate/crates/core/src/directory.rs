//! The lookup table kept by the controlling server.
//!
//! Each peer's online time is cumulative: a session's length is folded in
//! when the peer goes offline and survives until it rejoins.
//!
//! The table is persisted as CSV with the header `user_id,online_time,status`,
//! LF line endings and rows sorted by user id. The status column is either
//! `offline` or `online@<session start>`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type UserId = u64;

pub const CSV_HEADER: [&str; 3] = ["user_id", "online_time", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PeerStatus {
    Online,
    Offline,
}

impl fmt::Display for PeerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeerStatus::Online => "online",
            PeerStatus::Offline => "offline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerRecord {
    pub user_id: UserId,
    /// Accumulated seconds online over all completed sessions.
    pub online_time: u64,
    pub status: PeerStatus,
    /// Set exactly when `status` is `Online`.
    pub session_started_at: Option<u64>,
}

impl PeerRecord {
    fn offline(user_id: UserId, online_time: u64) -> Self {
        PeerRecord {
            user_id,
            online_time,
            status: PeerStatus::Offline,
            session_started_at: None,
        }
    }

    pub fn is_online(&self) -> bool {
        self.status == PeerStatus::Online
    }

    /// Online time including the running session, as of `now`.
    pub fn trust_at(&self, now: u64) -> u64 {
        match self.session_started_at {
            Some(start) => self.online_time + now.saturating_sub(start),
            None => self.online_time,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LookupTable {
    records: BTreeMap<UserId, PeerRecord>,
    online: usize,
    revision: u64,
}

impl PartialEq for LookupTable {
    /// Tables compare by contents; the revision counter is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Eq for LookupTable {}

impl LookupTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn get(&self, id: UserId) -> Option<&PeerRecord> {
        self.records.get(&id)
    }

    /// Records in user-id order.
    pub fn records(&self) -> impl Iterator<Item = &PeerRecord> {
        self.records.values()
    }

    pub fn online_count(&self) -> usize {
        self.online
    }

    /// Creates an offline record if `id` is new; otherwise returns the
    /// existing record untouched.
    pub fn upsert(&mut self, id: UserId, initial_online_time: u64) -> &PeerRecord {
        let revision = &mut self.revision;
        self.records.entry(id).or_insert_with(|| {
            *revision += 1;
            PeerRecord::offline(id, initial_online_time)
        })
    }

    pub fn mark_online(&mut self, id: UserId, now: u64) -> Result<&PeerRecord> {
        let record = self.records.get_mut(&id).ok_or(Error::UnknownPeer(id))?;
        if record.is_online() {
            return Err(Error::InvalidTransition {
                id,
                status: PeerStatus::Online,
            });
        }
        record.status = PeerStatus::Online;
        record.session_started_at = Some(now);
        self.online += 1;
        self.revision += 1;
        Ok(record)
    }

    pub fn mark_offline(&mut self, id: UserId, now: u64) -> Result<&PeerRecord> {
        let record = self.records.get_mut(&id).ok_or(Error::UnknownPeer(id))?;
        let started = match record.session_started_at {
            Some(started) if record.is_online() => started,
            _ => {
                return Err(Error::InvalidTransition {
                    id,
                    status: PeerStatus::Offline,
                })
            }
        };
        if now < started {
            return Err(Error::ClockWentBackwards { id, started, now });
        }
        record.online_time += now - started;
        record.status = PeerStatus::Offline;
        record.session_started_at = None;
        self.online -= 1;
        self.revision += 1;
        Ok(record)
    }

    /// `(user_id, trust)` for every online peer, trust including the
    /// running session up to `now`. Sorted by user id.
    pub fn snapshot_for_build(&self, now: u64) -> Vec<(UserId, u64)> {
        self.records
            .values()
            .filter(|r| r.is_online())
            .map(|r| (r.user_id, r.trust_at(now)))
            .collect()
    }

    fn insert_loaded(&mut self, record: PeerRecord, line: u64) -> Result<()> {
        let id = record.user_id;
        let online = record.is_online();
        if self.records.insert(id, record).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate user id {id}"),
            });
        }
        self.online += usize::from(online);
        self.revision += 1;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(CSV_HEADER)?;
        for record in self.records.values() {
            let status = match record.session_started_at {
                Some(start) if record.is_online() => format!("online@{start}"),
                _ => "offline".to_owned(),
            };
            out.write_record([
                record.user_id.to_string(),
                record.online_time.to_string(),
                status,
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut table = LookupTable::new();
        let mut seen_header = false;
        for row in rows.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            if !seen_header {
                if row.iter().ne(CSV_HEADER) {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected header `{}`", CSV_HEADER.join(",")),
                    });
                }
                seen_header = true;
                continue;
            }
            table.insert_loaded(parse_row(&row, line)?, line)?;
        }
        if !seen_header {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".to_owned(),
            });
        }
        Ok(table)
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut file = BufWriter::new(File::create(path)?);
        self.write_csv(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<PeerRecord> {
    let err = |message: String| Error::Parse { line, message };
    if row.len() != CSV_HEADER.len() {
        return Err(err(format!("expected 3 fields, found {}", row.len())));
    }
    let user_id = row[0]
        .parse::<UserId>()
        .map_err(|e| err(format!("user_id `{}`: {e}", &row[0])))?;
    let online_time = row[1]
        .parse::<u64>()
        .map_err(|e| err(format!("online_time `{}`: {e}", &row[1])))?;
    let record = match &row[2] {
        "offline" => PeerRecord::offline(user_id, online_time),
        status => {
            let start = status
                .strip_prefix("online@")
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| err(format!("status `{status}`")))?;
            PeerRecord {
                user_id,
                online_time,
                status: PeerStatus::Online,
                session_started_at: Some(start),
            }
        }
    };
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_string(table: &LookupTable) -> String {
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn upsert_creates_offline_record() {
        let mut table = LookupTable::new();
        let record = table.upsert(7, 0).clone();
        assert_eq!(record, PeerRecord::offline(7, 0));
        assert!(record.session_started_at.is_none());
    }

    #[test]
    fn upsert_is_idempotent() {
        let mut table = LookupTable::new();
        let first = table.upsert(7, 3).clone();
        let revision = table.revision();
        let second = table.upsert(7, 999).clone();
        assert_eq!(first, second);
        assert_eq!(table.revision(), revision);
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn session_accumulates() {
        let mut table = LookupTable::new();
        table.upsert(1, 100);
        assert_eq!(table.mark_online(1, 10).unwrap().session_started_at, Some(10));
        let record = table.mark_offline(1, 25).unwrap();
        assert_eq!(record.online_time, 115);
        assert_eq!(record.session_started_at, None);
    }

    #[test]
    fn two_sessions_add_up() {
        let mut table = LookupTable::new();
        table.upsert(1, 40);
        table.mark_online(1, 0).unwrap();
        table.mark_offline(1, 5).unwrap();
        table.mark_online(1, 30).unwrap();
        assert_eq!(table.mark_offline(1, 37).unwrap().online_time, 52);
    }

    #[test]
    fn bad_transitions() {
        let mut table = LookupTable::new();
        table.upsert(1, 0);
        assert!(matches!(
            table.mark_offline(1, 5),
            Err(Error::InvalidTransition { id: 1, status: PeerStatus::Offline })
        ));
        table.mark_online(1, 5).unwrap();
        assert!(matches!(
            table.mark_online(1, 6),
            Err(Error::InvalidTransition { id: 1, status: PeerStatus::Online })
        ));
        assert!(matches!(table.mark_offline(1, 4), Err(Error::ClockWentBackwards { .. })));
        assert!(matches!(table.mark_online(2, 0), Err(Error::UnknownPeer(2))));
        assert!(matches!(table.mark_offline(2, 0), Err(Error::UnknownPeer(2))));
    }

    #[test]
    fn revision_bumps_on_mutation() {
        let mut table = LookupTable::new();
        let mut last = table.revision();
        table.upsert(1, 0);
        assert!(table.revision() > last);
        last = table.revision();
        table.mark_online(1, 0).unwrap();
        assert!(table.revision() > last);
        last = table.revision();
        table.mark_offline(1, 1).unwrap();
        assert!(table.revision() > last);
    }

    #[test]
    fn snapshot_counts_running_session() {
        let mut table = LookupTable::new();
        assert!(table.snapshot_for_build(0).is_empty());
        table.upsert(1, 10);
        table.upsert(2, 50);
        assert!(table.snapshot_for_build(0).is_empty());
        table.mark_online(1, 20).unwrap();
        assert_eq!(table.snapshot_for_build(25), vec![(1, 15)]);
    }

    #[test]
    fn empty_table_writes_header_only() {
        assert_eq!(to_string(&LookupTable::new()), "user_id,online_time,status\n");
    }

    #[test]
    fn csv_rows_sorted_and_lf() {
        let mut table = LookupTable::new();
        table.upsert(9, 1);
        table.upsert(2, 3);
        table.mark_online(2, 4).unwrap();
        assert_eq!(
            to_string(&table),
            "user_id,online_time,status\n2,3,online@4\n9,1,offline\n"
        );
    }

    #[test]
    fn csv_parse_errors_carry_line() {
        let cases = [
            ("user_id,online_time,status\n1,5,offline\n2,-3,offline\n", 3),
            ("user_id,online_time,status\n1,5\n", 2),
            ("user_id,online_time,status\nx,5,offline\n", 2),
            ("user_id,online_time,status\n1,5,asleep\n", 2),
            ("user_id,online_time,status\n1,5,online@\n", 2),
            ("id,time,status\n1,5,offline\n", 1),
        ];
        for (text, expected) in cases {
            match LookupTable::read_csv(text.as_bytes()) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn csv_duplicate_rejected() {
        let text = "user_id,online_time,status\n1,5,offline\n1,6,offline\n";
        match LookupTable::read_csv(text.as_bytes()) {
            Err(Error::Parse { line: 3, message }) => assert!(message.contains("duplicate")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_missing_header() {
        assert!(matches!(
            LookupTable::read_csv("".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
