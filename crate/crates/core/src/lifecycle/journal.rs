//! Append-only JSON-lines journal of store mutations, replayed on restart.
//!
//! One record per line, tagged by `"type"`:
//!
//! - `challenge`: full state of a challenge after it changed
//! - `evict`: `{"id"}` challenge removed by a sweep
//! - `session`: `{"id","retries_used","last_seen"}`
//! - `session_evict`: `{"id"}`
//! - `spent`: `{"sig","exp"}` a redeemed pass token
//!
//! Later records win. A torn final line (crash mid-write) is ignored.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Challenge, SessionState, StoreInner};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub(crate) enum Record {
    Challenge(Box<Challenge>),
    Evict { id: String },
    Session { id: String, retries_used: u32, last_seen: u64 },
    SessionEvict { id: String },
    Spent { sig: String, exp: u64 },
}

#[derive(Debug)]
pub(crate) struct Journal {
    out: BufWriter<File>,
}

impl Journal {
    /// Replays `path` into `inner` (if it exists) and opens it for appending.
    pub(crate) fn open(path: &Path, inner: &mut StoreInner) -> io::Result<Self> {
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let lines: Vec<String> = reader.lines().collect::<io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Record>(line) {
                    Ok(record) => apply(inner, record),
                    Err(_) if i == last => break,
                    Err(e) => {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("journal line {}: {e}", i + 1),
                        ))
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Journal {
            out: BufWriter::new(file),
        })
    }

    pub(crate) fn append(&mut self, record: &Record) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

fn apply(inner: &mut StoreInner, record: Record) {
    match record {
        Record::Challenge(c) => {
            inner.challenges.insert(c.id.clone(), *c);
        }
        Record::Evict { id } => {
            inner.challenges.remove(&id);
        }
        Record::Session {
            id,
            retries_used,
            last_seen,
        } => {
            inner.sessions.insert(
                id,
                SessionState {
                    retries_used,
                    last_seen,
                },
            );
        }
        Record::SessionEvict { id } => {
            inner.sessions.remove(&id);
        }
        Record::Spent { sig, exp } => {
            inner.spent.insert(sig, exp);
        }
    }
}
