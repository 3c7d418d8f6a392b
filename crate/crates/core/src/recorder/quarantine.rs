//! Append-only quarantine log for suspicious units.
//!
//! Each record is the unit's full event stream — the UNIT_START frame acts
//! as the record header, followed by every attributed event and the
//! UNIT_END frame — so a log replays directly through graph ingest for
//! offline forensics.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::model::ProvEvent;
use crate::wire::{encode_event, DecodeError, FrameReader};

use super::graph::{ProvGraph, RecorderError};

#[derive(Debug)]
pub struct QuarantineLog {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl QuarantineLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(QuarantineLog {
            path,
            writer: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append_unit(&mut self, events: &[ProvEvent]) -> std::io::Result<()> {
        for event in events {
            let frame = encode_event(event).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string())
            })?;
            self.writer.write_all(&frame)?;
        }
        self.writer.flush()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QuarantineError {
    #[error("failed to read quarantine log: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt quarantine log: {0}")]
    Decode(#[from] DecodeError),
    #[error("quarantine log does not replay cleanly: {0}")]
    Replay(#[from] RecorderError),
}

/// Decodes every event in a quarantine log, in order.
pub fn read_quarantine(path: impl AsRef<Path>) -> Result<Vec<ProvEvent>, QuarantineError> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    let mut reader = FrameReader::new();
    reader.extend(&bytes);
    let mut events = Vec::new();
    while let Some(event) = reader.next_event()? {
        events.push(event);
    }
    if reader.buffered() != 0 {
        return Err(DecodeError::NeedMoreData.into());
    }
    Ok(events)
}

/// Replays a quarantine log into a fresh graph.
pub fn replay_quarantine(path: impl AsRef<Path>) -> Result<ProvGraph, QuarantineError> {
    let mut graph = ProvGraph::new();
    for event in read_quarantine(path)? {
        graph.ingest(&event)?;
    }
    Ok(graph)
}
