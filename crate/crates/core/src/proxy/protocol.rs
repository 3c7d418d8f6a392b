//! The application ↔ database text protocol the proxy relays.
//!
//! App → db: one handshake line `WORKER <id>\n` per connection, then one
//! newline-terminated SQL statement per request. Db → app: a status line
//! `OK rows=<n> bytes=<b>\n` followed by exactly `b` payload bytes, or
//! `ERR <message>\n`.

use std::io::{self, BufRead};

use crate::model::WorkerId;

/// Statement lines beyond this are a protocol violation.
pub const MAX_LINE: usize = 1 << 20;

/// Reads one `\n`-terminated line (terminator included). A final unterminated
/// line before EOF is returned as-is; `None` means clean EOF.
pub fn read_line(reader: &mut impl BufRead) -> io::Result<Option<Vec<u8>>> {
    let mut line = Vec::new();
    loop {
        let available = reader.fill_buf()?;
        if available.is_empty() {
            return if line.is_empty() {
                Ok(None)
            } else {
                Ok(Some(line))
            };
        }
        match available.iter().position(|b| *b == b'\n') {
            Some(pos) => {
                line.extend_from_slice(&available[..=pos]);
                reader.consume(pos + 1);
                return Ok(Some(line));
            }
            None => {
                let len = available.len();
                line.extend_from_slice(available);
                reader.consume(len);
                if line.len() > MAX_LINE {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        "statement line exceeds the 1 MiB protocol limit",
                    ));
                }
            }
        }
    }
}

/// The statement text of a line: trailing newline (and carriage return)
/// stripped, otherwise verbatim.
pub fn line_text(line: &[u8]) -> String {
    let mut end = line.len();
    if end > 0 && line[end - 1] == b'\n' {
        end -= 1;
    }
    if end > 0 && line[end - 1] == b'\r' {
        end -= 1;
    }
    String::from_utf8_lossy(&line[..end]).into_owned()
}

/// Parses a handshake line `WORKER <id>`.
pub fn parse_handshake(text: &str) -> Option<WorkerId> {
    let rest = text.strip_prefix("WORKER ")?;
    let id: u32 = rest.trim().parse().ok()?;
    WorkerId::new(id).ok()
}

pub fn handshake_line(worker: WorkerId) -> String {
    format!("WORKER {worker}\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DbStatus {
    Ok { rows: u64, bytes: u64 },
    Err,
}

/// Parses a db status line (without the trailing newline).
pub fn parse_status(text: &str) -> Option<DbStatus> {
    if text.starts_with("ERR") {
        return Some(DbStatus::Err);
    }
    let rest = text.strip_prefix("OK ")?;
    let mut rows = None;
    let mut bytes = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("rows=") {
            rows = v.parse().ok();
        } else if let Some(v) = field.strip_prefix("bytes=") {
            bytes = v.parse().ok();
        }
    }
    Some(DbStatus::Ok {
        rows: rows?,
        bytes: bytes?,
    })
}

pub fn ok_status_line(rows: u64, bytes: u64) -> String {
    format!("OK rows={rows} bytes={bytes}\n")
}

pub fn err_status_line(message: &str) -> String {
    format!("ERR {message}\n")
}
