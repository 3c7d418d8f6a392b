//! Length-prefixed frame encoding for provenance events.
//!
//! Every internal socket (capture proxy → recorder, worker shim → recorder,
//! guard → recorder) speaks the same frame format: a 4-byte big-endian
//! payload length followed by a UTF-8 payload of tab-separated fields,
//! `<kind>\t<worker>\t<field1>\t...`. The PARSE_FAILURE payload is the one
//! exception to strict field splitting: everything after the second tab is
//! the raw offending input, verbatim, so it may itself contain tabs and
//! newlines.

use std::io::{self, Read, Write};
use std::net::SocketAddrV4;

use uuid::Uuid;

use crate::model::{EventKind, ProvEvent, SqlObject, WorkerId};

/// Maximum frame payload: 1 MiB.
pub const MAX_FRAME_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("frame payload of {0} bytes exceeds the 1 MiB limit")]
    FrameTooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("incomplete frame: need more data")]
    NeedMoreData,
    #[error("declared frame payload of {0} bytes exceeds the 1 MiB limit")]
    FrameTooLarge(usize),
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
    #[error("malformed frame: {0}")]
    BadFrame(String),
}

/// Wraps a payload in a length-prefixed frame.
pub fn frame_payload(payload: &str) -> Result<Vec<u8>, EncodeError> {
    let bytes = payload.as_bytes();
    if bytes.len() > MAX_FRAME_PAYLOAD {
        return Err(EncodeError::FrameTooLarge(bytes.len()));
    }
    let mut out = Vec::with_capacity(4 + bytes.len());
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
    Ok(out)
}

/// Extracts one frame payload from the front of `buf`, returning the payload
/// and the number of bytes consumed.
pub fn unframe(buf: &[u8]) -> Result<(&str, usize), DecodeError> {
    if buf.len() < 4 {
        return Err(DecodeError::NeedMoreData);
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len > MAX_FRAME_PAYLOAD {
        return Err(DecodeError::FrameTooLarge(len));
    }
    if buf.len() < 4 + len {
        return Err(DecodeError::NeedMoreData);
    }
    let payload = std::str::from_utf8(&buf[4..4 + len])
        .map_err(|e| DecodeError::BadFrame(format!("payload is not UTF-8: {e}")))?;
    Ok((payload, 4 + len))
}

/// Renders an event as a tab-separated frame payload (without the length
/// prefix). Deterministic: the same event always produces the same payload.
pub fn event_payload(event: &ProvEvent) -> String {
    match event {
        ProvEvent::SqlRead { worker, object }
        | ProvEvent::SqlUsed { worker, object }
        | ProvEvent::SqlWasGeneratedBy { worker, object } => format!(
            "{}\t{}\t{}\t{}",
            event.kind(),
            worker,
            object.table_name(),
            object.column_name().unwrap_or("")
        ),
        ProvEvent::UnitStart {
            worker,
            uuid,
            remote_addr,
        } => {
            format!("UNIT_START\t{worker}\t{uuid}\t{remote_addr}")
        }
        ProvEvent::UnitEnd { worker, uuid } => format!("UNIT_END\t{worker}\t{uuid}"),
        ProvEvent::ParseFailure { worker, raw } => format!("PARSE_FAILURE\t{worker}\t{raw}"),
        ProvEvent::ResponseImpact {
            worker,
            rows,
            bytes,
        } => {
            format!("RESPONSE_IMPACT\t{worker}\t{rows}\t{bytes}")
        }
    }
}

/// Encodes one event as a complete frame.
pub fn encode_event(event: &ProvEvent) -> Result<Vec<u8>, EncodeError> {
    frame_payload(&event_payload(event))
}

fn bad(msg: impl Into<String>) -> DecodeError {
    DecodeError::BadFrame(msg.into())
}

fn parse_worker(field: &str) -> Result<WorkerId, DecodeError> {
    let id: u32 = field
        .parse()
        .map_err(|_| bad(format!("bad worker id {field:?}")))?;
    WorkerId::new(id).map_err(|_| bad("worker id must be positive"))
}

fn parse_object(table: &str, column: &str) -> Result<SqlObject, DecodeError> {
    let obj = if column.is_empty() {
        SqlObject::table(table)
    } else {
        SqlObject::column(table, column)
    };
    obj.map_err(|e| bad(e.to_string()))
}

fn parse_uuid(field: &str) -> Result<Uuid, DecodeError> {
    Uuid::parse_str(field).map_err(|_| bad(format!("bad uuid {field:?}")))
}

fn parse_addr(field: &str) -> Result<SocketAddrV4, DecodeError> {
    field
        .parse()
        .map_err(|_| bad(format!("bad socket address {field:?}")))
}

fn parse_u64(field: &str, what: &str) -> Result<u64, DecodeError> {
    field
        .parse()
        .map_err(|_| bad(format!("bad {what} {field:?}")))
}

/// Parses a frame payload into an event. Unknown kinds are rejected, never
/// silently dropped.
pub fn event_from_payload(payload: &str) -> Result<ProvEvent, DecodeError> {
    let (kind_str, rest) = payload.split_once('\t').unwrap_or((payload, ""));
    let kind = EventKind::from_str(kind_str)
        .ok_or_else(|| DecodeError::UnknownKind(kind_str.to_string()))?;

    if kind == EventKind::ParseFailure {
        let (worker, raw) = rest
            .split_once('\t')
            .ok_or_else(|| bad("PARSE_FAILURE needs worker and raw input fields"))?;
        return Ok(ProvEvent::ParseFailure {
            worker: parse_worker(worker)?,
            raw: raw.to_string(),
        });
    }

    let fields: Vec<&str> = rest.split('\t').collect();
    let expect = |n: usize| -> Result<(), DecodeError> {
        if fields.len() == n {
            Ok(())
        } else {
            Err(bad(format!(
                "{kind_str} expects {n} fields, got {}",
                fields.len()
            )))
        }
    };
    match kind {
        EventKind::SqlRead | EventKind::SqlUsed | EventKind::SqlWasGeneratedBy => {
            expect(3)?;
            let worker = parse_worker(fields[0])?;
            let object = parse_object(fields[1], fields[2])?;
            Ok(match kind {
                EventKind::SqlRead => ProvEvent::SqlRead { worker, object },
                EventKind::SqlUsed => ProvEvent::SqlUsed { worker, object },
                _ => ProvEvent::SqlWasGeneratedBy { worker, object },
            })
        }
        EventKind::UnitStart => {
            expect(3)?;
            Ok(ProvEvent::UnitStart {
                worker: parse_worker(fields[0])?,
                uuid: parse_uuid(fields[1])?,
                remote_addr: parse_addr(fields[2])?,
            })
        }
        EventKind::UnitEnd => {
            expect(2)?;
            Ok(ProvEvent::UnitEnd {
                worker: parse_worker(fields[0])?,
                uuid: parse_uuid(fields[1])?,
            })
        }
        EventKind::ResponseImpact => {
            expect(3)?;
            Ok(ProvEvent::ResponseImpact {
                worker: parse_worker(fields[0])?,
                rows: parse_u64(fields[1], "row count")?,
                bytes: parse_u64(fields[2], "byte count")?,
            })
        }
        EventKind::ParseFailure => unreachable!("handled above"),
    }
}

/// Decodes one event from the front of `buf`, returning the event and the
/// number of bytes consumed. Inverse of [`encode_event`].
pub fn decode_event(buf: &[u8]) -> Result<(ProvEvent, usize), DecodeError> {
    let (payload, consumed) = unframe(buf)?;
    Ok((event_from_payload(payload)?, consumed))
}

/// Incremental frame reassembly for byte streams delivered in arbitrary
/// chunks.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn new() -> Self {
        FrameReader::default()
    }

    pub fn extend(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Pops the next complete frame payload, or `Ok(None)` if more bytes are
    /// needed.
    pub fn next_payload(&mut self) -> Result<Option<String>, DecodeError> {
        match unframe(&self.buf) {
            Ok((payload, consumed)) => {
                let payload = payload.to_string();
                self.buf.drain(..consumed);
                Ok(Some(payload))
            }
            Err(DecodeError::NeedMoreData) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Pops the next complete event, or `Ok(None)` if more bytes are needed.
    pub fn next_event(&mut self) -> Result<Option<ProvEvent>, DecodeError> {
        match self.next_payload()? {
            Some(p) => Ok(Some(event_from_payload(&p)?)),
            None => Ok(None),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

/// Writes one framed payload to a blocking stream.
pub fn write_frame(w: &mut impl Write, payload: &str) -> io::Result<()> {
    let frame = frame_payload(payload)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    w.write_all(&frame)
}

/// Reads one framed payload from a blocking stream. Returns `Ok(None)` on a
/// clean EOF at a frame boundary.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<String>> {
    let mut header = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = r.read(&mut header[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "truncated frame header",
            ));
        }
        filled += n;
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_PAYLOAD {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            DecodeError::FrameTooLarge(len).to_string(),
        ));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    let text = String::from_utf8(payload)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    Ok(Some(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(id: u32) -> WorkerId {
        WorkerId::new(id).unwrap()
    }

    #[test]
    fn sql_read_payload_layout() {
        let event = ProvEvent::SqlRead {
            worker: w(41),
            object: SqlObject::column("employees", "firstname").unwrap(),
        };
        assert_eq!(event_payload(&event), "SQL_READ\t41\temployees\tfirstname");
        let frame = encode_event(&event).unwrap();
        assert_eq!(&frame[..4], &(frame.len() as u32 - 4).to_be_bytes());
        assert_eq!(&frame[4..], event_payload(&event).as_bytes());
    }

    #[test]
    fn unit_start_payload_layout() {
        let uuid = Uuid::parse_str("0a61e0b4-8f4b-4d0a-9c1a-32b0a7a21c55").unwrap();
        let event = ProvEvent::UnitStart {
            worker: w(7),
            uuid,
            remote_addr: "10.0.0.5:51332".parse().unwrap(),
        };
        assert_eq!(
            event_payload(&event),
            format!("UNIT_START\t7\t{uuid}\t10.0.0.5:51332")
        );
    }

    #[test]
    fn table_level_object_round_trips_with_empty_column() {
        let event = ProvEvent::SqlRead {
            worker: w(3),
            object: SqlObject::table("employees").unwrap(),
        };
        let payload = event_payload(&event);
        assert_eq!(payload, "SQL_READ\t3\temployees\t");
        assert_eq!(event_from_payload(&payload).unwrap(), event);
    }

    #[test]
    fn identifier_with_tab_is_rejected_at_construction() {
        assert!(SqlObject::table("emp\tloyees").is_err());
    }

    #[test]
    fn parse_failure_preserves_raw_input_with_tabs_and_newlines() {
        let raw = "'); DROP\tTABLE users; --\nnext line".to_string();
        let event = ProvEvent::ParseFailure {
            worker: w(9),
            raw: raw.clone(),
        };
        let frame = encode_event(&event).unwrap();
        let (decoded, consumed) = decode_event(&frame).unwrap();
        assert_eq!(consumed, frame.len());
        match decoded {
            ProvEvent::ParseFailure { raw: got, .. } => assert_eq!(got, raw),
            other => panic!("unexpected event {other:?}"),
        }
    }

    #[test]
    fn oversized_parse_failure_payload_is_rejected_at_encode() {
        let event = ProvEvent::ParseFailure { worker: w(1), raw: "x".repeat(MAX_FRAME_PAYLOAD) };
        assert!(matches!(encode_event(&event).unwrap_err(), EncodeError::FrameTooLarge(_)));
    }

    #[test]
    fn empty_buffer_needs_more_data() {
        assert_eq!(decode_event(&[]).unwrap_err(), DecodeError::NeedMoreData);
    }

    #[test]
    fn truncated_frame_needs_more_data() {
        let event = ProvEvent::UnitEnd {
            worker: w(1),
            uuid: Uuid::nil(),
        };
        let frame = encode_event(&event).unwrap();
        assert_eq!(
            decode_event(&frame[..frame.len() - 1]).unwrap_err(),
            DecodeError::NeedMoreData
        );
    }

    #[test]
    fn oversized_declared_length_is_rejected() {
        let mut buf = Vec::new();
        buf.extend_from_slice(&(2u32 * 1024 * 1024).to_be_bytes());
        buf.extend_from_slice(b"xxxx");
        assert_eq!(
            decode_event(&buf).unwrap_err(),
            DecodeError::FrameTooLarge(2 * 1024 * 1024)
        );
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let frame = frame_payload("SQL_DROPPED\t1\tx\ty").unwrap();
        assert_eq!(
            decode_event(&frame).unwrap_err(),
            DecodeError::UnknownKind("SQL_DROPPED".to_string())
        );
    }

    #[test]
    fn zero_worker_id_is_rejected() {
        let frame = frame_payload("UNIT_END\t0\t00000000-0000-0000-0000-000000000000").unwrap();
        assert!(matches!(
            decode_event(&frame).unwrap_err(),
            DecodeError::BadFrame(_)
        ));
    }

    #[test]
    fn extra_fields_are_rejected() {
        let frame = frame_payload("SQL_READ\t1\tt\tc\textra").unwrap();
        assert!(matches!(
            decode_event(&frame).unwrap_err(),
            DecodeError::BadFrame(_)
        ));
    }

    #[test]
    fn concatenated_frames_decode_one_byte_at_a_time() {
        let events = vec![
            ProvEvent::SqlRead {
                worker: w(41),
                object: SqlObject::column("employees", "salary").unwrap(),
            },
            ProvEvent::ParseFailure {
                worker: w(2),
                raw: "a\tb".into(),
            },
            ProvEvent::ResponseImpact {
                worker: w(3),
                rows: 3,
                bytes: 120,
            },
        ];
        let mut stream = Vec::new();
        for e in &events {
            stream.extend_from_slice(&encode_event(e).unwrap());
        }
        let mut reader = FrameReader::new();
        let mut decoded = Vec::new();
        for byte in stream {
            reader.extend(&[byte]);
            while let Some(e) = reader.next_event().unwrap() {
                decoded.push(e);
            }
        }
        assert_eq!(decoded, events);
        assert_eq!(reader.buffered(), 0);
    }
}
