//! Request/reply vocabulary spoken on the recorder socket, layered on the
//! same length-prefixed tab-separated frames as provenance events.
//!
//! Agents stream event frames fire-and-forget; control frames (queries,
//! garbage collection verdicts, SYNC barriers) each get one reply frame.

use std::collections::HashMap;

use uuid::Uuid;

use crate::model::{EventKind, ProvEvent, SqlObject, WorkerId};
use crate::wire::{event_from_payload, DecodeError};

use super::graph::{AccessKind, AncestrySummary, AuditReport, GcVerdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecorderRequest {
    Event(ProvEvent),
    AncestryByWorker(WorkerId),
    AncestryByUnit(Uuid),
    GcUnit { uuid: Uuid, verdict: GcVerdict },
    Stats,
    Audit,
    Dot { filter: Option<Uuid> },
    Sync,
    Shutdown,
}

fn bad(msg: impl Into<String>) -> DecodeError {
    DecodeError::BadFrame(msg.into())
}

impl RecorderRequest {
    pub fn parse(payload: &str) -> Result<RecorderRequest, DecodeError> {
        let (head, rest) = payload.split_once('\t').unwrap_or((payload, ""));
        if EventKind::from_str(head).is_some() {
            return Ok(RecorderRequest::Event(event_from_payload(payload)?));
        }
        let fields: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split('\t').collect()
        };
        match head {
            "ANCESTRY_QUERY" => match fields.as_slice() {
                [worker] => Ok(RecorderRequest::AncestryByWorker(parse_worker(worker)?)),
                [_, uuid] => Ok(RecorderRequest::AncestryByUnit(parse_uuid(uuid)?)),
                _ => Err(bad("ANCESTRY_QUERY expects <worker> [<uuid>]")),
            },
            "GC_UNIT" => match fields.as_slice() {
                [uuid, verdict] => Ok(RecorderRequest::GcUnit {
                    uuid: parse_uuid(uuid)?,
                    verdict: GcVerdict::from_str(verdict)
                        .ok_or_else(|| bad(format!("bad verdict {verdict:?}")))?,
                }),
                _ => Err(bad("GC_UNIT expects <uuid> <ALLOWED|SUSPICIOUS>")),
            },
            "STATS" if fields.is_empty() => Ok(RecorderRequest::Stats),
            "AUDIT" if fields.is_empty() => Ok(RecorderRequest::Audit),
            "DOT" => match fields.as_slice() {
                [] => Ok(RecorderRequest::Dot { filter: None }),
                [uuid] => Ok(RecorderRequest::Dot {
                    filter: Some(parse_uuid(uuid)?),
                }),
                _ => Err(bad("DOT expects at most one uuid")),
            },
            "SYNC" if fields.is_empty() => Ok(RecorderRequest::Sync),
            "SHUTDOWN" if fields.is_empty() => Ok(RecorderRequest::Shutdown),
            other => Err(DecodeError::UnknownKind(other.to_string())),
        }
    }

    pub fn payload(&self) -> String {
        match self {
            RecorderRequest::Event(e) => crate::wire::event_payload(e),
            RecorderRequest::AncestryByWorker(w) => format!("ANCESTRY_QUERY\t{w}"),
            RecorderRequest::AncestryByUnit(u) => format!("ANCESTRY_QUERY\t0\t{u}"),
            RecorderRequest::GcUnit { uuid, verdict } => {
                format!("GC_UNIT\t{uuid}\t{}", verdict.as_str())
            }
            RecorderRequest::Stats => "STATS".into(),
            RecorderRequest::Audit => "AUDIT".into(),
            RecorderRequest::Dot { filter: None } => "DOT".into(),
            RecorderRequest::Dot { filter: Some(u) } => format!("DOT\t{u}"),
            RecorderRequest::Sync => "SYNC".into(),
            RecorderRequest::Shutdown => "SHUTDOWN".into(),
        }
    }
}

fn parse_worker(field: &str) -> Result<WorkerId, DecodeError> {
    let id: u32 = field
        .parse()
        .map_err(|_| bad(format!("bad worker id {field:?}")))?;
    WorkerId::new(id).map_err(|_| bad("worker id must be positive"))
}

fn parse_uuid(field: &str) -> Result<Uuid, DecodeError> {
    Uuid::parse_str(field).map_err(|_| bad(format!("bad uuid {field:?}")))
}

/// Graph-level totals reported by STATS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub nodes: u64,
    pub edges: u64,
    pub units_started: u64,
    pub units_closed: u64,
    pub units_live: u64,
    pub units_gcd: u64,
    pub units_quarantined: u64,
    pub events_total: u64,
    pub sql_events: u64,
    pub orphan_events: u64,
    pub dropped_connections: u64,
}

impl StatsSnapshot {
    /// The storage-growth measure: retained nodes plus edges.
    pub fn footprint(&self) -> u64 {
        self.nodes + self.edges
    }
}

pub fn encode_ancestry(summary: &AncestrySummary) -> String {
    let mut payload = format!(
        "ANCESTRY_OK\t{}\t{}\t{}\t{}",
        summary.uuid,
        summary.remote_addr,
        u8::from(summary.tainted),
        summary.impact_bytes
    );
    for (object, kind) in &summary.ancestors {
        payload.push('\t');
        payload.push_str(&format!("{object}:{}", kind.as_str()));
    }
    payload
}

pub fn parse_ancestry(payload: &str) -> Result<AncestrySummary, DecodeError> {
    let mut fields = payload.split('\t');
    let head = fields.next().unwrap_or("");
    if head != "ANCESTRY_OK" {
        return Err(bad(format!("expected ANCESTRY_OK, got {head:?}")));
    }
    let uuid = parse_uuid(fields.next().ok_or_else(|| bad("missing uuid"))?)?;
    let remote_addr = fields
        .next()
        .ok_or_else(|| bad("missing remote address"))?
        .parse()
        .map_err(|_| bad("bad remote address"))?;
    let tainted = match fields.next().ok_or_else(|| bad("missing taint flag"))? {
        "0" => false,
        "1" => true,
        other => return Err(bad(format!("bad taint flag {other:?}"))),
    };
    let impact_bytes = fields
        .next()
        .ok_or_else(|| bad("missing impact bytes"))?
        .parse()
        .map_err(|_| bad("bad impact bytes"))?;
    let mut ancestors = Vec::new();
    for field in fields {
        let (obj, kind) = field
            .rsplit_once(':')
            .ok_or_else(|| bad(format!("bad ancestor {field:?}")))?;
        let object = SqlObject::parse(obj).map_err(|e| bad(e.to_string()))?;
        let kind =
            AccessKind::from_str(kind).ok_or_else(|| bad(format!("bad access kind {kind:?}")))?;
        ancestors.push((object, kind));
    }
    Ok(AncestrySummary {
        uuid,
        remote_addr,
        ancestors,
        tainted,
        impact_bytes,
    })
}

fn encode_kv(head: &str, pairs: &[(&str, u64)]) -> String {
    let mut payload = String::from(head);
    for (key, value) in pairs {
        payload.push('\t');
        payload.push_str(&format!("{key}={value}"));
    }
    payload
}

fn parse_kv(payload: &str, expected_head: &str) -> Result<HashMap<String, u64>, DecodeError> {
    let mut fields = payload.split('\t');
    let head = fields.next().unwrap_or("");
    if head != expected_head {
        return Err(bad(format!("expected {expected_head}, got {head:?}")));
    }
    let mut map = HashMap::new();
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad("bad key=value field"))?;
        let value = value
            .parse()
            .map_err(|_| bad(format!("bad value for {key}")))?;
        map.insert(key.to_string(), value);
    }
    Ok(map)
}

pub fn encode_stats(stats: &StatsSnapshot) -> String {
    encode_kv(
        "STATS_OK",
        &[
            ("nodes", stats.nodes),
            ("edges", stats.edges),
            ("units_started", stats.units_started),
            ("units_closed", stats.units_closed),
            ("units_live", stats.units_live),
            ("units_gcd", stats.units_gcd),
            ("units_quarantined", stats.units_quarantined),
            ("events_total", stats.events_total),
            ("sql_events", stats.sql_events),
            ("orphan_events", stats.orphan_events),
            ("dropped_connections", stats.dropped_connections),
        ],
    )
}

pub fn parse_stats(payload: &str) -> Result<StatsSnapshot, DecodeError> {
    let map = parse_kv(payload, "STATS_OK")?;
    let get = |key: &str| map.get(key).copied().unwrap_or(0);
    Ok(StatsSnapshot {
        nodes: get("nodes"),
        edges: get("edges"),
        units_started: get("units_started"),
        units_closed: get("units_closed"),
        units_live: get("units_live"),
        units_gcd: get("units_gcd"),
        units_quarantined: get("units_quarantined"),
        events_total: get("events_total"),
        sql_events: get("sql_events"),
        orphan_events: get("orphan_events"),
        dropped_connections: get("dropped_connections"),
    })
}

pub fn encode_audit(report: &AuditReport) -> String {
    encode_kv(
        "AUDIT_OK",
        &[
            ("sql_events", report.sql_events_total),
            ("attributed", report.attributed_retained),
            ("orphans", report.orphan_events),
            ("misattributed", report.misattributed),
        ],
    )
}

pub fn parse_audit(payload: &str) -> Result<AuditReport, DecodeError> {
    let map = parse_kv(payload, "AUDIT_OK")?;
    let get = |key: &str| map.get(key).copied().unwrap_or(0);
    Ok(AuditReport {
        sql_events_total: get("sql_events"),
        attributed_retained: get("attributed"),
        orphan_events: get("orphans"),
        misattributed: get("misattributed"),
    })
}

/// `DOT_OK\t<text>` — the text is the final field and may contain newlines.
pub fn encode_dot(dot: &str) -> String {
    format!("DOT_OK\t{dot}")
}

pub fn parse_dot(payload: &str) -> Result<String, DecodeError> {
    payload
        .strip_prefix("DOT_OK\t")
        .map(str::to_string)
        .ok_or_else(|| bad("expected DOT_OK"))
}

pub fn encode_err(message: &str) -> String {
    // The reply grammar is tab-delimited; newlines are fine, tabs are not.
    format!("ERR\t{}", message.replace('\t', " "))
}
