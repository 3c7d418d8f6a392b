//! Domain vocabulary shared by every component: SQL objects, worker
//! identities, units of work, and provenance events.

use std::fmt;
use std::net::SocketAddrV4;

use uuid::Uuid;

/// Characters that may never appear in a table or column identifier.
///
/// Whitespace, dots, and quotes are structurally meaningless in a normalized
/// identifier; the remaining characters are delimiters in the wire and
/// policy syntaxes.
const FORBIDDEN_IDENT_CHARS: &[char] = &['.', '\'', '"', '`', ':', ',', '*', '[', ']'];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid identifier {0:?}: {1}")]
    InvalidIdentifier(String, &'static str),
    #[error("worker id must be positive")]
    InvalidWorkerId,
    #[error("unit end time precedes start time")]
    EndBeforeStart,
}

fn normalize_ident(raw: &str) -> Result<String, ModelError> {
    let folded = raw.to_lowercase();
    if folded.is_empty() {
        return Err(ModelError::InvalidIdentifier(raw.into(), "empty"));
    }
    for ch in folded.chars() {
        if ch.is_whitespace() {
            return Err(ModelError::InvalidIdentifier(
                raw.into(),
                "contains whitespace",
            ));
        }
        if FORBIDDEN_IDENT_CHARS.contains(&ch) {
            return Err(ModelError::InvalidIdentifier(
                raw.into(),
                "contains a reserved character",
            ));
        }
    }
    Ok(folded)
}

/// A fully-qualified database column, or a table itself when `column` is
/// absent. Identifiers are case-folded to lowercase at construction, so
/// equality is case-insensitive; these are the persistent node identities of
/// the provenance graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SqlObject {
    table: String,
    column: Option<String>,
}

impl SqlObject {
    /// A table-level object.
    pub fn table(table: &str) -> Result<Self, ModelError> {
        Ok(SqlObject {
            table: normalize_ident(table)?,
            column: None,
        })
    }

    /// A column of a table.
    pub fn column(table: &str, column: &str) -> Result<Self, ModelError> {
        Ok(SqlObject {
            table: normalize_ident(table)?,
            column: Some(normalize_ident(column)?),
        })
    }

    /// Parses `table` or `table.column`.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        match text.split_once('.') {
            Some((t, c)) => SqlObject::column(t, c),
            None => SqlObject::table(text),
        }
    }

    pub fn table_name(&self) -> &str {
        &self.table
    }

    pub fn column_name(&self) -> Option<&str> {
        self.column.as_deref()
    }

    pub fn is_table(&self) -> bool {
        self.column.is_none()
    }
}

impl fmt::Display for SqlObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(col) => write!(f, "{}.{}", self.table, col),
            None => write!(f, "{}", self.table),
        }
    }
}

/// Simulated process id of a pre-forked worker. Always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorkerId(u32);

impl WorkerId {
    pub fn new(id: u32) -> Result<Self, ModelError> {
        if id == 0 {
            return Err(ModelError::InvalidWorkerId);
        }
        Ok(WorkerId(id))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitState {
    Open,
    Closed,
}

/// One autonomous request-handling span of a worker, delimited by
/// UNIT_START/UNIT_END. A worker has at most one open unit at any instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitOfWork {
    pub uuid: Uuid,
    pub worker: WorkerId,
    pub remote_addr: SocketAddrV4,
    pub state: UnitState,
    pub started_at: u64,
    pub ended_at: Option<u64>,
}

impl UnitOfWork {
    pub fn open(uuid: Uuid, worker: WorkerId, remote_addr: SocketAddrV4, started_at: u64) -> Self {
        UnitOfWork {
            uuid,
            worker,
            remote_addr,
            state: UnitState::Open,
            started_at,
            ended_at: None,
        }
    }

    /// Marks the unit closed. `ended_at` is clamped to `started_at` so the
    /// lifecycle invariant holds even if the clock reads identical values.
    pub fn close(&mut self, ended_at: u64) -> Result<(), ModelError> {
        self.state = UnitState::Closed;
        self.ended_at = Some(ended_at.max(self.started_at));
        Ok(())
    }

    pub fn is_open(&self) -> bool {
        self.state == UnitState::Open
    }
}

/// Event kinds as they appear on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    SqlRead,
    SqlUsed,
    SqlWasGeneratedBy,
    UnitStart,
    UnitEnd,
    ParseFailure,
    ResponseImpact,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SqlRead => "SQL_READ",
            EventKind::SqlUsed => "SQL_USED",
            EventKind::SqlWasGeneratedBy => "SQL_WASGENERATEDBY",
            EventKind::UnitStart => "UNIT_START",
            EventKind::UnitEnd => "UNIT_END",
            EventKind::ParseFailure => "PARSE_FAILURE",
            EventKind::ResponseImpact => "RESPONSE_IMPACT",
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "SQL_READ" => EventKind::SqlRead,
            "SQL_USED" => EventKind::SqlUsed,
            "SQL_WASGENERATEDBY" => EventKind::SqlWasGeneratedBy,
            "UNIT_START" => EventKind::UnitStart,
            "UNIT_END" => EventKind::UnitEnd,
            "PARSE_FAILURE" => EventKind::ParseFailure,
            "RESPONSE_IMPACT" => EventKind::ResponseImpact,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A wire-level provenance message tagged with the emitting worker.
///
/// The SQL kinds carry one [`SqlObject`]; `PARSE_FAILURE` preserves the raw
/// offending input verbatim as forensic evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProvEvent {
    SqlRead {
        worker: WorkerId,
        object: SqlObject,
    },
    SqlUsed {
        worker: WorkerId,
        object: SqlObject,
    },
    SqlWasGeneratedBy {
        worker: WorkerId,
        object: SqlObject,
    },
    UnitStart {
        worker: WorkerId,
        uuid: Uuid,
        remote_addr: SocketAddrV4,
    },
    UnitEnd {
        worker: WorkerId,
        uuid: Uuid,
    },
    ParseFailure {
        worker: WorkerId,
        raw: String,
    },
    ResponseImpact {
        worker: WorkerId,
        rows: u64,
        bytes: u64,
    },
}

impl ProvEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            ProvEvent::SqlRead { .. } => EventKind::SqlRead,
            ProvEvent::SqlUsed { .. } => EventKind::SqlUsed,
            ProvEvent::SqlWasGeneratedBy { .. } => EventKind::SqlWasGeneratedBy,
            ProvEvent::UnitStart { .. } => EventKind::UnitStart,
            ProvEvent::UnitEnd { .. } => EventKind::UnitEnd,
            ProvEvent::ParseFailure { .. } => EventKind::ParseFailure,
            ProvEvent::ResponseImpact { .. } => EventKind::ResponseImpact,
        }
    }

    pub fn worker(&self) -> WorkerId {
        match self {
            ProvEvent::SqlRead { worker, .. }
            | ProvEvent::SqlUsed { worker, .. }
            | ProvEvent::SqlWasGeneratedBy { worker, .. }
            | ProvEvent::UnitStart { worker, .. }
            | ProvEvent::UnitEnd { worker, .. }
            | ProvEvent::ParseFailure { worker, .. }
            | ProvEvent::ResponseImpact { worker, .. } => *worker,
        }
    }

    /// True for the three kinds that carry a [`SqlObject`].
    pub fn is_sql(&self) -> bool {
        matches!(
            self,
            ProvEvent::SqlRead { .. }
                | ProvEvent::SqlUsed { .. }
                | ProvEvent::SqlWasGeneratedBy { .. }
        )
    }

    /// The same event attributed to a different worker.
    pub fn with_worker(mut self, new: WorkerId) -> ProvEvent {
        match &mut self {
            ProvEvent::SqlRead { worker, .. }
            | ProvEvent::SqlUsed { worker, .. }
            | ProvEvent::SqlWasGeneratedBy { worker, .. }
            | ProvEvent::UnitStart { worker, .. }
            | ProvEvent::UnitEnd { worker, .. }
            | ProvEvent::ParseFailure { worker, .. }
            | ProvEvent::ResponseImpact { worker, .. } => *worker = new,
        }
        self
    }
}

/// Nanoseconds since an arbitrary process-local origin; monotone.
pub fn monotonic_ns() -> u64 {
    use std::sync::OnceLock;
    use std::time::Instant;
    static ORIGIN: OnceLock<Instant> = OnceLock::new();
    let origin = ORIGIN.get_or_init(Instant::now);
    origin.elapsed().as_nanos() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sql_object_case_folds() {
        let a = SqlObject::column("Employees", "ID").unwrap();
        let b = SqlObject::column("employees", "id").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "employees.id");
    }

    #[test]
    fn sql_object_rejects_bad_identifiers() {
        assert!(SqlObject::table("").is_err());
        assert!(SqlObject::table("with space").is_err());
        assert!(SqlObject::table("tab\there").is_err());
        assert!(SqlObject::table("dotted.name").is_err());
        assert!(SqlObject::column("t", "new\nline").is_err());
        assert!(SqlObject::table("quo'te").is_err());
    }

    #[test]
    fn sql_object_ordering_puts_table_before_columns() {
        let table = SqlObject::table("employees").unwrap();
        let col = SqlObject::column("employees", "salary").unwrap();
        assert!(table < col);
    }

    #[test]
    fn worker_id_must_be_positive() {
        assert!(WorkerId::new(0).is_err());
        assert_eq!(WorkerId::new(41).unwrap().get(), 41);
    }

    #[test]
    fn unit_close_clamps_end() {
        let addr = "10.0.0.5:51332".parse().unwrap();
        let mut unit = UnitOfWork::open(Uuid::new_v4(), WorkerId::new(1).unwrap(), addr, 100);
        unit.close(40).unwrap();
        assert_eq!(unit.ended_at, Some(100));
        assert!(!unit.is_open());
    }
}
