//! Transparent provenance capture for database-backed request workflows.
//!
//! The pipeline interposes on application ↔ database traffic, extracts
//! column/table-granularity provenance from SQL, partitions execution into
//! per-request units of work, aggregates everything into a versioned
//! in-memory provenance graph, and enforces exfiltration policy on outbound
//! responses with whitelist-driven garbage collection.
//!
//! Components, wired together over local stream sockets:
//!
//! * [`proxy`] — transparent TCP relay between application and database
//!   that extracts SQL provenance in flight (plus a deterministic database
//!   stub for testing and benchmarks);
//! * [`shim`] — a simulated pre-forked worker pool that delimits units of
//!   work and wraps database connections;
//! * [`recorder`] — the versioned provenance graph, its event-loop server,
//!   and the quarantine log;
//! * [`guard`] — the egress proxy that evaluates exfiltration policy
//!   against each response's provenance ancestry.

pub mod metrics;
pub mod model;
pub mod net;
pub mod schema;
pub mod sql;
pub mod wire;

pub mod guard;
pub mod proxy;
pub mod recorder;
pub mod shim;

pub mod testkit;

pub use model::{EventKind, ProvEvent, SqlObject, UnitOfWork, UnitState, WorkerId};
pub use schema::Schema;
pub use sql::{Extraction, Statement};
pub use wire::{decode_event, encode_event, FrameReader};
