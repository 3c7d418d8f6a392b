//! Random valid provenance events for round-trip and ingest fuzzing.

use std::net::{Ipv4Addr, SocketAddrV4};

use uuid::Uuid;

use crate::model::{ProvEvent, SqlObject, WorkerId};

use super::rng::Rng;

const TABLES: &[&str] = &[
    "employees",
    "customers",
    "orders",
    "products",
    "audit_trail",
];
const COLUMNS: &[&str] = &[
    "id",
    "name",
    "password",
    "creditcard",
    "total",
    "salary",
    "firstname",
    "email",
    "stock",
];

pub fn random_object(rng: &mut Rng) -> SqlObject {
    let table = rng.pick(TABLES);
    if rng.chance(20) {
        SqlObject::table(table).unwrap()
    } else {
        SqlObject::column(table, rng.pick(COLUMNS)).unwrap()
    }
}

pub fn random_worker(rng: &mut Rng) -> WorkerId {
    WorkerId::new(rng.range(1, 64) as u32).unwrap()
}

pub fn random_uuid(rng: &mut Rng) -> Uuid {
    let mut bytes = [0u8; 16];
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&rng.next_u64().to_le_bytes()[..chunk.len()]);
    }
    uuid::Builder::from_random_bytes(bytes).into_uuid()
}

pub fn random_addr(rng: &mut Rng) -> SocketAddrV4 {
    SocketAddrV4::new(
        Ipv4Addr::new(
            10,
            rng.below(256) as u8,
            rng.below(256) as u8,
            1 + rng.below(254) as u8,
        ),
        rng.range(1024, 65535) as u16,
    )
}

/// Raw inputs for PARSE_FAILURE events: tabs, newlines, quotes, non-ASCII.
fn random_raw(rng: &mut Rng) -> String {
    const PIECES: &[&str] = &[
        "' OR 1=1--",
        "'); DROP TABLE users;",
        "\tUNION\tSELECT",
        "line1\nline2",
        "emoji \u{1f980} payload",
        "",
        "%' AND password LIKE '%",
    ];
    let mut raw = String::new();
    for _ in 0..rng.range(1, 3) {
        raw.push_str(rng.pick(PIECES));
    }
    raw
}

/// One random valid event of any kind.
pub fn random_event(rng: &mut Rng) -> ProvEvent {
    let worker = random_worker(rng);
    match rng.below(7) {
        0 => ProvEvent::SqlRead {
            worker,
            object: random_object(rng),
        },
        1 => ProvEvent::SqlUsed {
            worker,
            object: random_object(rng),
        },
        2 => ProvEvent::SqlWasGeneratedBy {
            worker,
            object: random_object(rng),
        },
        3 => ProvEvent::UnitStart {
            worker,
            uuid: random_uuid(rng),
            remote_addr: random_addr(rng),
        },
        4 => ProvEvent::UnitEnd {
            worker,
            uuid: random_uuid(rng),
        },
        5 => ProvEvent::ParseFailure {
            worker,
            raw: random_raw(rng),
        },
        _ => ProvEvent::ResponseImpact {
            worker,
            rows: rng.next_u64() % 10_000,
            bytes: rng.next_u64() % 1_000_000,
        },
    }
}

/// A plausible interleaved multi-worker event sequence: workers open and
/// close units, issue SQL with occasional cross-unit read/write races,
/// sometimes emit events with no open unit at all.
pub fn random_ingest_sequence(rng: &mut Rng, len: usize) -> Vec<ProvEvent> {
    let worker_count = rng.range(2, 6);
    let mut open: Vec<Option<Uuid>> = vec![None; worker_count];
    let mut events = Vec::with_capacity(len);
    for _ in 0..len {
        let slot = rng.below(worker_count);
        let worker = WorkerId::new(slot as u32 + 1).unwrap();
        match open[slot] {
            None => {
                if rng.chance(70) {
                    let uuid = random_uuid(rng);
                    open[slot] = Some(uuid);
                    events.push(ProvEvent::UnitStart {
                        worker,
                        uuid,
                        remote_addr: random_addr(rng),
                    });
                } else {
                    // Deliberate orphan.
                    events.push(ProvEvent::SqlRead {
                        worker,
                        object: random_object(rng),
                    });
                }
            }
            Some(uuid) => match rng.below(10) {
                0 | 1 => {
                    events.push(ProvEvent::UnitEnd { worker, uuid });
                    open[slot] = None;
                }
                2 | 3 => events.push(ProvEvent::SqlWasGeneratedBy {
                    worker,
                    object: random_object(rng),
                }),
                4 => events.push(ProvEvent::ParseFailure {
                    worker,
                    raw: random_raw(rng),
                }),
                5 => events.push(ProvEvent::ResponseImpact {
                    worker,
                    rows: rng.next_u64() % 100,
                    bytes: rng.next_u64() % 10_000,
                }),
                6 | 7 => events.push(ProvEvent::SqlUsed {
                    worker,
                    object: random_object(rng),
                }),
                _ => events.push(ProvEvent::SqlRead {
                    worker,
                    object: random_object(rng),
                }),
            },
        }
    }
    events
}
