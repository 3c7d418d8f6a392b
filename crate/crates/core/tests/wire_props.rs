//! Wire-format properties: round-trip identity and framing under
//! adversarial chunking.

use proptest::prelude::*;

use provtap_core::model::{ProvEvent, SqlObject, WorkerId};
use provtap_core::testkit::{random_event, Rng};
use provtap_core::wire::{decode_event, encode_event, FrameReader};

fn ident_strategy() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,11}"
}

fn object_strategy() -> impl Strategy<Value = SqlObject> {
    (ident_strategy(), proptest::option::of(ident_strategy())).prop_map(|(table, column)| {
        match column {
            Some(col) => SqlObject::column(&table, &col).unwrap(),
            None => SqlObject::table(&table).unwrap(),
        }
    })
}

fn worker_strategy() -> impl Strategy<Value = WorkerId> {
    (1u32..10_000).prop_map(|id| WorkerId::new(id).unwrap())
}

fn event_strategy() -> impl Strategy<Value = ProvEvent> {
    let sql =
        (worker_strategy(), object_strategy(), 0usize..3).prop_map(|(worker, object, kind)| {
            match kind {
                0 => ProvEvent::SqlRead { worker, object },
                1 => ProvEvent::SqlUsed { worker, object },
                _ => ProvEvent::SqlWasGeneratedBy { worker, object },
            }
        });
    let unit = (
        worker_strategy(),
        any::<[u8; 16]>(),
        any::<u32>(),
        1u16..u16::MAX,
        any::<bool>(),
    )
        .prop_map(|(worker, uuid_bytes, ip, port, start)| {
            let uuid = uuid::Builder::from_random_bytes(uuid_bytes).into_uuid();
            if start {
                let addr = std::net::SocketAddrV4::new(std::net::Ipv4Addr::from(ip), port);
                ProvEvent::UnitStart {
                    worker,
                    uuid,
                    remote_addr: addr,
                }
            } else {
                ProvEvent::UnitEnd { worker, uuid }
            }
        });
    // Raw parse-failure payloads may contain tabs, newlines, and non-ASCII.
    let failure = (worker_strategy(), "[ -~\t\n\u{80}-\u{10ffff}]{0,64}")
        .prop_map(|(worker, raw)| ProvEvent::ParseFailure { worker, raw });
    let impact =
        (worker_strategy(), any::<u32>(), any::<u32>()).prop_map(|(worker, rows, bytes)| {
            ProvEvent::ResponseImpact {
                worker,
                rows: rows as u64,
                bytes: bytes as u64,
            }
        });
    prop_oneof![sql, unit, failure, impact]
}

proptest! {
    #[test]
    fn round_trip_identity(event in event_strategy()) {
        let frame = encode_event(&event).unwrap();
        let (decoded, consumed) = decode_event(&frame).unwrap();
        prop_assert_eq!(consumed, frame.len());
        prop_assert_eq!(decoded, event);
    }

    #[test]
    fn framing_survives_arbitrary_chunking(
        events in proptest::collection::vec(event_strategy(), 1..20),
        chunk in 1usize..7,
    ) {
        let mut stream = Vec::new();
        for event in &events {
            stream.extend_from_slice(&encode_event(event).unwrap());
        }
        let mut reader = FrameReader::new();
        let mut decoded = Vec::new();
        for piece in stream.chunks(chunk) {
            reader.extend(piece);
            while let Some(event) = reader.next_event().unwrap() {
                decoded.push(event);
            }
        }
        prop_assert_eq!(decoded, events);
        prop_assert_eq!(reader.buffered(), 0);
    }
}

/// The deterministic generator corpus also round-trips; this is the same
/// generator the acceptance suite runs at volume.
#[test]
fn generated_corpus_round_trips() {
    let mut rng = Rng::new(0xfeed_beef);
    for _ in 0..1500 {
        let event = random_event(&mut rng);
        let frame = encode_event(&event).unwrap();
        let (decoded, consumed) = decode_event(&frame).unwrap();
        assert_eq!(consumed, frame.len());
        assert_eq!(decoded, event);
    }
}
