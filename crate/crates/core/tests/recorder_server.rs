//! Socket-level recorder tests: concurrent agents, queries over the same
//! framing, and malformed-frame handling.

use std::io::Write;

use provtap_core::model::{ProvEvent, SqlObject, WorkerId};
use provtap_core::net::{connect, ephemeral_loopback};
use provtap_core::recorder::{serve, GcVerdict, RecorderClient, RecorderOptions};
use uuid::Uuid;

fn w(id: u32) -> WorkerId {
    WorkerId::new(id).unwrap()
}

#[test]
fn agents_stream_events_and_queries_answer_over_sockets() {
    let server = serve(&ephemeral_loopback(), RecorderOptions::default()).unwrap();
    let endpoint = server.endpoint().clone();

    let uuid_a = Uuid::new_v4();
    let mut shim = RecorderClient::connect(&endpoint).unwrap();
    shim.send_event(&ProvEvent::UnitStart {
        worker: w(1),
        uuid: uuid_a,
        remote_addr: "10.0.0.9:55555".parse().unwrap(),
    })
    .unwrap();
    shim.sync().unwrap();

    // A second agent (the proxy) reports SQL for the same worker.
    let mut proxy = RecorderClient::connect(&endpoint).unwrap();
    proxy
        .send_event(&ProvEvent::SqlRead {
            worker: w(1),
            object: SqlObject::column("customers", "password").unwrap(),
        })
        .unwrap();
    proxy
        .send_event(&ProvEvent::ResponseImpact {
            worker: w(1),
            rows: 2,
            bytes: 64,
        })
        .unwrap();
    proxy.sync().unwrap();

    let summary = proxy.ancestry_by_worker(w(1)).unwrap();
    assert_eq!(summary.uuid, uuid_a);
    assert_eq!(summary.impact_bytes, 64);
    assert_eq!(summary.ancestors.len(), 1);

    shim.send_event(&ProvEvent::UnitEnd {
        worker: w(1),
        uuid: uuid_a,
    })
    .unwrap();
    shim.sync().unwrap();

    let by_unit = proxy.ancestry_by_unit(uuid_a).unwrap();
    assert_eq!(by_unit.uuid, uuid_a);

    proxy.gc_unit(uuid_a, GcVerdict::Allowed).unwrap();
    let stats = proxy.stats().unwrap();
    assert_eq!(stats.units_started, 1);
    assert_eq!(stats.units_gcd, 1);
    assert_eq!(stats.sql_events, 1);
    assert_eq!(stats.orphan_events, 0);

    let graph = server.shutdown();
    assert!(!graph.has_unit(uuid_a));
}

#[test]
fn gc_verdict_arriving_before_unit_end_is_deferred() {
    let server = serve(&ephemeral_loopback(), RecorderOptions::default()).unwrap();
    let mut client = RecorderClient::connect(server.endpoint()).unwrap();
    let uuid = Uuid::new_v4();
    client
        .send_event(&ProvEvent::UnitStart {
            worker: w(3),
            uuid,
            remote_addr: "10.1.1.1:1000".parse().unwrap(),
        })
        .unwrap();
    client.sync().unwrap();
    // Guard verdict races ahead of the shim's UNIT_END.
    client.gc_unit(uuid, GcVerdict::Allowed).unwrap();
    let stats = client.stats().unwrap();
    assert_eq!(
        stats.units_gcd, 0,
        "gc must not apply while the unit is open"
    );

    client
        .send_event(&ProvEvent::UnitEnd { worker: w(3), uuid })
        .unwrap();
    client.sync().unwrap();
    let stats = client.stats().unwrap();
    assert_eq!(stats.units_gcd, 1, "deferred verdict applies at close");
    server.shutdown();
}

#[test]
fn malformed_frame_drops_connection_and_counts() {
    let server = serve(&ephemeral_loopback(), RecorderOptions::default()).unwrap();
    let endpoint = server.endpoint().clone();

    let mut bad = connect(&endpoint).unwrap();
    // Declared length over the 1 MiB cap.
    bad.write_all(&(64u32 * 1024 * 1024).to_be_bytes()).unwrap();
    bad.write_all(b"garbage").unwrap();

    // The server still answers well-formed clients.
    let mut good = RecorderClient::connect(&endpoint).unwrap();
    for _ in 0..100 {
        let stats = good.stats().unwrap();
        if stats.dropped_connections == 1 {
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(5));
    }
    assert_eq!(good.stats().unwrap().dropped_connections, 1);
    server.shutdown();
}

#[cfg(unix)]
#[test]
fn recorder_serves_on_unix_socket_paths() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = provtap_core::net::Endpoint::Unix(dir.path().join("recorder.sock"));
    let server = serve(&endpoint, RecorderOptions::default()).unwrap();
    let mut client = RecorderClient::connect(server.endpoint()).unwrap();
    let uuid = Uuid::new_v4();
    client
        .send_event(&ProvEvent::UnitStart {
            worker: w(11),
            uuid,
            remote_addr: "10.2.2.2:3000".parse().unwrap(),
        })
        .unwrap();
    client.sync().unwrap();
    assert_eq!(client.ancestry_by_worker(w(11)).unwrap().uuid, uuid);
    // Rebinding over a stale socket file works.
    server.shutdown();
    let server = serve(&endpoint, RecorderOptions::default()).unwrap();
    assert!(RecorderClient::connect(server.endpoint()).is_ok());
    server.shutdown();
}

#[test]
fn dot_query_rejects_unknown_unit_but_serves_known() {
    let server = serve(&ephemeral_loopback(), RecorderOptions::default()).unwrap();
    let mut client = RecorderClient::connect(server.endpoint()).unwrap();
    let uuid = Uuid::new_v4();
    client
        .send_event(&ProvEvent::UnitStart {
            worker: w(2),
            uuid,
            remote_addr: "10.1.1.2:2000".parse().unwrap(),
        })
        .unwrap();
    client.sync().unwrap();

    let dot = client.dot(Some(uuid)).unwrap();
    assert!(dot.starts_with("digraph prov {"));
    let err = client.dot(Some(Uuid::new_v4())).unwrap_err();
    assert!(err.to_string().contains("unknown unit"));
    let full = client.dot(None).unwrap();
    assert!(full.contains("worker 2"));
    server.shutdown();
}
