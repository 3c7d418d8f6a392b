//! Recorder properties over randomized ingest sequences: acyclicity,
//! version monotonicity, GC soundness, and storage boundedness.

use std::collections::HashMap;

use provtap_core::model::{ProvEvent, SqlObject};
use provtap_core::recorder::{GcVerdict, NodeIdentity, ProvGraph, RecorderError};
use provtap_core::testkit::{graph_is_acyclic, random_ingest_sequence, Rng};
use uuid::Uuid;

#[test]
fn acyclicity_and_version_monotonicity_over_random_sequences() {
    let mut rng = Rng::new(0xabcd_0001);
    for round in 0..120 {
        let events = random_ingest_sequence(&mut rng, 120);
        let mut graph = ProvGraph::new();
        // Versions observed per object must climb 0,1,2,... with no gaps.
        let mut seen_versions: HashMap<SqlObject, u32> = HashMap::new();
        for event in &events {
            let result = graph.ingest(event);
            if let Err(e) = &result {
                assert!(
                    matches!(
                        e,
                        RecorderError::OrphanEvent { .. }
                            | RecorderError::UnknownUnit(_)
                            | RecorderError::DuplicateUnit(_)
                    ),
                    "round {round}: unexpected ingest error {e}"
                );
            }
            match event {
                ProvEvent::SqlWasGeneratedBy { object, .. } => {
                    let version = graph
                        .latest_version_of(object)
                        .expect("write created a version");
                    match seen_versions.insert(object.clone(), version) {
                        // First touch via a write starts at v0.
                        None => assert_eq!(version, 0, "round {round}: first write must be v0"),
                        Some(p) => {
                            assert_eq!(version, p + 1, "round {round}: version gap on {object}")
                        }
                    }
                }
                ProvEvent::SqlRead { object, .. } | ProvEvent::SqlUsed { object, .. } => {
                    // Reads link to the newest version, creating v0 only for
                    // objects never seen before.
                    let version = graph.latest_version_of(object).expect("read created v0");
                    match seen_versions.insert(object.clone(), version) {
                        None => assert_eq!(version, 0, "round {round}: first read must be v0"),
                        Some(p) => assert_eq!(version, p, "round {round}: read bumped a version"),
                    }
                }
                _ => {}
            }
            assert!(
                graph_is_acyclic(&graph),
                "round {round}: cycle after {event:?}"
            );
        }
        // Cross-check the latest-version index against the node set.
        let mut max_in_graph: HashMap<SqlObject, u32> = HashMap::new();
        for node in graph.nodes() {
            if let NodeIdentity::SqlEntity { object, version } = &node.identity {
                let entry = max_in_graph.entry(object.clone()).or_insert(*version);
                *entry = (*entry).max(*version);
            }
        }
        for (object, max_version) in max_in_graph {
            assert_eq!(
                graph.latest_version_of(&object),
                Some(max_version),
                "latest-version index diverges for {object}"
            );
        }
    }
}

#[test]
fn gc_soundness_under_random_interleavings() {
    let mut rng = Rng::new(0xabcd_0002);
    for _ in 0..60 {
        let events = random_ingest_sequence(&mut rng, 150);
        let mut graph = ProvGraph::new();
        for event in &events {
            let _ = graph.ingest(event);
        }
        // Close every open unit so all are collectable.
        let open: Vec<(Uuid, u32)> = graph
            .units()
            .filter(|u| u.is_open())
            .filter_map(|u| u.unit.as_ref().map(|unit| (unit.uuid, unit.worker.get())))
            .collect();
        for (uuid, worker) in open {
            graph
                .ingest(&ProvEvent::UnitEnd {
                    worker: provtap_core::model::WorkerId::new(worker).unwrap(),
                    uuid,
                })
                .unwrap();
        }
        let uuids: Vec<Uuid> = graph
            .units()
            .filter_map(|u| u.unit.as_ref().map(|unit| unit.uuid))
            .collect();
        if uuids.len() < 2 {
            continue;
        }
        let victim = uuids[rng.below(uuids.len())];
        let survivors: Vec<Uuid> = uuids.iter().copied().filter(|u| *u != victim).collect();
        let before: Vec<_> = survivors
            .iter()
            .map(|u| graph.ancestry_of(*u).unwrap())
            .collect();
        graph.gc_unit(victim, GcVerdict::Allowed).unwrap();
        let after: Vec<_> = survivors
            .iter()
            .map(|u| graph.ancestry_of(*u).unwrap())
            .collect();
        assert_eq!(
            before, after,
            "collecting one unit changed another unit's ancestry"
        );
        assert!(graph_is_acyclic(&graph));
    }
}

/// With continuous GC the graph footprint stays bounded by the active set
/// plus shared vocabulary; without GC it grows with every unit.
#[test]
fn storage_stays_bounded_only_with_gc() {
    let make_unit_events = |worker: u32, uuid: Uuid, salt: u64| -> Vec<ProvEvent> {
        let worker = provtap_core::model::WorkerId::new(worker).unwrap();
        let addr = format!("10.0.0.{}:40000", (salt % 8) + 1).parse().unwrap();
        vec![
            ProvEvent::UnitStart {
                worker,
                uuid,
                remote_addr: addr,
            },
            ProvEvent::SqlRead {
                worker,
                object: SqlObject::column("products", "title").unwrap(),
            },
            ProvEvent::SqlUsed {
                worker,
                object: SqlObject::column("products", "price").unwrap(),
            },
            ProvEvent::ResponseImpact {
                worker,
                rows: 3,
                bytes: 90,
            },
            ProvEvent::UnitEnd { worker, uuid },
        ]
    };

    let mut with_gc = ProvGraph::new();
    let mut without_gc = ProvGraph::new();
    let mut peak_with_gc = 0u64;
    for i in 0..500u64 {
        let uuid_a = Uuid::new_v4();
        for event in make_unit_events(1 + (i % 4) as u32, uuid_a, i) {
            with_gc.ingest(&event).unwrap();
        }
        with_gc.gc_unit(uuid_a, GcVerdict::Allowed).unwrap();
        peak_with_gc = peak_with_gc.max(with_gc.node_count() + with_gc.edge_count());

        let uuid_b = Uuid::new_v4();
        for event in make_unit_events(1 + (i % 4) as u32, uuid_b, i) {
            without_gc.ingest(&event).unwrap();
        }
    }
    let final_with_gc = with_gc.node_count() + with_gc.edge_count();
    let final_without_gc = without_gc.node_count() + without_gc.edge_count();
    // Collected: a handful of persistent nodes. Uncollected: grows with
    // every one of the 500 units.
    assert!(
        final_with_gc < 40,
        "gc footprint unexpectedly large: {final_with_gc}"
    );
    assert!(
        peak_with_gc < 60,
        "gc peak unexpectedly large: {peak_with_gc}"
    );
    assert!(
        final_without_gc > final_with_gc * 20,
        "no-gc footprint {final_without_gc} vs gc {final_with_gc}"
    );
}
