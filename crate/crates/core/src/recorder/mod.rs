//! Provenance recorder: aggregates events from all capture agents into one
//! versioned, acyclic in-memory graph; answers ancestry queries; performs
//! unit-scoped garbage collection with an append-only quarantine log.

pub mod client;
pub mod graph;
pub mod protocol;
pub mod quarantine;
pub mod server;

pub use client::{ClientError, RecorderClient};
pub use graph::{
    AccessKind, AncestrySummary, AuditReport, GcOutcome, GcVerdict, NodeIdentity, ProvEdge,
    ProvGraph, ProvNode, RecorderError, Relation, UnitInfo, UseFlag,
};
pub use protocol::StatsSnapshot;
pub use quarantine::{read_quarantine, replay_quarantine, QuarantineError, QuarantineLog};
pub use server::{serve, RecorderOptions, RecorderServer};

#[cfg(test)]
mod tests {
    use std::net::SocketAddrV4;

    use uuid::Uuid;

    use super::graph::*;
    use crate::model::{ProvEvent, SqlObject, WorkerId};

    fn w(id: u32) -> WorkerId {
        WorkerId::new(id).unwrap()
    }

    fn addr() -> SocketAddrV4 {
        "10.0.0.5:51332".parse().unwrap()
    }

    fn obj(spec: &str) -> SqlObject {
        SqlObject::parse(spec).unwrap()
    }

    fn start(graph: &mut ProvGraph, worker: u32) -> Uuid {
        let uuid = Uuid::new_v4();
        graph
            .ingest(&ProvEvent::UnitStart {
                worker: w(worker),
                uuid,
                remote_addr: addr(),
            })
            .unwrap();
        uuid
    }

    fn end(graph: &mut ProvGraph, worker: u32, uuid: Uuid) {
        graph
            .ingest(&ProvEvent::UnitEnd {
                worker: w(worker),
                uuid,
            })
            .unwrap();
    }

    /// The five events of a SELECT over four columns plus the table, as the
    /// capture agent emits them for one statement.
    fn select_events(worker: u32) -> Vec<ProvEvent> {
        let mut events = Vec::new();
        for spec in [
            "employees",
            "employees.employee_id",
            "employees.firstname",
            "employees.lastname",
        ] {
            events.push(ProvEvent::SqlRead {
                worker: w(worker),
                object: obj(spec),
            });
        }
        events.push(ProvEvent::SqlUsed {
            worker: w(worker),
            object: obj("employees.salary"),
        });
        events
    }

    fn is_acyclic(graph: &ProvGraph) -> bool {
        crate::testkit::graph_is_acyclic(graph)
    }

    #[test]
    fn one_session_builds_expected_shape() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 41);
        for event in select_events(41) {
            graph.ingest(&event).unwrap();
        }
        end(&mut graph, 41, uuid);

        // 1 unit + 1 worker + 1 host + 5 version-0 entities.
        assert_eq!(graph.node_count(), 8);
        // 5 used edges (4 read-flagged, 1 used-flagged) + assoc + started.
        assert_eq!(graph.edge_count(), 7);
        let read_edges = graph
            .edges()
            .filter(|e| e.relation == Relation::Used(UseFlag::Read))
            .count();
        let used_edges = graph
            .edges()
            .filter(|e| e.relation == Relation::Used(UseFlag::Used))
            .count();
        assert_eq!((read_edges, used_edges), (4, 1));
        assert!(is_acyclic(&graph));
    }

    #[test]
    fn writes_version_and_reads_link_to_newest() {
        let mut graph = ProvGraph::new();
        let writer_unit = start(&mut graph, 1);
        let salary = obj("employees.salary");
        graph
            .ingest(&ProvEvent::SqlWasGeneratedBy {
                worker: w(1),
                object: salary.clone(),
            })
            .unwrap();
        graph
            .ingest(&ProvEvent::SqlWasGeneratedBy {
                worker: w(1),
                object: salary.clone(),
            })
            .unwrap();
        assert_eq!(graph.latest_version_of(&salary), Some(1));
        end(&mut graph, 1, writer_unit);

        let reader_unit = start(&mut graph, 2);
        graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(2),
                object: salary.clone(),
            })
            .unwrap();
        let reader_node = graph.unit(reader_unit).unwrap().node;
        let linked_versions: Vec<u32> = graph
            .edges()
            .filter(|e| e.src == reader_node && matches!(e.relation, Relation::Used(_)))
            .filter_map(|e| {
                graph
                    .nodes()
                    .find(|n| n.id == e.dst)
                    .and_then(|n| match &n.identity {
                        NodeIdentity::SqlEntity { version, .. } => Some(*version),
                        _ => None,
                    })
            })
            .collect();
        assert_eq!(linked_versions, vec![1]);
        assert!(is_acyclic(&graph));
    }

    #[test]
    fn version_numbers_observed_have_no_gaps() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 1);
        let salary = obj("employees.salary");
        for expected in 0..5u32 {
            graph
                .ingest(&ProvEvent::SqlWasGeneratedBy {
                    worker: w(1),
                    object: salary.clone(),
                })
                .unwrap();
            assert_eq!(graph.latest_version_of(&salary), Some(expected));
        }
        end(&mut graph, 1, uuid);
    }

    #[test]
    fn same_unit_read_after_write_stays_acyclic_and_visible() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 1);
        let salary = obj("employees.salary");
        graph
            .ingest(&ProvEvent::SqlWasGeneratedBy {
                worker: w(1),
                object: salary.clone(),
            })
            .unwrap();
        graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(1),
                object: salary.clone(),
            })
            .unwrap();
        assert!(is_acyclic(&graph));
        // The policy-facing access set still records the read.
        let summary = graph.ancestry_of(uuid).unwrap();
        assert!(summary
            .ancestors
            .contains(&(salary.clone(), AccessKind::Read)));
        assert!(summary.ancestors.contains(&(salary, AccessKind::Wrote)));
        assert!(graph.counters().cycle_avoided_links > 0);
    }

    #[test]
    fn orphan_sql_event_is_quarantined_and_reported() {
        let mut graph = ProvGraph::new();
        let err = graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(9),
                object: obj("employees.salary"),
            })
            .unwrap_err();
        assert!(matches!(err, RecorderError::OrphanEvent { .. }));
        assert_eq!(graph.counters().orphan_events, 1);
        // Stored under the synthetic unit for forensics.
        let synthetic = graph.unit(Uuid::nil()).unwrap();
        assert_eq!(synthetic.events.len(), 1);
    }

    #[test]
    fn unit_end_for_unknown_unit_errors() {
        let mut graph = ProvGraph::new();
        let err = graph
            .ingest(&ProvEvent::UnitEnd {
                worker: w(1),
                uuid: Uuid::new_v4(),
            })
            .unwrap_err();
        assert!(matches!(err, RecorderError::UnknownUnit(_)));
    }

    #[test]
    fn second_open_unit_per_worker_is_rejected() {
        let mut graph = ProvGraph::new();
        let _first = start(&mut graph, 1);
        let err = graph
            .ingest(&ProvEvent::UnitStart {
                worker: w(1),
                uuid: Uuid::new_v4(),
                remote_addr: addr(),
            })
            .unwrap_err();
        assert!(matches!(err, RecorderError::UnitAlreadyOpen { .. }));
    }

    #[test]
    fn ancestry_after_session_lists_flagged_objects() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 41);
        for event in select_events(41) {
            graph.ingest(&event).unwrap();
        }
        end(&mut graph, 41, uuid);
        let summary = graph.ancestry(w(41)).unwrap();
        assert_eq!(summary.uuid, uuid);
        assert_eq!(summary.remote_addr, addr());
        let rendered: Vec<String> = summary
            .ancestors
            .iter()
            .map(|(o, k)| format!("{o}:{}", k.as_str()))
            .collect();
        assert_eq!(
            rendered,
            [
                "employees:read",
                "employees.employee_id:read",
                "employees.firstname:read",
                "employees.lastname:read",
                "employees.salary:used"
            ]
        );
        assert!(!summary.tainted);
    }

    #[test]
    fn fresh_unit_has_empty_ancestry() {
        let mut graph = ProvGraph::new();
        let _uuid = start(&mut graph, 3);
        let summary = graph.ancestry(w(3)).unwrap();
        assert!(summary.ancestors.is_empty());
        assert_eq!(summary.impact_bytes, 0);
    }

    #[test]
    fn no_active_unit_errors() {
        let graph = ProvGraph::new();
        assert!(matches!(
            graph.ancestry(w(5)),
            Err(RecorderError::NoActiveUnit(_))
        ));
    }

    #[test]
    fn parse_failure_taints_unit() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 2);
        graph
            .ingest(&ProvEvent::ParseFailure {
                worker: w(2),
                raw: "'); DROP TABLE--".into(),
            })
            .unwrap();
        assert!(graph.ancestry_of(uuid).unwrap().tainted);
    }

    #[test]
    fn impact_accumulates() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 2);
        graph
            .ingest(&ProvEvent::ResponseImpact {
                worker: w(2),
                rows: 3,
                bytes: 120,
            })
            .unwrap();
        graph
            .ingest(&ProvEvent::ResponseImpact {
                worker: w(2),
                rows: 1,
                bytes: 30,
            })
            .unwrap();
        assert_eq!(graph.ancestry_of(uuid).unwrap().impact_bytes, 150);
    }

    #[test]
    fn gc_allowed_returns_to_persistent_baseline() {
        let mut graph = ProvGraph::new();
        let warmup = start(&mut graph, 41);
        for event in select_events(41) {
            graph.ingest(&event).unwrap();
        }
        end(&mut graph, 41, warmup);
        graph.gc_unit(warmup, GcVerdict::Allowed).unwrap();
        let baseline_nodes = graph.node_count();
        let baseline_edges = graph.edge_count();

        let uuid = start(&mut graph, 41);
        for event in select_events(41) {
            graph.ingest(&event).unwrap();
        }
        end(&mut graph, 41, uuid);
        assert!(graph.node_count() > baseline_nodes);
        graph.gc_unit(uuid, GcVerdict::Allowed).unwrap();
        // Persistent vocabulary (worker, host, shared version-0 entities)
        // survives; everything unit-scoped is gone.
        assert_eq!(graph.node_count(), baseline_nodes);
        assert_eq!(graph.edge_count(), baseline_edges);
        assert_eq!(graph.edge_count(), 0);
    }

    #[test]
    fn gc_on_open_unit_fails() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 1);
        assert!(matches!(
            graph.gc_unit(uuid, GcVerdict::Allowed),
            Err(RecorderError::UnitStillOpen(_))
        ));
    }

    #[test]
    fn gc_unknown_unit_fails() {
        let mut graph = ProvGraph::new();
        assert!(matches!(
            graph.gc_unit(Uuid::new_v4(), GcVerdict::Allowed),
            Err(RecorderError::UnknownUnit(_))
        ));
    }

    #[test]
    fn deferred_verdict_applies_at_unit_end() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 1);
        assert_eq!(
            graph.request_gc(uuid, GcVerdict::Allowed).unwrap(),
            GcOutcome::Deferred
        );
        assert!(graph.has_unit(uuid));
        end(&mut graph, 1, uuid);
        assert!(!graph.has_unit(uuid));
        assert_eq!(graph.counters().units_gcd, 1);
    }

    #[test]
    fn suspicious_gc_writes_replayable_quarantine_record() {
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("quarantine.log");
        let mut graph = ProvGraph::with_quarantine(&log_path).unwrap();
        let uuid = start(&mut graph, 41);
        for event in select_events(41) {
            graph.ingest(&event).unwrap();
        }
        graph
            .ingest(&ProvEvent::ParseFailure {
                worker: w(41),
                raw: "' OR 1=1--".into(),
            })
            .unwrap();
        end(&mut graph, 41, uuid);
        graph.gc_unit(uuid, GcVerdict::Suspicious).unwrap();
        assert!(!graph.has_unit(uuid));

        let events = super::read_quarantine(&log_path).unwrap();
        assert!(matches!(events.first(), Some(ProvEvent::UnitStart { uuid: u, .. }) if *u == uuid));
        assert!(matches!(events.last(), Some(ProvEvent::UnitEnd { .. })));
        let replayed = super::replay_quarantine(&log_path).unwrap();
        assert!(replayed.has_unit(uuid));
        let summary = replayed.ancestry_of(uuid).unwrap();
        assert!(summary.tainted);
        assert_eq!(summary.remote_addr, addr());
        assert_eq!(summary.ancestors.len(), 5);
    }

    #[test]
    fn gc_of_one_unit_leaves_other_ancestries_unchanged() {
        let mut graph = ProvGraph::new();
        let a = start(&mut graph, 1);
        graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(1),
                object: obj("orders.total"),
            })
            .unwrap();
        let b = start(&mut graph, 2);
        graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(2),
                object: obj("orders.total"),
            })
            .unwrap();
        graph
            .ingest(&ProvEvent::SqlWasGeneratedBy {
                worker: w(2),
                object: obj("orders.total"),
            })
            .unwrap();
        end(&mut graph, 1, a);
        let before = graph.ancestry_of(b).unwrap();
        graph.gc_unit(a, GcVerdict::Allowed).unwrap();
        assert_eq!(graph.ancestry_of(b).unwrap(), before);
        assert!(is_acyclic(&graph));
    }

    #[test]
    fn export_dot_empty_graph() {
        let graph = ProvGraph::new();
        let dot = graph.export_dot(None);
        assert_eq!(dot, "digraph prov {\n}\n");
    }

    #[test]
    fn export_dot_session_has_eight_nodes() {
        let mut graph = ProvGraph::new();
        let uuid = start(&mut graph, 41);
        for event in select_events(41) {
            graph.ingest(&event).unwrap();
        }
        end(&mut graph, 41, uuid);
        let dot = graph.export_dot(None);
        let node_lines = dot
            .lines()
            .filter(|l| l.contains("[label=") && !l.contains("->"))
            .count();
        assert_eq!(node_lines, 8);
        // Deterministic output.
        assert_eq!(dot, graph.export_dot(None));
    }

    #[test]
    fn export_dot_unknown_filter_is_empty() {
        let mut graph = ProvGraph::new();
        let _uuid = start(&mut graph, 1);
        let dot = graph.export_dot(Some(Uuid::new_v4()));
        assert_eq!(dot, "digraph prov {\n}\n");
    }

    #[test]
    fn export_dot_filter_selects_unit_subgraph() {
        let mut graph = ProvGraph::new();
        let a = start(&mut graph, 1);
        graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(1),
                object: obj("orders.total"),
            })
            .unwrap();
        end(&mut graph, 1, a);
        let b = start(&mut graph, 2);
        graph
            .ingest(&ProvEvent::SqlRead {
                worker: w(2),
                object: obj("customers.name"),
            })
            .unwrap();
        end(&mut graph, 2, b);
        let dot = graph.export_dot(Some(a));
        assert!(dot.contains("orders.total"));
        assert!(!dot.contains("customers.name"));
    }

    #[test]
    fn audit_attributes_all_events() {
        let mut graph = ProvGraph::new();
        for worker in 1..=3u32 {
            let uuid = start(&mut graph, worker);
            for event in select_events(worker) {
                graph.ingest(&event).unwrap();
            }
            end(&mut graph, worker, uuid);
        }
        let audit = graph.audit();
        assert_eq!(audit.sql_events_total, 15);
        assert_eq!(audit.attributed_retained, 15);
        assert_eq!(audit.orphan_events, 0);
        assert_eq!(audit.misattributed, 0);
    }
}
