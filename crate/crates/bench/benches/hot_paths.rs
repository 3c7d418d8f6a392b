//! Microbenchmarks for the per-statement hot paths: parse + extract, wire
//! round trips, recorder ingest with garbage collection, ancestry queries,
//! and policy evaluation.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use provtap_bench::{schema, unit_events, worker, STATEMENTS};
use provtap_core::guard::{evaluate, parse_policy};
use provtap_core::recorder::{GcVerdict, ProvGraph};
use provtap_core::sql::{extract, parse, to_events};
use provtap_core::wire::{decode_event, encode_event};

fn bench_parse_extract(c: &mut Criterion) {
    let schema = schema();
    let worker = worker();
    c.bench_function("parse_extract_events", |b| {
        let mut i = 0;
        b.iter(|| {
            let sql = STATEMENTS[i % STATEMENTS.len()];
            i += 1;
            let statement = parse(black_box(sql)).unwrap();
            let extraction = extract(&statement, &schema).unwrap();
            black_box(to_events(&extraction, worker))
        });
    });
}

fn bench_wire(c: &mut Criterion) {
    let events = unit_events(worker(), uuid::Uuid::new_v4());
    c.bench_function("wire_encode_decode", |b| {
        let mut i = 0;
        b.iter(|| {
            let event = &events[i % events.len()];
            i += 1;
            let frame = encode_event(black_box(event)).unwrap();
            black_box(decode_event(&frame).unwrap())
        });
    });
}

fn bench_recorder(c: &mut Criterion) {
    c.bench_function("recorder_unit_ingest_and_gc", |b| {
        let worker = worker();
        let mut graph = ProvGraph::new();
        b.iter(|| {
            let uuid = uuid::Uuid::new_v4();
            for event in unit_events(worker, uuid) {
                graph.ingest(&event).unwrap();
            }
            graph.gc_unit(uuid, GcVerdict::Allowed).unwrap();
            black_box(graph.node_count())
        });
    });

    c.bench_function("recorder_ancestry_query", |b| {
        let worker = worker();
        let mut graph = ProvGraph::new();
        let uuid = uuid::Uuid::new_v4();
        for event in unit_events(worker, uuid) {
            graph.ingest(&event).unwrap();
        }
        b.iter(|| black_box(graph.ancestry(worker).unwrap()));
    });
}

fn bench_policy(c: &mut Criterion) {
    let policy = parse_policy(
        "DENY [customers.password] SIZE=0\n\
         DENY [customers.creditcard, orders.creditcard] SIZE=0\n\
         DENY [orders] SIZE=4096\n\
         DEFAULT ALLOW\n",
    )
    .unwrap();
    let mut graph = ProvGraph::new();
    let uuid = uuid::Uuid::new_v4();
    for event in unit_events(worker(), uuid) {
        graph.ingest(&event).unwrap();
    }
    let ancestry = graph.ancestry_of(uuid).unwrap();
    c.bench_function("policy_evaluate", |b| {
        b.iter(|| black_box(evaluate(&policy, black_box(&ancestry))));
    });
}

criterion_group!(
    benches,
    bench_parse_extract,
    bench_wire,
    bench_recorder,
    bench_policy
);
criterion_main!(benches);
