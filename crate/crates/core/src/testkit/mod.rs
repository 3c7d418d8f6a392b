//! Test support: deterministic generators and independent oracles.
//!
//! Everything here exists to check the production code from the outside —
//! nothing in this module may be used on a production path.

pub mod genevent;
pub mod genquery;
pub mod oracle;
pub mod rng;

pub use genevent::{random_event, random_ingest_sequence, random_object, random_worker};
pub use genquery::{
    corpus_schema, random_statement, wrap_in_derived, GeneratedStatement, CORPUS_SCHEMA,
};
pub use oracle::{oracle_extract, OracleExtraction};
pub use rng::Rng;

use std::collections::HashMap;

use crate::recorder::graph::{NodeId, ProvGraph};

/// Kahn's algorithm over the graph's node/edge iterators: true when a
/// complete topological order exists.
pub fn graph_is_acyclic(graph: &ProvGraph) -> bool {
    let mut indegree: HashMap<NodeId, usize> = graph.nodes().map(|n| (n.id, 0)).collect();
    let mut adjacency: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for edge in graph.edges() {
        *indegree.entry(edge.dst).or_insert(0) += 1;
        adjacency.entry(edge.src).or_default().push(edge.dst);
    }
    let mut queue: Vec<NodeId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut visited = 0usize;
    while let Some(node) = queue.pop() {
        visited += 1;
        for next in adjacency.get(&node).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("edge endpoints are nodes");
            *d -= 1;
            if *d == 0 {
                queue.push(*next);
            }
        }
    }
    visited == indegree.len()
}
