//! Recorder server: a single logical event loop owns the graph; per
//! connection reader threads decode frames and feed it. Mutation is fully
//! serialized through the loop, queries are answered on the same loop, and
//! ordering is guaranteed per connection.

use std::io::Read;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::net::{bind, connect, Endpoint, IoStream};
use crate::wire::{write_frame, FrameReader};

use super::graph::{GcOutcome, ProvGraph};
use super::protocol::{
    encode_ancestry, encode_audit, encode_dot, encode_err, encode_stats, RecorderRequest,
    StatsSnapshot,
};

#[derive(Debug, Default, Clone)]
pub struct RecorderOptions {
    pub quarantine: Option<PathBuf>,
}

enum LoopMsg {
    Event(crate::model::ProvEvent),
    Request(RecorderRequest, mpsc::Sender<String>),
}

pub struct RecorderServer {
    endpoint: Endpoint,
    loop_handle: JoinHandle<ProvGraph>,
    accept_handle: JoinHandle<()>,
    shutdown: Arc<AtomicBool>,
}

impl RecorderServer {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Stops the server and returns the final graph.
    pub fn shutdown(self) -> ProvGraph {
        if let Ok(mut client) = super::client::RecorderClient::connect(&self.endpoint) {
            let _ = client.shutdown();
        } else {
            self.shutdown.store(true, Ordering::SeqCst);
            let _ = connect(&self.endpoint);
        }
        let graph = self.loop_handle.join().expect("recorder loop panicked");
        let _ = self.accept_handle.join();
        graph
    }
}

/// Binds the endpoint and starts the recorder.
pub fn serve(endpoint: &Endpoint, options: RecorderOptions) -> std::io::Result<RecorderServer> {
    let graph = match &options.quarantine {
        Some(path) => ProvGraph::with_quarantine(path)?,
        None => ProvGraph::new(),
    };
    let listener = bind(endpoint)?;
    let endpoint = listener.local_endpoint()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let dropped = Arc::new(AtomicU64::new(0));
    let (tx, rx) = mpsc::channel::<LoopMsg>();

    let loop_endpoint = endpoint.clone();
    let loop_shutdown = Arc::clone(&shutdown);
    let loop_dropped = Arc::clone(&dropped);
    let loop_handle = std::thread::Builder::new()
        .name("recorder-loop".into())
        .spawn(move || event_loop(graph, rx, loop_endpoint, loop_shutdown, loop_dropped))?;

    let accept_shutdown = Arc::clone(&shutdown);
    let accept_dropped = Arc::clone(&dropped);
    let accept_handle = std::thread::Builder::new()
        .name("recorder-accept".into())
        .spawn(move || loop {
            let conn = match listener.accept() {
                Ok(conn) => conn,
                Err(e) => {
                    if accept_shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    log::warn!("recorder accept failed: {e}");
                    continue;
                }
            };
            if accept_shutdown.load(Ordering::SeqCst) {
                break;
            }
            let tx = tx.clone();
            let dropped = Arc::clone(&accept_dropped);
            std::thread::Builder::new()
                .name("recorder-conn".into())
                .spawn(move || connection_loop(conn, tx, dropped))
                .ok();
        })?;

    Ok(RecorderServer {
        endpoint,
        loop_handle,
        accept_handle,
        shutdown,
    })
}

fn connection_loop(mut conn: IoStream, tx: mpsc::Sender<LoopMsg>, dropped: Arc<AtomicU64>) {
    let mut writer = match conn.try_clone() {
        Ok(w) => w,
        Err(_) => {
            dropped.fetch_add(1, Ordering::Relaxed);
            return;
        }
    };
    let mut frames = FrameReader::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = match conn.read(&mut buf) {
            Ok(0) => return,
            Ok(n) => n,
            Err(_) => return,
        };
        frames.extend(&buf[..n]);
        loop {
            let payload = match frames.next_payload() {
                Ok(Some(p)) => p,
                Ok(None) => break,
                Err(e) => {
                    // Malformed frame: drop the connection and count it.
                    log::warn!("recorder: dropping connection on malformed frame: {e}");
                    dropped.fetch_add(1, Ordering::Relaxed);
                    conn.shutdown();
                    return;
                }
            };
            match RecorderRequest::parse(&payload) {
                Ok(RecorderRequest::Event(event)) => {
                    if tx.send(LoopMsg::Event(event)).is_err() {
                        return;
                    }
                }
                Ok(request) => {
                    let (reply_tx, reply_rx) = mpsc::channel();
                    if tx.send(LoopMsg::Request(request, reply_tx)).is_err() {
                        return;
                    }
                    let Ok(reply) = reply_rx.recv() else { return };
                    if write_frame(&mut writer, &reply).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    log::warn!("recorder: dropping connection on bad request: {e}");
                    dropped.fetch_add(1, Ordering::Relaxed);
                    conn.shutdown();
                    return;
                }
            }
        }
    }
}

fn event_loop(
    mut graph: ProvGraph,
    rx: mpsc::Receiver<LoopMsg>,
    endpoint: Endpoint,
    shutdown: Arc<AtomicBool>,
    dropped: Arc<AtomicU64>,
) -> ProvGraph {
    for msg in rx {
        match msg {
            LoopMsg::Event(event) => {
                if let Err(e) = graph.ingest(&event) {
                    log::debug!("recorder: ingest anomaly: {e}");
                }
            }
            LoopMsg::Request(request, reply) => {
                let payload = match request {
                    RecorderRequest::Event(_) => unreachable!("events are not requests"),
                    RecorderRequest::Sync => "OK".to_string(),
                    RecorderRequest::AncestryByWorker(worker) => match graph.ancestry(worker) {
                        Ok(summary) => encode_ancestry(&summary),
                        Err(e) => encode_err(&e.to_string()),
                    },
                    RecorderRequest::AncestryByUnit(uuid) => match graph.ancestry_of(uuid) {
                        Ok(summary) => encode_ancestry(&summary),
                        Err(e) => encode_err(&e.to_string()),
                    },
                    RecorderRequest::GcUnit { uuid, verdict } => {
                        match graph.request_gc(uuid, verdict) {
                            Ok(GcOutcome::Done) => "OK".to_string(),
                            Ok(GcOutcome::Deferred) => "OK".to_string(),
                            Err(e) => encode_err(&e.to_string()),
                        }
                    }
                    RecorderRequest::Stats => {
                        encode_stats(&snapshot(&graph, dropped.load(Ordering::Relaxed)))
                    }
                    RecorderRequest::Audit => encode_audit(&graph.audit()),
                    RecorderRequest::Dot { filter } => {
                        if let Some(uuid) = filter {
                            if !graph.has_unit(uuid) {
                                let _ = reply.send(encode_err(&format!("unknown unit {uuid}")));
                                continue;
                            }
                        }
                        encode_dot(&graph.export_dot(filter))
                    }
                    RecorderRequest::Shutdown => {
                        let _ = reply.send("OK".to_string());
                        shutdown.store(true, Ordering::SeqCst);
                        // Unblock the accept loop.
                        let _ = connect(&endpoint);
                        return graph;
                    }
                };
                let _ = reply.send(payload);
            }
        }
    }
    graph
}

fn snapshot(graph: &ProvGraph, dropped_connections: u64) -> StatsSnapshot {
    let counters = graph.counters();
    StatsSnapshot {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        units_started: counters.units_started,
        units_closed: counters.units_closed,
        units_live: graph.live_units(),
        units_gcd: counters.units_gcd,
        units_quarantined: counters.units_quarantined,
        events_total: counters.events_total,
        sql_events: counters.sql_events,
        orphan_events: counters.orphan_events,
        dropped_connections,
    }
}
