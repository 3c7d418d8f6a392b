//! The egress proxy. Inbound traffic relays untouched; each outbound
//! response is held until the sending unit's ancestry has been fetched from
//! the recorder and evaluated against policy. Denied responses are replaced
//! wholesale, and every decision is fed back as a garbage-collection
//! verdict. A failed ancestry query fails closed.

use std::io::{BufReader, Read, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use uuid::Uuid;

use crate::net::{bind, connect, Endpoint, IoStream};
use crate::proxy::protocol::{line_text, read_line};
use crate::recorder::{GcVerdict, RecorderClient};
use crate::shim::parse_preamble;

use super::policy::{evaluate, Policy, Verdict};

/// The fixed body sent in place of a denied response.
pub const BLOCKED_BODY: &[u8] = b"403 blocked by provenance policy\n";

/// The full framed replacement response.
pub fn blocked_response() -> Vec<u8> {
    let mut out = format!("ERR {}\n", BLOCKED_BODY.len()).into_bytes();
    out.extend_from_slice(BLOCKED_BODY);
    out
}

#[derive(Clone)]
pub struct GuardConfig {
    pub listen: Endpoint,
    /// The worker shim.
    pub upstream: Endpoint,
    pub recorder: Endpoint,
    pub policy: Policy,
    /// Disabled for the storage-growth comparison experiment.
    pub gc_enabled: bool,
}

#[derive(Debug, Default)]
pub struct GuardStats {
    pub allowed: AtomicU64,
    pub denied: AtomicU64,
    pub failed_closed: AtomicU64,
    pub gc_sent: AtomicU64,
}

/// One persistent recorder connection shared by all guard threads; queries
/// are synchronous per response and the recorder serializes them anyway.
struct SharedRecorder {
    endpoint: Endpoint,
    client: std::sync::Mutex<Option<RecorderClient>>,
}

impl SharedRecorder {
    fn new(endpoint: Endpoint) -> Self {
        SharedRecorder {
            endpoint,
            client: std::sync::Mutex::new(None),
        }
    }

    fn with<T>(
        &self,
        op: impl Fn(&mut RecorderClient) -> Result<T, crate::recorder::ClientError>,
    ) -> Result<T, crate::recorder::ClientError> {
        let mut slot = self.client.lock().expect("recorder slot poisoned");
        if slot.is_none() {
            *slot = Some(RecorderClient::connect(&self.endpoint)?);
        }
        let result = op(slot.as_mut().expect("just connected"));
        if matches!(
            &result,
            Err(crate::recorder::ClientError::Io(_))
                | Err(crate::recorder::ClientError::Protocol(_))
        ) {
            // Drop the broken connection; the next caller reconnects. A
            // remote refusal travels over a healthy connection and keeps it.
            *slot = None;
        }
        result
    }
}

pub struct GuardServer {
    endpoint: Endpoint,
    shutdown: Arc<AtomicBool>,
    handle: JoinHandle<()>,
    stats: Arc<GuardStats>,
}

impl GuardServer {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn stats(&self) -> &GuardStats {
        &self.stats
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = connect(&self.endpoint);
        let _ = self.handle.join();
    }
}

pub fn serve(config: GuardConfig) -> std::io::Result<GuardServer> {
    let listener = bind(&config.listen)?;
    let endpoint = listener.local_endpoint()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let stats = Arc::new(GuardStats::default());
    let accept_shutdown = Arc::clone(&shutdown);
    let accept_stats = Arc::clone(&stats);
    let recorder = Arc::new(SharedRecorder::new(config.recorder.clone()));
    let config = Arc::new(config);
    let handle = std::thread::Builder::new()
        .name("guard-accept".into())
        .spawn(move || loop {
            let conn = match listener.accept() {
                Ok(conn) => conn,
                Err(_) => break,
            };
            if accept_shutdown.load(Ordering::SeqCst) {
                break;
            }
            let config = Arc::clone(&config);
            let stats = Arc::clone(&accept_stats);
            let recorder = Arc::clone(&recorder);
            std::thread::Builder::new()
                .name("guard-conn".into())
                .spawn(move || {
                    if let Err(e) = guard_connection(conn, &config, &recorder, &stats) {
                        log::debug!("guard connection ended: {e}");
                    }
                })
                .ok();
        })?;
    Ok(GuardServer {
        endpoint,
        shutdown,
        handle,
        stats,
    })
}

fn guard_connection(
    client: IoStream,
    config: &GuardConfig,
    recorder: &SharedRecorder,
    stats: &GuardStats,
) -> std::io::Result<()> {
    let mut client_writer = client.try_clone()?;
    let mut client_reader = BufReader::new(client);

    // Inbound: relay the request bytes untouched.
    let Some(request_line) = read_line(&mut client_reader)? else {
        return Ok(());
    };
    let upstream = connect(&config.upstream)?;
    let mut upstream_writer = upstream.try_clone()?;
    let mut upstream_reader = BufReader::new(upstream);
    upstream_writer.write_all(&request_line)?;

    // Outbound: the preamble names the sending worker and unit.
    let Some(preamble) = read_line(&mut upstream_reader)? else {
        log::warn!("guard: upstream closed before responding; failing closed");
        stats.failed_closed.fetch_add(1, Ordering::Relaxed);
        client_writer.write_all(&blocked_response())?;
        return Ok(());
    };
    let identity = parse_preamble(&line_text(&preamble));

    // The rest of the response, verbatim: `OK <len>` / `ERR <len>` then
    // exactly len body bytes.
    let mut response = Vec::new();
    let Some(status_line) = read_line(&mut upstream_reader)? else {
        stats.failed_closed.fetch_add(1, Ordering::Relaxed);
        client_writer.write_all(&blocked_response())?;
        return Ok(());
    };
    response.extend_from_slice(&status_line);
    let body_len = shim_body_len(&line_text(&status_line));
    let mut body = vec![0u8; body_len];
    upstream_reader.read_exact(&mut body)?;
    response.extend_from_slice(&body);

    let Some((worker_raw, uuid)) = identity else {
        log::warn!("guard: response without a parseable preamble; failing closed");
        stats.failed_closed.fetch_add(1, Ordering::Relaxed);
        client_writer.write_all(&blocked_response())?;
        return Ok(());
    };
    if worker_raw == 0 || uuid == Uuid::nil() {
        log::warn!("guard: unattributable response (worker {worker_raw}); failing closed");
        stats.failed_closed.fetch_add(1, Ordering::Relaxed);
        client_writer.write_all(&blocked_response())?;
        return Ok(());
    }

    let verdict = query_and_evaluate(config, recorder, uuid);
    match verdict {
        Some(verdict) if verdict.allowed() => {
            stats.allowed.fetch_add(1, Ordering::Relaxed);
            client_writer.write_all(&response)?;
            send_gc(config, recorder, stats, uuid, GcVerdict::Allowed);
        }
        Some(verdict) => {
            stats.denied.fetch_add(1, Ordering::Relaxed);
            log::info!(
                "guard: denied response of unit {uuid} from {}: {}",
                verdict.ancestry.remote_addr,
                verdict.reason
            );
            client_writer.write_all(&blocked_response())?;
            send_gc(config, recorder, stats, uuid, GcVerdict::Suspicious);
        }
        None => {
            // Recorder unreachable or the unit is unknown: fail closed.
            stats.failed_closed.fetch_add(1, Ordering::Relaxed);
            client_writer.write_all(&blocked_response())?;
        }
    }
    Ok(())
}

fn query_and_evaluate(
    config: &GuardConfig,
    recorder: &SharedRecorder,
    uuid: Uuid,
) -> Option<Verdict> {
    match recorder.with(|client| client.ancestry_by_unit(uuid)) {
        Ok(ancestry) => Some(evaluate(&config.policy, &ancestry)),
        Err(e) => {
            log::warn!("guard: ancestry query failed for {uuid}: {e}");
            None
        }
    }
}

fn send_gc(
    config: &GuardConfig,
    recorder: &SharedRecorder,
    stats: &GuardStats,
    uuid: Uuid,
    verdict: GcVerdict,
) {
    if !config.gc_enabled {
        return;
    }
    match recorder.with(|client| client.gc_unit(uuid, verdict)) {
        Ok(()) => {
            stats.gc_sent.fetch_add(1, Ordering::Relaxed);
        }
        Err(e) => log::warn!("guard: gc notification failed for {uuid}: {e}"),
    }
}

/// Body length from a shim status line `OK <len>` / `ERR <len>`.
fn shim_body_len(status_text: &str) -> usize {
    status_text
        .split_whitespace()
        .nth(1)
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}
