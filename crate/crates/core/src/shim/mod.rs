//! Simulated pre-forked worker pool: stands in for the instrumented web
//! server. Each worker handles one request at a time, brackets it with
//! UNIT_START / UNIT_END, issues the request's SQL over a persistent
//! database connection (deliberately reused across units, reproducing the
//! multiplexing hazard partitioning exists to solve), and emits its
//! response through the guard-facing listener.

use std::io::{BufReader, Read, Write};
use std::net::SocketAddrV4;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::metrics::{record, MetricsSink, Stage};
use crate::model::{ProvEvent, WorkerId};
use crate::net::{bind, connect, Endpoint, IoStream};
use crate::proxy::protocol::{handshake_line, line_text, parse_status, read_line, DbStatus};
use crate::recorder::RecorderClient;

/// One simulated client request: where it (nominally) came from and the SQL
/// its handler issues. An empty script models a static request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRequest {
    pub remote_addr: SocketAddrV4,
    #[serde(default)]
    pub script: Vec<String>,
}

/// Response preamble line: `FROM-WORKER <id> <uuid>\n`. The guard strips it.
pub fn preamble_line(worker: u32, uuid: Uuid) -> String {
    format!("FROM-WORKER {worker} {uuid}\n")
}

pub fn parse_preamble(text: &str) -> Option<(u32, Uuid)> {
    let rest = text.strip_prefix("FROM-WORKER ")?;
    let (worker, uuid) = rest.split_once(' ')?;
    Some((
        worker.trim().parse().ok()?,
        Uuid::parse_str(uuid.trim()).ok()?,
    ))
}

#[derive(Clone)]
pub struct ShimConfig {
    /// Listener the guard forwards requests to.
    pub listen: Endpoint,
    pub workers: usize,
    pub recorder: Option<Endpoint>,
    /// The database endpoint (normally the capture proxy).
    pub db: Option<Endpoint>,
    pub metrics: Option<MetricsSink>,
}

pub struct ShimServer {
    endpoint: Endpoint,
    shutdown: Arc<AtomicBool>,
    accept_handle: JoinHandle<()>,
    worker_handles: Vec<JoinHandle<()>>,
}

impl ShimServer {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = connect(&self.endpoint);
        let _ = self.accept_handle.join();
        for handle in self.worker_handles {
            let _ = handle.join();
        }
    }
}

type Job = (IoStream, SimRequest);

pub fn serve(config: ShimConfig) -> std::io::Result<ShimServer> {
    assert!(config.workers >= 1, "pool needs at least one worker");
    let listener = bind(&config.listen)?;
    let endpoint = listener.local_endpoint()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<Job>();
    let rx = Arc::new(Mutex::new(rx));

    let mut worker_handles = Vec::new();
    for id in 1..=config.workers {
        let worker = WorkerId::new(id as u32).expect("ids start at 1");
        let rx = Arc::clone(&rx);
        let config = config.clone();
        worker_handles.push(
            std::thread::Builder::new()
                .name(format!("shim-worker-{id}"))
                .spawn(move || worker_loop(worker, rx, config))?,
        );
    }

    let accept_shutdown = Arc::clone(&shutdown);
    let accept_handle = std::thread::Builder::new()
        .name("shim-accept".into())
        .spawn(move || {
            loop {
                let conn = match listener.accept() {
                    Ok(conn) => conn,
                    Err(_) => break,
                };
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                // One request per connection.
                let mut reader = BufReader::new(match conn.try_clone() {
                    Ok(c) => c,
                    Err(_) => continue,
                });
                let line = match read_line(&mut reader) {
                    Ok(Some(line)) => line,
                    _ => continue,
                };
                match serde_json::from_str::<SimRequest>(&line_text(&line)) {
                    Ok(request) => {
                        if tx.send((conn, request)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        // No worker, no unit: answer with an unattributable
                        // preamble the guard will fail closed on.
                        let mut writer = conn;
                        let body = format!("bad request: {e}\n");
                        let _ = writer.write_all(
                            format!(
                                "FROM-WORKER 0 {}\nERR {}\n{}",
                                Uuid::nil(),
                                body.len(),
                                body
                            )
                            .as_bytes(),
                        );
                    }
                }
            }
            // Dropping tx ends the worker loops.
        })?;

    Ok(ShimServer {
        endpoint,
        shutdown,
        accept_handle,
        worker_handles,
    })
}

struct DbConn {
    writer: IoStream,
    reader: BufReader<IoStream>,
}

struct WorkerCtx {
    worker: WorkerId,
    recorder: Option<RecorderClient>,
    db: Option<DbConn>,
    config: ShimConfig,
}

fn worker_loop(worker: WorkerId, rx: Arc<Mutex<mpsc::Receiver<Job>>>, config: ShimConfig) {
    let mut ctx = WorkerCtx {
        worker,
        recorder: None,
        db: None,
        config,
    };
    loop {
        let job = {
            let guard = rx.lock().expect("job queue poisoned");
            guard.recv()
        };
        let Ok((mut conn, request)) = job else { return };
        let response = handle_request(&mut ctx, &request);
        let _ = conn.write_all(&response);
    }
}

impl WorkerCtx {
    fn recorder(&mut self) -> Option<&mut RecorderClient> {
        if self.recorder.is_none() {
            if let Some(endpoint) = &self.config.recorder {
                match RecorderClient::connect(endpoint) {
                    Ok(client) => self.recorder = Some(client),
                    Err(e) => log::warn!("shim: recorder unreachable: {e}"),
                }
            }
        }
        self.recorder.as_mut()
    }

    /// The persistent, handshaken database connection; re-established on
    /// the next unit after a failure, never within one.
    fn db(&mut self) -> Option<&mut DbConn> {
        if self.db.is_none() {
            if let Some(endpoint) = &self.config.db {
                match connect(endpoint) {
                    Ok(stream) => {
                        let mut writer = match stream.try_clone() {
                            Ok(w) => w,
                            Err(_) => return None,
                        };
                        if writer
                            .write_all(handshake_line(self.worker).as_bytes())
                            .is_err()
                        {
                            return None;
                        }
                        self.db = Some(DbConn {
                            writer,
                            reader: BufReader::new(stream),
                        });
                    }
                    Err(e) => log::warn!("shim: db endpoint unreachable: {e}"),
                }
            }
        }
        self.db.as_mut()
    }
}

/// Handles one request on an idle worker: UNIT_START, the script's
/// statements over the proxied connection, UNIT_END (unconditionally, even
/// when the db connection died mid-unit), then the framed response.
fn handle_request(ctx: &mut WorkerCtx, request: &SimRequest) -> Vec<u8> {
    let uuid = Uuid::new_v4();
    let worker = ctx.worker;
    let metrics = ctx.config.metrics.clone();

    if let Some(rec) = ctx.recorder() {
        let started = Instant::now();
        let ok = rec
            .send_event(&ProvEvent::UnitStart {
                worker,
                uuid,
                remote_addr: request.remote_addr,
            })
            .and_then(|_| rec.sync());
        record(
            &metrics,
            Stage::UnitStartSend,
            started.elapsed().as_nanos() as u64,
        );
        if ok.is_err() {
            log::warn!("shim: failed to open unit {uuid}");
            ctx.recorder = None;
        }
    }

    let mut body: Vec<u8> = Vec::new();
    let mut ok = true;
    for statement in &request.script {
        let Some(db) = ctx.db() else {
            body.extend_from_slice(b"ERR db-unavailable\n");
            ok = false;
            break;
        };
        let outcome = issue_statement(db, statement, &mut body);
        match outcome {
            StatementOutcome::Ok => {}
            StatementOutcome::DbError => {
                ok = false;
            }
            StatementOutcome::ConnectionLost => {
                // The proxy cuts the connection on a parse failure; the
                // unit still ends and the response becomes an error page.
                body.extend_from_slice(b"ERR db-connection-lost\n");
                ctx.db = None;
                ok = false;
                break;
            }
        }
    }

    if let Some(rec) = ctx.recorder() {
        let started = Instant::now();
        if rec
            .send_event(&ProvEvent::UnitEnd { worker, uuid })
            .is_err()
        {
            ctx.recorder = None;
        }
        record(
            &metrics,
            Stage::UnitEndSend,
            started.elapsed().as_nanos() as u64,
        );
    }

    let status = if ok { "OK" } else { "ERR" };
    let mut response = preamble_line(worker.get(), uuid).into_bytes();
    response.extend_from_slice(format!("{status} {}\n", body.len()).as_bytes());
    response.extend_from_slice(&body);
    response
}

enum StatementOutcome {
    Ok,
    DbError,
    ConnectionLost,
}

fn issue_statement(db: &mut DbConn, statement: &str, body: &mut Vec<u8>) -> StatementOutcome {
    if db
        .writer
        .write_all(format!("{statement}\n").as_bytes())
        .is_err()
    {
        return StatementOutcome::ConnectionLost;
    }
    let status_line = match read_line(&mut db.reader) {
        Ok(Some(line)) => line,
        _ => return StatementOutcome::ConnectionLost,
    };
    body.extend_from_slice(&status_line);
    match parse_status(&line_text(&status_line)) {
        Some(DbStatus::Ok { bytes, .. }) => {
            let mut payload = vec![0u8; bytes as usize];
            if db.reader.read_exact(&mut payload).is_err() {
                return StatementOutcome::ConnectionLost;
            }
            body.extend_from_slice(&payload);
            StatementOutcome::Ok
        }
        Some(DbStatus::Err) => StatementOutcome::DbError,
        None => StatementOutcome::DbError,
    }
}
