//! The transparent capture proxy: relays application ↔ database traffic
//! byte for byte (minus the one handshake line), extracts SQL provenance on
//! the app→db direction through the isolated extractor, measures response
//! impact on the db→app direction, and reports everything to the recorder.

use std::io::{BufReader, Read, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use crate::metrics::{record, MetricsSink, Stage};
use crate::model::ProvEvent;
use crate::net::{bind, connect, Endpoint, IoStream};
use crate::recorder::RecorderClient;

use super::extractor::{ExtractOutcome, ExtractorConfig, ExtractorPool};
use super::protocol::{
    err_status_line, line_text, parse_handshake, parse_status, read_line, DbStatus,
};

#[derive(Clone)]
pub struct ProxyConfig {
    pub listen: Endpoint,
    pub upstream: Endpoint,
    pub recorder: Option<Endpoint>,
    pub extractor: ExtractorConfig,
    pub metrics: Option<MetricsSink>,
}

pub struct ProxyServer {
    endpoint: Endpoint,
    shutdown: Arc<AtomicBool>,
    handle: JoinHandle<()>,
}

impl ProxyServer {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = connect(&self.endpoint);
        let _ = self.handle.join();
    }
}

pub fn serve(config: ProxyConfig) -> std::io::Result<ProxyServer> {
    if !config.extractor.path.is_file() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "extractor binary not found at {}",
                config.extractor.path.display()
            ),
        ));
    }
    let listener = bind(&config.listen)?;
    let endpoint = listener.local_endpoint()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let accept_shutdown = Arc::clone(&shutdown);
    let extractors = Arc::new(ExtractorPool::start(config.extractor.clone()));
    let config = Arc::new(config);
    let handle = std::thread::Builder::new()
        .name("proxy-accept".into())
        .spawn(move || loop {
            let conn = match listener.accept() {
                Ok(conn) => conn,
                Err(_) => break,
            };
            if accept_shutdown.load(Ordering::SeqCst) {
                break;
            }
            let config = Arc::clone(&config);
            let extractors = Arc::clone(&extractors);
            std::thread::Builder::new()
                .name("proxy-conn".into())
                .spawn(move || {
                    if let Err(e) = relay_connection(conn, &config, &extractors) {
                        log::debug!("proxy connection ended: {e}");
                    }
                })
                .ok();
        })?;
    Ok(ProxyServer {
        endpoint,
        shutdown,
        handle,
    })
}

struct Upstream {
    writer: IoStream,
    reader: BufReader<IoStream>,
}

fn relay_connection(
    client: IoStream,
    config: &ProxyConfig,
    extractors: &ExtractorPool,
) -> std::io::Result<()> {
    let mut client_writer = client.try_clone()?;
    let mut client_reader = BufReader::new(client);

    // The handshake names the worker; nothing is relayed before it.
    let Some(handshake) = read_line(&mut client_reader)? else {
        return Ok(());
    };
    let Some(worker) = parse_handshake(&line_text(&handshake)) else {
        log::warn!("proxy: connection without a WORKER handshake dropped");
        return Ok(());
    };

    let mut upstream = match connect(&config.upstream) {
        Ok(stream) => {
            let writer = stream.try_clone()?;
            Some(Upstream {
                writer,
                reader: BufReader::new(stream),
            })
        }
        Err(e) => {
            log::warn!("proxy: database upstream unreachable: {e}");
            None
        }
    };
    let mut recorder = match &config.recorder {
        Some(endpoint) => Some(RecorderClient::connect(endpoint).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::ConnectionRefused, e.to_string())
        })?),
        None => None,
    };

    while let Some(line) = read_line(&mut client_reader)? {
        let statement = line_text(&line);
        if statement.is_empty() {
            // Blank keep-alive lines relay untouched and carry no SQL.
            if let Some(up) = upstream.as_mut() {
                let _ = up.writer.write_all(&line);
            }
            continue;
        }
        let whole = Instant::now();

        // Relay first; extraction runs while the database works.
        let mut upstream_ok = upstream.is_some();
        if let Some(up) = upstream.as_mut() {
            if up.writer.write_all(&line).is_err() {
                upstream_ok = false;
            }
        }

        let parse_started = Instant::now();
        let outcome = extractors.extract(&statement);
        let parse_ns = parse_started.elapsed().as_nanos() as u64;
        record(&config.metrics, Stage::Parse, parse_ns);

        let mut event_tx_ns = 0u64;
        match outcome {
            ExtractOutcome::Failed { reason } => {
                // Bad exit means a potential attack: preserve the raw
                // input for forensics, then cut the connection before any
                // response bytes reach the application.
                log::warn!("proxy: extractor failed for worker {worker}: {reason}");
                if let Some(rec) = recorder.as_mut() {
                    let _ = rec.send_event(&ProvEvent::ParseFailure {
                        worker,
                        raw: statement.clone(),
                    });
                    let _ = rec.sync();
                }
                return Ok(());
            }
            ExtractOutcome::Events(events) => {
                if let Some(rec) = recorder.as_mut() {
                    let tx_started = Instant::now();
                    // Children are spawned worker-agnostic; attribution
                    // happens here, per connection.
                    for event in events {
                        rec.send_event(&event.with_worker(worker)).map_err(to_io)?;
                    }
                    event_tx_ns += tx_started.elapsed().as_nanos() as u64;
                }
            }
        }

        // Read the database response and relay it verbatim; the impact
        // event reaches the recorder before the response reaches the app.
        let mut impact: Option<(u64, u64)> = None;
        let mut response: Vec<u8> = Vec::new();
        if upstream_ok {
            let up = upstream.as_mut().expect("upstream_ok implies upstream");
            match read_line(&mut up.reader) {
                Ok(Some(status_line)) => {
                    response.extend_from_slice(&status_line);
                    match parse_status(&line_text(&status_line)) {
                        Some(DbStatus::Ok { rows, bytes }) => {
                            let mut payload = vec![0u8; bytes as usize];
                            up.reader.read_exact(&mut payload)?;
                            response.extend_from_slice(&payload);
                            impact = Some((rows, bytes));
                        }
                        Some(DbStatus::Err) => {}
                        None => {
                            log::warn!("proxy: unrecognized db status line relayed as-is");
                        }
                    }
                }
                Ok(None) | Err(_) => upstream_ok = false,
            }
        }
        if !upstream_ok {
            response = err_status_line("upstream").into_bytes();
        }

        if let Some(rec) = recorder.as_mut() {
            let tx_started = Instant::now();
            if let Some((rows, bytes)) = impact {
                rec.send_event(&ProvEvent::ResponseImpact {
                    worker,
                    rows,
                    bytes,
                })
                .map_err(to_io)?;
            }
            // Barrier: everything above is in the graph before the app can
            // see the response and trigger the guard's ancestry query.
            rec.sync().map_err(to_io)?;
            event_tx_ns += tx_started.elapsed().as_nanos() as u64;
        }
        record(&config.metrics, Stage::EventTransmit, event_tx_ns);

        client_writer.write_all(&response)?;
        let total_ns = whole.elapsed().as_nanos() as u64;
        record(
            &config.metrics,
            Stage::ProxyOther,
            total_ns
                .saturating_sub(parse_ns)
                .saturating_sub(event_tx_ns),
        );
    }
    Ok(())
}

fn to_io(e: crate::recorder::ClientError) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Resolves the sibling extractor binary next to the current executable,
/// walking up one directory for `target/debug/deps` test layouts.
pub fn sibling_extractor(name: &str) -> Option<std::path::PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let mut dir = exe.parent()?.to_path_buf();
    for _ in 0..3 {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Some(candidate);
        }
        dir = dir.parent()?.to_path_buf();
    }
    None
}
