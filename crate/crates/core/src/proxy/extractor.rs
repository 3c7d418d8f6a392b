//! Isolated extraction: the proxy never parses SQL in-process.
//!
//! Statements are handed to disposable extractor child processes speaking a
//! framed request/reply protocol on their pipes. A watchdog kills any child
//! that hangs or violates the protocol, and a child is recycled after a
//! fixed statement quota so no process lives forever. Parse failures are
//! reported in-band (`FAIL` frame) by a healthy child; crashes, hangs, and
//! protocol violations end the child, whose exit status the reaper logs.
//! Either way a malcrafted input can only take down the disposable child,
//! never the relay.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{ChildStdin, Command, Stdio};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant};

use crate::model::ProvEvent;
use crate::wire::{event_from_payload, frame_payload, FrameReader};

/// A child is retired after this many statements.
const RECYCLE_AFTER: u32 = 256;
/// Children spawned ahead at pool start.
const WARM_CHILDREN: usize = 2;

#[derive(Debug, Clone)]
pub struct ExtractorConfig {
    /// Path to the extractor executable.
    pub path: PathBuf,
    /// Path to the schema file passed via `--schema`.
    pub schema: PathBuf,
    /// Per-statement watchdog timeout; expiry kills the child.
    pub timeout: Duration,
}

#[derive(Debug)]
pub enum ExtractOutcome {
    /// The decoded events for one successfully parsed statement.
    Events(Vec<ProvEvent>),
    /// Parse failure, crash, timeout, spawn failure, or protocol violation.
    Failed { reason: String },
}

#[cfg(unix)]
fn force_kill(pid: u32) {
    // SAFETY: plain signal delivery to a child we spawned.
    unsafe {
        libc::kill(pid as libc::pid_t, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn force_kill(_pid: u32) {}

enum ChildMsg {
    Payload(String),
    Closed,
}

/// A running serve-mode child. Dropping it closes stdin, which makes the
/// child exit cleanly; its reader thread reaps it either way.
struct LiveChild {
    stdin: ChildStdin,
    pid: u32,
    from_child: mpsc::Receiver<ChildMsg>,
    statements_served: u32,
}

impl LiveChild {
    fn spawn(config: &ExtractorConfig) -> Result<LiveChild, String> {
        let mut child = Command::new(&config.path)
            .arg("--schema")
            .arg(&config.schema)
            .arg("--serve")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawn failed: {e}"))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let mut stdout = child.stdout.take().expect("stdout piped");
        let pid = child.id();
        let (tx, from_child) = mpsc::channel();
        // The reader owns the child: it forwards reply frames and, at EOF,
        // reaps the process and logs abnormal exits.
        std::thread::Builder::new()
            .name("extractor-read".into())
            .spawn(move || {
                let mut frames = FrameReader::new();
                let mut buf = [0u8; 8192];
                'read: loop {
                    let n = match stdout.read(&mut buf) {
                        Ok(0) | Err(_) => break 'read,
                        Ok(n) => n,
                    };
                    frames.extend(&buf[..n]);
                    loop {
                        match frames.next_payload() {
                            Ok(Some(payload)) => {
                                if tx.send(ChildMsg::Payload(payload)).is_err() {
                                    break 'read;
                                }
                            }
                            Ok(None) => break,
                            Err(_) => break 'read,
                        }
                    }
                }
                let _ = tx.send(ChildMsg::Closed);
                match child.wait() {
                    Ok(status) if !status.success() => {
                        log::warn!("extractor child {pid} exited abnormally: {status}");
                    }
                    Err(e) => log::warn!("extractor child {pid} could not be reaped: {e}"),
                    _ => {}
                }
            })
            .map_err(|e| format!("reader thread failed: {e}"))?;
        Ok(LiveChild {
            stdin,
            pid,
            from_child,
            statements_served: 0,
        })
    }

    /// Runs one statement. The second value is false when the child is no
    /// longer usable (killed, crashed, or protocol violation).
    fn run_statement(&mut self, sql: &str, timeout: Duration) -> (ExtractOutcome, bool) {
        let frame = match frame_payload(sql) {
            Ok(frame) => frame,
            Err(e) => {
                return (
                    ExtractOutcome::Failed {
                        reason: e.to_string(),
                    },
                    true,
                )
            }
        };
        if self.stdin.write_all(&frame).is_err() || self.stdin.flush().is_err() {
            return (
                ExtractOutcome::Failed {
                    reason: "extractor stdin write failed".into(),
                },
                false,
            );
        }
        self.statements_served += 1;
        let deadline = Instant::now() + timeout;
        let mut events = Vec::new();
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.from_child.recv_timeout(remaining) {
                Ok(ChildMsg::Payload(payload)) => {
                    if payload == "DONE" {
                        return (ExtractOutcome::Events(events), true);
                    }
                    if let Some(reason) = payload.strip_prefix("FAIL\t") {
                        // The statement failed; the child is fine.
                        return (
                            ExtractOutcome::Failed {
                                reason: reason.to_string(),
                            },
                            true,
                        );
                    }
                    match event_from_payload(&payload) {
                        Ok(event) => events.push(event),
                        Err(e) => {
                            force_kill(self.pid);
                            return (
                                ExtractOutcome::Failed {
                                    reason: format!("undecodable extractor output: {e}"),
                                },
                                false,
                            );
                        }
                    }
                }
                Ok(ChildMsg::Closed) => {
                    return (
                        ExtractOutcome::Failed {
                            reason: "extractor exited mid-statement".into(),
                        },
                        false,
                    );
                }
                Err(_) => {
                    // Hung child: the watchdog puts it down.
                    force_kill(self.pid);
                    return (
                        ExtractOutcome::Failed {
                            reason: format!("watchdog timeout after {timeout:?}"),
                        },
                        false,
                    );
                }
            }
        }
    }
}

/// Shared pool of live children; relay threads check one out per statement.
pub struct ExtractorPool {
    config: ExtractorConfig,
    idle: Mutex<Vec<LiveChild>>,
}

impl ExtractorPool {
    pub fn start(config: ExtractorConfig) -> Self {
        let mut idle = Vec::new();
        for _ in 0..WARM_CHILDREN {
            match LiveChild::spawn(&config) {
                Ok(child) => idle.push(child),
                Err(e) => log::warn!("extractor pre-spawn failed: {e}"),
            }
        }
        ExtractorPool {
            config,
            idle: Mutex::new(idle),
        }
    }

    pub fn extract(&self, sql: &str) -> ExtractOutcome {
        let checked_out = self.idle.lock().expect("pool poisoned").pop();
        let mut child = match checked_out {
            Some(child) => child,
            None => match LiveChild::spawn(&self.config) {
                Ok(child) => child,
                Err(reason) => return ExtractOutcome::Failed { reason },
            },
        };
        let (outcome, healthy) = child.run_statement(sql, self.config.timeout);
        if healthy && child.statements_served < RECYCLE_AFTER {
            self.idle.lock().expect("pool poisoned").push(child);
        }
        // Otherwise dropping the child closes stdin and the reader reaps it.
        outcome
    }
}

/// One-shot isolated invocation of the extractor binary: one statement on
/// stdin, event frames on stdout, exit status as the verdict. Used by the
/// offline tools and kept as the reference interaction.
pub fn run_extractor(config: &ExtractorConfig, sql: &str) -> ExtractOutcome {
    let mut child = match Command::new(&config.path)
        .arg("--schema")
        .arg(&config.schema)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(child) => child,
        Err(e) => {
            return ExtractOutcome::Failed {
                reason: format!("spawn failed: {e}"),
            }
        }
    };
    let pid = child.id();
    if let Some(mut stdin) = child.stdin.take() {
        if stdin.write_all(sql.as_bytes()).is_err() {
            force_kill(pid);
            let _ = child.wait();
            return ExtractOutcome::Failed {
                reason: "stdin write failed".into(),
            };
        }
    }
    let (tx, done) = mpsc::channel();
    let mut stdout = child.stdout.take().expect("stdout piped");
    std::thread::Builder::new()
        .name("extractor-wait".into())
        .spawn(move || {
            let mut stdout_bytes = Vec::new();
            let _ = stdout.read_to_end(&mut stdout_bytes);
            let ok = child.wait().map(|s| s.success()).unwrap_or(false);
            let mut stderr_text = String::new();
            if !ok {
                if let Some(mut stderr) = child.stderr.take() {
                    let _ = stderr.read_to_string(&mut stderr_text);
                }
            }
            let _ = tx.send((ok, stdout_bytes, stderr_text));
        })
        .expect("waiter thread");
    let (ok, stdout_bytes, stderr_text) = match done.recv_timeout(config.timeout) {
        Ok(result) => result,
        Err(_) => {
            force_kill(pid);
            let _ = done.recv_timeout(Duration::from_secs(2));
            return ExtractOutcome::Failed {
                reason: format!("watchdog timeout after {:?}", config.timeout),
            };
        }
    };
    if !ok {
        return ExtractOutcome::Failed {
            reason: format!("bad exit: {}", stderr_text.trim()),
        };
    }
    let mut frames = FrameReader::new();
    frames.extend(&stdout_bytes);
    let mut events = Vec::new();
    loop {
        match frames.next_event() {
            Ok(Some(event)) => events.push(event),
            Ok(None) => break,
            Err(e) => {
                return ExtractOutcome::Failed {
                    reason: format!("undecodable output: {e}"),
                }
            }
        }
    }
    if frames.buffered() != 0 {
        return ExtractOutcome::Failed {
            reason: "truncated event frame on stdout".into(),
        };
    }
    ExtractOutcome::Events(events)
}
