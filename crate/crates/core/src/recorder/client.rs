//! Blocking client for the recorder socket, used by the capture proxy, the
//! worker shim, the guard, and the harness.

use std::time::Duration;

use uuid::Uuid;

use crate::model::{ProvEvent, WorkerId};
use crate::net::{connect, Endpoint, IoStream};
use crate::wire::{encode_event, read_frame, write_frame};

use super::graph::{AncestrySummary, AuditReport, GcVerdict};
use super::protocol::{
    parse_ancestry, parse_audit, parse_dot, parse_stats, RecorderRequest, StatsSnapshot,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("recorder i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("recorder refused: {0}")]
    Remote(String),
    #[error("recorder protocol violation: {0}")]
    Protocol(String),
}

pub struct RecorderClient {
    stream: IoStream,
}

impl RecorderClient {
    pub fn connect(endpoint: &Endpoint) -> std::io::Result<Self> {
        let stream = connect(endpoint)?;
        // A hung recorder must not wedge agents forever.
        stream.set_read_timeout(Some(Duration::from_secs(10)))?;
        Ok(RecorderClient { stream })
    }

    /// Streams one event, fire and forget.
    pub fn send_event(&mut self, event: &ProvEvent) -> Result<(), ClientError> {
        use std::io::Write;
        let frame = encode_event(event).map_err(|e| ClientError::Protocol(e.to_string()))?;
        self.stream.write_all(&frame)?;
        Ok(())
    }

    fn request(&mut self, request: &RecorderRequest) -> Result<String, ClientError> {
        write_frame(&mut self.stream, &request.payload())?;
        let reply = read_frame(&mut self.stream)?
            .ok_or_else(|| ClientError::Protocol("connection closed mid-request".into()))?;
        if let Some(message) = reply.strip_prefix("ERR\t") {
            return Err(ClientError::Remote(message.to_string()));
        }
        Ok(reply)
    }

    fn expect_ok(&mut self, request: &RecorderRequest) -> Result<(), ClientError> {
        let reply = self.request(request)?;
        if reply == "OK" {
            Ok(())
        } else {
            Err(ClientError::Protocol(format!("expected OK, got {reply:?}")))
        }
    }

    /// Round-trip barrier: returns once every frame sent earlier on this
    /// connection has been applied to the graph.
    pub fn sync(&mut self) -> Result<(), ClientError> {
        self.expect_ok(&RecorderRequest::Sync)
    }

    pub fn ancestry_by_worker(&mut self, worker: WorkerId) -> Result<AncestrySummary, ClientError> {
        let reply = self.request(&RecorderRequest::AncestryByWorker(worker))?;
        parse_ancestry(&reply).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn ancestry_by_unit(&mut self, uuid: Uuid) -> Result<AncestrySummary, ClientError> {
        let reply = self.request(&RecorderRequest::AncestryByUnit(uuid))?;
        parse_ancestry(&reply).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn gc_unit(&mut self, uuid: Uuid, verdict: GcVerdict) -> Result<(), ClientError> {
        self.expect_ok(&RecorderRequest::GcUnit { uuid, verdict })
    }

    pub fn stats(&mut self) -> Result<StatsSnapshot, ClientError> {
        let reply = self.request(&RecorderRequest::Stats)?;
        parse_stats(&reply).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn audit(&mut self) -> Result<AuditReport, ClientError> {
        let reply = self.request(&RecorderRequest::Audit)?;
        parse_audit(&reply).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn dot(&mut self, filter: Option<Uuid>) -> Result<String, ClientError> {
        let reply = self.request(&RecorderRequest::Dot { filter })?;
        parse_dot(&reply).map_err(|e| ClientError::Protocol(e.to_string()))
    }

    pub fn shutdown(&mut self) -> Result<(), ClientError> {
        self.expect_ok(&RecorderRequest::Shutdown)
    }
}
