//! In-process assembly of the full pipeline for scenarios, benchmarks, and
//! the acceptance suite: recorder, database stub, capture proxy, worker
//! pool, and guard, all on ephemeral loopback endpoints.

use std::io::{BufReader, Read, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};

use provtap_core::guard::{self, GuardConfig, GuardServer, Policy};
use provtap_core::metrics::MetricsSink;
use provtap_core::net::{connect, ephemeral_loopback, Endpoint};
use provtap_core::proxy::{
    self, protocol, ExtractorConfig, ProxyConfig, ProxyServer, StubConfig, StubServer,
};
use provtap_core::recorder::{
    ProvGraph, RecorderClient, RecorderOptions, RecorderServer, StatsSnapshot,
};
use provtap_core::schema::Schema;
use provtap_core::shim::{self, ShimConfig, ShimServer, SimRequest};

pub const EXTRACTOR_BIN: &str = "provtap-extract";

/// Finds the extractor binary: explicit path, `PROVTAP_EXTRACTOR`, or a
/// sibling of the current executable.
pub fn resolve_extractor(explicit: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(path) = explicit {
        anyhow::ensure!(
            path.is_file(),
            "extractor binary not found at {}",
            path.display()
        );
        return Ok(path);
    }
    if let Ok(env_path) = std::env::var("PROVTAP_EXTRACTOR") {
        let path = PathBuf::from(env_path);
        anyhow::ensure!(
            path.is_file(),
            "PROVTAP_EXTRACTOR points at {}",
            path.display()
        );
        return Ok(path);
    }
    proxy::sibling_extractor(EXTRACTOR_BIN)
        .context("could not locate the provtap-extract binary next to this executable")
}

pub struct PipelineOptions {
    pub workers: usize,
    pub schema_text: String,
    pub stub: StubConfig,
    pub policy_text: String,
    pub gc_enabled: bool,
    pub metrics: Option<MetricsSink>,
    pub parse_timeout: Duration,
    pub extractor: Option<PathBuf>,
}

impl PipelineOptions {
    pub fn new(schema_text: &str, policy_text: &str) -> Self {
        PipelineOptions {
            workers: 4,
            schema_text: schema_text.to_string(),
            stub: StubConfig::default(),
            policy_text: policy_text.to_string(),
            gc_enabled: true,
            metrics: None,
            parse_timeout: Duration::from_secs(2),
            extractor: None,
        }
    }
}

pub struct Pipeline {
    // Dropped last so component sockets close before the files vanish.
    _dir: tempfile::TempDir,
    pub schema: Schema,
    pub stub_config: StubConfig,
    pub quarantine_path: PathBuf,
    recorder: RecorderServer,
    stub: StubServer,
    proxy: ProxyServer,
    shim: ShimServer,
    guard: GuardServer,
}

impl Pipeline {
    pub fn launch(options: PipelineOptions) -> Result<Pipeline> {
        let dir = tempfile::tempdir().context("creating pipeline scratch directory")?;
        let schema_path = dir.path().join("schema.sql");
        std::fs::write(&schema_path, &options.schema_text).context("writing schema")?;
        let schema = Schema::load(&schema_path)?;
        let policy: Policy = guard::parse_policy(&options.policy_text)?;
        let quarantine_path = dir.path().join("quarantine.log");

        let recorder = provtap_core::recorder::serve(
            &ephemeral_loopback(),
            RecorderOptions {
                quarantine: Some(quarantine_path.clone()),
            },
        )
        .context("starting recorder")?;

        let stub = proxy::serve_stub(
            &ephemeral_loopback(),
            options.stub.clone(),
            Some(schema.clone()),
        )
        .context("starting db stub")?;

        let extractor_path = resolve_extractor(options.extractor.clone())?;
        let proxy_server = proxy::serve(ProxyConfig {
            listen: ephemeral_loopback(),
            upstream: stub.endpoint().clone(),
            recorder: Some(recorder.endpoint().clone()),
            extractor: ExtractorConfig {
                path: extractor_path,
                schema: schema_path,
                timeout: options.parse_timeout,
            },
            metrics: options.metrics.clone(),
        })
        .context("starting capture proxy")?;

        let shim = shim::serve(ShimConfig {
            listen: ephemeral_loopback(),
            workers: options.workers,
            recorder: Some(recorder.endpoint().clone()),
            db: Some(proxy_server.endpoint().clone()),
            metrics: options.metrics.clone(),
        })
        .context("starting worker pool")?;

        let guard_server = guard::serve(GuardConfig {
            listen: ephemeral_loopback(),
            upstream: shim.endpoint().clone(),
            recorder: recorder.endpoint().clone(),
            policy,
            gc_enabled: options.gc_enabled,
        })
        .context("starting guard")?;

        Ok(Pipeline {
            _dir: dir,
            schema,
            stub_config: options.stub,
            quarantine_path,
            recorder,
            stub,
            proxy: proxy_server,
            shim,
            guard: guard_server,
        })
    }

    pub fn guard_endpoint(&self) -> &Endpoint {
        self.guard.endpoint()
    }

    pub fn shim_endpoint(&self) -> &Endpoint {
        self.shim.endpoint()
    }

    pub fn recorder_endpoint(&self) -> &Endpoint {
        self.recorder.endpoint()
    }

    pub fn guard_stats(&self) -> &guard::GuardStats {
        self.guard.stats()
    }

    pub fn recorder_client(&self) -> Result<RecorderClient> {
        Ok(RecorderClient::connect(self.recorder.endpoint())?)
    }

    pub fn stats(&self) -> Result<StatsSnapshot> {
        Ok(self.recorder_client()?.stats()?)
    }

    /// The exact bytes a client should receive for this request when every
    /// statement succeeds and the guard allows the response.
    pub fn expected_response(&self, request: &SimRequest) -> Vec<u8> {
        expected_shim_response(&self.stub_config, &self.schema, request)
    }

    /// Tears the pipeline down in dependency order and returns the final
    /// graph for inspection.
    pub fn shutdown(self) -> ProvGraph {
        self.guard.shutdown();
        self.shim.shutdown();
        self.proxy.shutdown();
        self.stub.shutdown();
        self.recorder.shutdown()
    }
}

/// The response body the shim assembles when every statement succeeds,
/// computed from the stub's pure response function.
pub fn expected_shim_response(stub: &StubConfig, schema: &Schema, request: &SimRequest) -> Vec<u8> {
    let mut body = Vec::new();
    for statement in &request.script {
        body.extend_from_slice(&proxy::respond(stub, Some(schema), statement));
    }
    let mut response = format!("OK {}\n", body.len()).into_bytes();
    response.extend_from_slice(&body);
    response
}

/// One client response as seen past the guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientResponse {
    pub raw: Vec<u8>,
    pub denied: bool,
}

/// Sends one request through an endpoint (guard or shim) and reads the
/// complete response.
pub fn send_request(endpoint: &Endpoint, request: &SimRequest) -> Result<ClientResponse> {
    let stream = connect(endpoint)?;
    stream.set_read_timeout(Some(Duration::from_secs(30)))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let line = serde_json::to_string(request)?;
    writer.write_all(line.as_bytes())?;
    writer.write_all(b"\n")?;

    let mut raw = Vec::new();
    let first =
        protocol::read_line(&mut reader)?.context("connection closed before a response arrived")?;
    // Straight-to-shim responses still carry the preamble; strip it like
    // the guard would.
    let status_line = if shim::parse_preamble(&protocol::line_text(&first)).is_some() {
        protocol::read_line(&mut reader)?.context("response missing its status line")?
    } else {
        first
    };
    raw.extend_from_slice(&status_line);
    let len: usize = protocol::line_text(&status_line)
        .split_whitespace()
        .nth(1)
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    raw.extend_from_slice(&body);

    let denied = raw == guard::blocked_response();
    Ok(ClientResponse { raw, denied })
}
