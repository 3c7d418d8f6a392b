//! End-to-end overhead measurement: the same request stream driven once
//! directly against the database stub (no interposition at all) and once
//! through the full pipeline, plus per-stage microbenchmarks.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{Context, Result};

use provtap_core::metrics::new_sink;
use provtap_core::net::{ephemeral_loopback, Endpoint};
use provtap_core::proxy::{self, StubConfig};
use provtap_core::shim::{self, ShimConfig, SimRequest};
use provtap_core::testkit::CORPUS_SCHEMA;

use crate::orchestra::{send_request, Pipeline, PipelineOptions};
use crate::report::{stage_rows, summarize_ns, BenchReport};

pub struct OverheadOptions {
    pub requests: usize,
    pub concurrency: usize,
    /// Explicit listen endpoints for the two modes, when callers want fixed
    /// ports; they must differ.
    pub direct_listen: Option<Endpoint>,
    pub pipeline_listen: Option<Endpoint>,
}

impl Default for OverheadOptions {
    fn default() -> Self {
        OverheadOptions {
            requests: 1000,
            concurrency: 1,
            direct_listen: None,
            pipeline_listen: None,
        }
    }
}

pub struct OverheadOutcome {
    pub report: BenchReport,
    pub added_mean_ms: f64,
    pub added_p95_ms: f64,
}

fn workload(n: usize) -> Vec<SimRequest> {
    let templates = [
        "SELECT title, price FROM products WHERE id = {k}",
        "SELECT id, total FROM orders WHERE customer_id = {k}",
        "SELECT name, email FROM customers WHERE id = {k}",
    ];
    (0..n)
        .map(|i| SimRequest {
            remote_addr: format!("203.0.113.{}:4{:04}", 1 + (i % 8), 1000 + (i % 8000))
                .parse()
                .unwrap(),
            script: vec![templates[i % templates.len()].replace("{k}", &(i % 40).to_string())],
        })
        .collect()
}

fn drive(endpoint: &Endpoint, requests: &[SimRequest], concurrency: usize) -> Result<Vec<u64>> {
    let next = Arc::new(AtomicUsize::new(0));
    let samples: Arc<Mutex<Vec<u64>>> = Arc::new(Mutex::new(Vec::with_capacity(requests.len())));
    let error: Arc<Mutex<Option<String>>> = Arc::new(Mutex::new(None));
    std::thread::scope(|scope| {
        for _ in 0..concurrency.max(1) {
            let next = Arc::clone(&next);
            let samples = Arc::clone(&samples);
            let error = Arc::clone(&error);
            let endpoint = endpoint.clone();
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= requests.len() {
                    return;
                }
                let started = Instant::now();
                match send_request(&endpoint, &requests[index]) {
                    Ok(response) if !response.denied => {
                        samples
                            .lock()
                            .unwrap()
                            .push(started.elapsed().as_nanos() as u64);
                    }
                    Ok(_) => {
                        *error.lock().unwrap() =
                            Some(format!("request {index} unexpectedly denied"));
                        return;
                    }
                    Err(e) => {
                        *error.lock().unwrap() = Some(format!("request {index} failed: {e}"));
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = error.lock().unwrap().take() {
        anyhow::bail!("bench driver failed: {e}");
    }
    Ok(Arc::try_unwrap(samples).unwrap().into_inner().unwrap())
}

/// Runs both modes and reports mean/p95 added latency per request.
pub fn bench_overhead(options: OverheadOptions) -> Result<OverheadOutcome> {
    anyhow::ensure!(options.requests >= 100, "bench needs at least 100 requests");
    if let (Some(a), Some(b)) = (&options.direct_listen, &options.pipeline_listen) {
        anyhow::ensure!(a != b, "direct and pipeline endpoints must differ");
    }
    let requests = workload(options.requests);
    let stub_config = StubConfig::with_rows(&[("customers", 2), ("orders", 3), ("products", 3)]);

    // Mode A: client → shim → stub, nothing interposed, no provenance.
    let direct_samples = {
        let schema = provtap_core::schema::Schema::parse_str(CORPUS_SCHEMA)?;
        let stub = proxy::serve_stub(&ephemeral_loopback(), stub_config.clone(), Some(schema))
            .context("starting baseline stub")?;
        let shim_server = shim::serve(ShimConfig {
            listen: options
                .direct_listen
                .clone()
                .unwrap_or_else(ephemeral_loopback),
            workers: 4,
            recorder: None,
            db: Some(stub.endpoint().clone()),
            metrics: None,
        })
        .context("starting baseline pool")?;
        let samples = drive(shim_server.endpoint(), &requests, options.concurrency)?;
        shim_server.shutdown();
        stub.shutdown();
        samples
    };

    // Mode B: client → guard → shim → proxy → stub, recorder on.
    let metrics = new_sink();
    let mut pipeline_options = PipelineOptions::new(CORPUS_SCHEMA, "DEFAULT ALLOW\n");
    pipeline_options.workers = 4;
    pipeline_options.stub = stub_config;
    pipeline_options.metrics = Some(metrics.clone());
    let pipeline = Pipeline::launch(pipeline_options)?;
    let pipeline_samples = drive(pipeline.guard_endpoint(), &requests, options.concurrency)?;
    pipeline.shutdown();

    let direct = summarize_ns(&direct_samples);
    let interposed = summarize_ns(&pipeline_samples);
    let added_mean_ms = (interposed.mean_ms - direct.mean_ms).max(0.0);
    let added_p95_ms = (interposed.p95_ms - direct.p95_ms).max(0.0);

    let mut report = BenchReport::new("overhead");
    report.direct = Some(direct);
    report.pipeline = Some(interposed);
    report.added_mean_ms = Some(added_mean_ms);
    report.added_p95_ms = Some(added_p95_ms);
    report.stages = stage_rows(&metrics.lock().unwrap());
    Ok(OverheadOutcome {
        report,
        added_mean_ms,
        added_p95_ms,
    })
}
