//! Scenario definition, bundled workloads, and the replay runner.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use provtap_core::metrics::new_sink;
use provtap_core::proxy::StubConfig;
use provtap_core::recorder::{AuditReport, StatsSnapshot};
use provtap_core::schema::Schema;
use provtap_core::shim::SimRequest;
use provtap_core::sql;
use provtap_core::testkit::{Rng, CORPUS_SCHEMA};

use crate::orchestra::{send_request, Pipeline, PipelineOptions};
use crate::report::{stage_rows, summarize_ns, BenchReport};

/// A replayable workload: everything the orchestrator needs plus the
/// expected outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Inline schema DDL.
    pub schema: String,
    #[serde(default)]
    pub stub: StubConfig,
    /// Inline policy text.
    pub policy: String,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub requests: Vec<SimRequest>,
    #[serde(default)]
    pub expected: Expected,
}

fn default_workers() -> usize {
    4
}

fn default_concurrency() -> usize {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Expected {
    /// Indices of requests that must be denied; all others must be allowed.
    #[serde(default)]
    pub denied: Vec<usize>,
    /// Exact number of SQL events the recorder must have ingested.
    #[serde(default)]
    pub sql_events: Option<u64>,
    /// Exact number of quarantined units.
    #[serde(default)]
    pub quarantined_units: Option<u64>,
}

/// On-disk scenario form: schema, policy, and the request stream may be
/// inline or referenced as files (requests as JSON-lines, one SimRequest
/// per line). Paths resolve relative to the scenario file.
#[derive(Debug, Deserialize)]
struct ScenarioFile {
    name: String,
    schema: Option<String>,
    schema_path: Option<std::path::PathBuf>,
    #[serde(default)]
    stub: StubConfig,
    policy: Option<String>,
    policy_path: Option<std::path::PathBuf>,
    #[serde(default = "default_workers")]
    workers: usize,
    #[serde(default = "default_concurrency")]
    concurrency: usize,
    requests: Option<Vec<SimRequest>>,
    requests_path: Option<std::path::PathBuf>,
    #[serde(default)]
    expected: Expected,
}

impl Scenario {
    /// Bundled scenario by name, or a JSON file path.
    pub fn load(spec: &str) -> Result<Scenario> {
        match spec {
            "sqli-exfil" => Ok(sqli_exfil()),
            "baseline-1k" => Ok(baseline_1k()),
            path => Scenario::load_file(Path::new(path)),
        }
    }

    fn load_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("no bundled scenario or file named {}", path.display()))?;
        let file: ScenarioFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing scenario {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &std::path::PathBuf| {
            if p.is_relative() {
                base.join(p)
            } else {
                p.clone()
            }
        };

        let schema = match (file.schema, &file.schema_path) {
            (Some(inline), None) => inline,
            (None, Some(p)) => std::fs::read_to_string(resolve(p))
                .with_context(|| format!("reading schema {}", p.display()))?,
            _ => anyhow::bail!("scenario needs exactly one of schema or schema_path"),
        };
        let policy = match (file.policy, &file.policy_path) {
            (Some(inline), None) => inline,
            (None, Some(p)) => std::fs::read_to_string(resolve(p))
                .with_context(|| format!("reading policy {}", p.display()))?,
            _ => anyhow::bail!("scenario needs exactly one of policy or policy_path"),
        };
        let requests = match (file.requests, &file.requests_path) {
            (Some(inline), None) => inline,
            (None, Some(p)) => {
                // JSON-lines: one SimRequest per line.
                let text = std::fs::read_to_string(resolve(p))
                    .with_context(|| format!("reading requests {}", p.display()))?;
                let mut requests = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    requests.push(
                        serde_json::from_str(line)
                            .with_context(|| format!("{}:{}", p.display(), i + 1))?,
                    );
                }
                requests
            }
            _ => anyhow::bail!("scenario needs exactly one of requests or requests_path"),
        };
        Ok(Scenario {
            name: file.name,
            schema,
            stub: file.stub,
            policy,
            workers: file.workers,
            concurrency: file.concurrency,
            requests,
            expected: file.expected,
        })
    }

    pub fn bundled_names() -> &'static [&'static str] {
        &["sqli-exfil", "baseline-1k"]
    }

    /// Every table a parseable statement references must exist in the
    /// scenario's schema. Unparseable statements are legitimate scenario
    /// content (injections) and are skipped.
    pub fn validate(&self) -> Result<()> {
        let schema = Schema::parse_str(&self.schema)?;
        for (index, request) in self.requests.iter().enumerate() {
            for statement in &request.script {
                let Ok(stmt) = sql::parse(statement) else { continue };
                for table in provtap_core::proxy::stub::collect_base_tables(&stmt) {
                    anyhow::ensure!(
                        schema.contains_table(&table),
                        "request {index}: table {table:?} is not in the scenario schema"
                    );
                }
            }
        }
        Ok(())
    }

    /// Sums the events the extractor will emit over every statement that
    /// parses; statements after a parse failure in the same script never
    /// execute and must not be counted.
    pub fn expected_sql_events(&self) -> Result<u64> {
        let schema = Schema::parse_str(&self.schema)?;
        let mut total = 0u64;
        for request in &self.requests {
            for statement in &request.script {
                match sql::parse(statement) {
                    Ok(stmt) => {
                        let extraction = sql::extract(&stmt, &schema)?;
                        total += (extraction.reads.len()
                            + extraction.used.len()
                            + extraction.writes.len()) as u64;
                    }
                    Err(_) => break,
                }
            }
        }
        Ok(total)
    }
}

fn req(addr: &str, script: &[&str]) -> SimRequest {
    SimRequest {
        remote_addr: addr.parse().expect("scenario addresses are literals"),
        script: script.iter().map(|s| s.to_string()).collect(),
    }
}

/// The SQL-injection exfiltration case study: benign storefront traffic
/// interleaved with injected requests that pull password and credit-card
/// columns, plus one malformed injection that the parser rejects outright.
pub fn sqli_exfil() -> Scenario {
    let requests =
        vec![
        // 0: browse
        req("203.0.113.7:41200", &["SELECT title, price FROM products WHERE id = 7"]),
        // 1: order history
        req(
            "203.0.113.8:41301",
            &[
                "SELECT id, total FROM orders WHERE customer_id = 3",
                "SELECT title FROM products WHERE id = 1",
            ],
        ),
        // 2: injected — bulk read of password and card columns
        req("198.51.100.66:40313", &["SELECT id, name, password, creditcard FROM customers"]),
        // 3: account page (benign: name and email only)
        req("203.0.113.9:41404", &["SELECT name, email FROM customers WHERE id = 2"]),
        // 4: injected — password used as a filter side channel
        req(
            "198.51.100.66:40514",
            &["SELECT o.id, o.total FROM orders o, customers WHERE password = 'guess'"],
        ),
        // 5: purchase (benign write)
        req(
            "203.0.113.10:41505",
            &[
                "INSERT INTO orders (id, customer_id, total) VALUES (901, 3, 120)",
                "UPDATE products SET stock = 4 WHERE id = 7",
            ],
        ),
        // 6: injected — card number exfiltration
        req("198.51.100.67:40606", &["SELECT creditcard FROM customers WHERE id = 1"]),
        // 7: injected — obfuscated UNION outside the grammar; the parser
        // exits in a bad state and the connection is cut.
        req(
            "198.51.100.67:40707",
            &["SELECT name FROM customers WHERE id = 1 UNION SELECT password FROM customers --"],
        ),
        // 8: static page, no SQL
        req("203.0.113.11:41808", &[]),
        // 9: search (benign)
        req("203.0.113.12:41909", &["SELECT id, title FROM products WHERE title = 'dvd'"]),
    ];
    let mut scenario = Scenario {
        name: "sqli-exfil".into(),
        schema: CORPUS_SCHEMA.to_string(),
        stub: StubConfig::with_rows(&[
            ("customers", 4),
            ("orders", 6),
            ("products", 8),
            ("employees", 3),
        ]),
        policy: "# exfiltration guard\n\
                 DENY [customers.password] SIZE=0\n\
                 DENY [customers.creditcard] SIZE=0\n\
                 DEFAULT ALLOW\n"
            .into(),
        workers: 4,
        concurrency: 1,
        requests,
        expected: Expected {
            denied: vec![2, 4, 6, 7],
            sql_events: None,
            quarantined_units: Some(4),
        },
    };
    scenario.expected.sql_events = scenario.expected_sql_events().ok();
    scenario
}

/// One thousand benign storefront requests from a small pool of client
/// addresses, for the storage-growth comparison.
pub fn baseline_1k() -> Scenario {
    let mut rng = Rng::new(0xdeed_1000);
    let mut requests = Vec::with_capacity(1000);
    for i in 0..1000u32 {
        let addr = format!("203.0.113.{}:4{:04}", 1 + (i % 16), 1000 + (i % 8000));
        let mut script = Vec::new();
        for _ in 0..rng.range(1, 3) {
            let k = rng.below(50);
            let statement = match rng.below(6) {
                0 => format!("SELECT title, price FROM products WHERE id = {k}"),
                1 => format!("SELECT id, total FROM orders WHERE customer_id = {k}"),
                2 => format!("SELECT name, email FROM customers WHERE id = {k}"),
                3 => format!("SELECT id, title FROM products WHERE title = 's{k}'"),
                4 => format!("UPDATE products SET stock = {k} WHERE id = {}", k % 9),
                _ => format!(
                    "INSERT INTO orders (id, customer_id, total) VALUES ({}, {k}, {})",
                    2000 + i,
                    k * 3
                ),
            };
            script.push(statement);
        }
        requests.push(SimRequest {
            remote_addr: addr.parse().unwrap(),
            script,
        });
    }
    let mut scenario = Scenario {
        name: "baseline-1k".into(),
        schema: CORPUS_SCHEMA.to_string(),
        stub: StubConfig::with_rows(&[("customers", 2), ("orders", 3), ("products", 3)]),
        policy: "DEFAULT ALLOW\n".into(),
        workers: 8,
        concurrency: 4,
        requests,
        expected: Expected::default(),
    };
    scenario.expected.sql_events = scenario.expected_sql_events().ok();
    scenario
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Overrides the guard's verdict-coupled garbage collection.
    pub gc: bool,
    /// Query recorder footprint after every completed request.
    pub sample_per_request: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            gc: true,
            sample_per_request: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RequestResult {
    pub index: usize,
    pub expected_denied: bool,
    pub denied: bool,
    /// For expected-allowed requests: response bytes equal the stub-derived
    /// expectation exactly.
    pub byte_identical: Option<bool>,
    pub latency_ns: u64,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub results: Vec<RequestResult>,
    pub stats: StatsSnapshot,
    pub audit: AuditReport,
    /// Raw quarantine log contents, captured before teardown. Decodes with
    /// the standard frame reader and replays through ingest.
    pub quarantine_bytes: Vec<u8>,
    pub report: BenchReport,
}

/// Launches the pipeline, replays the scenario, checks every expectation,
/// and tears everything down.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> Result<ScenarioOutcome> {
    scenario.validate()?;
    let metrics = new_sink();
    let mut pipeline_options = PipelineOptions::new(&scenario.schema, &scenario.policy);
    pipeline_options.workers = scenario.workers;
    pipeline_options.stub = scenario.stub.clone();
    pipeline_options.gc_enabled = options.gc;
    pipeline_options.metrics = Some(metrics.clone());
    let pipeline = Pipeline::launch(pipeline_options)?;

    let expected_responses: Vec<Vec<u8>> = scenario
        .requests
        .iter()
        .map(|r| pipeline.expected_response(r))
        .collect();

    // Time-based footprint sampling, every 500 ms.
    let time_curve: Arc<Mutex<Vec<(u64, u64)>>> = Arc::new(Mutex::new(Vec::new()));
    let sampling = Arc::new(AtomicBool::new(true));
    let sampler = {
        let time_curve = Arc::clone(&time_curve);
        let sampling = Arc::clone(&sampling);
        let mut client = pipeline.recorder_client()?;
        let started = Instant::now();
        std::thread::spawn(move || {
            while sampling.load(Ordering::Relaxed) {
                std::thread::sleep(Duration::from_millis(500));
                if let Ok(stats) = client.stats() {
                    time_curve
                        .lock()
                        .unwrap()
                        .push((started.elapsed().as_millis() as u64, stats.footprint()));
                }
            }
        })
    };

    // Drive with a fixed-size pool of client threads.
    let next = Arc::new(AtomicUsize::new(0));
    let completed = Arc::new(AtomicU64::new(0));
    let results: Arc<Mutex<Vec<Option<RequestResult>>>> =
        Arc::new(Mutex::new(vec![None; scenario.requests.len()]));
    let request_curve: Arc<Mutex<Vec<(u64, u64)>>> = Arc::new(Mutex::new(Vec::new()));
    let guard_endpoint = pipeline.guard_endpoint().clone();
    let recorder_endpoint = pipeline.recorder_endpoint().clone();

    let driver_error: Arc<Mutex<Option<String>>> = Arc::new(Mutex::new(None));
    std::thread::scope(|scope| {
        for _ in 0..scenario.concurrency.max(1) {
            let next = Arc::clone(&next);
            let completed = Arc::clone(&completed);
            let results = Arc::clone(&results);
            let request_curve = Arc::clone(&request_curve);
            let driver_error = Arc::clone(&driver_error);
            let guard_endpoint = guard_endpoint.clone();
            let recorder_endpoint = recorder_endpoint.clone();
            let scenario = &scenario;
            let expected_responses = &expected_responses;
            scope.spawn(move || {
                let mut stats_client = if options.sample_per_request {
                    provtap_core::recorder::RecorderClient::connect(&recorder_endpoint).ok()
                } else {
                    None
                };
                loop {
                    let index = next.fetch_add(1, Ordering::Relaxed);
                    if index >= scenario.requests.len() {
                        return;
                    }
                    let request = &scenario.requests[index];
                    let expected_denied = scenario.expected.denied.contains(&index);
                    let started = Instant::now();
                    let response = match send_request(&guard_endpoint, request) {
                        Ok(response) => response,
                        Err(e) => {
                            *driver_error.lock().unwrap() =
                                Some(format!("request {index} failed: {e}"));
                            return;
                        }
                    };
                    let latency_ns = started.elapsed().as_nanos() as u64;
                    let byte_identical =
                        (!expected_denied).then(|| response.raw == expected_responses[index]);
                    results.lock().unwrap()[index] = Some(RequestResult {
                        index,
                        expected_denied,
                        denied: response.denied,
                        byte_identical,
                        latency_ns,
                    });
                    let done = completed.fetch_add(1, Ordering::Relaxed) + 1;
                    if let Some(client) = stats_client.as_mut() {
                        if let Ok(stats) = client.stats() {
                            request_curve
                                .lock()
                                .unwrap()
                                .push((done, stats.footprint()));
                        }
                    }
                }
            });
        }
    });
    sampling.store(false, Ordering::Relaxed);
    let _ = sampler.join();

    if let Some(error) = driver_error.lock().unwrap().take() {
        pipeline.shutdown();
        anyhow::bail!("scenario driver failed: {error}");
    }

    // The guard notifies gc after relaying each response, so the last few
    // verdicts may still be in flight when the drivers return; wait for
    // them before reading final counts.
    let stats = if options.gc {
        let expected_gc = scenario.requests.len() as u64;
        let deadline = Instant::now() + Duration::from_secs(5);
        let mut client = pipeline.recorder_client()?;
        loop {
            let stats = client.stats()?;
            if stats.units_gcd >= expected_gc || Instant::now() >= deadline {
                break stats;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    } else {
        pipeline.stats()?
    };
    let audit = pipeline.recorder_client()?.audit()?;
    let quarantine_bytes = std::fs::read(&pipeline.quarantine_path).unwrap_or_default();
    let results: Vec<RequestResult> = results
        .lock()
        .unwrap()
        .iter()
        .cloned()
        .map(|r| r.expect("every request produced a result"))
        .collect();
    pipeline.shutdown();

    // Evaluate expectations.
    let mut failures = Vec::new();
    for result in &results {
        if result.denied != result.expected_denied {
            failures.push(format!(
                "request {}: expected {}, got {}",
                result.index,
                if result.expected_denied {
                    "DENY"
                } else {
                    "ALLOW"
                },
                if result.denied { "DENY" } else { "ALLOW" }
            ));
        }
        if result.byte_identical == Some(false) {
            failures.push(format!(
                "request {}: response bytes differ from expectation",
                result.index
            ));
        }
    }
    if let Some(expected_events) = scenario.expected.sql_events {
        if stats.sql_events != expected_events {
            failures.push(format!(
                "sql event count {} does not match expected {expected_events}",
                stats.sql_events
            ));
        }
    }
    if let Some(expected_quarantined) = scenario.expected.quarantined_units {
        if stats.units_quarantined != expected_quarantined {
            failures.push(format!(
                "quarantined {} units, expected {expected_quarantined}",
                stats.units_quarantined
            ));
        }
    }
    if stats.orphan_events != 0 {
        failures.push(format!("{} orphan events recorded", stats.orphan_events));
    }
    if audit.misattributed != 0 {
        failures.push(format!("{} misattributed events", audit.misattributed));
    }

    let mut report = BenchReport::new("scenario");
    let latencies: Vec<u64> = results.iter().map(|r| r.latency_ns).collect();
    report.request_latency = Some(summarize_ns(&latencies));
    report.stages = stage_rows(&metrics.lock().unwrap());
    report.footprint_by_request = request_curve.lock().unwrap().clone();
    report.footprint_by_time_ms = time_curve.lock().unwrap().clone();

    Ok(ScenarioOutcome {
        name: scenario.name.clone(),
        passed: failures.is_empty(),
        failures,
        results,
        stats,
        audit,
        quarantine_bytes,
        report,
    })
}
