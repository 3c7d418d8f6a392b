//! `provtap` — drive, compose, and measure the provenance capture pipeline.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use provtap_cli::config::{require, CliConfig};
use provtap_cli::{
    bench_overhead, resolve_extractor, run_scenario, OverheadOptions, RunOptions, Scenario,
};
use provtap_core::guard;
use provtap_core::net::Endpoint;
use provtap_core::proxy::{self, ExtractorConfig, ProxyConfig, StubConfig};
use provtap_core::recorder::{self, read_quarantine, replay_quarantine, RecorderOptions};
use provtap_core::schema::Schema;
use provtap_core::shim::{self, ShimConfig};
use provtap_core::sql;
use provtap_core::wire::event_payload;

#[derive(Parser)]
#[command(
    name = "provtap",
    version,
    about = "Provenance capture pipeline for database-backed request workflows"
)]
struct Cli {
    /// Optional JSON config file mirroring the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a bundled or file-based scenario through the full pipeline.
    Run {
        /// Bundled name (sqli-exfil, baseline-1k) or a scenario JSON path.
        #[arg(long)]
        scenario: String,
        /// Disable verdict-coupled garbage collection.
        #[arg(long)]
        no_gc: bool,
        /// Sample the recorder footprint after every request.
        #[arg(long)]
        sample_per_request: bool,
        /// Write the run report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Copy the quarantine log here after the run.
        #[arg(long)]
        quarantine_out: Option<PathBuf>,
    },
    /// Measure end-to-end overhead against a no-interposition baseline.
    Bench {
        #[arg(long, default_value_t = 1000)]
        requests: usize,
        #[arg(long, default_value_t = 1)]
        concurrency: usize,
        /// Fixed listen endpoint for the baseline pool.
        #[arg(long)]
        direct_listen: Option<String>,
        /// Fixed listen endpoint for the pipeline pool.
        #[arg(long)]
        pipeline_listen: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Parse a SQL file offline and print extracted events as text.
    Extract {
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        worker: u32,
        /// One statement per line; blank and `--` comment lines skipped.
        file: PathBuf,
    },
    /// Render provenance as DOT, from a quarantine log or a live recorder.
    Graph {
        #[arg(long)]
        quarantine: Option<PathBuf>,
        #[arg(long)]
        recorder_endpoint: Option<String>,
        /// Restrict to one unit's subgraph.
        #[arg(long)]
        uuid: Option<String>,
    },
    /// Run the provenance recorder.
    Recorder {
        /// Listen endpoint (host:port or a unix socket path).
        #[arg(long)]
        recorder_endpoint: Option<String>,
        #[arg(long)]
        quarantine: Option<PathBuf>,
    },
    /// Run the database capture proxy.
    Proxy {
        #[arg(long)]
        listen: Option<String>,
        /// The real database (or stub) endpoint.
        #[arg(long)]
        upstream: Option<String>,
        #[arg(long)]
        recorder_endpoint: Option<String>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        extractor_path: Option<PathBuf>,
        #[arg(long)]
        parse_timeout_ms: Option<u64>,
    },
    /// Run the network guard.
    Guard {
        #[arg(long)]
        listen: Option<String>,
        /// The worker pool endpoint.
        #[arg(long)]
        upstream: Option<String>,
        #[arg(long)]
        recorder_endpoint: Option<String>,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Override the policy file's default action (allow|deny).
        #[arg(long)]
        default: Option<String>,
        #[arg(long)]
        no_gc: bool,
    },
    /// Run the simulated pre-forked worker pool.
    Pool {
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        recorder_endpoint: Option<String>,
        /// The database endpoint (normally the capture proxy).
        #[arg(long)]
        db_endpoint: Option<String>,
        /// Endpoint this pool serves responses on (the guard's upstream).
        #[arg(long)]
        guard_endpoint: Option<String>,
    },
    /// Run the deterministic database stub.
    Dbstub {
        #[arg(long)]
        listen: Option<String>,
        /// JSON table-size map: {"tables": {"orders": 3}, "default_rows": 1}.
        #[arg(long)]
        stub_config: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let cli = Cli::parse();
    let config = match CliConfig::load(cli.config.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command, config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse_endpoint(text: &str) -> Result<Endpoint> {
    text.parse()
        .with_context(|| format!("bad endpoint {text:?}"))
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("usage error: {message}");
    ExitCode::from(2)
}

fn block_forever() -> ExitCode {
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}

fn dispatch(command: Command, config: CliConfig) -> Result<ExitCode> {
    match command {
        Command::Run {
            scenario,
            no_gc,
            sample_per_request,
            report,
            quarantine_out,
        } => {
            let scenario = Scenario::load(&scenario)?;
            println!(
                "running scenario {:?}: {} requests, {} workers, gc {}",
                scenario.name,
                scenario.requests.len(),
                scenario.workers,
                if no_gc { "off" } else { "on" }
            );
            let outcome = run_scenario(
                &scenario,
                RunOptions {
                    gc: !no_gc,
                    sample_per_request,
                },
            )?;
            for failure in &outcome.failures {
                println!("FAIL: {failure}");
            }
            let denied = outcome.results.iter().filter(|r| r.denied).count();
            println!(
                "requests: {} total, {} allowed, {} denied",
                outcome.results.len(),
                outcome.results.len() - denied,
                denied
            );
            println!(
                "recorder: {} sql events, {} units ({} quarantined), footprint {} nodes+edges",
                outcome.stats.sql_events,
                outcome.stats.units_started,
                outcome.stats.units_quarantined,
                outcome.stats.footprint()
            );
            print!("{}", outcome.report.human_table());
            if let Some(path) = report.or(config.report) {
                let json = serde_json::json!({
                    "schema_version": provtap_cli::report::REPORT_SCHEMA_VERSION,
                    "scenario": outcome.name,
                    "passed": outcome.passed,
                    "failures": outcome.failures,
                    "results": outcome.results,
                    "bench": outcome.report,
                });
                std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
                println!("report written to {}", path.display());
            }
            if let Some(path) = quarantine_out {
                std::fs::write(&path, &outcome.quarantine_bytes)?;
                println!("quarantine log written to {}", path.display());
            }
            if outcome.passed {
                println!("scenario {:?}: PASS", outcome.name);
                Ok(ExitCode::SUCCESS)
            } else {
                println!("scenario {:?}: FAIL", outcome.name);
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Bench {
            requests,
            concurrency,
            direct_listen,
            pipeline_listen,
            report,
        } => {
            if requests < 100 {
                return Ok(usage_error("bench needs --requests >= 100"));
            }
            let direct = direct_listen.as_deref().map(parse_endpoint).transpose()?;
            let pipeline = pipeline_listen.as_deref().map(parse_endpoint).transpose()?;
            if let (Some(a), Some(b)) = (&direct, &pipeline) {
                if a == b {
                    return Ok(usage_error(
                        "--direct-listen and --pipeline-listen must differ",
                    ));
                }
            }
            let outcome = bench_overhead(OverheadOptions {
                requests,
                concurrency,
                direct_listen: direct,
                pipeline_listen: pipeline,
            })?;
            print!("{}", outcome.report.human_table());
            if let Some(path) = report.or(config.report) {
                std::fs::write(&path, serde_json::to_string_pretty(&outcome.report)?)?;
                println!("report written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract {
            schema,
            worker,
            file,
        } => {
            let schema_path = require(schema, config.schema, "schema")?;
            let schema = Schema::load(&schema_path)?;
            let worker =
                provtap_core::model::WorkerId::new(worker).map_err(|e| anyhow::anyhow!("{e}"))?;
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let mut failures = 0usize;
            for (i, line) in text.lines().enumerate() {
                let statement = line.trim();
                if statement.is_empty() || statement.starts_with("--") {
                    continue;
                }
                let result = sql::parse(statement)
                    .map_err(|e| anyhow::anyhow!("{e}"))
                    .and_then(|stmt| Ok(sql::extract(&stmt, &schema)?));
                match result {
                    Ok(extraction) => {
                        for event in sql::to_events(&extraction, worker) {
                            writeln!(out, "{}", event_payload(&event))?;
                        }
                    }
                    Err(e) => {
                        eprintln!("line {}: {e}", i + 1);
                        failures += 1;
                    }
                }
            }
            Ok(if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Graph {
            quarantine,
            recorder_endpoint,
            uuid,
        } => {
            let uuid = uuid
                .map(|u| uuid::Uuid::parse_str(&u).context("bad --uuid"))
                .transpose()?;
            match (quarantine.or(config.quarantine), recorder_endpoint) {
                (Some(path), None) => {
                    if let Some(uuid) = uuid {
                        let events = read_quarantine(&path)?;
                        let known = events.iter().any(|e| matches!(
                            e,
                            provtap_core::model::ProvEvent::UnitStart { uuid: u, .. } if *u == uuid
                        ));
                        anyhow::ensure!(known, "unit {uuid} not present in {}", path.display());
                    }
                    let graph = replay_quarantine(&path)?;
                    print!("{}", graph.export_dot(uuid));
                    Ok(ExitCode::SUCCESS)
                }
                (None, Some(endpoint)) => {
                    let endpoint = parse_endpoint(&endpoint)?;
                    let mut client = provtap_core::recorder::RecorderClient::connect(&endpoint)?;
                    print!("{}", client.dot(uuid)?);
                    Ok(ExitCode::SUCCESS)
                }
                _ => Ok(usage_error(
                    "pass exactly one of --quarantine or --recorder-endpoint",
                )),
            }
        }
        Command::Recorder {
            recorder_endpoint,
            quarantine,
        } => {
            let endpoint = parse_endpoint(&require(
                recorder_endpoint,
                config.recorder_endpoint,
                "recorder-endpoint",
            )?)?;
            let server = recorder::serve(
                &endpoint,
                RecorderOptions {
                    quarantine: quarantine.or(config.quarantine),
                },
            )?;
            println!("recorder listening on {}", server.endpoint());
            Ok(block_forever())
        }
        Command::Proxy {
            listen,
            upstream,
            recorder_endpoint,
            schema,
            extractor_path,
            parse_timeout_ms,
        } => {
            let listen = parse_endpoint(&require(listen, config.listen, "listen")?)?;
            let upstream = parse_endpoint(&require(upstream, config.upstream, "upstream")?)?;
            let recorder = parse_endpoint(&require(
                recorder_endpoint,
                config.recorder_endpoint,
                "recorder-endpoint",
            )?)?;
            let schema_path = require(schema, config.schema, "schema")?;
            Schema::load(&schema_path).context("schema does not load")?;
            let extractor = resolve_extractor(extractor_path.or(config.extractor_path))?;
            let timeout =
                Duration::from_millis(parse_timeout_ms.or(config.parse_timeout_ms).unwrap_or(2000));
            let server = proxy::serve(ProxyConfig {
                listen,
                upstream,
                recorder: Some(recorder),
                extractor: ExtractorConfig {
                    path: extractor,
                    schema: schema_path,
                    timeout,
                },
                metrics: None,
            })?;
            println!("capture proxy listening on {}", server.endpoint());
            Ok(block_forever())
        }
        Command::Guard {
            listen,
            upstream,
            recorder_endpoint,
            policy,
            default,
            no_gc,
        } => {
            let listen = parse_endpoint(&require(listen, config.listen, "listen")?)?;
            let upstream = parse_endpoint(&require(upstream, config.upstream, "upstream")?)?;
            let recorder = parse_endpoint(&require(
                recorder_endpoint,
                config.recorder_endpoint,
                "recorder-endpoint",
            )?)?;
            let policy_path = require(policy, config.policy, "policy")?;
            let text = std::fs::read_to_string(&policy_path)
                .with_context(|| format!("reading policy {}", policy_path.display()))?;
            let mut policy = guard::parse_policy(&text)?;
            if let Some(default) = default.or(config.default) {
                policy.default_action = match default.to_ascii_lowercase().as_str() {
                    "allow" => guard::RuleAction::Allow,
                    "deny" => guard::RuleAction::Deny,
                    other => {
                        return Ok(usage_error(&format!(
                            "--default must be allow|deny, got {other:?}"
                        )))
                    }
                };
            }
            let server = guard::serve(guard::GuardConfig {
                listen,
                upstream,
                recorder,
                policy,
                gc_enabled: !no_gc,
            })?;
            println!("guard listening on {}", server.endpoint());
            Ok(block_forever())
        }
        Command::Pool {
            workers,
            recorder_endpoint,
            db_endpoint,
            guard_endpoint,
        } => {
            let workers = workers.or(config.workers).unwrap_or(4);
            let listen = parse_endpoint(&require(
                guard_endpoint,
                config.guard_endpoint,
                "guard-endpoint",
            )?)?;
            let recorder = parse_endpoint(&require(
                recorder_endpoint,
                config.recorder_endpoint,
                "recorder-endpoint",
            )?)?;
            let db = parse_endpoint(&require(db_endpoint, config.db_endpoint, "db-endpoint")?)?;
            let server = shim::serve(ShimConfig {
                listen,
                workers,
                recorder: Some(recorder),
                db: Some(db),
                metrics: None,
            })?;
            println!(
                "worker pool ({workers} workers) listening on {}",
                server.endpoint()
            );
            Ok(block_forever())
        }
        Command::Dbstub {
            listen,
            stub_config,
            schema,
        } => {
            let listen = parse_endpoint(&require(listen, config.listen, "listen")?)?;
            let stub = match stub_config.or(config.stub_config) {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading stub config {}", path.display()))?;
                    serde_json::from_str::<StubConfig>(&text)?
                }
                None => StubConfig::default(),
            };
            let schema = match schema.or(config.schema) {
                Some(path) => Some(Schema::load(&path)?),
                None => None,
            };
            let server = proxy::serve_stub(&listen, stub, schema)?;
            println!("db stub listening on {}", server.endpoint());
            Ok(block_forever())
        }
    }
}
