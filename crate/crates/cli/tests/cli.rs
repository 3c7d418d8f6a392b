//! Black-box tests of the `provtap` binary: offline extraction, graph
//! rendering, scenario replay, and manual component composition.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use provtap_cli::send_request;
use provtap_core::net::Endpoint;
use provtap_core::shim::SimRequest;
use provtap_core::testkit::CORPUS_SCHEMA;

fn provtap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_provtap"))
}

fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const FIG_STATEMENT: &str =
    "SELECT employee_id, CONCAT(firstname, lastname) FROM employees WHERE MAX(salary) > 1000000";

#[test]
fn extract_prints_one_line_per_event() {
    let dir = tempfile::tempdir().unwrap();
    let schema = write_file(&dir, "schema.sql", CORPUS_SCHEMA);
    let sql = write_file(&dir, "queries.sql", &format!("{FIG_STATEMENT}\n"));
    let output = provtap()
        .args(["extract", "--schema"])
        .arg(&schema)
        .args(["--worker", "41"])
        .arg(&sql)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines.len(),
        5,
        "five events for the four reads and one used"
    );
    assert!(lines.iter().all(|l| l.split('\t').nth(1) == Some("41")));
    assert!(lines.contains(&"SQL_USED\t41\temployees\tsalary"));
}

#[test]
fn extract_empty_file_succeeds_silently() {
    let dir = tempfile::tempdir().unwrap();
    let schema = write_file(&dir, "schema.sql", CORPUS_SCHEMA);
    let sql = write_file(&dir, "empty.sql", "");
    let output = provtap()
        .args(["extract", "--schema"])
        .arg(&schema)
        .arg(&sql)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
}

#[test]
fn extract_reports_failures_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let schema = write_file(&dir, "schema.sql", CORPUS_SCHEMA);
    let sql = write_file(
        &dir,
        "bad.sql",
        "SELEKT x FROM y\nSELECT title FROM products\n",
    );
    let output = provtap()
        .args(["extract", "--schema"])
        .arg(&schema)
        .arg(&sql)
        .output()
        .unwrap();
    assert!(!output.status.success());
    // The good statement still extracted.
    assert!(String::from_utf8_lossy(&output.stdout).contains("products\ttitle"));
    assert!(String::from_utf8_lossy(&output.stderr).contains("parse error at byte 0"));
}

#[test]
fn run_scenario_writes_report_and_quarantine_then_graph_renders_it() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let quarantine = dir.path().join("quarantine.log");
    let output = provtap()
        .args(["run", "--scenario", "sqli-exfil", "--report"])
        .arg(&report)
        .arg("--quarantine-out")
        .arg(&quarantine)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let report_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report_json["passed"], serde_json::Value::Bool(true));
    assert_eq!(report_json["schema_version"], 1);

    // The quarantine log renders as DOT and names the exfiltrated column.
    let output = provtap()
        .args(["graph", "--quarantine"])
        .arg(&quarantine)
        .output()
        .unwrap();
    assert!(output.status.success());
    let dot = String::from_utf8(output.stdout).unwrap();
    assert!(dot.starts_with("digraph prov {"));
    assert!(dot.contains("customers.password"));

    // Restricting to an unknown unit is an error.
    let output = provtap()
        .args(["graph", "--quarantine"])
        .arg(&quarantine)
        .args(["--uuid", "0a61e0b4-8f4b-4d0a-9c1a-32b0a7a21c55"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn graph_requires_exactly_one_source() {
    let output = provtap().arg("graph").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bench_rejects_too_few_requests() {
    let output = provtap()
        .args(["bench", "--requests", "5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bench_rejects_identical_endpoints() {
    let output = provtap()
        .args([
            "bench",
            "--requests",
            "100",
            "--direct-listen",
            "127.0.0.1:7911",
            "--pipeline-listen",
            "127.0.0.1:7911",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

/// Child process killed on drop, so failed assertions don't leak servers.
struct Component(Child);

impl Drop for Component {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_component(args: &[&str]) -> Component {
    let mut child = provtap()
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    // Wait for the "listening on" line so startup races are gone.
    let stdout = child.stdout.take().unwrap();
    let mut reader = BufReader::new(stdout);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(
        line.contains("listening on"),
        "unexpected startup line {line:?}"
    );
    std::thread::spawn(move || {
        // Keep draining so the child never blocks on a full pipe.
        let mut sink = String::new();
        while reader.read_line(&mut sink).map(|n| n > 0).unwrap_or(false) {
            sink.clear();
        }
    });
    Component(child)
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

#[test]
fn manual_composition_of_all_five_components_serves_requests() {
    let dir = tempfile::tempdir().unwrap();
    let schema = write_file(&dir, "schema.sql", CORPUS_SCHEMA);
    let policy = write_file(
        &dir,
        "policy.txt",
        "DENY [customers.password] SIZE=0\nDEFAULT ALLOW\n",
    );
    let stub_config = write_file(
        &dir,
        "stub.json",
        r#"{"tables": {"products": 2}, "default_rows": 1}"#,
    );
    let quarantine = dir.path().join("quarantine.log");

    let recorder_port = free_port();
    let stub_port = free_port();
    let proxy_port = free_port();
    let pool_port = free_port();
    let guard_port = free_port();
    let recorder_ep = format!("127.0.0.1:{recorder_port}");
    let stub_ep = format!("127.0.0.1:{stub_port}");
    let proxy_ep = format!("127.0.0.1:{proxy_port}");
    let pool_ep = format!("127.0.0.1:{pool_port}");
    let guard_ep = format!("127.0.0.1:{guard_port}");

    let _recorder = spawn_component(&[
        "recorder",
        "--recorder-endpoint",
        &recorder_ep,
        "--quarantine",
        quarantine.to_str().unwrap(),
    ]);
    let _stub = spawn_component(&[
        "dbstub",
        "--listen",
        &stub_ep,
        "--stub-config",
        stub_config.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
    ]);
    let _proxy = spawn_component(&[
        "proxy",
        "--listen",
        &proxy_ep,
        "--upstream",
        &stub_ep,
        "--recorder-endpoint",
        &recorder_ep,
        "--schema",
        schema.to_str().unwrap(),
    ]);
    let _pool = spawn_component(&[
        "pool",
        "--workers",
        "2",
        "--recorder-endpoint",
        &recorder_ep,
        "--db-endpoint",
        &proxy_ep,
        "--guard-endpoint",
        &pool_ep,
    ]);
    let _guard = spawn_component(&[
        "guard",
        "--listen",
        &guard_ep,
        "--upstream",
        &pool_ep,
        "--recorder-endpoint",
        &recorder_ep,
        "--policy",
        policy.to_str().unwrap(),
    ]);

    let guard_endpoint: Endpoint = guard_ep.parse().unwrap();
    let benign = SimRequest {
        remote_addr: "203.0.113.9:41000".parse().unwrap(),
        script: vec!["SELECT title, price FROM products WHERE id = 1".into()],
    };
    let response = send_request(&guard_endpoint, &benign).unwrap();
    assert!(
        !response.denied,
        "benign request must pass: {:?}",
        String::from_utf8_lossy(&response.raw)
    );

    let exfil = SimRequest {
        remote_addr: "198.51.100.1:41001".parse().unwrap(),
        script: vec!["SELECT password FROM customers".into()],
    };
    let response = send_request(&guard_endpoint, &exfil).unwrap();
    assert!(response.denied, "exfiltration must be blocked");

    // The live recorder serves DOT over the same socket.
    let mut client =
        provtap_core::recorder::RecorderClient::connect(&recorder_ep.parse().unwrap()).unwrap();
    let deadline = std::time::Instant::now() + Duration::from_secs(5);
    loop {
        let stats = client.stats().unwrap();
        if stats.units_gcd >= 2 || std::time::Instant::now() > deadline {
            assert_eq!(stats.units_started, 2);
            assert_eq!(stats.units_quarantined, 1);
            break;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    let output = provtap()
        .args(["graph", "--recorder-endpoint", &recorder_ep])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).starts_with("digraph prov {"));

    // And the quarantine file on disk holds the denied unit.
    let events = provtap_core::recorder::read_quarantine(&quarantine).unwrap();
    assert!(!events.is_empty());
    let _ = std::io::stdout().flush();
}

#[test]
fn extract_binary_one_shot_contract() {
    let dir = tempfile::tempdir().unwrap();
    let schema = write_file(&dir, "schema.sql", CORPUS_SCHEMA);

    // Success: SQL on stdin, encoded event frames on stdout, exit 0.
    let mut child = Command::new(env!("CARGO_BIN_EXE_provtap-extract"))
        .arg("--schema")
        .arg(&schema)
        .args(["--worker", "41"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(FIG_STATEMENT.as_bytes())
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    let mut frames = provtap_core::wire::FrameReader::new();
    frames.extend(&output.stdout);
    let mut events = Vec::new();
    while let Some(event) = frames.next_event().unwrap() {
        events.push(event);
    }
    assert_eq!(events.len(), 5);
    assert!(events.iter().all(|e| e.worker().get() == 41));

    // Parse failure: nonzero exit, no frames.
    let mut child = Command::new(env!("CARGO_BIN_EXE_provtap-extract"))
        .arg("--schema")
        .arg(&schema)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"'); DROP TABLE--")
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert!(!output.status.success());
    assert!(output.stdout.is_empty());

    // Empty input: success, no output.
    let mut child = Command::new(env!("CARGO_BIN_EXE_provtap-extract"))
        .arg("--schema")
        .arg(&schema)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdin.take());
    let output = child.wait_with_output().unwrap();
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
}

#[test]
fn empty_scenario_passes_with_zero_samples() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_file(
        &dir,
        "empty.json",
        r#"{
            "name": "empty",
            "schema": "CREATE TABLE t (a INT);",
            "policy": "DEFAULT ALLOW\n",
            "requests": []
        }"#,
    );
    let report = dir.path().join("report.json");
    let output = provtap()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["passed"], serde_json::Value::Bool(true));
    assert_eq!(json["results"].as_array().unwrap().len(), 0);
}

#[test]
fn graph_of_empty_quarantine_log_is_an_empty_digraph() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_file(&dir, "quarantine.log", "");
    let output = provtap()
        .args(["graph", "--quarantine"])
        .arg(&log)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(
        String::from_utf8_lossy(&output.stdout),
        "digraph prov {\n}\n"
    );
}

#[test]
fn scenario_accepts_path_refs_and_json_lines_requests() {
    let dir = tempfile::tempdir().unwrap();
    write_file(&dir, "schema.sql", CORPUS_SCHEMA);
    write_file(&dir, "policy.txt", "DEFAULT ALLOW\n");
    write_file(
        &dir,
        "requests.jsonl",
        "{\"remote_addr\": \"203.0.113.7:41200\", \"script\": [\"SELECT title FROM products\"]}\n\
         \n\
         {\"remote_addr\": \"203.0.113.8:41201\", \"script\": []}\n",
    );
    let scenario = write_file(
        &dir,
        "scenario.json",
        r#"{
            "name": "from-files",
            "schema_path": "schema.sql",
            "policy_path": "policy.txt",
            "requests_path": "requests.jsonl"
        }"#,
    );
    let output = provtap()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("2 requests"));
}

#[test]
fn scenario_referencing_unknown_tables_is_rejected_upfront() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_file(
        &dir,
        "bad.json",
        r#"{
            "name": "bad",
            "schema": "CREATE TABLE t (a INT);",
            "policy": "DEFAULT ALLOW\n",
            "requests": [
                { "remote_addr": "203.0.113.7:41200", "script": ["SELECT x FROM ghosts"] }
            ]
        }"#,
    );
    let output = provtap().args(["run", "--scenario"]).arg(&scenario).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("ghosts"));
}
