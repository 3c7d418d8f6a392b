//! The isolated parse-and-extract executable the capture proxy invokes.
//!
//! One-shot mode (default): reads one SQL statement on stdin, writes the
//! extracted provenance as encoded event frames on stdout. Exit status 0
//! means success; any nonzero status is a parse failure.
//!
//! Serve mode (`--serve`): process creation is expensive on some systems,
//! so the proxy can keep a child alive across statements. Each statement
//! arrives as one length-prefixed frame on stdin; the reply is the event
//! frames followed by a `DONE` frame, or a `FAIL\t<reason>` frame for
//! statements outside the grammar. The process stays disposable: the caller
//! kills it on any hang or protocol violation and checks its exit status.
//!
//! Arguments are parsed by hand: this binary sits on the per-statement hot
//! path and must start fast.

use std::io::{Read, Write};
use std::process::ExitCode;

use provtap_core::model::WorkerId;
use provtap_core::schema::Schema;
use provtap_core::sql::{extract, parse, to_events, Extraction};
use provtap_core::wire::{encode_event, frame_payload, read_frame};

const USAGE: &str = "usage: provtap-extract --schema <path> [--worker <id>] [--serve]";

fn main() -> ExitCode {
    let mut schema_path: Option<String> = None;
    let mut worker_id: u32 = 1;
    let mut serve = false;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--schema" => schema_path = args.next(),
            "--worker" => {
                let Some(value) = args.next().and_then(|v| v.parse().ok()) else {
                    eprintln!("{USAGE}");
                    return ExitCode::from(2);
                };
                worker_id = value;
            }
            "--serve" => serve = true,
            "--help" | "-h" => {
                println!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            other => {
                eprintln!("unknown argument {other:?}\n{USAGE}");
                return ExitCode::from(2);
            }
        }
    }
    let Some(schema_path) = schema_path else {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    };
    let Ok(worker) = WorkerId::new(worker_id) else {
        eprintln!("worker id must be positive");
        return ExitCode::from(2);
    };
    let schema = match Schema::load(&schema_path) {
        Ok(schema) => schema,
        Err(e) => {
            eprintln!("schema: {e}");
            return ExitCode::from(2);
        }
    };

    if serve {
        run_serve(&schema, worker)
    } else {
        run_once(&schema, worker)
    }
}

fn extract_one(schema: &Schema, sql: &str) -> Result<Extraction, String> {
    let statement = parse(sql).map_err(|e| e.to_string())?;
    extract(&statement, schema).map_err(|e| e.to_string())
}

fn run_once(schema: &Schema, worker: WorkerId) -> ExitCode {
    let mut sql = String::new();
    if std::io::stdin().read_to_string(&mut sql).is_err() {
        eprintln!("stdin is not UTF-8");
        return ExitCode::FAILURE;
    }
    let sql = sql.trim();
    if sql.is_empty() {
        return ExitCode::SUCCESS;
    }
    let extraction = match extract_one(schema, sql) {
        Ok(extraction) => extraction,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::FAILURE;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for event in to_events(&extraction, worker) {
        let Ok(frame) = encode_event(&event) else {
            return ExitCode::FAILURE;
        };
        if out.write_all(&frame).is_err() {
            return ExitCode::FAILURE;
        }
    }
    if out.flush().is_err() {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

fn run_serve(schema: &Schema, worker: WorkerId) -> ExitCode {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut input = stdin.lock();
    let mut out = stdout.lock();
    loop {
        let sql = match read_frame(&mut input) {
            Ok(Some(payload)) => payload,
            Ok(None) => return ExitCode::SUCCESS, // clean EOF
            Err(e) => {
                eprintln!("bad statement frame: {e}");
                return ExitCode::FAILURE;
            }
        };
        let reply = match extract_one(schema, sql.trim()) {
            Ok(extraction) => {
                let mut bytes = Vec::new();
                for event in to_events(&extraction, worker) {
                    let Ok(frame) = encode_event(&event) else {
                        return ExitCode::FAILURE;
                    };
                    bytes.extend_from_slice(&frame);
                }
                let Ok(done) = frame_payload("DONE") else {
                    return ExitCode::FAILURE;
                };
                bytes.extend_from_slice(&done);
                bytes
            }
            Err(reason) => match frame_payload(&format!("FAIL\t{reason}")) {
                Ok(frame) => frame,
                Err(_) => return ExitCode::FAILURE,
            },
        };
        if out.write_all(&reply).is_err() || out.flush().is_err() {
            return ExitCode::FAILURE;
        }
    }
}
