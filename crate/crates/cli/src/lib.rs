//! Harness library: in-process pipeline orchestration, bundled scenarios,
//! the replay runner, and overhead benchmarking. The `provtap` binary is a
//! thin argument layer over this.

pub mod benchrun;
pub mod config;
pub mod orchestra;
pub mod report;
pub mod scenario;

pub use benchrun::{bench_overhead, OverheadOptions, OverheadOutcome};
pub use orchestra::{
    expected_shim_response, resolve_extractor, send_request, ClientResponse, Pipeline,
    PipelineOptions,
};
pub use report::{stage_rows, summarize_ns, BenchReport, LatencySummary, StageRow};
pub use scenario::{run_scenario, RunOptions, Scenario, ScenarioOutcome};
