//! Benchmark and scenario reports: versioned JSON plus a human table.

use serde::{Deserialize, Serialize};

use provtap_core::metrics::StageSamples;

/// Bump on breaking field changes; additions are backward compatible
/// within a major version.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

pub fn summarize_ns(samples: &[u64]) -> LatencySummary {
    if samples.is_empty() {
        return LatencySummary::default();
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let total: u128 = sorted.iter().map(|n| *n as u128).sum();
    let mean_ms = total as f64 / sorted.len() as f64 / 1e6;
    let p95_index = ((sorted.len() as f64) * 0.95).ceil() as usize - 1;
    let p95_ms = sorted[p95_index.min(sorted.len() - 1)] as f64 / 1e6;
    let max_ms = *sorted.last().expect("non-empty") as f64 / 1e6;
    LatencySummary {
        count: sorted.len(),
        mean_ms,
        p95_ms,
        max_ms,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRow {
    pub location: String,
    pub operation: String,
    pub latency: LatencySummary,
}

/// The five per-stage rows of the microbenchmark table.
pub fn stage_rows(samples: &StageSamples) -> Vec<StageRow> {
    let row = |location: &str, operation: &str, data: &[u64]| StageRow {
        location: location.to_string(),
        operation: operation.to_string(),
        latency: summarize_ns(data),
    };
    vec![
        row(
            "worker shim",
            "transmit unit_start message",
            &samples.unit_start_ns,
        ),
        row(
            "worker shim",
            "transmit unit_end message",
            &samples.unit_end_ns,
        ),
        row("capture proxy", "parse sql query", &samples.parse_ns),
        row(
            "capture proxy",
            "transmit sql provenance",
            &samples.event_tx_ns,
        ),
        row(
            "capture proxy",
            "other (incl. proxy cost)",
            &samples.proxy_other_ns,
        ),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct: Option<LatencySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<LatencySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub added_mean_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub added_p95_ms: Option<f64>,
    #[serde(default)]
    pub stages: Vec<StageRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request_latency: Option<LatencySummary>,
    /// (requests completed, recorder nodes+edges) samples.
    #[serde(default)]
    pub footprint_by_request: Vec<(u64, u64)>,
    /// (elapsed ms, recorder nodes+edges) samples, polled every 500 ms.
    #[serde(default)]
    pub footprint_by_time_ms: Vec<(u64, u64)>,
}

impl BenchReport {
    pub fn new(kind: &str) -> Self {
        BenchReport {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: kind.to_string(),
            direct: None,
            pipeline: None,
            added_mean_ms: None,
            added_p95_ms: None,
            stages: Vec::new(),
            request_latency: None,
            footprint_by_request: Vec::new(),
            footprint_by_time_ms: Vec::new(),
        }
    }

    pub fn human_table(&self) -> String {
        let mut out = String::new();
        if let (Some(direct), Some(pipeline)) = (&self.direct, &self.pipeline) {
            out.push_str(&format!(
                "end-to-end delay over {} requests\n\
                 {:<34} {:>10} {:>10}\n",
                pipeline.count, "scenario", "mean (ms)", "p95 (ms)"
            ));
            out.push_str(&format!(
                "{:<34} {:>10.3} {:>10.3}\n",
                "direct to stub (no interposition)", direct.mean_ms, direct.p95_ms
            ));
            out.push_str(&format!(
                "{:<34} {:>10.3} {:>10.3}\n",
                "full pipeline (guard+shim+proxy)", pipeline.mean_ms, pipeline.p95_ms
            ));
            if let Some(added) = self.added_mean_ms {
                let pct = if direct.mean_ms > 0.0 {
                    added / direct.mean_ms * 100.0
                } else {
                    0.0
                };
                out.push_str(&format!(
                    "{:<34} {:>10.3} ({:.1}%)\n",
                    "overhead", added, pct
                ));
            }
            out.push('\n');
        }
        if !self.stages.is_empty() {
            out.push_str(&format!(
                "{:<16} {:<30} {:>10} {:>10}\n",
                "location", "operation", "mean (ms)", "p95 (ms)"
            ));
            for row in &self.stages {
                out.push_str(&format!(
                    "{:<16} {:<30} {:>10.3} {:>10.3}\n",
                    row.location, row.operation, row.latency.mean_ms, row.latency.p95_ms
                ));
            }
        }
        if let Some(latency) = &self.request_latency {
            out.push_str(&format!(
                "\nper-request latency: n={} mean={:.3} ms p95={:.3} ms max={:.3} ms\n",
                latency.count, latency.mean_ms, latency.p95_ms, latency.max_ms
            ));
        }
        if let Some((_, footprint)) = self.footprint_by_request.last() {
            out.push_str(&format!(
                "final recorder footprint: {footprint} nodes+edges\n"
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_math() {
        let ns: Vec<u64> = (1..=100).map(|i| i * 1_000_000).collect();
        let summary = summarize_ns(&ns);
        assert_eq!(summary.count, 100);
        assert!((summary.mean_ms - 50.5).abs() < 1e-9);
        assert!((summary.p95_ms - 95.0).abs() < 1e-9);
        assert!((summary.max_ms - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_samples_summarize_to_zero() {
        assert_eq!(summarize_ns(&[]), LatencySummary::default());
    }

    #[test]
    fn report_round_trips_and_has_five_stage_rows() {
        let mut report = BenchReport::new("overhead");
        report.stages = stage_rows(&StageSamples::default());
        assert_eq!(report.stages.len(), 5);
        let json = serde_json::to_string(&report).unwrap();
        let back: BenchReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.schema_version, REPORT_SCHEMA_VERSION);
        assert_eq!(back.stages.len(), 5);
    }
}
