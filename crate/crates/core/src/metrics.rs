//! Per-stage latency samples, collected when components run in-process
//! under the harness: unit_start send, unit_end send, parse, event
//! transmit, and residual proxy cost.

use std::sync::{Arc, Mutex};

#[derive(Debug, Default, Clone)]
pub struct StageSamples {
    pub unit_start_ns: Vec<u64>,
    pub unit_end_ns: Vec<u64>,
    pub parse_ns: Vec<u64>,
    pub event_tx_ns: Vec<u64>,
    pub proxy_other_ns: Vec<u64>,
}

pub type MetricsSink = Arc<Mutex<StageSamples>>;

pub fn new_sink() -> MetricsSink {
    Arc::new(Mutex::new(StageSamples::default()))
}

pub fn record(sink: &Option<MetricsSink>, stage: Stage, nanos: u64) {
    if let Some(sink) = sink {
        let mut samples = sink.lock().expect("metrics sink poisoned");
        match stage {
            Stage::UnitStartSend => samples.unit_start_ns.push(nanos),
            Stage::UnitEndSend => samples.unit_end_ns.push(nanos),
            Stage::Parse => samples.parse_ns.push(nanos),
            Stage::EventTransmit => samples.event_tx_ns.push(nanos),
            Stage::ProxyOther => samples.proxy_other_ns.push(nanos),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Stage {
    UnitStartSend,
    UnitEndSend,
    Parse,
    EventTransmit,
    ProxyOther,
}
