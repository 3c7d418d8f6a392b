//! The versioned, acyclic in-memory provenance graph.
//!
//! Writing an object creates a new node with an incremented version number;
//! subsequent reads link to the newest version so the graph stays acyclic.
//! Garbage collection prunes whitelisted units wholesale while persistent
//! vocabulary (workers, remote hosts, and the latest version of each SQL
//! entity) survives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::Path;

use uuid::Uuid;

use crate::model::{monotonic_ns, EventKind, ProvEvent, SqlObject, UnitOfWork, WorkerId};

use super::quarantine::QuarantineLog;

pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeIdentity {
    SqlEntity {
        object: SqlObject,
        version: u32,
    },
    Unit {
        uuid: Uuid,
    },
    Worker(WorkerId),
    /// Remote hosts are identified by address alone; the ephemeral port
    /// lives on the unit, not the host node.
    RemoteHost(Ipv4Addr),
    Attribute(String),
}

#[derive(Debug, Clone)]
pub struct ProvNode {
    pub id: NodeId,
    pub identity: NodeIdentity,
    pub created_at: u64,
}

/// Distinguishes accessed data (read) from referenced data (used) on a
/// `used` edge, and marks writes in ancestry summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessKind {
    Read,
    Used,
    Wrote,
}

impl AccessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessKind::Read => "read",
            AccessKind::Used => "used",
            AccessKind::Wrote => "wrote",
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "read" => AccessKind::Read,
            "used" => AccessKind::Used,
            "wrote" => AccessKind::Wrote,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    /// Unit → SqlEntity, flagged read (accessed) or used (referenced).
    Used(UseFlag),
    /// SqlEntity → unit that generated this version.
    WasGeneratedBy,
    /// Unit → worker.
    WasAssociatedWith,
    /// Unit → remote host.
    WasStartedBy,
    /// Unit → attribute (e.g. a preserved parse failure).
    HasAttribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UseFlag {
    Read,
    Used,
}

impl Relation {
    pub fn label(self) -> &'static str {
        match self {
            Relation::Used(UseFlag::Read) => "read",
            Relation::Used(UseFlag::Used) => "used",
            Relation::WasGeneratedBy => "wasGeneratedBy",
            Relation::WasAssociatedWith => "wasAssociatedWith",
            Relation::WasStartedBy => "wasStartedBy",
            Relation::HasAttribute => "hasAttribute",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProvEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcVerdict {
    Allowed,
    Suspicious,
}

impl GcVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            GcVerdict::Allowed => "ALLOWED",
            GcVerdict::Suspicious => "SUSPICIOUS",
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "ALLOWED" => Some(GcVerdict::Allowed),
            "SUSPICIOUS" => Some(GcVerdict::Suspicious),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecorderError {
    #[error("{kind} event from worker {worker} with no open unit")]
    OrphanEvent { kind: EventKind, worker: WorkerId },
    #[error("unknown unit {0}")]
    UnknownUnit(Uuid),
    #[error("unit {0} is not open")]
    UnitNotOpen(Uuid),
    #[error("worker {worker} already has open unit {open}")]
    UnitAlreadyOpen { worker: WorkerId, open: Uuid },
    #[error("unit {0} already exists")]
    DuplicateUnit(Uuid),
    #[error("unit {0} is still open")]
    UnitStillOpen(Uuid),
    #[error("worker {0} has no active unit")]
    NoActiveUnit(WorkerId),
    #[error("unit {uuid} belongs to worker {expected}, event came from {got}")]
    WorkerMismatch {
        uuid: Uuid,
        expected: WorkerId,
        got: WorkerId,
    },
    #[error("quarantine write failed: {0}")]
    Quarantine(String),
}

/// What a unit's current provenance looks like to the guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AncestrySummary {
    pub uuid: Uuid,
    pub remote_addr: SocketAddrV4,
    pub ancestors: Vec<(SqlObject, AccessKind)>,
    pub tainted: bool,
    pub impact_bytes: u64,
}

/// Per-unit bookkeeping. The synthetic "unattributed" unit (nil uuid) that
/// quarantines orphan events has no [`UnitOfWork`].
#[derive(Debug, Clone)]
pub struct UnitInfo {
    pub unit: Option<UnitOfWork>,
    pub node: NodeId,
    pub accesses: BTreeSet<(SqlObject, AccessKind)>,
    pub tainted: bool,
    pub impact_bytes: u64,
    pub impact_rows: u64,
    pub events: Vec<ProvEvent>,
}

impl UnitInfo {
    pub fn is_open(&self) -> bool {
        self.unit.as_ref().map(|u| u.is_open()).unwrap_or(true)
    }

    pub fn worker(&self) -> Option<WorkerId> {
        self.unit.as_ref().map(|u| u.worker)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GraphCounters {
    pub events_total: u64,
    pub sql_events: u64,
    pub orphan_events: u64,
    pub misattributed: u64,
    pub units_started: u64,
    pub units_closed: u64,
    pub units_gcd: u64,
    pub units_quarantined: u64,
    pub cycle_avoided_links: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcOutcome {
    Done,
    Deferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditReport {
    pub sql_events_total: u64,
    pub attributed_retained: u64,
    pub orphan_events: u64,
    pub misattributed: u64,
}

pub struct ProvGraph {
    nodes: BTreeMap<NodeId, ProvNode>,
    out_edges: HashMap<NodeId, Vec<ProvEdge>>,
    in_edges: HashMap<NodeId, Vec<ProvEdge>>,
    edge_count: u64,
    next_node: NodeId,

    latest_version: HashMap<SqlObject, u32>,
    entity_nodes: HashMap<(SqlObject, u32), NodeId>,
    worker_nodes: HashMap<WorkerId, NodeId>,
    host_nodes: HashMap<Ipv4Addr, NodeId>,

    units: HashMap<Uuid, UnitInfo>,
    open_by_worker: HashMap<WorkerId, Uuid>,
    last_by_worker: HashMap<WorkerId, Uuid>,
    pending_verdicts: HashMap<Uuid, GcVerdict>,

    counters: GraphCounters,
    quarantine: Option<QuarantineLog>,
}

impl Default for ProvGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl ProvGraph {
    pub fn new() -> Self {
        ProvGraph {
            nodes: BTreeMap::new(),
            out_edges: HashMap::new(),
            in_edges: HashMap::new(),
            edge_count: 0,
            next_node: 0,
            latest_version: HashMap::new(),
            entity_nodes: HashMap::new(),
            worker_nodes: HashMap::new(),
            host_nodes: HashMap::new(),
            units: HashMap::new(),
            open_by_worker: HashMap::new(),
            last_by_worker: HashMap::new(),
            pending_verdicts: HashMap::new(),
            counters: GraphCounters::default(),
            quarantine: None,
        }
    }

    /// A graph whose SUSPICIOUS garbage collections append the unit's event
    /// stream to the given quarantine log.
    pub fn with_quarantine(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut graph = ProvGraph::new();
        graph.quarantine = Some(QuarantineLog::open(path)?);
        Ok(graph)
    }

    pub fn node_count(&self) -> u64 {
        self.nodes.len() as u64
    }

    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }

    pub fn counters(&self) -> GraphCounters {
        self.counters
    }

    pub fn live_units(&self) -> u64 {
        self.units.len() as u64
    }

    pub fn has_unit(&self, uuid: Uuid) -> bool {
        self.units.contains_key(&uuid)
    }

    pub fn unit(&self, uuid: Uuid) -> Option<&UnitInfo> {
        self.units.get(&uuid)
    }

    pub fn units(&self) -> impl Iterator<Item = &UnitInfo> {
        self.units.values()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ProvNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = ProvEdge> + '_ {
        self.nodes
            .keys()
            .flat_map(move |id| self.out_edges.get(id).into_iter().flatten().copied())
    }

    pub fn latest_version_of(&self, object: &SqlObject) -> Option<u32> {
        self.latest_version.get(object).copied()
    }

    fn new_node(&mut self, identity: NodeIdentity) -> NodeId {
        let id = self.next_node;
        self.next_node += 1;
        self.nodes.insert(
            id,
            ProvNode {
                id,
                identity,
                created_at: monotonic_ns(),
            },
        );
        id
    }

    /// Idempotent edge insertion: an identical (src, dst, relation) triple
    /// is stored once.
    fn add_edge(&mut self, src: NodeId, dst: NodeId, relation: Relation) {
        let edge = ProvEdge { src, dst, relation };
        let out = self.out_edges.entry(src).or_default();
        if out.contains(&edge) {
            return;
        }
        out.push(edge);
        self.in_edges.entry(dst).or_default().push(edge);
        self.edge_count += 1;
    }

    /// True if `target` is reachable from `start` along directed edges.
    fn reaches(&self, start: NodeId, target: NodeId) -> bool {
        if start == target {
            return true;
        }
        let mut stack = vec![start];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for edge in self.out_edges.get(&n).into_iter().flatten() {
                if edge.dst == target {
                    return true;
                }
                stack.push(edge.dst);
            }
        }
        false
    }

    fn latest_entity_node(&mut self, object: &SqlObject) -> NodeId {
        let version = *self.latest_version.entry(object.clone()).or_insert(0);
        if let Some(&node) = self.entity_nodes.get(&(object.clone(), version)) {
            return node;
        }
        let node = self.new_node(NodeIdentity::SqlEntity {
            object: object.clone(),
            version,
        });
        self.entity_nodes.insert((object.clone(), version), node);
        node
    }

    fn worker_node(&mut self, worker: WorkerId) -> NodeId {
        if let Some(&node) = self.worker_nodes.get(&worker) {
            return node;
        }
        let node = self.new_node(NodeIdentity::Worker(worker));
        self.worker_nodes.insert(worker, node);
        node
    }

    fn host_node(&mut self, addr: SocketAddrV4) -> NodeId {
        let host = *addr.ip();
        if let Some(&node) = self.host_nodes.get(&host) {
            return node;
        }
        let node = self.new_node(NodeIdentity::RemoteHost(host));
        self.host_nodes.insert(host, node);
        node
    }

    /// The synthetic unit (nil uuid) that holds events arriving outside any
    /// unit span. Never listed as any worker's current unit, never GC'd.
    fn synthetic_unit(&mut self) -> Uuid {
        let uuid = Uuid::nil();
        if !self.units.contains_key(&uuid) {
            let node = self.new_node(NodeIdentity::Unit { uuid });
            self.units.insert(
                uuid,
                UnitInfo {
                    unit: None,
                    node,
                    accesses: BTreeSet::new(),
                    tainted: false,
                    impact_bytes: 0,
                    impact_rows: 0,
                    events: Vec::new(),
                },
            );
        }
        uuid
    }

    /// Applies one event to the graph.
    ///
    /// SQL events for a worker with no open unit are quarantined under the
    /// synthetic unattributed unit and still reported as
    /// [`RecorderError::OrphanEvent`] so callers can count them.
    pub fn ingest(&mut self, event: &ProvEvent) -> Result<(), RecorderError> {
        self.counters.events_total += 1;
        match event {
            ProvEvent::UnitStart {
                worker,
                uuid,
                remote_addr,
            } => {
                if *uuid == Uuid::nil() || self.units.contains_key(uuid) {
                    return Err(RecorderError::DuplicateUnit(*uuid));
                }
                if let Some(open) = self.open_by_worker.get(worker) {
                    return Err(RecorderError::UnitAlreadyOpen {
                        worker: *worker,
                        open: *open,
                    });
                }
                let unit_node = self.new_node(NodeIdentity::Unit { uuid: *uuid });
                let worker_node = self.worker_node(*worker);
                let host_node = self.host_node(*remote_addr);
                self.add_edge(unit_node, worker_node, Relation::WasAssociatedWith);
                self.add_edge(unit_node, host_node, Relation::WasStartedBy);
                self.units.insert(
                    *uuid,
                    UnitInfo {
                        unit: Some(UnitOfWork::open(
                            *uuid,
                            *worker,
                            *remote_addr,
                            monotonic_ns(),
                        )),
                        node: unit_node,
                        accesses: BTreeSet::new(),
                        tainted: false,
                        impact_bytes: 0,
                        impact_rows: 0,
                        events: vec![event.clone()],
                    },
                );
                self.open_by_worker.insert(*worker, *uuid);
                self.last_by_worker.insert(*worker, *uuid);
                self.counters.units_started += 1;
                Ok(())
            }
            ProvEvent::UnitEnd { worker, uuid } => {
                let info = self
                    .units
                    .get_mut(uuid)
                    .ok_or(RecorderError::UnknownUnit(*uuid))?;
                let unit = info
                    .unit
                    .as_mut()
                    .ok_or(RecorderError::UnknownUnit(*uuid))?;
                if !unit.is_open() {
                    return Err(RecorderError::UnitNotOpen(*uuid));
                }
                if unit.worker != *worker {
                    return Err(RecorderError::WorkerMismatch {
                        uuid: *uuid,
                        expected: unit.worker,
                        got: *worker,
                    });
                }
                unit.close(monotonic_ns()).expect("monotonic close");
                info.events.push(event.clone());
                self.open_by_worker.remove(worker);
                self.counters.units_closed += 1;
                // A verdict that raced ahead of UNIT_END applies now.
                if let Some(verdict) = self.pending_verdicts.remove(uuid) {
                    self.gc_unit(*uuid, verdict)?;
                }
                Ok(())
            }
            ProvEvent::SqlRead { worker, object } | ProvEvent::SqlUsed { worker, object } => {
                self.counters.sql_events += 1;
                let flag = if matches!(event, ProvEvent::SqlRead { .. }) {
                    UseFlag::Read
                } else {
                    UseFlag::Used
                };
                let (uuid, orphan) = self.resolve_unit(*worker);
                let unit_node = self.units[&uuid].node;
                let entity = self.latest_entity_node(object);
                // Linking to the newest version keeps the common
                // read-after-write case acyclic; a link that would still
                // close a cycle (same or mutually-entangled units) is kept
                // out of the graph but retained in the unit's access set so
                // policy still sees it.
                if self.reaches(entity, unit_node) {
                    self.counters.cycle_avoided_links += 1;
                } else {
                    self.add_edge(unit_node, entity, Relation::Used(flag));
                }
                let access = if flag == UseFlag::Read {
                    AccessKind::Read
                } else {
                    AccessKind::Used
                };
                let info = self.units.get_mut(&uuid).expect("unit exists");
                info.accesses.insert((object.clone(), access));
                info.events.push(event.clone());
                if orphan {
                    self.counters.orphan_events += 1;
                    return Err(RecorderError::OrphanEvent {
                        kind: event.kind(),
                        worker: *worker,
                    });
                }
                Ok(())
            }
            ProvEvent::SqlWasGeneratedBy { worker, object } => {
                self.counters.sql_events += 1;
                let (uuid, orphan) = self.resolve_unit(*worker);
                let unit_node = self.units[&uuid].node;
                let previous = self.latest_version.get(object).copied();
                let version = previous.map(|v| v + 1).unwrap_or(0);
                let entity = self.new_node(NodeIdentity::SqlEntity {
                    object: object.clone(),
                    version,
                });
                self.entity_nodes.insert((object.clone(), version), entity);
                self.latest_version.insert(object.clone(), version);
                self.add_edge(entity, unit_node, Relation::WasGeneratedBy);
                // The displaced latest stays only while something still
                // references it; an already-collected writer may have left
                // it edgeless, in which case it goes now.
                if let Some(prev_version) = previous {
                    self.prune_entity_if_stale(object, prev_version);
                }
                let info = self.units.get_mut(&uuid).expect("unit exists");
                info.accesses.insert((object.clone(), AccessKind::Wrote));
                info.events.push(event.clone());
                if orphan {
                    self.counters.orphan_events += 1;
                    return Err(RecorderError::OrphanEvent {
                        kind: event.kind(),
                        worker: *worker,
                    });
                }
                Ok(())
            }
            ProvEvent::ParseFailure { worker, raw } => {
                let (uuid, orphan) = self.resolve_unit(*worker);
                let unit_node = self.units[&uuid].node;
                let attr = self.new_node(NodeIdentity::Attribute(raw.clone()));
                self.add_edge(unit_node, attr, Relation::HasAttribute);
                let info = self.units.get_mut(&uuid).expect("unit exists");
                info.tainted = true;
                info.events.push(event.clone());
                if orphan {
                    self.counters.orphan_events += 1;
                    return Err(RecorderError::OrphanEvent {
                        kind: event.kind(),
                        worker: *worker,
                    });
                }
                Ok(())
            }
            ProvEvent::ResponseImpact {
                worker,
                rows,
                bytes,
            } => {
                let (uuid, orphan) = self.resolve_unit(*worker);
                let info = self.units.get_mut(&uuid).expect("unit exists");
                info.impact_bytes += bytes;
                info.impact_rows += rows;
                info.events.push(event.clone());
                if orphan {
                    self.counters.orphan_events += 1;
                    return Err(RecorderError::OrphanEvent {
                        kind: event.kind(),
                        worker: *worker,
                    });
                }
                Ok(())
            }
        }
    }

    /// The open unit of `worker`, or the synthetic unit (flagged orphan).
    fn resolve_unit(&mut self, worker: WorkerId) -> (Uuid, bool) {
        match self.open_by_worker.get(&worker) {
            Some(uuid) => (*uuid, false),
            None => (self.synthetic_unit(), true),
        }
    }

    /// Ancestry of the worker's current unit: the open one, or the most
    /// recently closed unit that has not been collected yet.
    pub fn ancestry(&self, worker: WorkerId) -> Result<AncestrySummary, RecorderError> {
        if let Some(uuid) = self.open_by_worker.get(&worker) {
            return self.ancestry_of(*uuid);
        }
        if let Some(uuid) = self.last_by_worker.get(&worker) {
            if self.units.contains_key(uuid) {
                return self.ancestry_of(*uuid);
            }
        }
        Err(RecorderError::NoActiveUnit(worker))
    }

    /// Ancestry of a specific unit, open or closed.
    pub fn ancestry_of(&self, uuid: Uuid) -> Result<AncestrySummary, RecorderError> {
        let info = self
            .units
            .get(&uuid)
            .ok_or(RecorderError::UnknownUnit(uuid))?;
        let remote_addr = info
            .unit
            .as_ref()
            .map(|u| u.remote_addr)
            .unwrap_or_else(|| SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, 0));
        Ok(AncestrySummary {
            uuid,
            remote_addr,
            ancestors: info.accesses.iter().cloned().collect(),
            tainted: info.tainted,
            impact_bytes: info.impact_bytes,
        })
    }

    /// Collects a closed unit. ALLOWED discards it; SUSPICIOUS first
    /// serializes the unit's full event stream to the quarantine log, then
    /// prunes identically. Only the provenance of active requests stays in
    /// memory.
    pub fn gc_unit(&mut self, uuid: Uuid, verdict: GcVerdict) -> Result<(), RecorderError> {
        let info = self
            .units
            .get(&uuid)
            .ok_or(RecorderError::UnknownUnit(uuid))?;
        if info.is_open() {
            return Err(RecorderError::UnitStillOpen(uuid));
        }
        if verdict == GcVerdict::Suspicious {
            if let Some(log) = &mut self.quarantine {
                let events = self.units[&uuid].events.clone();
                log.append_unit(&events)
                    .map_err(|e| RecorderError::Quarantine(e.to_string()))?;
            }
            self.counters.units_quarantined += 1;
        }
        self.prune_unit(uuid);
        self.counters.units_gcd += 1;
        Ok(())
    }

    /// Serve-layer entry point: a verdict arriving while the unit is still
    /// open (the guard raced the shim's UNIT_END across sockets) is
    /// deferred and applied when the unit closes.
    pub fn request_gc(
        &mut self,
        uuid: Uuid,
        verdict: GcVerdict,
    ) -> Result<GcOutcome, RecorderError> {
        let info = self
            .units
            .get(&uuid)
            .ok_or(RecorderError::UnknownUnit(uuid))?;
        if info.is_open() {
            if info.unit.is_none() {
                // The synthetic unit is never collectable.
                return Err(RecorderError::UnitStillOpen(uuid));
            }
            self.pending_verdicts.insert(uuid, verdict);
            return Ok(GcOutcome::Deferred);
        }
        self.gc_unit(uuid, verdict).map(|_| GcOutcome::Done)
    }

    /// Removes a non-latest, unreferenced entity version.
    fn prune_entity_if_stale(&mut self, object: &SqlObject, version: u32) {
        if self.latest_version.get(object) == Some(&version) {
            return;
        }
        let Some(&node) = self.entity_nodes.get(&(object.clone(), version)) else {
            return;
        };
        let unreferenced = self.out_edges.get(&node).is_none_or(Vec::is_empty)
            && self.in_edges.get(&node).is_none_or(Vec::is_empty);
        if unreferenced {
            self.nodes.remove(&node);
            self.entity_nodes.remove(&(object.clone(), version));
        }
    }

    fn prune_unit(&mut self, uuid: Uuid) {
        let info = self.units.remove(&uuid).expect("checked by caller");
        let node = info.node;
        let mut candidates: BTreeSet<NodeId> = BTreeSet::new();

        for edge in self.out_edges.remove(&node).unwrap_or_default() {
            if let Some(incoming) = self.in_edges.get_mut(&edge.dst) {
                incoming.retain(|e| *e != edge);
            }
            candidates.insert(edge.dst);
            self.edge_count -= 1;
        }
        for edge in self.in_edges.remove(&node).unwrap_or_default() {
            if let Some(outgoing) = self.out_edges.get_mut(&edge.src) {
                outgoing.retain(|e| *e != edge);
            }
            candidates.insert(edge.src);
            self.edge_count -= 1;
        }
        self.nodes.remove(&node);

        for candidate in candidates {
            let unreferenced = self.out_edges.get(&candidate).is_none_or(Vec::is_empty)
                && self.in_edges.get(&candidate).is_none_or(Vec::is_empty);
            if !unreferenced {
                continue;
            }
            let identity = match self.nodes.get(&candidate) {
                Some(n) => n.identity.clone(),
                None => continue,
            };
            match identity {
                NodeIdentity::Attribute(_) => {
                    self.nodes.remove(&candidate);
                }
                NodeIdentity::SqlEntity { object, version } => {
                    // The latest version of every object is shared
                    // vocabulary and persists; stale versions go.
                    if self.latest_version.get(&object) != Some(&version) {
                        self.nodes.remove(&candidate);
                        self.entity_nodes.remove(&(object, version));
                    }
                }
                NodeIdentity::Worker(_)
                | NodeIdentity::RemoteHost(_)
                | NodeIdentity::Unit { .. } => {}
            }
        }

        if let Some(worker) = info.worker() {
            if self.last_by_worker.get(&worker) == Some(&uuid) {
                self.last_by_worker.remove(&worker);
            }
        }
        self.pending_verdicts.remove(&uuid);
    }

    /// Recomputes attribution over retained units: every stored SQL event
    /// must carry the worker its unit belongs to.
    pub fn audit(&self) -> AuditReport {
        let mut attributed = 0;
        let mut misattributed = 0;
        for info in self.units.values() {
            let Some(unit) = &info.unit else { continue };
            for event in &info.events {
                if event.is_sql() {
                    if event.worker() == unit.worker {
                        attributed += 1;
                    } else {
                        misattributed += 1;
                    }
                }
            }
        }
        AuditReport {
            sql_events_total: self.counters.sql_events,
            attributed_retained: attributed,
            orphan_events: self.counters.orphan_events,
            misattributed: misattributed + self.counters.misattributed,
        }
    }

    /// Renders the graph (or one unit's subgraph) as deterministic DOT.
    pub fn export_dot(&self, filter: Option<Uuid>) -> String {
        let mut selected: Option<BTreeSet<NodeId>> = None;
        let mut edges: Vec<ProvEdge> = Vec::new();
        match filter {
            Some(uuid) => {
                let mut keep = BTreeSet::new();
                if let Some(info) = self.units.get(&uuid) {
                    keep.insert(info.node);
                    for edge in self.out_edges.get(&info.node).into_iter().flatten() {
                        keep.insert(edge.dst);
                        edges.push(*edge);
                    }
                    for edge in self.in_edges.get(&info.node).into_iter().flatten() {
                        keep.insert(edge.src);
                        edges.push(*edge);
                    }
                }
                selected = Some(keep);
            }
            None => {
                edges.extend(self.edges());
            }
        }
        edges.sort_by_key(|e| (e.src, e.dst, e.relation.label()));
        edges.dedup();

        let mut out = String::from("digraph prov {\n");
        for node in self.nodes.values() {
            if let Some(keep) = &selected {
                if !keep.contains(&node.id) {
                    continue;
                }
            }
            let (label, shape) = describe_node(&node.identity);
            out.push_str(&format!(
                "  n{} [label=\"{}\" shape={}];\n",
                node.id, label, shape
            ));
        }
        for edge in edges {
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{}\"];\n",
                edge.src,
                edge.dst,
                edge.relation.label()
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn describe_node(identity: &NodeIdentity) -> (String, &'static str) {
    match identity {
        NodeIdentity::SqlEntity { object, version } => {
            (escape_dot(&format!("{object} v{version}")), "ellipse")
        }
        NodeIdentity::Unit { uuid } => {
            let short = uuid.to_string();
            let short = short.split('-').next().unwrap_or("").to_string();
            (format!("unit {short}"), "box")
        }
        NodeIdentity::Worker(w) => (format!("worker {w}"), "house"),
        NodeIdentity::RemoteHost(addr) => (addr.to_string(), "diamond"),
        NodeIdentity::Attribute(text) => {
            let mut t: String = text.chars().take(48).collect();
            if text.chars().count() > 48 {
                t.push_str("...");
            }
            (escape_dot(&format!("attr: {t}")), "note")
        }
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
        .replace('\t', "\\t")
}
