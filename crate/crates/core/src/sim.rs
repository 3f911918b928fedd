//! Discrete-event simulation of the UE → eNodeB → S-GW → P-GW → Internet path.
//!
//! Every request travels from its UE to the cache node carrying its metadata
//! in a hop-by-hop header (semantic mode) or just its IRI (traditional mode).
//! The cache node looks the request up; a hit is answered from the cache, a
//! miss is forwarded to the origin and the response is cached on its way back.
//! In semantic mode the cache node also runs inference as soon as the
//! metadata arrives and prefetches the predicted contents from the origin in
//! parallel with the demand path.
//!
//! Links are store-and-forward. Each direction of a link is a FIFO channel:
//! a transmission starts once the previous one on that channel has been
//! serialized, and arrives one propagation delay after its own
//! serialization ends.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{Cache, CacheCounters, CacheError, CacheKey, Origin, Replacement};
use crate::codec::{CodecError, MetadataCodec, MetadataDescriptor, MIN_HEADER_BYTES};
use crate::kb::{InferencePolicy, KbError, KnowledgeBase, RelationRule};
use crate::metrics::MetricsReport;
use crate::time::SimTime;
use crate::workload::TraceEntry;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trace references unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("trace is not sorted by time at entry {index}")]
    UnsortedTrace { index: usize },
    #[error("trace entry {index} uses cell {cell}, topology has {cells}")]
    CellOutOfRange { index: usize, cell: u32, cells: u32 },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Semantic,
    Traditional,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Semantic => "semantic",
            Mode::Traditional => "traditional",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "semantic" => Ok(Mode::Semantic),
            "traditional" => Ok(Mode::Traditional),
            _ => Err(format!(
                "unknown mode `{s}` (expected semantic or traditional)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheLocation {
    #[serde(rename = "enodeb")]
    ENodeB,
    Sgw,
    Pgw,
}

impl CacheLocation {
    pub const ALL: [CacheLocation; 3] = [
        CacheLocation::ENodeB,
        CacheLocation::Sgw,
        CacheLocation::Pgw,
    ];

    /// Number of links between the UE and the cache node.
    pub fn hops_from_ue(self) -> usize {
        match self {
            CacheLocation::ENodeB => 1,
            CacheLocation::Sgw => 2,
            CacheLocation::Pgw => 3,
        }
    }
}

impl fmt::Display for CacheLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheLocation::ENodeB => "enodeb",
            CacheLocation::Sgw => "sgw",
            CacheLocation::Pgw => "pgw",
        })
    }
}

impl std::str::FromStr for CacheLocation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "enodeb" | "enb" => Ok(CacheLocation::ENodeB),
            "sgw" | "s-gw" => Ok(CacheLocation::Sgw),
            "pgw" | "p-gw" => Ok(CacheLocation::Pgw),
            _ => Err(format!(
                "unknown cache location `{s}` (expected enodeb, sgw or pgw)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub delay_ms: f64,
    /// Bytes per millisecond; may be `f64::INFINITY`.
    pub bandwidth_bytes_per_ms: f64,
}

impl LinkParams {
    pub const fn new(delay_ms: f64, bandwidth_bytes_per_ms: f64) -> Self {
        Self {
            delay_ms,
            bandwidth_bytes_per_ms,
        }
    }

    pub fn delay(&self) -> SimTime {
        SimTime::from_millis_f64(self.delay_ms)
    }

    /// Time to push `bytes` onto the link, rounded up to whole microseconds.
    pub fn serialization(&self, bytes: u64) -> SimTime {
        if bytes == 0 || self.bandwidth_bytes_per_ms.is_infinite() {
            return SimTime::ZERO;
        }
        SimTime::from_micros((bytes as f64 * 1000.0 / self.bandwidth_bytes_per_ms).ceil() as u64)
    }

    /// Delay plus serialization on an idle link.
    pub fn transfer_time(&self, bytes: u64) -> SimTime {
        self.delay() + self.serialization(bytes)
    }

    fn validate(&self, name: &str) -> Result<(), SimError> {
        if !(self.delay_ms.is_finite() && self.delay_ms >= 0.0) {
            return Err(SimError::InvalidTopology(format!(
                "{name}: delay {} ms must be finite and non-negative",
                self.delay_ms
            )));
        }
        if self.bandwidth_bytes_per_ms.is_nan() || self.bandwidth_bytes_per_ms <= 0.0 {
            return Err(SimError::InvalidTopology(format!(
                "{name}: bandwidth {} B/ms must be positive",
                self.bandwidth_bytes_per_ms
            )));
        }
        Ok(())
    }
}

pub fn transfer_time(link: &LinkParams, payload_bytes: u64) -> SimTime {
    link.transfer_time(payload_bytes)
}

/// One direction of a link, serializing transmissions in arrival order.
#[derive(Debug, Clone)]
pub struct FifoLink {
    params: LinkParams,
    busy_until: SimTime,
}

impl FifoLink {
    pub fn new(params: LinkParams) -> Self {
        Self {
            params,
            busy_until: SimTime::ZERO,
        }
    }

    /// Queues `bytes` at `now` and returns when they arrive at the far end.
    pub fn send(&mut self, now: SimTime, bytes: u64) -> SimTime {
        let start = now.max(self.busy_until);
        let end = start + self.params.serialization(bytes);
        self.busy_until = end;
        end + self.params.delay()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub cells: u32,
    pub ue_enodeb: LinkParams,
    pub enodeb_sgw: LinkParams,
    pub sgw_pgw: LinkParams,
    pub pgw_internet: LinkParams,
    pub cache_location: CacheLocation,
    /// Per cache; with eNodeB placement every cell gets a cache this large.
    pub cache_capacity: u64,
    pub replacement: Replacement,
    /// Size of a request without metadata.
    pub request_bytes: u64,
}

pub const DEFAULT_BANDWIDTH: f64 = 1250.0;

impl Default for Topology {
    fn default() -> Self {
        Self {
            cells: 1,
            ue_enodeb: LinkParams::new(10.0, DEFAULT_BANDWIDTH),
            enodeb_sgw: LinkParams::new(5.0, DEFAULT_BANDWIDTH),
            sgw_pgw: LinkParams::new(5.0, DEFAULT_BANDWIDTH),
            pgw_internet: LinkParams::new(20.0, DEFAULT_BANDWIDTH),
            cache_location: CacheLocation::ENodeB,
            cache_capacity: 20_000_000,
            replacement: Replacement::Lru,
            request_bytes: 250,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.cells == 0 {
            return Err(SimError::InvalidTopology(
                "at least one cell is required".into(),
            ));
        }
        if self.cache_capacity == 0 {
            return Err(SimError::InvalidTopology(
                "cache capacity must be positive".into(),
            ));
        }
        self.ue_enodeb.validate("ue_enodeb")?;
        self.enodeb_sgw.validate("enodeb_sgw")?;
        self.sgw_pgw.validate("sgw_pgw")?;
        self.pgw_internet.validate("pgw_internet")?;
        Ok(())
    }

    /// Links from the UE outward, by hop index.
    pub fn hop(&self, hop: usize) -> &LinkParams {
        match hop {
            0 => &self.ue_enodeb,
            1 => &self.enodeb_sgw,
            2 => &self.sgw_pgw,
            3 => &self.pgw_internet,
            _ => panic!("hop {hop} out of range"),
        }
    }

    pub fn cache_count(&self) -> usize {
        match self.cache_location {
            CacheLocation::ENodeB => self.cells as usize,
            _ => 1,
        }
    }

    /// Replaces every link's bandwidth.
    pub fn with_bandwidth(mut self, bandwidth_bytes_per_ms: f64) -> Self {
        for link in [
            &mut self.ue_enodeb,
            &mut self.enodeb_sgw,
            &mut self.sgw_pgw,
            &mut self.pgw_internet,
        ] {
            link.bandwidth_bytes_per_ms = bandwidth_bytes_per_ms;
        }
        self
    }
}

const UE: usize = 0;
const INTERNET: usize = 4;
const HOPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServedFrom {
    Cache,
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub request_id: u64,
    pub user_id: u32,
    pub cell_id: u32,
    pub descriptor: MetadataDescriptor,
    #[serde(rename = "issued_at_us")]
    pub issued_at: SimTime,
    #[serde(rename = "completed_at_us")]
    pub completed_at: SimTime,
    pub served_from: ServedFrom,
}

impl RequestRecord {
    pub fn latency(&self) -> SimTime {
        self.completed_at - self.issued_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    RequestIssued,
    MetadataArrived,
    CacheDecision {
        hit: bool,
    },
    /// A fetch request reached the origin, which answers immediately.
    OriginResponse,
    /// A demand fetch landed at the cache node.
    FetchComplete,
    PrefetchComplete,
    DeliveredToUE,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
    pub request_id: Option<u64>,
    pub entity_iri: String,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub records: Vec<RequestRecord>,
    pub cache_counters: CacheCounters,
    /// Only filled when event recording is enabled.
    pub events: Vec<SimEvent>,
}

impl SimOutput {
    /// `true` per request, in request order, when it was served from a cache.
    pub fn hit_sequence(&self) -> Vec<bool> {
        self.records
            .iter()
            .map(|r| r.served_from == ServedFrom::Cache)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetadataOverhead {
    pub total_bytes: u64,
    pub per_user_bytes: f64,
    /// Metadata bytes over delivered content bytes.
    pub ratio_of_total_traffic: f64,
}

/// Extra bytes semantic requests carry: each header's wire size beyond the
/// smallest (padding-only) hop-by-hop header.
pub fn metadata_overhead(
    trace: &[TraceEntry],
    kb: &KnowledgeBase,
    codec: &MetadataCodec,
) -> Result<MetadataOverhead, SimError> {
    let mut total = 0u64;
    let mut content = 0u64;
    let mut users = BTreeSet::new();
    for entry in trace {
        let descriptor = kb
            .descriptor(&entry.entity_iri)
            .map_err(|_| SimError::UnknownEntity(entry.entity_iri.clone()))?;
        total += (codec.wire_size(&descriptor)? - MIN_HEADER_BYTES) as u64;
        content += kb.content_size_of(&entry.entity_iri)?;
        users.insert(entry.user_id);
    }
    Ok(MetadataOverhead {
        total_bytes: total,
        per_user_bytes: if users.is_empty() {
            0.0
        } else {
            total as f64 / users.len() as f64
        },
        ratio_of_total_traffic: if content == 0 {
            0.0
        } else {
            total as f64 / content as f64
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    /// Client request on its way from the UE to the cache node.
    Request(usize),
    /// Cache node asking the origin for a fetch.
    FetchRequest(usize),
    /// Origin response travelling back to the cache node.
    FetchResponse(usize),
    /// Content on its way from the cache node to the UE.
    Delivery(usize),
}

#[derive(Debug, Clone)]
struct Message {
    cell: u32,
    bytes: u64,
    to: usize,
    purpose: Purpose,
}

#[derive(Debug)]
enum Event {
    Issue(usize),
    Arrive { msg: usize, at: usize },
}

#[derive(Debug)]
struct Scheduled {
    time: SimTime,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

struct Request {
    entry: TraceEntry,
    descriptor: MetadataDescriptor,
    header: Option<Vec<u8>>,
    size: u64,
    upstream_bytes: u64,
    cache: usize,
    completed_at: Option<SimTime>,
    served_from: ServedFrom,
}

struct Fetch {
    key: CacheKey,
    iri: String,
    size: u64,
    cache: usize,
    cell: u32,
    origin: Origin,
    waiters: Vec<usize>,
}

static DEFAULT_POLICY: RelationRule = RelationRule { max_prefetch: None };

/// Configured simulator; `run` may be called any number of times.
pub struct Simulation<'a> {
    topology: &'a Topology,
    kb: &'a KnowledgeBase,
    policy: &'a dyn InferencePolicy,
    codec: MetadataCodec,
    record_events: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(topology: &'a Topology, kb: &'a KnowledgeBase) -> Self {
        Self {
            topology,
            kb,
            policy: &DEFAULT_POLICY,
            codec: MetadataCodec::default(),
            record_events: false,
        }
    }

    pub fn with_policy(mut self, policy: &'a dyn InferencePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_codec(mut self, codec: MetadataCodec) -> Self {
        self.codec = codec;
        self
    }

    pub fn record_events(mut self, on: bool) -> Self {
        self.record_events = on;
        self
    }

    /// Runs the trace. The simulation has no random elements; `seed` is
    /// carried into the report so runs can be matched to the trace that fed
    /// them.
    pub fn run(&self, trace: &[TraceEntry], mode: Mode, seed: u64) -> Result<SimOutput, SimError> {
        self.topology.validate()?;
        let mut engine = Engine::new(self, trace, mode)?;
        engine.run()?;
        engine.finish(seed)
    }
}

pub fn run_simulation(
    topology: &Topology,
    kb: &KnowledgeBase,
    trace: &[TraceEntry],
    mode: Mode,
    seed: u64,
) -> Result<SimOutput, SimError> {
    Simulation::new(topology, kb).run(trace, mode, seed)
}

struct Engine<'s, 'a> {
    sim: &'s Simulation<'a>,
    mode: Mode,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    // [direction][channel]; direction 0 = towards the Internet
    links: [Vec<FifoLink>; 2],
    caches: Vec<Cache>,
    inflight: Vec<HashMap<CacheKey, usize>>,
    requests: Vec<Request>,
    fetches: Vec<Fetch>,
    messages: Vec<Message>,
    events: Vec<SimEvent>,
    origin_bytes: u64,
}

impl<'s, 'a> Engine<'s, 'a> {
    fn new(sim: &'s Simulation<'a>, trace: &[TraceEntry], mode: Mode) -> Result<Self, SimError> {
        let topo = sim.topology;
        let cells = topo.cells as usize;
        let mut requests = Vec::with_capacity(trace.len());
        for (index, entry) in trace.iter().enumerate() {
            if index > 0 && entry.time < trace[index - 1].time {
                return Err(SimError::UnsortedTrace { index });
            }
            if entry.cell_id >= topo.cells {
                return Err(SimError::CellOutOfRange {
                    index,
                    cell: entry.cell_id,
                    cells: topo.cells,
                });
            }
            let descriptor = sim
                .kb
                .descriptor(&entry.entity_iri)
                .map_err(|_| SimError::UnknownEntity(entry.entity_iri.clone()))?;
            let size = sim.kb.content_size_of(&entry.entity_iri)?;
            let header = match mode {
                Mode::Semantic => Some(sim.codec.encode(&descriptor)?.to_bytes()),
                Mode::Traditional => None,
            };
            let upstream_bytes = topo.request_bytes + header.as_ref().map_or(0, |h| h.len() as u64);
            let cache = match topo.cache_location {
                CacheLocation::ENodeB => entry.cell_id as usize,
                _ => 0,
            };
            requests.push(Request {
                entry: entry.clone(),
                descriptor,
                header,
                size,
                upstream_bytes,
                cache,
                completed_at: None,
                served_from: ServedFrom::Origin,
            });
        }

        // per-cell channels for the first two hops, shared ones after
        let channels = 2 * cells + 2;
        let mut up = Vec::with_capacity(channels);
        for hop in 0..HOPS {
            let n = if hop < 2 { cells } else { 1 };
            for _ in 0..n {
                up.push(FifoLink::new(*topo.hop(hop)));
            }
        }
        let down = up.clone();

        let caches = (0..topo.cache_count())
            .map(|_| Cache::with_policy(topo.cache_capacity, topo.replacement))
            .collect();

        let mut engine = Engine {
            sim,
            mode,
            queue: BinaryHeap::new(),
            seq: 0,
            links: [up, down],
            caches,
            inflight: vec![HashMap::new(); topo.cache_count()],
            requests,
            fetches: Vec::new(),
            messages: Vec::new(),
            events: Vec::new(),
            origin_bytes: 0,
        };
        for i in 0..engine.requests.len() {
            let t = engine.requests[i].entry.time;
            engine.schedule(t, Event::Issue(i));
        }
        Ok(engine)
    }

    fn cache_pos(&self) -> usize {
        self.sim.topology.cache_location.hops_from_ue()
    }

    fn channel(&self, hop: usize, cell: u32) -> usize {
        let cells = self.sim.topology.cells as usize;
        match hop {
            0 => cell as usize,
            1 => cells + cell as usize,
            2 => 2 * cells,
            _ => 2 * cells + 1,
        }
    }

    fn schedule(&mut self, time: SimTime, event: Event) {
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    fn log(&mut self, time: SimTime, kind: EventKind, request_id: Option<usize>, iri: &str) {
        if self.sim.record_events {
            self.events.push(SimEvent {
                time,
                seq: self.events.len() as u64,
                kind,
                request_id: request_id.map(|r| r as u64),
                entity_iri: iri.to_string(),
            });
        }
    }

    /// Puts a message on the wire at `from`, heading to `msg.to`.
    fn transmit(&mut self, now: SimTime, msg: Message, from: usize) {
        let id = self.messages.len();
        self.messages.push(msg);
        self.forward(now, id, from);
    }

    fn forward(&mut self, now: SimTime, id: usize, from: usize) {
        let msg = &self.messages[id];
        let (hop, next, dir) = if msg.to > from {
            (from, from + 1, 0)
        } else {
            (from - 1, from - 1, 1)
        };
        let ch = self.channel(hop, msg.cell);
        let bytes = msg.bytes;
        let arrival = self.links[dir][ch].send(now, bytes);
        self.schedule(arrival, Event::Arrive { msg: id, at: next });
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(Scheduled { time, event, .. }) = self.queue.pop() {
            match event {
                Event::Issue(r) => {
                    let iri = self.requests[r].entry.entity_iri.clone();
                    self.log(time, EventKind::RequestIssued, Some(r), &iri);
                    let msg = Message {
                        cell: self.requests[r].entry.cell_id,
                        bytes: self.requests[r].upstream_bytes,
                        to: self.cache_pos(),
                        purpose: Purpose::Request(r),
                    };
                    self.transmit(time, msg, UE);
                }
                Event::Arrive { msg, at } => {
                    if at != self.messages[msg].to {
                        self.forward(time, msg, at);
                        continue;
                    }
                    match self.messages[msg].purpose {
                        Purpose::Request(r) => self.on_request_at_cache(time, r)?,
                        Purpose::FetchRequest(f) => self.on_fetch_at_origin(time, f),
                        Purpose::FetchResponse(f) => self.on_fetch_landed(time, f)?,
                        Purpose::Delivery(r) => {
                            self.requests[r].completed_at = Some(time);
                            let iri = self.requests[r].entry.entity_iri.clone();
                            self.log(time, EventKind::DeliveredToUE, Some(r), &iri);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn key_for(&self, descriptor: &MetadataDescriptor) -> Result<CacheKey, SimError> {
        Ok(match self.mode {
            Mode::Semantic => CacheKey::Metadata(descriptor.to_canonical_bytes()?),
            Mode::Traditional => CacheKey::Iri(descriptor.entity_iri.clone()),
        })
    }

    fn deliver(&mut self, now: SimTime, r: usize) {
        let msg = Message {
            cell: self.requests[r].entry.cell_id,
            bytes: self.requests[r].size,
            to: UE,
            purpose: Purpose::Delivery(r),
        };
        let from = self.cache_pos();
        self.transmit(now, msg, from);
    }

    fn start_fetch(&mut self, now: SimTime, fetch: Fetch) {
        let id = self.fetches.len();
        self.inflight[fetch.cache].insert(fetch.key.clone(), id);
        let msg = Message {
            cell: fetch.cell,
            bytes: self.sim.topology.request_bytes,
            to: INTERNET,
            purpose: Purpose::FetchRequest(id),
        };
        self.fetches.push(fetch);
        let from = self.cache_pos();
        self.transmit(now, msg, from);
    }

    fn on_request_at_cache(&mut self, now: SimTime, r: usize) -> Result<(), SimError> {
        let iri = self.requests[r].entry.entity_iri.clone();
        self.log(now, EventKind::MetadataArrived, Some(r), &iri);

        // What the cache node learns about the request: the decoded header
        // in semantic mode, the bare IRI otherwise.
        let descriptor = match &self.requests[r].header {
            Some(wire) => self.sim.codec.decode_bytes(wire)?,
            None => self.requests[r].descriptor.clone(),
        };
        let key = self.key_for(&descriptor)?;
        let ci = self.requests[r].cache;

        let hit = self.caches[ci].lookup(&key, now)?.is_hit();
        self.log(now, EventKind::CacheDecision { hit }, Some(r), &iri);
        if hit {
            self.requests[r].served_from = ServedFrom::Cache;
            self.deliver(now, r);
        } else if let Some(&f) = self.inflight[ci].get(&key) {
            self.fetches[f].waiters.push(r);
        } else {
            // demand goes upstream with the original request, header included
            let fetch = Fetch {
                key,
                iri: iri.clone(),
                size: self.requests[r].size,
                cache: ci,
                cell: self.requests[r].entry.cell_id,
                origin: Origin::Demand,
                waiters: vec![r],
            };
            let id = self.fetches.len();
            self.inflight[ci].insert(fetch.key.clone(), id);
            let msg = Message {
                cell: fetch.cell,
                bytes: self.requests[r].upstream_bytes,
                to: INTERNET,
                purpose: Purpose::FetchRequest(id),
            };
            self.fetches.push(fetch);
            let from = self.cache_pos();
            self.transmit(now, msg, from);
        }

        if self.mode == Mode::Semantic {
            let predicted = self.sim.policy.infer(self.sim.kb, &descriptor)?;
            for next in predicted {
                let key = self.key_for(&next)?;
                if self.caches[ci].contains(&key) || self.inflight[ci].contains_key(&key) {
                    continue;
                }
                let size = self.sim.kb.content_size_of(&next.entity_iri)?;
                self.start_fetch(
                    now,
                    Fetch {
                        key,
                        iri: next.entity_iri,
                        size,
                        cache: ci,
                        cell: self.requests[r].entry.cell_id,
                        origin: Origin::Prefetch,
                        waiters: Vec::new(),
                    },
                );
            }
        }
        Ok(())
    }

    fn on_fetch_at_origin(&mut self, now: SimTime, f: usize) {
        let iri = self.fetches[f].iri.clone();
        let first_waiter = self.fetches[f].waiters.first().copied();
        self.log(now, EventKind::OriginResponse, first_waiter, &iri);
        self.origin_bytes += self.fetches[f].size;
        let msg = Message {
            cell: self.fetches[f].cell,
            bytes: self.fetches[f].size,
            to: self.cache_pos(),
            purpose: Purpose::FetchResponse(f),
        };
        self.transmit(now, msg, INTERNET);
    }

    fn on_fetch_landed(&mut self, now: SimTime, f: usize) -> Result<(), SimError> {
        let ci = self.fetches[f].cache;
        let key = self.fetches[f].key.clone();
        self.inflight[ci].remove(&key);
        let (size, origin) = (self.fetches[f].size, self.fetches[f].origin);
        self.caches[ci].insert(key.clone(), size, origin, now)?;
        let iri = self.fetches[f].iri.clone();
        let kind = match origin {
            Origin::Demand => EventKind::FetchComplete,
            Origin::Prefetch => EventKind::PrefetchComplete,
        };
        let first_waiter = self.fetches[f].waiters.first().copied();
        self.log(now, kind, first_waiter, &iri);
        let waiters = std::mem::take(&mut self.fetches[f].waiters);
        for r in waiters {
            self.caches[ci].claim(&key, now)?;
            self.deliver(now, r);
        }
        Ok(())
    }

    fn finish(self, seed: u64) -> Result<SimOutput, SimError> {
        let topo = self.sim.topology;
        let mut counters = CacheCounters::default();
        for cache in &self.caches {
            counters.merge(cache.counters());
        }

        let records: Vec<RequestRecord> = self
            .requests
            .iter()
            .enumerate()
            .map(|(i, r)| RequestRecord {
                request_id: i as u64,
                user_id: r.entry.user_id,
                cell_id: r.entry.cell_id,
                descriptor: r.descriptor.clone(),
                issued_at: r.entry.time,
                completed_at: r.completed_at.expect("every request completes"),
                served_from: r.served_from,
            })
            .collect();

        let n = records.len() as u64;
        let hits = records
            .iter()
            .filter(|r| r.served_from == ServedFrom::Cache)
            .count() as u64;
        let latency_sum: u64 = records.iter().map(|r| r.latency().as_micros()).sum();
        let users: BTreeSet<u32> = records.iter().map(|r| r.user_id).collect();
        let delivered_bytes: u64 = self.requests.iter().map(|r| r.size).sum();
        let trace: Vec<TraceEntry> = self.requests.iter().map(|r| r.entry.clone()).collect();
        let overhead = match self.mode {
            Mode::Semantic => Some(metadata_overhead(&trace, self.sim.kb, &self.sim.codec)?),
            Mode::Traditional => None,
        };
        let unused = counters.prefetched_bytes - counters.prefetched_bytes_hit;

        let report = MetricsReport {
            mode: self.mode,
            policy: match self.mode {
                Mode::Semantic => self.sim.policy.name().to_string(),
                Mode::Traditional => "none".to_string(),
            },
            users: users.len() as u32,
            cells: topo.cells,
            cache_location: topo.cache_location,
            cache_capacity_bytes: topo.cache_capacity,
            seed,
            requests_total: n,
            hits,
            hit_ratio: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
            mean_latency_ms: if n == 0 {
                0.0
            } else {
                latency_sum as f64 / n as f64 / 1000.0
            },
            prefetched_bytes: counters.prefetched_bytes,
            prefetched_bytes_hit: counters.prefetched_bytes_hit,
            useless_prefetch_ratio: counters.useless_prefetch_ratio(),
            useless_prefetch_origin_ratio: if self.origin_bytes == 0 {
                0.0
            } else {
                unused as f64 / self.origin_bytes as f64
            },
            origin_bytes: self.origin_bytes,
            delivered_bytes,
            metadata_overhead_bytes: overhead.map_or(0, |o| o.total_bytes),
            metadata_overhead_per_user_bytes: overhead.map_or(0.0, |o| o.per_user_bytes),
        };
        Ok(SimOutput {
            report,
            records,
            cache_counters: counters,
            events: self.events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::wire_size;
    use crate::kb::NullPolicy;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    fn entry(t_ms: u64, user: u32, cell: u32, iri: &str) -> TraceEntry {
        TraceEntry {
            time: ms(t_ms),
            user_id: user,
            cell_id: cell,
            entity_iri: iri.to_string(),
        }
    }

    fn pair_kb() -> KnowledgeBase {
        KnowledgeBase::from_text(
            "wiki/A type Person\nwiki/A size 50000\nwiki/B type Person\nwiki/B size 25000\n\
             wiki/A spouse wiki/B\nwiki/S type TVSeries\nwiki/S size 100000\n\
             wiki/S starring wiki/A\nwiki/S starring wiki/B\n",
        )
        .unwrap()
    }

    #[test]
    fn transfer_time_examples() {
        let link = LinkParams::new(10.0, 1000.0);
        assert_eq!(transfer_time(&link, 0), ms(10));
        assert_eq!(transfer_time(&link, 5000), ms(15));
    }

    #[test]
    fn fifo_serializes_back_to_back_transfers() {
        let mut link = FifoLink::new(LinkParams::new(10.0, 1000.0));
        assert_eq!(link.send(ms(0), 5000), ms(15));
        assert_eq!(link.send(ms(0), 5000), ms(20));
        // idle link again later
        assert_eq!(link.send(ms(100), 0), ms(110));
    }

    #[test]
    fn serialization_rounds_up_to_microseconds() {
        let link = LinkParams::new(0.0, 3.0);
        // 1 byte at 3 B/ms = 333.33.. us
        assert_eq!(link.serialization(1), SimTime::from_micros(334));
        assert_eq!(
            LinkParams::new(0.0, f64::INFINITY).serialization(1 << 40),
            SimTime::ZERO
        );
    }

    #[test]
    fn single_miss_crosses_all_links() {
        let kb = pair_kb();
        let topo = Topology::default();
        let out = run_simulation(
            &topo,
            &kb,
            &[entry(0, 0, 0, "wiki/A")],
            Mode::Traditional,
            1,
        )
        .unwrap();
        let rec = &out.records[0];
        assert_eq!(rec.served_from, ServedFrom::Origin);
        // hand computation: each link (delay, 1250 B/ms) up with 250 B, down with 50000 B
        let up: u64 = [10_000, 5_000, 5_000, 20_000].iter().map(|d| d + 200).sum();
        let down: u64 = [10_000, 5_000, 5_000, 20_000]
            .iter()
            .map(|d| d + 40_000)
            .sum();
        assert_eq!(rec.latency(), SimTime::from_micros(up + down));
        assert_eq!(out.report.hit_ratio, 0.0);
    }

    #[test]
    fn prefetched_spouse_is_served_from_enodeb() {
        let kb = pair_kb();
        let topo = Topology::default();
        let trace = [entry(0, 0, 0, "wiki/A"), entry(10_000, 0, 0, "wiki/B")];
        let sem = run_simulation(&topo, &kb, &trace, Mode::Semantic, 1).unwrap();
        let b = &sem.records[1];
        assert_eq!(b.served_from, ServedFrom::Cache);
        let header = wire_size(&kb.descriptor("wiki/B").unwrap()).unwrap() as u64;
        let up = topo.ue_enodeb.transfer_time(250 + header);
        let down = topo.ue_enodeb.transfer_time(25_000);
        assert_eq!(b.latency(), up + down);

        let trad = run_simulation(&topo, &kb, &trace, Mode::Traditional, 1).unwrap();
        assert_eq!(trad.records[1].served_from, ServedFrom::Origin);
        assert!(trad.report.mean_latency_ms > sem.report.mean_latency_ms);
    }

    #[test]
    fn repeat_request_hits_in_both_modes() {
        let kb = pair_kb();
        let topo = Topology::default();
        let trace = [entry(0, 0, 0, "wiki/B"), entry(5_000, 0, 0, "wiki/B")];
        for mode in [Mode::Semantic, Mode::Traditional] {
            let out = run_simulation(&topo, &kb, &trace, mode, 0).unwrap();
            assert_eq!(out.hit_sequence(), vec![false, true]);
        }
    }

    #[test]
    fn demand_waits_for_inflight_prefetch() {
        let kb = pair_kb();
        let topo = Topology::default();
        // B asked 1 ms after A reaches the cache node: the prefetch of B is still in flight
        let trace = [entry(0, 0, 0, "wiki/A"), entry(1, 1, 0, "wiki/B")];
        let out = Simulation::new(&topo, &kb)
            .record_events(true)
            .run(&trace, Mode::Semantic, 0)
            .unwrap();
        assert_eq!(out.records[1].served_from, ServedFrom::Origin);
        assert_eq!(out.cache_counters.prefetch_insertions, 1);
        assert_eq!(out.cache_counters.prefetched_bytes_hit, 25_000);
        assert_eq!(out.report.useless_prefetch_ratio, 0.0);
        // only one origin fetch for B
        let b_origin = out
            .events
            .iter()
            .filter(|e| e.kind == EventKind::OriginResponse && e.entity_iri == "wiki/B")
            .count();
        assert_eq!(b_origin, 1);
    }

    #[test]
    fn hit_latency_grows_with_cache_depth() {
        let kb = pair_kb();
        let trace = [entry(0, 0, 0, "wiki/B"), entry(10_000, 0, 0, "wiki/B")];
        let mut lat = Vec::new();
        for loc in CacheLocation::ALL {
            let topo = Topology {
                cache_location: loc,
                ..Topology::default()
            };
            let out = run_simulation(&topo, &kb, &trace, Mode::Traditional, 0).unwrap();
            assert_eq!(out.records[1].served_from, ServedFrom::Cache);
            lat.push(out.records[1].latency());
        }
        assert!(lat[0] < lat[1] && lat[1] < lat[2], "{lat:?}");
    }

    #[test]
    fn cache_hit_never_slower_than_origin() {
        let kb = pair_kb();
        let topo = Topology::default();
        let trace = [entry(0, 0, 0, "wiki/A"), entry(10_000, 0, 0, "wiki/B")];
        let with = run_simulation(&topo, &kb, &trace, Mode::Semantic, 0).unwrap();
        let without = Simulation::new(&topo, &kb)
            .with_policy(&NullPolicy)
            .run(&trace, Mode::Semantic, 0)
            .unwrap();
        assert_eq!(with.records[1].served_from, ServedFrom::Cache);
        assert_eq!(without.records[1].served_from, ServedFrom::Origin);
        assert!(with.records[1].latency() <= without.records[1].latency());
    }

    #[test]
    fn infinite_bandwidth_isolates_demand_from_prefetch() {
        let kb = pair_kb();
        let topo = Topology::default().with_bandwidth(f64::INFINITY);
        let trace = [entry(0, 0, 0, "wiki/S")];
        let heavy = run_simulation(&topo, &kb, &trace, Mode::Semantic, 0).unwrap();
        let none = Simulation::new(&topo, &kb)
            .with_policy(&NullPolicy)
            .run(&trace, Mode::Semantic, 0)
            .unwrap();
        assert_eq!(heavy.report.prefetched_bytes, 75_000);
        assert_eq!(none.report.prefetched_bytes, 0);
        assert_eq!(heavy.records[0].latency(), none.records[0].latency());
    }

    #[test]
    fn enodeb_caches_are_per_cell() {
        let kb = pair_kb();
        let trace = [entry(0, 0, 0, "wiki/B"), entry(10_000, 1, 1, "wiki/B")];
        let per_cell = Topology {
            cells: 2,
            ..Topology::default()
        };
        let out = run_simulation(&per_cell, &kb, &trace, Mode::Traditional, 0).unwrap();
        assert_eq!(out.hit_sequence(), vec![false, false]);
        let central = Topology {
            cache_location: CacheLocation::Pgw,
            ..per_cell
        };
        let out = run_simulation(&central, &kb, &trace, Mode::Traditional, 0).unwrap();
        assert_eq!(out.hit_sequence(), vec![false, true]);
    }

    #[test]
    fn input_errors() {
        let kb = pair_kb();
        let topo = Topology::default();
        assert!(matches!(
            run_simulation(&topo, &kb, &[entry(0, 0, 0, "wiki/Z")], Mode::Semantic, 0),
            Err(SimError::UnknownEntity(_))
        ));
        let unsorted = [entry(5, 0, 0, "wiki/A"), entry(1, 0, 0, "wiki/B")];
        assert!(matches!(
            run_simulation(&topo, &kb, &unsorted, Mode::Semantic, 0),
            Err(SimError::UnsortedTrace { index: 1 })
        ));
        assert!(matches!(
            run_simulation(&topo, &kb, &[entry(0, 0, 3, "wiki/A")], Mode::Semantic, 0),
            Err(SimError::CellOutOfRange { .. })
        ));
        let bad = Topology {
            sgw_pgw: LinkParams::new(-1.0, 10.0),
            ..Topology::default()
        };
        assert!(matches!(
            run_simulation(&bad, &kb, &[], Mode::Semantic, 0),
            Err(SimError::InvalidTopology(_))
        ));
    }

    #[test]
    fn metadata_overhead_accounting() {
        let kb = pair_kb();
        let codec = MetadataCodec::default();
        let zero = metadata_overhead(&[], &kb, &codec).unwrap();
        assert_eq!(zero.total_bytes, 0);
        assert_eq!(zero.per_user_bytes, 0.0);
        assert_eq!(zero.ratio_of_total_traffic, 0.0);

        // IRI of 62 bytes: record 65, + 4 framing = 69, padded to 72; 72 - 8 = 64
        let iri = format!("wiki/{}", "x".repeat(57));
        assert_eq!(iri.len(), 62);
        let text = format!("{iri} type Person\n{iri} size 1000\n");
        let kb = KnowledgeBase::from_text(&text).unwrap();
        let trace: Vec<TraceEntry> = (0..20).map(|i| entry(i * 1000, 0, 0, &iri)).collect();
        let o = metadata_overhead(&trace, &kb, &codec).unwrap();
        assert_eq!(o.total_bytes, 20 * 64);
        assert_eq!(o.per_user_bytes, 1280.0);
        assert!((o.ratio_of_total_traffic - 1280.0 / 20_000.0).abs() < 1e-12);
    }

    #[test]
    fn events_are_time_ordered() {
        let kb = pair_kb();
        let topo = Topology::default();
        let trace = [
            entry(0, 0, 0, "wiki/S"),
            entry(0, 1, 0, "wiki/A"),
            entry(30, 2, 0, "wiki/B"),
        ];
        let out = Simulation::new(&topo, &kb)
            .record_events(true)
            .run(&trace, Mode::Semantic, 0)
            .unwrap();
        assert!(out.events.windows(2).all(|w| w[0].time <= w[1].time));
        let delivered = out
            .events
            .iter()
            .filter(|e| e.kind == EventKind::DeliveredToUE)
            .count();
        assert_eq!(delivered, 3);
    }
}
