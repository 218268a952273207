//! Discrete-event ground-truth simulator for the two-path diamond topology.
//!
//! Each path is sender → access link → drop-tail router queue → bottleneck
//! link → receiver, with ACKs returning over an uncongested reverse path.
//! The transport is a small Reno-style AIMD sender: slow start, congestion
//! avoidance, triple-duplicate-ACK fast retransmit (with NewReno partial-ACK
//! retransmission) and a fixed retransmission timeout.
//!
//! Everything is a pure function of the inputs; there is no randomness.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FILE_BYTES: u64 = 100_000_000;
pub const DEFAULT_PACKET_BYTES: u64 = 1500;
pub const DEFAULT_ACCESS_MBPS: f64 = 1000.0;
pub const DEFAULT_PROP_DELAY_S: f64 = 0.001;

pub const INITIAL_CWND_PKTS: f64 = 10.0;
pub const INITIAL_SSTHRESH_PKTS: f64 = 64.0;
pub const RTO_S: f64 = 0.2;
const DUPACK_THRESHOLD: u32 = 3;
const EVENT_CAP_FACTOR: u64 = 100;

/// Bandwidth range covered by the default sweep.
pub const SWEEP_BW_RANGE: (f64, f64) = (25.0, 125.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("simulation stuck: event cap of {cap} exceeded at t={time_s}s")]
    Stuck { cap: u64, time_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub bandwidth_mbps: f64,
    pub queue_pkts: u32,
}

impl PathConfig {
    pub fn new(bandwidth_mbps: f64, queue_pkts: u32) -> Self {
        Self {
            bandwidth_mbps,
            queue_pkts,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.bandwidth_mbps.is_finite() && self.bandwidth_mbps > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_mbps
            )));
        }
        if self.queue_pkts == 0 {
            return Err(SimError::InvalidConfig("queue size must be >= 1".into()));
        }
        Ok(())
    }

    /// True when the bandwidth lies outside the default 25-125 Mbps sweep.
    /// Such configs are simulated normally; callers may want to warn.
    pub fn outside_sweep_range(&self) -> bool {
        self.bandwidth_mbps < SWEEP_BW_RANGE.0 || self.bandwidth_mbps > SWEEP_BW_RANGE.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub path1: PathConfig,
    pub path2: PathConfig,
}

impl NetworkConfig {
    pub fn new(bw1: f64, q1: u32, bw2: f64, q2: u32) -> Self {
        Self {
            path1: PathConfig::new(bw1, q1),
            path2: PathConfig::new(bw2, q2),
        }
    }

    /// Feature vector in schema order `bw1_mbps, q1_pkts, bw2_mbps, q2_pkts`.
    pub fn features(&self) -> [f64; 4] {
        [
            self.path1.bandwidth_mbps,
            self.path1.queue_pkts as f64,
            self.path2.bandwidth_mbps,
            self.path2.queue_pkts as f64,
        ]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.path1.validate()?;
        self.path2.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub file_bytes: u64,
    pub packet_bytes: u64,
    pub access_mbps: f64,
    pub prop_delay_s: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            file_bytes: DEFAULT_FILE_BYTES,
            packet_bytes: DEFAULT_PACKET_BYTES,
            access_mbps: DEFAULT_ACCESS_MBPS,
            prop_delay_s: DEFAULT_PROP_DELAY_S,
        }
    }
}

impl FlowSpec {
    pub fn packet_count(&self) -> u64 {
        self.file_bytes.div_ceil(self.packet_bytes)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.packet_bytes == 0 || self.file_bytes < self.packet_bytes {
            return Err(SimError::InvalidConfig(format!(
                "need file_bytes >= packet_bytes >= 1, got file={} packet={}",
                self.file_bytes, self.packet_bytes
            )));
        }
        if !(self.access_mbps.is_finite() && self.access_mbps > 0.0) {
            return Err(SimError::InvalidConfig(
                "access bandwidth must be positive".into(),
            ));
        }
        if !(self.prop_delay_s.is_finite() && self.prop_delay_s >= 0.0) {
            return Err(SimError::InvalidConfig(
                "propagation delay must be >= 0".into(),
            ));
        }
        Ok(())
    }

    fn packet_size(&self, seq: u64) -> u64 {
        let last = self.packet_count() - 1;
        if seq == last {
            self.file_bytes - last * self.packet_bytes
        } else {
            self.packet_bytes
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub latency_s: f64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
    pub retransmissions: u64,
    pub event_count: u64,
    /// Largest number of unacknowledged packets the sender ever had out.
    pub max_inflight_pkts: u64,
    /// Departures from the router queue that were out of enqueue order.
    pub fifo_violations: u64,
}

/// Lower bound on transfer time from the bottleneck rate alone.
pub fn fluid_bound_s(cfg: &PathConfig, flow: &FlowSpec) -> f64 {
    8.0 * flow.file_bytes as f64 / (cfg.bandwidth_mbps * 1e6)
}

/// Bandwidth-delay product of the path in full-size packets, using the
/// unloaded round trip (both serializations, four propagation legs).
pub fn bdp_packets(cfg: &PathConfig, flow: &FlowSpec) -> f64 {
    let bits = 8.0 * flow.packet_bytes as f64;
    let base_rtt = bits / (flow.access_mbps * 1e6)
        + bits / (cfg.bandwidth_mbps * 1e6)
        + 4.0 * flow.prop_delay_s;
    cfg.bandwidth_mbps * 1e6 * base_rtt / bits
}

// Ranks order simultaneous events: a finishing transmission frees the link
// before a new arrival is considered, ACKs are handled after data movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    BottleneckDone = 0,
    RouterArrival = 1,
    AckArrival = 2,
    Timeout = 3,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
    /// Packet sequence number (data), cumulative ack (ACK), unused (timeout).
    value: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that BinaryHeap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| (other.kind as u8).cmp(&(self.kind as u8)))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: f64, kind: EventKind, value: u64) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event {
            time,
            kind,
            seq,
            value,
        });
    }
}

struct Queued {
    packet: u64,
    enqueue_order: u64,
}

struct PathSim<'a> {
    flow: &'a FlowSpec,
    total: u64,
    access_bps: f64,
    bottleneck_bps: f64,
    queue_cap: usize,
    events: EventQueue,

    // access link: FIFO with unbounded sender-side buffer
    access_free_at: f64,

    // router
    queue: VecDeque<Queued>,
    in_service: Option<Queued>,
    enqueue_counter: u64,
    last_departed_order: Option<u64>,

    // receiver
    received: Vec<bool>,
    rcv_next: u64,
    completed_at: Option<f64>,

    // sender
    cwnd: f64,
    ssthresh: f64,
    snd_una: u64,
    next_seq: u64,
    highest_sent: u64,
    dupacks: u32,
    in_recovery: bool,
    recover: u64,
    rto_deadline: Option<f64>,
    timer_pending: bool,

    stats: TransferResult,
}

impl<'a> PathSim<'a> {
    fn new(cfg: &PathConfig, flow: &'a FlowSpec) -> Self {
        let total = flow.packet_count();
        Self {
            flow,
            total,
            access_bps: flow.access_mbps * 1e6,
            bottleneck_bps: cfg.bandwidth_mbps * 1e6,
            queue_cap: cfg.queue_pkts as usize,
            events: EventQueue {
                heap: BinaryHeap::new(),
                next_seq: 0,
            },
            access_free_at: 0.0,
            queue: VecDeque::new(),
            in_service: None,
            enqueue_counter: 0,
            last_departed_order: None,
            received: vec![false; total as usize],
            rcv_next: 0,
            completed_at: None,
            cwnd: INITIAL_CWND_PKTS,
            ssthresh: INITIAL_SSTHRESH_PKTS,
            snd_una: 0,
            next_seq: 0,
            highest_sent: 0,
            dupacks: 0,
            in_recovery: false,
            recover: 0,
            rto_deadline: None,
            timer_pending: false,
            stats: TransferResult {
                latency_s: 0.0,
                packets_sent: 0,
                packets_delivered: 0,
                packets_dropped: 0,
                retransmissions: 0,
                event_count: 0,
                max_inflight_pkts: 0,
                fifo_violations: 0,
            },
        }
    }

    fn run(mut self) -> Result<TransferResult, SimError> {
        let cap = EVENT_CAP_FACTOR * self.total;
        self.send_window(0.0);
        self.arm_timer(0.0);
        while let Some(ev) = self.events.heap.pop() {
            self.stats.event_count += 1;
            if self.stats.event_count > cap {
                return Err(SimError::Stuck {
                    cap,
                    time_s: ev.time,
                });
            }
            match ev.kind {
                EventKind::RouterArrival => self.on_router_arrival(ev.time, ev.value),
                EventKind::BottleneckDone => self.on_bottleneck_done(ev.time),
                EventKind::AckArrival => self.on_ack(ev.time, ev.value),
                EventKind::Timeout => self.on_timeout(ev.time),
            }
        }
        match self.completed_at {
            Some(t) => {
                self.stats.latency_s = t;
                Ok(self.stats)
            }
            None => Err(SimError::Stuck {
                cap,
                time_s: f64::NAN,
            }),
        }
    }

    fn serialization(&self, packet: u64, bps: f64) -> f64 {
        8.0 * self.flow.packet_size(packet) as f64 / bps
    }

    fn transmit(&mut self, now: f64, packet: u64) {
        self.stats.packets_sent += 1;
        if packet < self.highest_sent {
            self.stats.retransmissions += 1;
        } else {
            self.highest_sent = packet + 1;
        }
        let start = now.max(self.access_free_at);
        self.access_free_at = start + self.serialization(packet, self.access_bps);
        let arrival = self.access_free_at + self.flow.prop_delay_s;
        self.events.push(arrival, EventKind::RouterArrival, packet);
    }

    fn send_window(&mut self, now: f64) {
        if self.snd_una >= self.total {
            return;
        }
        let window = (self.cwnd.floor() as u64).max(1);
        while self.next_seq < self.total && self.next_seq - self.snd_una < window {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.transmit(now, seq);
        }
        let inflight = self.highest_sent - self.snd_una;
        self.stats.max_inflight_pkts = self.stats.max_inflight_pkts.max(inflight);
    }

    fn start_service(&mut self, now: f64, item: Queued) {
        if let Some(prev) = self.last_departed_order {
            if item.enqueue_order != prev + 1 {
                self.stats.fifo_violations += 1;
            }
        }
        self.last_departed_order = Some(item.enqueue_order);
        let done = now + self.serialization(item.packet, self.bottleneck_bps);
        self.in_service = Some(item);
        self.events.push(done, EventKind::BottleneckDone, 0);
    }

    fn on_router_arrival(&mut self, now: f64, packet: u64) {
        let item = Queued {
            packet,
            enqueue_order: self.enqueue_counter,
        };
        if self.in_service.is_none() {
            self.enqueue_counter += 1;
            self.start_service(now, item);
        } else if self.queue.len() < self.queue_cap {
            self.enqueue_counter += 1;
            self.queue.push_back(item);
        } else {
            self.stats.packets_dropped += 1;
        }
    }

    fn on_bottleneck_done(&mut self, now: f64) {
        let item = self
            .in_service
            .take()
            .expect("bottleneck completion without a packet in service");
        // Arrivals at the receiver are in departure order, so the receiver
        // can be updated here and its ACK scheduled directly.
        let arrival = now + self.flow.prop_delay_s;
        self.deliver(arrival, item.packet);
        if let Some(next) = self.queue.pop_front() {
            self.start_service(now, next);
        }
    }

    fn deliver(&mut self, arrival: f64, packet: u64) {
        self.stats.packets_delivered += 1;
        let idx = packet as usize;
        if !self.received[idx] {
            self.received[idx] = true;
            while self.rcv_next < self.total && self.received[self.rcv_next as usize] {
                self.rcv_next += 1;
            }
            if self.rcv_next == self.total && self.completed_at.is_none() {
                self.completed_at = Some(arrival);
            }
        }
        let ack_at = arrival + 2.0 * self.flow.prop_delay_s;
        self.events
            .push(ack_at, EventKind::AckArrival, self.rcv_next);
    }

    fn arm_timer(&mut self, now: f64) {
        if self.snd_una >= self.total {
            self.rto_deadline = None;
            return;
        }
        let deadline = now + RTO_S;
        self.rto_deadline = Some(deadline);
        if !self.timer_pending {
            self.timer_pending = true;
            self.events.push(deadline, EventKind::Timeout, 0);
        }
    }

    fn on_timeout(&mut self, now: f64) {
        self.timer_pending = false;
        let Some(deadline) = self.rto_deadline else {
            return;
        };
        if now < deadline {
            self.timer_pending = true;
            self.events.push(deadline, EventKind::Timeout, 0);
            return;
        }
        let flight = (self.next_seq - self.snd_una) as f64;
        self.ssthresh = (flight / 2.0).max(2.0);
        self.cwnd = 1.0;
        self.dupacks = 0;
        self.in_recovery = false;
        self.next_seq = self.snd_una;
        self.send_window(now);
        self.arm_timer(now);
    }

    fn on_ack(&mut self, now: f64, ack: u64) {
        if ack > self.snd_una {
            self.snd_una = ack;
            self.next_seq = self.next_seq.max(ack);
            self.dupacks = 0;
            if self.in_recovery {
                if ack >= self.recover {
                    self.in_recovery = false;
                    self.cwnd = self.ssthresh;
                } else if ack < self.total {
                    // partial ACK: the next hole is lost as well
                    self.transmit(now, ack);
                }
            } else if self.cwnd < self.ssthresh {
                self.cwnd += 1.0;
            } else {
                self.cwnd += 1.0 / self.cwnd;
            }
            self.arm_timer(now);
        } else if ack == self.snd_una && self.next_seq > self.snd_una && ack < self.total {
            self.dupacks += 1;
            if self.dupacks == DUPACK_THRESHOLD && !self.in_recovery {
                let flight = (self.next_seq - self.snd_una) as f64;
                self.ssthresh = (flight / 2.0).max(2.0);
                self.cwnd = self.ssthresh;
                self.in_recovery = true;
                self.recover = self.highest_sent;
                self.transmit(now, self.snd_una);
                self.arm_timer(now);
            }
        }
        self.send_window(now);
    }
}

/// Transfers `flow.file_bytes` over one path and reports the flow
/// completion time (arrival of the last missing data packet).
pub fn simulate_path(cfg: &PathConfig, flow: &FlowSpec) -> Result<TransferResult, SimError> {
    cfg.validate()?;
    flow.validate()?;
    if flow.access_mbps <= cfg.bandwidth_mbps {
        return Err(SimError::InvalidConfig(format!(
            "access link ({} Mbps) must be faster than the bottleneck ({} Mbps)",
            flow.access_mbps, cfg.bandwidth_mbps
        )));
    }
    PathSim::new(cfg, flow).run()
}

/// Both paths are link-disjoint, so each is an independent single-path run.
pub fn simulate(cfg: &NetworkConfig, flow: &FlowSpec) -> Result<(f64, f64), SimError> {
    let a = simulate_path(&cfg.path1, flow)?;
    let b = simulate_path(&cfg.path2, flow)?;
    Ok((a.latency_s, b.latency_s))
}
