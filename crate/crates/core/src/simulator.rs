//! Mini-slot Monte Carlo simulation of unslotted CSMA/CA with acknowledged
//! transmissions and retries.
//!
//! Time advances one symbol at a time. Every node runs the CSMA/CA automaton
//! against a shared channel that is simply the set of transmissions (data and
//! ACK) currently on the air: two or more at once corrupt all of them, and a
//! CCA fails if any of its 8 symbols carried energy. The collision window of
//! the analytical model is not coded anywhere; it emerges from the timing.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{ConfidenceHalfWidths, NetworkConfig, PerformanceReport, ProtocolConstants, Source, TrafficMode};
use crate::stats::mean_ci;

/// Replication count used when none is given.
pub const DEFAULT_REPLICATIONS: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub net: NetworkConfig,
    /// Measured mini-slots after warmup.
    pub horizon: u64,
    /// Mini-slots simulated before measurement starts.
    pub warmup: u64,
    pub replications: u32,
    /// Replication `i` is seeded with `base_seed + i`.
    pub base_seed: u64,
}

impl SimConfig {
    /// Defaults: warmup of 10% of the horizon, 50 replications, seed 0.
    pub fn new(net: NetworkConfig, horizon: u64) -> Self {
        Self { net, horizon, warmup: horizon / 10, replications: DEFAULT_REPLICATIONS, base_seed: 0 }
    }

    pub fn with_replications(mut self, replications: u32) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.horizon == 0 {
            return Err(Error::Config("simulation horizon must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if self.warmup.checked_add(self.horizon).is_none() {
            return Err(Error::Config("warmup + horizon overflows".into()));
        }
        Ok(())
    }

    fn total_slots(&self) -> u64 {
        self.warmup + self.horizon
    }
}

/// Event counts of one replication.
///
/// Frame-fate counters without a `measured_` prefix cover the whole run and
/// satisfy the conservation identity; the rest cover the measurement window
/// only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimCounters {
    pub arrivals: u64,
    pub blocked_arrivals: u64,
    pub deliveries: u64,
    pub access_fail_drops: u64,
    pub retry_fail_drops: u64,
    pub in_system_at_end: u64,
    /// Data frames the sink received whose ACK was then corrupted.
    pub sink_duplicates: u64,

    pub measured_slots: u64,
    pub cca_starts: u64,
    pub cca_busy: u64,
    pub channel_busy_symbols: u64,
    pub success_payload_symbols: u64,
    pub measured_deliveries: u64,
    pub measured_access_fail_drops: u64,
    pub measured_retry_fail_drops: u64,
    /// Service time (head of queue to outcome) summed over delivered frames.
    pub success_service_symbols: u64,
    /// Service time summed over every frame whose service ended.
    pub all_service_symbols: u64,
    /// Arrival-to-outcome time summed over delivered frames.
    pub success_sojourn_symbols: u64,
    pub all_sojourn_symbols: u64,
}

impl SimCounters {
    /// `arrivals = blocked + delivered + dropped + still queued`.
    pub fn conserved(&self) -> bool {
        self.arrivals
            == self.blocked_arrivals
                + self.deliveries
                + self.access_fail_drops
                + self.retry_fail_drops
                + self.in_system_at_end
    }

    fn measured_serviced(&self) -> u64 {
        self.measured_deliveries + self.measured_access_fail_drops + self.measured_retry_fail_drops
    }
}

/// Metric estimates of one replication. Ratios with an empty denominator
/// are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationEstimates {
    pub tau: f64,
    pub a: Option<f64>,
    pub th: f64,
    pub ps: Option<f64>,
    pub ts: Option<f64>,
    pub tvs: Option<f64>,
    pub tsw: Option<f64>,
    pub tvsw: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ReplicationEstimates {
    pub fn from_counters(c: &SimCounters, nodes: u32) -> Self {
        let slots = c.measured_slots.max(1) as f64;
        let serviced = c.measured_serviced();
        Self {
            tau: c.cca_starts as f64 / (f64::from(nodes) * slots),
            a: ratio(c.cca_busy, c.cca_starts),
            th: c.success_payload_symbols as f64 / slots,
            ps: ratio(c.measured_deliveries, serviced),
            ts: ratio(c.success_service_symbols, c.measured_deliveries),
            tvs: ratio(c.all_service_symbols, serviced),
            tsw: ratio(c.success_sojourn_symbols, c.measured_deliveries),
            tvsw: ratio(c.all_sojourn_symbols, serviced),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: u32,
    pub seed: u64,
    pub counters: SimCounters,
    pub estimates: ReplicationEstimates,
}

/// Deterministic inputs that replace random draws, for constructed scenarios.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptedInputs {
    /// Per-node arrival slots (ascending). A node listed here gets no random
    /// arrivals.
    pub arrivals: Option<Vec<Vec<u64>>>,
    /// Per-node backoff draws in backoff periods, consumed in order; random
    /// draws resume once a node's list is exhausted.
    pub backoffs: Option<Vec<Vec<u32>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Arrival,
    Blocked,
    Backoff,
    CcaStart,
    CcaIdle,
    CcaBusy,
    TxStart,
    TxEnd,
    AckStart,
    AckEnd,
    Delivered,
    AckTimeout,
    AccessFailDrop,
    RetryFailDrop,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Arrival => "arrival",
            TraceKind::Blocked => "blocked",
            TraceKind::Backoff => "backoff",
            TraceKind::CcaStart => "cca_start",
            TraceKind::CcaIdle => "cca_idle",
            TraceKind::CcaBusy => "cca_busy",
            TraceKind::TxStart => "tx_start",
            TraceKind::TxEnd => "tx_end",
            TraceKind::AckStart => "ack_start",
            TraceKind::AckEnd => "ack_end",
            TraceKind::Delivered => "delivered",
            TraceKind::AckTimeout => "ack_timeout",
            TraceKind::AccessFailDrop => "drop_access",
            TraceKind::RetryFailDrop => "drop_retry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub slot: u64,
    /// Node index; ACK events carry the node being acknowledged.
    pub node: usize,
    pub kind: TraceKind,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.slot, self.node, self.kind.as_str(), self.detail)
    }
}

struct Tracer {
    events: Vec<TraceEvent>,
    limit: usize,
}

impl Tracer {
    fn record(&mut self, slot: u64, node: usize, kind: TraceKind, detail: impl FnOnce() -> String) {
        if self.events.len() < self.limit {
            self.events.push(TraceEvent { slot, node, kind, detail: detail() });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Backoff { left: u32 },
    Cca { left: u32, busy: bool, started: u64 },
    Turnaround { left: u32 },
    Transmit { left: u32 },
    AwaitAck { deadline: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Delivered,
    AccessFail,
    RetryFail,
}

struct Node {
    phase: Phase,
    nb: u32,
    be: u32,
    retries: u32,
    /// Arrival slots of buffered frames; the front one is in service.
    queue: VecDeque<u64>,
    service_start: u64,
    next_arrival: Option<u64>,
    scripted_arrivals: Option<VecDeque<u64>>,
    scripted_backoffs: VecDeque<u32>,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxKind {
    Data,
    Ack,
}

struct Transmission {
    node: usize,
    kind: TxKind,
    start: u64,
    end: u64,
    corrupted: bool,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    proto: ProtocolConstants,
    nodes: Vec<Node>,
    air: Vec<Transmission>,
    arrivals: Option<Geometric>,
    counters: SimCounters,
    tracer: Option<&'a mut Tracer>,
}

/// Seed of replication `rep`; each node draws from its own ChaCha stream.
pub fn replication_seed(base_seed: u64, rep: u32) -> u64 {
    base_seed.wrapping_add(u64::from(rep))
}

fn node_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, seed: u64, scripted: &ScriptedInputs, tracer: Option<&'a mut Tracer>) -> Result<Self> {
        let n = cfg.net.nodes as usize;
        let arrivals = match cfg.net.mode {
            TrafficMode::Saturated => None,
            _ if cfg.net.rate <= 0.0 => None,
            _ => Some(
                Geometric::new(cfg.net.arrival_probability())
                    .map_err(|e| Error::Config(format!("arrival probability: {e}")))?,
            ),
        };
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let scripted_arrivals =
                scripted.arrivals.as_ref().map(|per_node| per_node.get(i).cloned().unwrap_or_default().into());
            let scripted_backoffs =
                scripted.backoffs.as_ref().and_then(|per_node| per_node.get(i).cloned()).unwrap_or_default().into();
            nodes.push(Node {
                phase: Phase::Idle,
                nb: 0,
                be: 0,
                retries: 0,
                queue: VecDeque::new(),
                service_start: 0,
                next_arrival: None,
                scripted_arrivals,
                scripted_backoffs,
                rng: node_rng(seed, i),
            });
        }
        let mut engine = Self {
            cfg,
            proto: ProtocolConstants::default(),
            nodes,
            air: Vec::new(),
            arrivals,
            counters: SimCounters { measured_slots: cfg.horizon, ..SimCounters::default() },
            tracer,
        };
        for i in 0..n {
            if cfg.net.mode == TrafficMode::Saturated {
                engine.counters.arrivals += 1;
                engine.nodes[i].queue.push_back(0);
            } else {
                engine.nodes[i].next_arrival = engine.draw_arrival(i, 0);
            }
        }
        Ok(engine)
    }

    fn trace(&mut self, slot: u64, node: usize, kind: TraceKind, detail: impl FnOnce() -> String) {
        if let Some(t) = self.tracer.as_deref_mut() {
            t.record(slot, node, kind, detail);
        }
    }

    fn measured(&self, slot: u64) -> bool {
        slot >= self.cfg.warmup
    }

    /// First arrival slot at or after `from`.
    fn draw_arrival(&mut self, i: usize, from: u64) -> Option<u64> {
        let node = &mut self.nodes[i];
        if let Some(script) = node.scripted_arrivals.as_mut() {
            return script.pop_front();
        }
        let dist = self.arrivals.as_ref()?;
        Some(from.saturating_add(dist.sample(&mut node.rng)))
    }

    fn handle_arrivals(&mut self, t: u64) {
        for i in 0..self.nodes.len() {
            while self.nodes[i].next_arrival == Some(t) {
                self.counters.arrivals += 1;
                if self.nodes[i].queue.len() < self.cfg.net.buffer as usize {
                    self.nodes[i].queue.push_back(t);
                    self.trace(t, i, TraceKind::Arrival, String::new);
                } else {
                    self.counters.blocked_arrivals += 1;
                    self.trace(t, i, TraceKind::Blocked, String::new);
                }
                self.nodes[i].next_arrival = self.draw_arrival(i, t + 1);
            }
        }
    }

    fn start_backoff(&mut self, i: usize, t: u64) {
        let be = self.proto.backoff_exponent(self.nodes[i].nb);
        let node = &mut self.nodes[i];
        node.be = be;
        let periods = match node.scripted_backoffs.pop_front() {
            Some(p) => p.min((1 << be) - 1),
            None => node.rng.random_range(0..(1u32 << be)),
        };
        let left = periods * self.proto.unit_backoff_period();
        node.phase = Phase::Backoff { left };
        let nb = node.nb;
        self.trace(t, i, TraceKind::Backoff, || format!("nb={nb} be={be} symbols={left}"));
    }

    fn begin_service(&mut self, i: usize, t: u64) {
        let node = &mut self.nodes[i];
        node.service_start = t;
        node.nb = 0;
        node.retries = 0;
        self.start_backoff(i, t);
    }

    fn finish(&mut self, i: usize, t: u64, outcome: Outcome) {
        let node = &mut self.nodes[i];
        let arrived = node.queue.pop_front().expect("a frame is in service");
        let service = t - node.service_start;
        let sojourn = t - arrived;
        node.phase = Phase::Idle;
        let measured = self.measured(t);
        let c = &mut self.counters;
        match outcome {
            Outcome::Delivered => c.deliveries += 1,
            Outcome::AccessFail => c.access_fail_drops += 1,
            Outcome::RetryFail => c.retry_fail_drops += 1,
        }
        if measured {
            match outcome {
                Outcome::Delivered => {
                    c.measured_deliveries += 1;
                    c.success_payload_symbols += u64::from(self.cfg.net.frame_symbols());
                    c.success_service_symbols += service;
                    c.success_sojourn_symbols += sojourn;
                }
                Outcome::AccessFail => c.measured_access_fail_drops += 1,
                Outcome::RetryFail => c.measured_retry_fail_drops += 1,
            }
            c.all_service_symbols += service;
            c.all_sojourn_symbols += sojourn;
        }
        let kind = match outcome {
            Outcome::Delivered => TraceKind::Delivered,
            Outcome::AccessFail => TraceKind::AccessFailDrop,
            Outcome::RetryFail => TraceKind::RetryFailDrop,
        };
        self.trace(t, i, kind, || format!("service={service}"));
        if self.cfg.net.mode == TrafficMode::Saturated {
            self.counters.arrivals += 1;
            self.nodes[i].queue.push_back(t);
        }
    }

    /// Transmissions ending at `t`: clean data triggers an ACK, a clean ACK
    /// completes the sender's service.
    fn end_transmissions(&mut self, t: u64) {
        let mut k = 0;
        while k < self.air.len() {
            if self.air[k].end != t {
                k += 1;
                continue;
            }
            let tx = self.air.swap_remove(k);
            match tx.kind {
                TxKind::Data => {
                    let state = if tx.corrupted { "collided" } else { "clean" };
                    self.trace(t, tx.node, TraceKind::TxEnd, || state.into());
                    if !tx.corrupted {
                        let start = t + u64::from(self.proto.t_ack());
                        let end = start + u64::from(self.proto.ack_frame_symbols());
                        self.air.push(Transmission { node: tx.node, kind: TxKind::Ack, start, end, corrupted: false });
                    }
                }
                TxKind::Ack => {
                    let state = if tx.corrupted { "collided" } else { "clean" };
                    self.trace(t, tx.node, TraceKind::AckEnd, || state.into());
                    if tx.corrupted {
                        self.counters.sink_duplicates += 1;
                    } else {
                        debug_assert!(matches!(self.nodes[tx.node].phase, Phase::AwaitAck { .. }));
                        self.finish(tx.node, t, Outcome::Delivered);
                    }
                }
            }
        }
    }

    /// Settle node `i` into the phase it occupies during slot `t`.
    fn settle(&mut self, i: usize, t: u64) {
        loop {
            match self.nodes[i].phase {
                Phase::Idle => {
                    if self.nodes[i].queue.is_empty() {
                        return;
                    }
                    self.begin_service(i, t);
                }
                Phase::Backoff { left: 0 } => {
                    self.nodes[i].phase = Phase::Cca { left: self.proto.cca_symbols(), busy: false, started: t };
                    if self.measured(t) {
                        self.counters.cca_starts += 1;
                    }
                    self.trace(t, i, TraceKind::CcaStart, String::new);
                }
                Phase::Cca { left: 0, busy, started } => {
                    if !busy {
                        self.trace(t, i, TraceKind::CcaIdle, String::new);
                        self.nodes[i].phase = Phase::Turnaround { left: self.proto.a_turnaround_time() };
                        continue;
                    }
                    if self.measured(started) {
                        self.counters.cca_busy += 1;
                    }
                    let nb = self.nodes[i].nb + 1;
                    self.trace(t, i, TraceKind::CcaBusy, || format!("nb={nb}"));
                    self.nodes[i].nb = nb;
                    if nb > self.proto.mac_max_csma_backoffs() {
                        self.finish(i, t, Outcome::AccessFail);
                    } else {
                        self.start_backoff(i, t);
                    }
                }
                Phase::Turnaround { left: 0 } => {
                    let len = self.cfg.net.frame_symbols();
                    self.air.push(Transmission {
                        node: i,
                        kind: TxKind::Data,
                        start: t,
                        end: t + u64::from(len),
                        corrupted: false,
                    });
                    let retries = self.nodes[i].retries;
                    self.trace(t, i, TraceKind::TxStart, || format!("retry={retries}"));
                    self.nodes[i].phase = Phase::Transmit { left: len };
                }
                Phase::Transmit { left: 0 } => {
                    let deadline = t + u64::from(self.proto.mac_ack_wait_duration());
                    self.nodes[i].phase = Phase::AwaitAck { deadline };
                }
                Phase::AwaitAck { deadline } if deadline == t => {
                    let retries = self.nodes[i].retries + 1;
                    self.trace(t, i, TraceKind::AckTimeout, || format!("retry={retries}"));
                    self.nodes[i].retries = retries;
                    if retries > self.proto.a_max_frame_retries() {
                        self.finish(i, t, Outcome::RetryFail);
                    } else {
                        self.nodes[i].nb = 0;
                        self.start_backoff(i, t);
                    }
                }
                _ => return,
            }
        }
    }

    /// Mark overlapping transmissions as corrupted; returns whether the
    /// channel carries energy during `t`.
    fn resolve_channel(&mut self, t: u64) -> bool {
        let mut active = 0;
        for tx in &self.air {
            if tx.start <= t {
                active += 1;
            }
        }
        if active > 1 {
            for tx in self.air.iter_mut().filter(|tx| tx.start <= t) {
                tx.corrupted = true;
            }
        }
        for k in 0..self.air.len() {
            let tx = &self.air[k];
            if tx.kind == TxKind::Ack && tx.start == t {
                let node = tx.node;
                self.trace(t, node, TraceKind::AckStart, String::new);
            }
        }
        active > 0
    }

    fn advance(&mut self, energy: bool) {
        for node in &mut self.nodes {
            node.phase = match node.phase {
                Phase::Backoff { left } => Phase::Backoff { left: left - 1 },
                Phase::Cca { left, busy, started } => Phase::Cca { left: left - 1, busy: busy || energy, started },
                Phase::Turnaround { left } => Phase::Turnaround { left: left - 1 },
                Phase::Transmit { left } => Phase::Transmit { left: left - 1 },
                other => other,
            };
        }
    }

    fn run(mut self) -> SimCounters {
        for t in 0..self.cfg.total_slots() {
            self.handle_arrivals(t);
            self.end_transmissions(t);
            for i in 0..self.nodes.len() {
                self.settle(i, t);
            }
            let energy = self.resolve_channel(t);
            if energy && self.measured(t) {
                self.counters.channel_busy_symbols += 1;
            }
            self.advance(energy);
        }
        self.counters.in_system_at_end = self.nodes.iter().map(|n| n.queue.len() as u64).sum();
        self.counters
    }
}

/// Run replication `rep` of `cfg`.
pub fn run_replication(cfg: &SimConfig, rep: u32, scripted: &ScriptedInputs) -> Result<Replication> {
    cfg.validate()?;
    let seed = replication_seed(cfg.base_seed, rep);
    let counters = Engine::new(cfg, seed, scripted, None)?.run();
    let estimates = ReplicationEstimates::from_counters(&counters, cfg.net.nodes);
    Ok(Replication { index: rep, seed, counters, estimates })
}

/// Event log of replication 0, truncated to `max_events`.
pub fn trace(cfg: &SimConfig, max_events: usize, scripted: &ScriptedInputs) -> Result<(Vec<TraceEvent>, SimCounters)> {
    cfg.validate()?;
    let mut tracer = Tracer { events: Vec::new(), limit: max_events };
    let seed = replication_seed(cfg.base_seed, 0);
    let counters = Engine::new(cfg, seed, scripted, Some(&mut tracer))?.run();
    Ok((tracer.events, counters))
}

/// All replications, in index order regardless of execution order.
pub fn run_replications(cfg: &SimConfig) -> Result<Vec<Replication>> {
    cfg.validate()?;
    let scripted = ScriptedInputs::default();
    (0..cfg.replications).into_par_iter().map(|rep| run_replication(cfg, rep, &scripted)).collect()
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.flatten().collect();
    mean_ci(&v).map(|m| (m.mean, m.half_width))
}

/// Combine replications into a report with 95% half-widths.
pub fn aggregate(mode: TrafficMode, reps: &[Replication]) -> Result<PerformanceReport> {
    if reps.is_empty() {
        return Err(Error::Config("no replications to aggregate".into()));
    }
    let est = |f: fn(&ReplicationEstimates) -> Option<f64>| summarize(reps.iter().map(|r| f(&r.estimates)));
    let tau = est(|e| Some(e.tau)).unwrap_or_default();
    let a = est(|e| e.a).unwrap_or_default();
    let th = est(|e| Some(e.th)).unwrap_or_default();
    let ps = est(|e| e.ps);
    let ts = est(|e| e.ts);
    let tvs = est(|e| e.tvs);
    let (tsw, tvsw) = match mode {
        TrafficMode::UnsatM => (est(|e| e.tsw), est(|e| e.tvsw)),
        _ => (None, None),
    };
    let mean = |m: Option<(f64, f64)>| m.map(|v| v.0);
    let half = |m: Option<(f64, f64)>| m.map(|v| v.1);
    Ok(PerformanceReport {
        tau: tau.0,
        a: a.0,
        th: th.0,
        ps: mean(ps),
        ts: mean(ts),
        tvs: mean(tvs),
        tsw: mean(tsw),
        tvsw: mean(tvsw),
        source: Source::Simulated,
        ci95: Some(ConfidenceHalfWidths {
            tau: tau.1,
            a: a.1,
            th: th.1,
            ps: half(ps),
            ts: half(ts),
            tvs: half(tvs),
            tsw: half(tsw),
            tvsw: half(tvsw),
        }),
    })
}

/// Run every replication and aggregate.
pub fn run(cfg: &SimConfig) -> Result<PerformanceReport> {
    let reps = run_replications(cfg)?;
    aggregate(cfg.net.mode, &reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node_offset(offset: u64) -> (Vec<TraceEvent>, SimCounters) {
        let net = NetworkConfig::unsat1(2, 30, 0.0);
        let cfg = SimConfig::new(net, 600).with_warmup(0).with_replications(1);
        let scripted =
            ScriptedInputs { arrivals: Some(vec![vec![0], vec![offset]]), backoffs: Some(vec![vec![0], vec![0]]) };
        trace(&cfg, 10_000, &scripted).unwrap()
    }

    #[test]
    fn collision_iff_cca_offset_at_most_12() {
        for offset in 0..=20u64 {
            let (events, counters) = two_node_offset(offset);
            let collided = events.iter().any(|e| e.kind == TraceKind::TxEnd && e.slot < 100 && e.detail == "collided");
            let second_busy = events.iter().any(|e| e.kind == TraceKind::CcaBusy && e.node == 1 && e.slot < 100);
            assert_eq!(collided, offset <= 12, "offset {offset}");
            assert_eq!(second_busy, offset >= 13, "offset {offset}");
            assert!(counters.conserved());
        }
    }

    #[test]
    fn isolated_frame_timeline() {
        let net = NetworkConfig::unsat1(1, 50, 0.0);
        let cfg = SimConfig::new(net, 400).with_warmup(0).with_replications(1);
        let scripted = ScriptedInputs { arrivals: Some(vec![vec![5]]), backoffs: Some(vec![vec![2]]) };
        let (events, counters) = trace(&cfg, 100, &scripted).unwrap();
        let at = |kind| events.iter().find(|e| e.kind == kind).unwrap().slot;
        assert_eq!(at(TraceKind::CcaStart), 5 + 40);
        assert_eq!(at(TraceKind::TxStart), 45 + 8 + 12);
        assert_eq!(at(TraceKind::TxEnd), 65 + 100);
        assert_eq!(at(TraceKind::AckStart), 165 + 20);
        assert_eq!(at(TraceKind::Delivered), 165 + 42);
        assert_eq!(counters.success_service_symbols, 207 - 5);
        assert_eq!(counters.deliveries, 1);
    }

    #[test]
    fn trace_line_format() {
        let (events, _) = two_node_offset(3);
        assert_eq!(events[0].to_string(), "0\t0\tarrival\t");
        assert!(events.iter().all(|e| e.to_string().split('\t').count() == 4));
    }

    #[test]
    fn single_node_never_senses_busy() {
        let cfg = SimConfig::new(NetworkConfig::unsat1(1, 100, 0.2), 200_000).with_replications(1);
        let (events, c) = trace(&cfg, usize::MAX, &ScriptedInputs::default()).unwrap();
        assert!(events.iter().all(|e| e.kind != TraceKind::CcaBusy));
        assert_eq!(c.cca_busy, 0);
        assert_eq!(c.access_fail_drops + c.retry_fail_drops, 0);
        assert!(c.measured_deliveries > 0);
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = SimConfig::new(NetworkConfig::unsat_m(4, 40, 0.3, 3), 20_000).with_seed(7);
        let a = trace(&cfg, 5_000, &ScriptedInputs::default()).unwrap();
        let b = trace(&cfg, 5_000, &ScriptedInputs::default()).unwrap();
        assert_eq!(a, b);
        let c = trace(&cfg.with_seed(8), 5_000, &ScriptedInputs::default()).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn conservation_across_modes() {
        for net in
            [NetworkConfig::unsat1(5, 30, 0.4), NetworkConfig::unsat_m(6, 60, 0.5, 4), NetworkConfig::saturated(8, 40)]
        {
            let cfg = SimConfig::new(net, 50_000).with_replications(3).with_seed(11);
            for rep in run_replications(&cfg).unwrap() {
                assert!(rep.counters.conserved(), "{net:?}: {:?}", rep.counters);
                let th = rep.estimates.th;
                assert!((0.0..=1.0).contains(&th));
            }
        }
    }

    #[test]
    fn zero_rate_is_silent() {
        let cfg = SimConfig::new(NetworkConfig::unsat1(5, 100, 0.0), 10_000).with_replications(2);
        let r = run(&cfg).unwrap();
        assert_eq!((r.tau, r.a, r.th), (0.0, 0.0, 0.0));
        assert_eq!(r.ps, None);
    }

    #[test]
    fn saturated_nodes_stay_busy() {
        let cfg = SimConfig::new(NetworkConfig::saturated(3, 30), 20_000).with_replications(1);
        let rep = run_replication(&cfg, 0, &ScriptedInputs::default()).unwrap();
        assert_eq!(rep.counters.in_system_at_end, 3);
        assert_eq!(rep.counters.blocked_arrivals, 0);
        assert!(rep.estimates.a.unwrap() > 0.0);
    }

    #[test]
    fn replication_results_do_not_depend_on_thread_count() {
        let cfg = SimConfig::new(NetworkConfig::unsat1(4, 50, 0.2), 20_000).with_replications(6).with_seed(3);
        let pooled = run_replications(&cfg).unwrap();
        let serial: Vec<_> =
            (0..6).map(|rep| run_replication(&cfg, rep, &ScriptedInputs::default()).unwrap()).collect();
        assert_eq!(pooled, serial);
    }

    #[test]
    fn rejects_empty_horizon() {
        let cfg = SimConfig::new(NetworkConfig::unsat1(2, 50, 0.1), 0);
        assert!(run(&cfg).is_err());
    }
}
