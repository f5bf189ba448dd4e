//! The single-threaded event loop of one run.
//!
//! Medium models:
//!
//! * Long range: one FIFO server at the base station shared by every node.
//!   A packet's service time is its size over the sending node's class rate,
//!   and the sender's long-range radio is in TX for exactly that time.
//! * Short range: protocol-model interference. A frame marks the medium busy
//!   at every node within range of the sender for its airtime. A node only
//!   starts sending when its own medium is idle and, for unicast frames, the
//!   addressed neighbor's medium is idle too. Deferred nodes retry when the
//!   blocking frame ends; same-instant contenders go in the order they
//!   started waiting. Beacons reach only the in-range nodes whose medium was
//!   idle when the beacon started.

use std::collections::VecDeque;

use rand::Rng;

use crate::energy::{energy_per_bit, EnergyLedger, InterfaceKind, LinkCost, RadioState};
use crate::mobility::{advance_all, MobilityState};
use crate::rng::{derive_seed, seeded_rng, stream, SimRng};
use crate::routing::{Beacon, ForwardDecision, NeighborTable, NodeRoutingState};
use crate::scenario::{MtClass, NodeId, Position, Scenario};

use super::config::{ConfigError, Mode, SimConfig};
use super::event::{key_cmp, CbrStream, EventKind, EventQueue};
use super::stats::{BeaconCounts, DropCounts, NodeStats, RunStats};

/// One routing decision, as written to the routing trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub time: f64,
    pub node_id: NodeId,
    pub decision: ForwardDecision,
    /// Best via-neighbor cost, `inf` with an empty table.
    pub eq1_cost: f64,
    pub lr_cost: f64,
}

/// Observer hooks for optional trace output.
pub trait TraceSink {
    fn decision(&mut self, _record: &DecisionRecord) {}
    fn position(&mut self, _time: f64, _node: NodeId, _position: Position) {}
}

pub struct NoTrace;

impl TraceSink for NoTrace {}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Packet {
    source: NodeId,
    hops_taken: u32,
}

#[derive(Debug, Clone, Copy)]
enum Frame {
    Data { packet: Packet, next_hop: NodeId },
    Beacon,
}

#[derive(Debug)]
struct Transmission {
    data: Option<(Packet, NodeId)>,
    beacon: Option<Beacon>,
    /// Nodes whose short-range radio is held in RX by this frame.
    rx_charged: Vec<NodeId>,
    /// Nodes that will decode the beacon.
    beacon_receivers: Vec<NodeId>,
    target_listening: bool,
    sender_charged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mac {
    Idle,
    AttemptScheduled,
    Transmitting,
}

struct NodeState {
    class: MtClass,
    position: Position,
    mobility: Option<MobilityState>,
    routing: Option<NodeRoutingState>,
    lr_rate: f64,
    sr_queue: VecDeque<Frame>,
    sr_data_queued: u32,
    beacon_queued: bool,
    mac: Mac,
    current: Option<Transmission>,
    busy_until: f64,
    rx_count: u32,
    sr_tx: bool,
    ledger: EnergyLedger,
    generated: u64,
    delivered: u64,
    dropped: DropCounts,
    relayed: u64,
    hops: Vec<u64>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    scenario: &'a Scenario,
    trace: &'a mut dyn TraceSink,
    rng: SimRng,
    now: f64,
    queue: EventQueue,
    cbr: CbrStream,
    nodes: Vec<NodeState>,
    in_range: Vec<bool>,
    neighbors: Vec<Vec<NodeId>>,
    uplink: VecDeque<(NodeId, Packet)>,
    uplink_cap: usize,
    in_service: Option<(NodeId, Packet)>,
    hop_budget: u32,
    data_airtime: f64,
    beacon_airtime: f64,
    beacons: BeaconCounts,
    events: u64,
    causality_violations: u64,
    last_dispatch: f64,
}

/// Runs one simulation. The run seed is derived from the master seed and
/// `run_index`, so repeated calls return identical statistics.
pub fn run(config: &SimConfig, scenario: &Scenario, run_index: u32) -> Result<RunStats, ConfigError> {
    run_traced(config, scenario, run_index, &mut NoTrace)
}

pub fn run_traced(
    config: &SimConfig,
    scenario: &Scenario,
    run_index: u32,
    trace: &mut dyn TraceSink,
) -> Result<RunStats, ConfigError> {
    config.validate()?;
    if run_index >= config.runs {
        return Err(ConfigError::RunIndex {
            index: run_index,
            runs: config.runs,
        });
    }
    if scenario.is_empty() {
        return Err(ConfigError::EmptyScenario);
    }
    let seed = derive_seed(config.master_seed, &[stream::RUN, u64::from(run_index)]);
    let mut engine = Engine::new(config, scenario, seed, trace)?;
    engine.run_loop();
    Ok(engine.finish(run_index, seed))
}

fn lr_cost_for(config: &SimConfig, class: MtClass) -> Result<LinkCost, ConfigError> {
    energy_per_bit(config.power.long_range.tx_w, config.rates.lr_rate(class)).map_err(|e| {
        ConfigError::Invalid {
            field: "rates",
            message: e.to_string(),
        }
    })
}

impl<'a> Engine<'a> {
    fn new(
        cfg: &'a SimConfig,
        scenario: &'a Scenario,
        seed: u64,
        trace: &'a mut dyn TraceSink,
    ) -> Result<Self, ConfigError> {
        let n = scenario.len();
        let mut rng = seeded_rng(seed);
        let cooperative = cfg.mode == Mode::Cooperative;
        let present: &[InterfaceKind] = if cooperative {
            &InterfaceKind::ALL
        } else {
            &[InterfaceKind::LongRange]
        };
        let sr_cost = energy_per_bit(cfg.power.short_range.tx_w, cfg.rates.sr_rate).map_err(|e| {
            ConfigError::Invalid {
                field: "rates",
                message: e.to_string(),
            }
        })?;

        let mut queue = EventQueue::new();
        let mut phases = Vec::with_capacity(n);
        let mut nodes = Vec::with_capacity(n);
        for rec in &scenario.nodes {
            // fixed consumption per node: cbr phase, beacon phase, heading
            let cbr_u: f64 = rng.random();
            let beacon_u: f64 = rng.random();
            let mobility = cfg
                .mobility
                .as_ref()
                .map(|p| MobilityState::init(rec.position, p, &mut rng));

            let is_source = cfg.class_a_sources || rec.class == MtClass::ClassB;
            if is_source && cfg.cbr_rate > 0.0 {
                phases.push((cbr_u / cfg.cbr_rate, rec.id));
            }
            let routing = if cooperative {
                queue.schedule(beacon_u * cfg.beacon_period, EventKind::BeaconDue { node: rec.id });
                Some(NodeRoutingState::new(
                    rec.id,
                    lr_cost_for(cfg, rec.class)?,
                    sr_cost,
                    NeighborTable::new(cfg.beacon_period, cfg.timeout()),
                ))
            } else {
                None
            };
            nodes.push(NodeState {
                class: rec.class,
                position: rec.position,
                mobility,
                routing,
                lr_rate: cfg.rates.lr_rate(rec.class),
                sr_queue: VecDeque::new(),
                sr_data_queued: 0,
                beacon_queued: false,
                mac: Mac::Idle,
                current: None,
                busy_until: 0.0,
                rx_count: 0,
                sr_tx: false,
                ledger: EnergyLedger::new(0.0, present),
                generated: 0,
                delivered: 0,
                dropped: DropCounts::default(),
                relayed: 0,
                hops: Vec::new(),
            });
        }

        if cooperative {
            queue.schedule(cfg.sweep_interval(), EventKind::TableSweep);
        }
        if let Some(p) = &cfg.mobility {
            if !p.is_static() {
                queue.schedule(p.update_interval, EventKind::MobilityTick);
            }
        }

        let mut engine = Self {
            cfg,
            scenario,
            trace,
            rng,
            now: 0.0,
            queue,
            cbr: CbrStream::new(cfg.cbr_rate, phases),
            nodes,
            in_range: vec![false; n * n],
            neighbors: vec![Vec::new(); n],
            uplink: VecDeque::new(),
            uplink_cap: cfg.uplink_queue_per_node as usize * n,
            in_service: None,
            hop_budget: cfg.hop_budget_for(n),
            data_airtime: cfg.packet_bits() / (cfg.rates.sr_rate * 1e6),
            beacon_airtime: f64::from(cfg.beacon_size) * 8.0 / (cfg.rates.sr_rate * 1e6),
            beacons: BeaconCounts::default(),
            events: 0,
            causality_violations: 0,
            last_dispatch: 0.0,
        };
        engine.rebuild_ranges();
        if engine.cfg.mobility.is_some() {
            for (id, node) in engine.nodes.iter().enumerate() {
                engine.trace.position(0.0, id, node.position);
            }
        }
        Ok(engine)
    }

    fn rebuild_ranges(&mut self) {
        let n = self.nodes.len();
        let range = self.cfg.tx_range;
        for list in &mut self.neighbors {
            list.clear();
        }
        for i in 0..n {
            self.in_range[i * n + i] = false;
            for j in (i + 1)..n {
                let close = self.nodes[i].position.distance(&self.nodes[j].position) <= range;
                self.in_range[i * n + j] = close;
                self.in_range[j * n + i] = close;
                if close {
                    self.neighbors[i].push(j);
                    self.neighbors[j].push(i);
                }
            }
        }
        for list in &mut self.neighbors {
            list.sort_unstable();
        }
    }

    fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        self.in_range[a * self.nodes.len() + b]
    }

    fn run_loop(&mut self) {
        let end = self.cfg.duration;
        loop {
            let heap_key = self.queue.peek().map(|e| e.key());
            let cbr_next = self.cbr.peek();
            let take_cbr = match (cbr_next, heap_key) {
                (None, None) => break,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some((t, _)), Some(k)) => {
                    let cbr_key = (t, EventKind::CbrArrival { node: 0 }.priority(), 0);
                    key_cmp(cbr_key, k).is_lt()
                }
            };
            let (time, kind) = if take_cbr {
                let (t, node) = cbr_next.expect("checked above");
                (t, EventKind::CbrArrival { node })
            } else {
                let e = self.queue.peek().expect("checked above");
                (e.time, e.kind)
            };
            if time >= end {
                break;
            }
            if take_cbr {
                self.cbr.advance();
            } else {
                self.queue.pop();
            }
            if time < self.last_dispatch {
                self.causality_violations += 1;
            }
            self.last_dispatch = time;
            self.now = time;
            self.events += 1;
            self.dispatch(kind);
        }
        self.now = end;
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::CbrArrival { node } => {
                self.nodes[node].generated += 1;
                let packet = Packet {
                    source: node,
                    hops_taken: 0,
                };
                self.on_packet_arrival(node, packet);
            }
            EventKind::BeaconDue { node } => self.on_beacon_due(node),
            EventKind::MediumAttempt { node } => self.on_medium_attempt(node),
            EventKind::SrTxEnd { node } => self.on_sr_tx_end(node),
            EventKind::LrTxEnd => self.on_lr_tx_end(),
            EventKind::MobilityTick => self.on_mobility_tick(),
            EventKind::TableSweep => {
                let now = self.now;
                for node in &mut self.nodes {
                    if let Some(r) = node.routing.as_mut() {
                        r.expire(now);
                    }
                }
                self.queue
                    .schedule(now + self.cfg.sweep_interval(), EventKind::TableSweep);
            }
        }
    }

    fn on_packet_arrival(&mut self, node: NodeId, packet: Packet) {
        let now = self.now;
        if packet.source != node {
            self.nodes[node].relayed += 1;
        }
        let Some(routing) = self.nodes[node].routing.as_mut() else {
            self.lr_enqueue(node, packet);
            return;
        };
        routing.expire(now);
        let decision = routing.forward_decision(now);
        let record = DecisionRecord {
            time: now,
            node_id: node,
            decision,
            eq1_cost: routing.best_neighbor(now).1,
            lr_cost: routing.lr_cost().value(),
        };
        self.trace.decision(&record);
        match decision {
            ForwardDecision::LongRange => self.lr_enqueue(node, packet),
            ForwardDecision::ShortRange { next_hop } => {
                if packet.hops_taken >= self.hop_budget {
                    self.nodes[packet.source].dropped.hop_budget += 1;
                    return;
                }
                if self.nodes[node].sr_data_queued >= self.cfg.sr_queue_capacity {
                    self.nodes[packet.source].dropped.sr_queue_overflow += 1;
                    return;
                }
                let n = &mut self.nodes[node];
                n.sr_queue.push_back(Frame::Data { packet, next_hop });
                n.sr_data_queued += 1;
                self.kick_mac(node);
            }
        }
    }

    fn kick_mac(&mut self, node: NodeId) {
        if self.nodes[node].mac == Mac::Idle {
            self.nodes[node].mac = Mac::AttemptScheduled;
            self.queue
                .schedule(self.now, EventKind::MediumAttempt { node });
        }
    }

    fn lr_enqueue(&mut self, node: NodeId, packet: Packet) {
        if self.uplink.len() >= self.uplink_cap {
            self.nodes[packet.source].dropped.uplink_overflow += 1;
            return;
        }
        self.uplink.push_back((node, packet));
        if self.in_service.is_none() {
            self.start_lr_service();
        }
    }

    fn start_lr_service(&mut self) {
        let Some((node, packet)) = self.uplink.pop_front() else {
            return;
        };
        let service = self.cfg.packet_bits() / (self.nodes[node].lr_rate * 1e6);
        self.set_lr_state(node, RadioState::Tx);
        self.in_service = Some((node, packet));
        self.queue.schedule(self.now + service, EventKind::LrTxEnd);
    }

    fn on_lr_tx_end(&mut self) {
        let (node, packet) = self.in_service.take().expect("LrTxEnd without a packet in service");
        self.set_lr_state(node, RadioState::Idle);
        let src = &mut self.nodes[packet.source];
        src.delivered += 1;
        let h = packet.hops_taken as usize;
        if src.hops.len() <= h {
            src.hops.resize(h + 1, 0);
        }
        src.hops[h] += 1;
        self.start_lr_service();
    }

    fn set_lr_state(&mut self, node: NodeId, state: RadioState) {
        let now = self.now;
        self.nodes[node]
            .ledger
            .transition_state(InterfaceKind::LongRange, state, now)
            .expect("event loop time is monotone");
    }

    fn refresh_sr_state(&mut self, node: NodeId) {
        let now = self.now;
        let n = &mut self.nodes[node];
        let desired = if n.sr_tx {
            RadioState::Tx
        } else if n.rx_count > 0 {
            RadioState::Rx
        } else {
            RadioState::Idle
        };
        if n.ledger.state(InterfaceKind::ShortRange) != Some(desired) {
            n.ledger
                .transition_state(InterfaceKind::ShortRange, desired, now)
                .expect("event loop time is monotone");
        }
    }

    fn on_beacon_due(&mut self, node: NodeId) {
        self.queue.schedule(
            self.now + self.cfg.beacon_period,
            EventKind::BeaconDue { node },
        );
        let n = &mut self.nodes[node];
        if !n.beacon_queued {
            n.beacon_queued = true;
            n.sr_queue.push_front(Frame::Beacon);
            self.kick_mac(node);
        }
    }

    fn on_medium_attempt(&mut self, node: NodeId) {
        if self.nodes[node].mac != Mac::AttemptScheduled {
            return;
        }
        let Some(&frame) = self.nodes[node].sr_queue.front() else {
            self.nodes[node].mac = Mac::Idle;
            return;
        };
        let mut free_at = self.nodes[node].busy_until;
        if let Frame::Data { next_hop, .. } = frame {
            if self.in_range(node, next_hop) {
                free_at = free_at.max(self.nodes[next_hop].busy_until);
            }
        }
        if free_at > self.now {
            self.queue
                .schedule(free_at, EventKind::MediumAttempt { node });
            return;
        }
        self.start_sr_tx(node);
    }

    fn start_sr_tx(&mut self, node: NodeId) {
        let now = self.now;
        let frame = self.nodes[node]
            .sr_queue
            .pop_front()
            .expect("attempt with empty queue");
        let neighbors = std::mem::take(&mut self.neighbors[node]);
        let (airtime, charged) = match frame {
            Frame::Data { .. } => (self.data_airtime, true),
            Frame::Beacon => (self.beacon_airtime, self.cfg.beacon_energy_counted),
        };
        let end = now + airtime;

        let mut tx = Transmission {
            data: None,
            beacon: None,
            rx_charged: Vec::new(),
            beacon_receivers: Vec::new(),
            target_listening: false,
            sender_charged: charged,
        };
        match frame {
            Frame::Data { packet, next_hop } => {
                self.nodes[node].sr_data_queued -= 1;
                tx.target_listening = self.in_range(node, next_hop);
                tx.data = Some((packet, next_hop));
                if !self.cfg.sr_overhearing && tx.target_listening {
                    tx.rx_charged.push(next_hop);
                }
            }
            Frame::Beacon => {
                self.nodes[node].beacon_queued = false;
                let beacon = self.nodes[node]
                    .routing
                    .as_ref()
                    .expect("beacons only in cooperative mode")
                    .make_beacon(now);
                tx.beacon = Some(beacon);
                self.beacons.sent += 1;
                for &j in &neighbors {
                    if self.nodes[j].busy_until <= now {
                        tx.beacon_receivers.push(j);
                    } else {
                        self.beacons.lost += 1;
                    }
                }
                if charged && !self.cfg.sr_overhearing {
                    tx.rx_charged.extend_from_slice(&tx.beacon_receivers);
                }
            }
        }
        if charged && self.cfg.sr_overhearing {
            tx.rx_charged.extend_from_slice(&neighbors);
        }

        for &j in &neighbors {
            let b = &mut self.nodes[j].busy_until;
            *b = b.max(end);
        }
        self.nodes[node].busy_until = end;
        self.neighbors[node] = neighbors;

        for k in 0..tx.rx_charged.len() {
            let j = tx.rx_charged[k];
            self.nodes[j].rx_count += 1;
            self.refresh_sr_state(j);
        }
        if charged {
            self.nodes[node].sr_tx = true;
            self.refresh_sr_state(node);
        }
        self.nodes[node].current = Some(tx);
        self.nodes[node].mac = Mac::Transmitting;
        self.queue.schedule(end, EventKind::SrTxEnd { node });
    }

    fn on_sr_tx_end(&mut self, node: NodeId) {
        let now = self.now;
        let tx = self.nodes[node]
            .current
            .take()
            .expect("SrTxEnd without a transmission");
        if tx.sender_charged {
            self.nodes[node].sr_tx = false;
            self.refresh_sr_state(node);
        }
        for &j in &tx.rx_charged {
            self.nodes[j].rx_count -= 1;
            self.refresh_sr_state(j);
        }
        self.nodes[node].mac = Mac::Idle;
        if !self.nodes[node].sr_queue.is_empty() {
            self.kick_mac(node);
        }

        if let Some(beacon) = tx.beacon {
            for &j in &tx.beacon_receivers {
                self.nodes[j]
                    .routing
                    .as_mut()
                    .expect("beacons only in cooperative mode")
                    .handle_beacon(&beacon, now)
                    .expect("beacons are never delivered to their sender");
                self.beacons.received += 1;
            }
        }
        if let Some((packet, next_hop)) = tx.data {
            if tx.target_listening && self.in_range(node, next_hop) {
                let forwarded = Packet {
                    source: packet.source,
                    hops_taken: packet.hops_taken + 1,
                };
                self.on_packet_arrival(next_hop, forwarded);
            } else {
                self.nodes[packet.source].dropped.sr_link_failure += 1;
            }
        }
    }

    fn on_mobility_tick(&mut self) {
        let params = self.cfg.mobility.expect("ticks only with mobility");
        let states: Vec<MobilityState> = self
            .nodes
            .iter()
            .map(|n| n.mobility.expect("mobility state initialized"))
            .collect();
        let next = advance_all(&states, &params, self.scenario.area, &mut self.rng);
        for (id, (node, state)) in self.nodes.iter_mut().zip(next).enumerate() {
            node.mobility = Some(state);
            node.position = state.position;
            self.trace.position(self.now, id, state.position);
        }
        self.rebuild_ranges();
        self.queue
            .schedule(self.now + params.update_interval, EventKind::MobilityTick);
    }

    fn finish(mut self, run_index: u32, seed: u64) -> RunStats {
        let end = self.cfg.duration;
        let mut in_flight = vec![0u64; self.nodes.len()];
        for node in &self.nodes {
            for frame in &node.sr_queue {
                if let Frame::Data { packet, .. } = frame {
                    in_flight[packet.source] += 1;
                }
            }
            if let Some((packet, _)) = node.current.as_ref().and_then(|t| t.data) {
                in_flight[packet.source] += 1;
            }
        }
        for (_, packet) in self.uplink.iter().chain(self.in_service.iter()) {
            in_flight[packet.source] += 1;
        }

        let packet_bits = self.cfg.packet_bits();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter_mut().enumerate() {
            node.ledger.close(end).expect("run end is after every event");
            let mut stats = NodeStats {
                node_id: id,
                class: node.class,
                generated: node.generated,
                delivered_pkts: node.delivered,
                delivered_mbits: 0.0,
                dropped: node.dropped,
                in_flight_at_end: in_flight[id],
                relayed: node.relayed,
                hop_histogram: std::mem::take(&mut node.hops),
                ledger: node.ledger.clone(),
                energy_lr_j: 0.0,
                energy_sr_j: 0.0,
                energy_total_j: 0.0,
            };
            stats.finish(&self.cfg.power, packet_bits);
            nodes.push(stats);
        }
        let delivered: f64 = nodes.iter().map(|n| n.delivered_mbits).sum();
        RunStats {
            run_index,
            mode: self.cfg.mode,
            duration: end,
            seed,
            nodes,
            goodput_mbps: delivered / end,
            beacons: self.beacons,
            events_processed: self.events,
            causality_violations: self.causality_violations,
        }
    }
}
