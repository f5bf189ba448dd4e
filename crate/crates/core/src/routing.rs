//! Cooperative energy-saving short-range routing.
//!
//! Every cooperating node periodically broadcasts a beacon with the lowest
//! energy per bit it knows for reaching the base station. A node's view is
//! its neighbor table; from it the node derives
//!
//! * the via-neighbor cost `min_k { sr(n,k) + adv(k) }` over live entries,
//! * the advertised cost, which is the via-neighbor cost only when strictly
//!   below the node's own long-range cost and the long-range cost otherwise,
//! * the forwarding decision for each data packet, using the same rule.
//!
//! Beacons carry a single number, no path. A neighbor whose best route runs
//! back through us advertises at least `lr(us) + sr`, which is never below our
//! own long-range cost, so back-routes are rejected by the comparison alone.

use std::cell::Cell;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::energy::LinkCost;
use crate::scenario::{Adjacency, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub sender_id: NodeId,
    /// J/Mb, strictly positive.
    pub advertised_cost: f64,
    pub sent_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub neighbor_id: NodeId,
    pub advertised_cost: f64,
    pub last_heard: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("node {0} received its own beacon")]
    SelfBeacon(NodeId),
    #[error("advertised cost must be positive and finite, got {0}")]
    InvalidCost(f64),
}

/// Neighbor entries keyed by id, kept sorted so scans visit ids in order.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    entries: Vec<NeighborEntry>,
    timeout: f64,
    beacon_period: f64,
}

impl NeighborTable {
    pub fn new(beacon_period: f64, timeout: f64) -> Self {
        Self {
            entries: Vec::new(),
            timeout,
            beacon_period,
        }
    }

    pub fn timeout(&self) -> f64 {
        self.timeout
    }

    pub fn beacon_period(&self) -> f64 {
        self.beacon_period
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[NeighborEntry] {
        &self.entries
    }

    pub fn get(&self, id: NodeId) -> Option<&NeighborEntry> {
        self.entries
            .binary_search_by_key(&id, |e| e.neighbor_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    fn upsert(&mut self, entry: NeighborEntry) {
        match self
            .entries
            .binary_search_by_key(&entry.neighbor_id, |e| e.neighbor_id)
        {
            Ok(i) => self.entries[i] = entry,
            Err(i) => self.entries.insert(i, entry),
        }
    }

    pub fn is_live(&self, entry: &NeighborEntry, now: f64) -> bool {
        now - entry.last_heard <= self.timeout
    }

    /// Drops entries not heard for longer than the timeout. Returns how many
    /// were removed.
    pub fn expire(&mut self, now: f64) -> usize {
        let before = self.entries.len();
        let timeout = self.timeout;
        self.entries.retain(|e| now - e.last_heard <= timeout);
        before - self.entries.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardDecision {
    LongRange,
    ShortRange { next_hop: NodeId },
}

#[derive(Debug, Clone, Copy)]
struct CachedBest {
    from: f64,
    until: f64,
    next_hop: Option<NodeId>,
    cost: f64,
}

/// Routing state of one node.
#[derive(Debug, Clone)]
pub struct NodeRoutingState {
    node_id: NodeId,
    lr_cost: LinkCost,
    sr_cost: LinkCost,
    sr_overrides: BTreeMap<NodeId, LinkCost>,
    table: NeighborTable,
    // Memo of the last best-neighbor scan, valid while no entry changes and
    // no live entry reaches its expiry time.
    cache: Cell<Option<CachedBest>>,
}

impl NodeRoutingState {
    pub fn new(node_id: NodeId, lr_cost: LinkCost, sr_cost: LinkCost, table: NeighborTable) -> Self {
        Self {
            node_id,
            lr_cost,
            sr_cost,
            sr_overrides: BTreeMap::new(),
            table,
            cache: Cell::new(None),
        }
    }

    /// Sets a per-link short-range cost, overriding the uniform one.
    pub fn set_sr_cost_to(&mut self, neighbor: NodeId, cost: LinkCost) {
        self.sr_overrides.insert(neighbor, cost);
        self.cache.set(None);
    }

    pub fn node_id(&self) -> NodeId {
        self.node_id
    }

    pub fn lr_cost(&self) -> LinkCost {
        self.lr_cost
    }

    pub fn sr_cost_to(&self, neighbor: NodeId) -> LinkCost {
        self.sr_overrides
            .get(&neighbor)
            .copied()
            .unwrap_or(self.sr_cost)
    }

    pub fn table(&self) -> &NeighborTable {
        &self.table
    }

    pub fn handle_beacon(&mut self, beacon: &Beacon, now: f64) -> Result<(), RoutingError> {
        if beacon.sender_id == self.node_id {
            return Err(RoutingError::SelfBeacon(self.node_id));
        }
        if !(beacon.advertised_cost > 0.0 && beacon.advertised_cost.is_finite()) {
            return Err(RoutingError::InvalidCost(beacon.advertised_cost));
        }
        self.table.upsert(NeighborEntry {
            neighbor_id: beacon.sender_id,
            advertised_cost: beacon.advertised_cost,
            last_heard: now,
        });
        self.cache.set(None);
        Ok(())
    }

    pub fn expire(&mut self, now: f64) -> usize {
        let removed = self.table.expire(now);
        if removed > 0 {
            self.cache.set(None);
        }
        removed
    }

    /// Cheapest live neighbor and its total cost `sr(n,k) + adv(k)`, or
    /// `(None, inf)` with no live entries. Equal costs go to the lowest id.
    pub fn best_neighbor(&self, now: f64) -> (Option<NodeId>, f64) {
        if let Some(c) = self.cache.get() {
            if c.from <= now && now <= c.until {
                return (c.next_hop, c.cost);
            }
        }
        let mut best: (Option<NodeId>, f64) = (None, f64::INFINITY);
        let mut until = f64::INFINITY;
        for e in self.table.entries() {
            if !self.table.is_live(e, now) {
                continue;
            }
            until = until.min(e.last_heard + self.table.timeout);
            let cost = self.sr_cost_to(e.neighbor_id).value() + e.advertised_cost;
            if cost < best.1 {
                best = (Some(e.neighbor_id), cost);
            }
        }
        self.cache.set(Some(CachedBest {
            from: now,
            until,
            next_hop: best.0,
            cost: best.1,
        }));
        best
    }

    /// What this node tells its neighbors: the via-neighbor cost when it is
    /// strictly below the long-range cost, the long-range cost otherwise.
    pub fn advertised_cost(&self, now: f64) -> f64 {
        let (_, via) = self.best_neighbor(now);
        let lr = self.lr_cost.value();
        if via < lr {
            via
        } else {
            lr
        }
    }

    /// Same comparison as [`advertised_cost`](Self::advertised_cost); a tie
    /// keeps the packet on the long-range link.
    pub fn forward_decision(&self, now: f64) -> ForwardDecision {
        match self.best_neighbor(now) {
            (Some(next_hop), via) if via < self.lr_cost.value() => {
                ForwardDecision::ShortRange { next_hop }
            }
            _ => ForwardDecision::LongRange,
        }
    }

    /// Current best next hop, `None` when the long-range link wins.
    pub fn best_next_hop(&self, now: f64) -> Option<NodeId> {
        match self.forward_decision(now) {
            ForwardDecision::ShortRange { next_hop } => Some(next_hop),
            ForwardDecision::LongRange => None,
        }
    }

    pub fn make_beacon(&self, now: f64) -> Beacon {
        Beacon {
            sender_id: self.node_id,
            advertised_cost: self.advertised_cost(now),
            sent_at: now,
        }
    }
}

/// Delivers one node's beacon to each of its graph neighbors, lossless.
pub fn broadcast_beacon(
    states: &mut [NodeRoutingState],
    adjacency: &Adjacency,
    sender: NodeId,
    now: f64,
) -> Result<Beacon, RoutingError> {
    let beacon = states[sender].make_beacon(now);
    for &k in adjacency.neighbors(sender) {
        states[k].handle_beacon(&beacon, now)?;
    }
    Ok(beacon)
}

/// One lossless beacon round in which every node sends a beacon computed
/// from the tables as they stood at the start of the round.
pub fn synchronous_round(
    states: &mut [NodeRoutingState],
    adjacency: &Adjacency,
    now: f64,
) -> Result<(), RoutingError> {
    let beacons: Vec<Beacon> = states.iter().map(|s| s.make_beacon(now)).collect();
    for beacon in &beacons {
        for &k in adjacency.neighbors(beacon.sender_id) {
            states[k].handle_beacon(beacon, now)?;
        }
    }
    Ok(())
}

/// Runs synchronous rounds until no advertised cost changes, up to
/// `max_rounds`. Returns the number of rounds executed, or `None` when the
/// costs were still changing at the limit.
pub fn converge(
    states: &mut [NodeRoutingState],
    adjacency: &Adjacency,
    start: f64,
    round_period: f64,
    max_rounds: usize,
) -> Result<Option<usize>, RoutingError> {
    let mut now = start;
    let mut previous: Vec<f64> = states.iter().map(|s| s.advertised_cost(now)).collect();
    for round in 1..=max_rounds {
        synchronous_round(states, adjacency, now)?;
        let current: Vec<f64> = states.iter().map(|s| s.advertised_cost(now)).collect();
        if current == previous {
            return Ok(Some(round));
        }
        previous = current;
        now += round_period;
    }
    Ok(None)
}
