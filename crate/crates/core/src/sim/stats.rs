use crate::energy::{total_energy, EnergyLedger, InterfaceKind, PowerTable};
use crate::scenario::{MtClass, NodeId};

use super::config::Mode;

/// Why a packet never reached the BS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    /// The shared uplink queue was full.
    pub uplink_overflow: u64,
    /// The short-range transmit queue of some node on the path was full.
    pub sr_queue_overflow: u64,
    /// The next hop was out of range when the frame finished.
    pub sr_link_failure: u64,
    /// The packet used up its short-range hop allowance.
    pub hop_budget: u64,
}

impl DropCounts {
    pub fn total(&self) -> u64 {
        self.uplink_overflow + self.sr_queue_overflow + self.sr_link_failure + self.hop_budget
    }
}

/// Per-node outcome of one run. Traffic counters are indexed by the node as
/// packet source; `relayed` counts packets the node forwarded for others.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub node_id: NodeId,
    pub class: MtClass,
    pub generated: u64,
    pub delivered_pkts: u64,
    /// Mb received at the BS from this source.
    pub delivered_mbits: f64,
    pub dropped: DropCounts,
    pub in_flight_at_end: u64,
    pub relayed: u64,
    /// Delivered packets by number of short-range hops taken.
    pub hop_histogram: Vec<u64>,
    pub ledger: EnergyLedger,
    pub energy_lr_j: f64,
    pub energy_sr_j: f64,
    pub energy_total_j: f64,
}

impl NodeStats {
    pub fn hops_mean(&self) -> f64 {
        let delivered: u64 = self.hop_histogram.iter().sum();
        if delivered == 0 {
            return 0.0;
        }
        let weighted: u64 = self
            .hop_histogram
            .iter()
            .enumerate()
            .map(|(h, c)| h as u64 * c)
            .sum();
        weighted as f64 / delivered as f64
    }

    pub(crate) fn finish(&mut self, powers: &PowerTable, packet_bits: f64) {
        self.delivered_mbits = self.delivered_pkts as f64 * packet_bits / 1e6;
        self.energy_lr_j = self.ledger.interface_energy(InterfaceKind::LongRange, powers);
        self.energy_sr_j = self.ledger.interface_energy(InterfaceKind::ShortRange, powers);
        self.energy_total_j = total_energy(&self.ledger, powers);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BeaconCounts {
    pub sent: u64,
    /// Successful (sender, receiver) deliveries.
    pub received: u64,
    /// In-range receivers that were busy when the beacon started.
    pub lost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub run_index: u32,
    pub mode: Mode,
    pub duration: f64,
    pub seed: u64,
    pub nodes: Vec<NodeStats>,
    /// Aggregate delivered Mb over the run duration.
    pub goodput_mbps: f64,
    pub beacons: BeaconCounts,
    pub events_processed: u64,
    /// Dispatches whose timestamp was earlier than the previous one. Always
    /// zero unless the engine is broken.
    pub causality_violations: u64,
}

impl RunStats {
    pub fn total_energy_j(&self) -> f64 {
        self.nodes.iter().map(|n| n.energy_total_j).sum()
    }

    pub fn total_delivered_mbits(&self) -> f64 {
        self.nodes.iter().map(|n| n.delivered_mbits).sum()
    }

    pub fn total_generated(&self) -> u64 {
        self.nodes.iter().map(|n| n.generated).sum()
    }
}
