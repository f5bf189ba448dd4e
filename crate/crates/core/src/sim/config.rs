use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::PowerTable;
use crate::mobility::MobilityParams;
use crate::scenario::RateProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Long-range interface only, every packet sent straight to the BS.
    Benchmark,
    /// Both interfaces active, packets routed by the cooperative protocol.
    Cooperative,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Benchmark => "benchmark",
            Mode::Cooperative => "cooperative",
        }
    }
}

/// Everything one run needs besides the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Seconds of simulated time per run.
    pub duration: f64,
    pub runs: u32,
    pub beacon_period: f64,
    /// Neighbor entry lifetime; defaults to three beacon periods.
    pub table_timeout: Option<f64>,
    /// Packets per second per source.
    pub cbr_rate: f64,
    /// Data packet size in bytes.
    pub packet_size: u32,
    /// Beacon frame size in bytes.
    pub beacon_size: u32,
    pub tx_range: f64,
    pub mode: Mode,
    /// Maximum short-range hops per packet; defaults to `4 * N`.
    pub hop_budget: Option<u32>,
    pub mobility: Option<MobilityParams>,
    pub master_seed: u64,
    pub rates: RateProfile,
    pub power: PowerTable,
    /// Shared uplink queue capacity, in packets per node.
    pub uplink_queue_per_node: u32,
    /// Per-node short-range transmit queue capacity, in data packets.
    pub sr_queue_capacity: u32,
    /// When false, class A nodes only relay.
    pub class_a_sources: bool,
    /// Charge beacon airtime to the radio ledgers.
    pub beacon_energy_counted: bool,
    /// Every node in range of a short-range sender spends the frame in RX,
    /// not only the addressed receiver.
    pub sr_overhearing: bool,
    /// Interval between neighbor table sweeps; defaults to the beacon period.
    pub table_sweep_interval: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 100.0,
            runs: 10,
            beacon_period: 5.0,
            table_timeout: None,
            cbr_rate: 3000.0,
            packet_size: 1024,
            beacon_size: 64,
            tx_range: 20.0,
            mode: Mode::Cooperative,
            hop_budget: None,
            mobility: None,
            master_seed: 1,
            rates: RateProfile::default(),
            power: PowerTable::default(),
            uplink_queue_per_node: 50,
            sr_queue_capacity: 50,
            class_a_sources: true,
            beacon_energy_counted: true,
            sr_overhearing: true,
            table_sweep_interval: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("run index {index} out of range (runs = {runs})")]
    RunIndex { index: u32, runs: u32 },
    #[error("scenario has no nodes")]
    EmptyScenario,
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

impl SimConfig {
    pub fn timeout(&self) -> f64 {
        self.table_timeout.unwrap_or(3.0 * self.beacon_period)
    }

    pub fn sweep_interval(&self) -> f64 {
        self.table_sweep_interval.unwrap_or(self.beacon_period)
    }

    pub fn hop_budget_for(&self, nodes: usize) -> u32 {
        self.hop_budget.unwrap_or(4 * nodes as u32)
    }

    pub fn packet_bits(&self) -> f64 {
        f64::from(self.packet_size) * 8.0
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be > 0, got {v}")))
            }
        };
        positive("duration", self.duration)?;
        positive("beacon_period", self.beacon_period)?;
        positive("tx_range", self.tx_range)?;
        if let Some(t) = self.table_timeout {
            positive("table_timeout", t)?;
        }
        if let Some(t) = self.table_sweep_interval {
            positive("table_sweep_interval", t)?;
        }
        if !(self.cbr_rate >= 0.0 && self.cbr_rate.is_finite()) {
            return Err(invalid("cbr_rate", format!("must be >= 0, got {}", self.cbr_rate)));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be >= 1"));
        }
        if self.packet_size == 0 {
            return Err(invalid("packet_size", "must be > 0"));
        }
        if self.beacon_size == 0 {
            return Err(invalid("beacon_size", "must be > 0"));
        }
        if self.uplink_queue_per_node == 0 {
            return Err(invalid("uplink_queue_per_node", "must be > 0"));
        }
        if self.sr_queue_capacity == 0 {
            return Err(invalid("sr_queue_capacity", "must be > 0"));
        }
        if self.hop_budget == Some(0) {
            return Err(invalid("hop_budget", "must be > 0"));
        }
        self.rates.validate().map_err(|m| invalid("rates", m))?;
        self.power.validate().map_err(|m| invalid("power", m))?;
        if let Some(m) = &self.mobility {
            m.validate().map_err(|msg| invalid("mobility", msg))?;
        }
        Ok(())
    }
}
