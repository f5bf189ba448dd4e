//! Per-interface radio state accounting and energy-per-bit link costs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InterfaceKind {
    ShortRange,
    LongRange,
}

impl InterfaceKind {
    pub const ALL: [InterfaceKind; 2] = [InterfaceKind::ShortRange, InterfaceKind::LongRange];

    fn index(self) -> usize {
        match self {
            InterfaceKind::ShortRange => 0,
            InterfaceKind::LongRange => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterfaceKind::ShortRange => "sr",
            InterfaceKind::LongRange => "lr",
        }
    }
}

/// No sleep state: an interface that is not sending or receiving is idle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RadioState {
    Tx,
    Rx,
    Idle,
}

impl RadioState {
    pub const ALL: [RadioState; 3] = [RadioState::Tx, RadioState::Rx, RadioState::Idle];

    fn index(self) -> usize {
        match self {
            RadioState::Tx => 0,
            RadioState::Rx => 1,
            RadioState::Idle => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RadioState::Tx => "tx",
            RadioState::Rx => "rx",
            RadioState::Idle => "idle",
        }
    }
}

/// Power draw in watts for each radio state of one interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerProfile {
    pub tx_w: f64,
    pub rx_w: f64,
    pub idle_w: f64,
}

impl PowerProfile {
    /// 802.11g short-range radio.
    pub const WIFI: PowerProfile = PowerProfile {
        tx_w: 0.890,
        rx_w: 0.890,
        idle_w: 0.256,
    };
    /// WiMAX long-range radio.
    pub const WIMAX: PowerProfile = PowerProfile {
        tx_w: 2.409,
        rx_w: 1.485,
        idle_w: 0.660,
    };

    pub fn power(&self, state: RadioState) -> f64 {
        match state {
            RadioState::Tx => self.tx_w,
            RadioState::Rx => self.rx_w,
            RadioState::Idle => self.idle_w,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if [self.tx_w, self.rx_w, self.idle_w]
            .iter()
            .all(|w| *w >= 0.0 && w.is_finite())
        {
            Ok(())
        } else {
            Err(format!("power values must be >= 0: {self:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerTable {
    pub short_range: PowerProfile,
    pub long_range: PowerProfile,
}

impl Default for PowerTable {
    fn default() -> Self {
        Self {
            short_range: PowerProfile::WIFI,
            long_range: PowerProfile::WIMAX,
        }
    }
}

impl PowerTable {
    pub fn get(&self, iface: InterfaceKind) -> &PowerProfile {
        match iface {
            InterfaceKind::ShortRange => &self.short_range,
            InterfaceKind::LongRange => &self.long_range,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.short_range.validate()?;
        self.long_range.validate()
    }
}

/// Energy needed to push one megabit over a link, in J/Mb.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LinkCost(f64);

impl LinkCost {
    pub fn new(j_per_mb: f64) -> Result<Self, EnergyError> {
        if j_per_mb >= 0.0 && j_per_mb.is_finite() {
            Ok(Self(j_per_mb))
        } else {
            Err(EnergyError::InvalidCost(j_per_mb))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn scaled(self, factor: f64) -> Result<Self, EnergyError> {
        Self::new(self.0 * factor)
    }
}

impl fmt::Display for LinkCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} J/Mb", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("data rate must be positive, got {0} Mb/s")]
    NonPositiveRate(f64),
    #[error("power must be non-negative, got {0} W")]
    NegativePower(f64),
    #[error("link cost must be finite and non-negative, got {0}")]
    InvalidCost(f64),
    #[error("time went backwards on {iface:?}: {now} < {last}")]
    TimeRegression {
        iface: InterfaceKind,
        now: f64,
        last: f64,
    },
    #[error("{0:?} interface is not present in this ledger")]
    MissingInterface(InterfaceKind),
}

/// TX power over rate: W / (Mb/s) = J/Mb.
pub fn energy_per_bit(power_tx: f64, rate_mbps: f64) -> Result<LinkCost, EnergyError> {
    if !(rate_mbps > 0.0) {
        return Err(EnergyError::NonPositiveRate(rate_mbps));
    }
    if !(power_tx >= 0.0) {
        return Err(EnergyError::NegativePower(power_tx));
    }
    LinkCost::new(power_tx / rate_mbps)
}

#[derive(Debug, Clone, PartialEq)]
struct InterfaceLedger {
    seconds: [f64; 3],
    state: RadioState,
    since: f64,
}

/// Time spent by each interface of one node in each radio state.
///
/// Every transition credits the time since the previous transition to the
/// state being left. After [`EnergyLedger::close`] the per-interface totals
/// sum to the elapsed time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    start: f64,
    interfaces: [Option<InterfaceLedger>; 2],
}

impl EnergyLedger {
    /// A ledger whose present interfaces all start idle at `start`.
    pub fn new(start: f64, present: &[InterfaceKind]) -> Self {
        let mut interfaces = [None, None];
        for iface in present {
            interfaces[iface.index()] = Some(InterfaceLedger {
                seconds: [0.0; 3],
                state: RadioState::Idle,
                since: start,
            });
        }
        Self { start, interfaces }
    }

    pub fn has(&self, iface: InterfaceKind) -> bool {
        self.interfaces[iface.index()].is_some()
    }

    pub fn start_time(&self) -> f64 {
        self.start
    }

    pub fn state(&self, iface: InterfaceKind) -> Option<RadioState> {
        self.interfaces[iface.index()].as_ref().map(|l| l.state)
    }

    pub fn transition_state(
        &mut self,
        iface: InterfaceKind,
        new_state: RadioState,
        now: f64,
    ) -> Result<(), EnergyError> {
        let ledger = self.interfaces[iface.index()]
            .as_mut()
            .ok_or(EnergyError::MissingInterface(iface))?;
        if now < ledger.since {
            return Err(EnergyError::TimeRegression {
                iface,
                now,
                last: ledger.since,
            });
        }
        ledger.seconds[ledger.state.index()] += now - ledger.since;
        ledger.since = now;
        ledger.state = new_state;
        Ok(())
    }

    /// Credits all open intervals up to `now` without changing state.
    pub fn close(&mut self, now: f64) -> Result<(), EnergyError> {
        for iface in InterfaceKind::ALL {
            if let Some(state) = self.state(iface) {
                self.transition_state(iface, state, now)?;
            }
        }
        Ok(())
    }

    /// Accumulated seconds; zero for an absent interface.
    pub fn seconds(&self, iface: InterfaceKind, state: RadioState) -> f64 {
        self.interfaces[iface.index()]
            .as_ref()
            .map_or(0.0, |l| l.seconds[state.index()])
    }

    pub fn interface_seconds(&self, iface: InterfaceKind) -> f64 {
        RadioState::ALL.iter().map(|&s| self.seconds(iface, s)).sum()
    }

    pub fn interface_energy(&self, iface: InterfaceKind, powers: &PowerTable) -> f64 {
        let profile = powers.get(iface);
        RadioState::ALL
            .iter()
            .map(|&s| profile.power(s) * self.seconds(iface, s))
            .sum()
    }
}

/// Sum over interfaces and states of power times accumulated time, in J.
pub fn total_energy(ledger: &EnergyLedger, powers: &PowerTable) -> f64 {
    InterfaceKind::ALL
        .iter()
        .map(|&i| ledger.interface_energy(i, powers))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn link_costs_from_default_tables() {
        // 0.890 / 54, 2.409 / 74, 2.409 / 16
        assert_relative_eq!(energy_per_bit(0.890, 54.0).unwrap().value(), 0.016_481_481_481_481_48, max_relative = 1e-12);
        assert_relative_eq!(energy_per_bit(2.409, 74.0).unwrap().value(), 0.032_554_054_054_054_05, max_relative = 1e-12);
        assert_relative_eq!(energy_per_bit(2.409, 16.0).unwrap().value(), 0.150_562_5, max_relative = 1e-12);
        assert_eq!(energy_per_bit(0.0, 54.0).unwrap().value(), 0.0);
    }

    #[test]
    fn energy_per_bit_rejects_bad_inputs() {
        assert_eq!(energy_per_bit(1.0, 0.0), Err(EnergyError::NonPositiveRate(0.0)));
        assert_eq!(energy_per_bit(1.0, -3.0), Err(EnergyError::NonPositiveRate(-3.0)));
        assert!(matches!(energy_per_bit(-1.0, 3.0), Err(EnergyError::NegativePower(_))));
    }

    #[test]
    fn transitions_credit_previous_state() {
        let mut l = EnergyLedger::new(0.0, &InterfaceKind::ALL);
        l.transition_state(InterfaceKind::LongRange, RadioState::Tx, 5.0).unwrap();
        assert_eq!(l.seconds(InterfaceKind::LongRange, RadioState::Idle), 5.0);
        // same-state transition still credits time
        l.transition_state(InterfaceKind::LongRange, RadioState::Tx, 7.0).unwrap();
        assert_eq!(l.seconds(InterfaceKind::LongRange, RadioState::Tx), 2.0);
        assert_eq!(l.state(InterfaceKind::LongRange), Some(RadioState::Tx));
        l.close(100.0).unwrap();
        assert_eq!(l.seconds(InterfaceKind::LongRange, RadioState::Tx), 95.0);
        assert_eq!(l.interface_seconds(InterfaceKind::LongRange), 100.0);
        assert_eq!(l.interface_seconds(InterfaceKind::ShortRange), 100.0);
    }

    #[test]
    fn time_regression_is_an_error() {
        let mut l = EnergyLedger::new(0.0, &InterfaceKind::ALL);
        l.transition_state(InterfaceKind::ShortRange, RadioState::Rx, 3.0).unwrap();
        assert!(matches!(
            l.transition_state(InterfaceKind::ShortRange, RadioState::Idle, 2.0),
            Err(EnergyError::TimeRegression { .. })
        ));
    }

    #[test]
    fn absent_interface_reports_zero_and_rejects_transitions() {
        let mut l = EnergyLedger::new(0.0, &[InterfaceKind::LongRange]);
        assert!(matches!(
            l.transition_state(InterfaceKind::ShortRange, RadioState::Tx, 1.0),
            Err(EnergyError::MissingInterface(InterfaceKind::ShortRange))
        ));
        l.close(100.0).unwrap();
        assert_eq!(l.interface_seconds(InterfaceKind::ShortRange), 0.0);
        assert_relative_eq!(total_energy(&l, &PowerTable::default()), 66.0, max_relative = 1e-12);
    }

    #[test]
    fn idle_energy_both_interfaces() {
        let mut l = EnergyLedger::new(0.0, &InterfaceKind::ALL);
        l.close(100.0).unwrap();
        assert_relative_eq!(total_energy(&l, &PowerTable::default()), 91.6, max_relative = 1e-12);

        let mut empty = EnergyLedger::new(0.0, &InterfaceKind::ALL);
        empty.close(0.0).unwrap();
        assert_eq!(total_energy(&empty, &PowerTable::default()), 0.0);
    }

    proptest! {
        #[test]
        fn cost_is_homogeneous_in_power(p in 0.0f64..10.0, r in 0.1f64..100.0, c in 0.01f64..100.0) {
            let base = energy_per_bit(p, r).unwrap().value();
            let scaled = energy_per_bit(p * c, r).unwrap().value();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
        }

        #[test]
        fn time_is_conserved_and_energy_monotone(
            steps in proptest::collection::vec((0.0f64..5.0, 0usize..3, any::<bool>()), 1..60)
        ) {
            let powers = PowerTable::default();
            let mut l = EnergyLedger::new(0.0, &InterfaceKind::ALL);
            let mut now = 0.0;
            let mut last_energy = 0.0;
            for (dt, s, sr) in steps {
                now += dt;
                let iface = if sr { InterfaceKind::ShortRange } else { InterfaceKind::LongRange };
                l.transition_state(iface, RadioState::ALL[s], now).unwrap();
                let mut snapshot = l.clone();
                snapshot.close(now).unwrap();
                let e = total_energy(&snapshot, &powers);
                prop_assert!(e + 1e-9 >= last_energy);
                last_energy = e;
            }
            l.close(now).unwrap();
            for iface in InterfaceKind::ALL {
                prop_assert!((l.interface_seconds(iface) - now).abs() <= 1e-9 * now.max(1.0));
            }
        }
    }
}
