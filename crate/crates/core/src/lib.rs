//! Energy-aware cooperative uplink simulation for dual-radio mobile
//! terminals: a short-range ad hoc interface and a long-range cellular
//! uplink to one base station.

pub mod energy;
pub mod experiment;
pub mod metrics;
pub mod mobility;
pub mod rng;
pub mod routing;
pub mod scenario;
pub mod sim;
