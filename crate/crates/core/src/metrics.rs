//! Energy-per-delivered-bit and cooperation gain across runs.

use thiserror::Error;

use crate::sim::RunStats;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("run {run_index} delivered no traffic")]
    ZeroDelivery { run_index: u32 },
    #[error("benchmark and cooperative reports cover different runs: {benchmark:?} vs {cooperative:?}")]
    MismatchedRuns {
        benchmark: Vec<(u32, u64)>,
        cooperative: Vec<(u32, u64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEfficiency {
    pub run_index: u32,
    pub seed: u64,
    pub energy_j: f64,
    pub delivered_mbits: f64,
    pub goodput_mbps: f64,
}

impl RunEfficiency {
    pub fn eb_per_mb(&self) -> f64 {
        self.energy_j / self.delivered_mbits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub runs: usize,
    /// Mean over runs of total energy over total delivered Mb.
    pub eb_per_mb: f64,
    pub goodput_mbps: f64,
    pub per_run: Vec<RunEfficiency>,
}

impl EfficiencyReport {
    fn run_keys(&self) -> Vec<(u32, u64)> {
        let mut keys: Vec<_> = self.per_run.iter().map(|r| (r.run_index, r.seed)).collect();
        keys.sort_unstable();
        keys
    }
}

pub fn energy_efficiency(runs: &[RunStats]) -> Result<EfficiencyReport, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::NoRuns);
    }
    let mut per_run = Vec::with_capacity(runs.len());
    for r in runs {
        let delivered = r.total_delivered_mbits();
        if delivered <= 0.0 {
            return Err(MetricsError::ZeroDelivery {
                run_index: r.run_index,
            });
        }
        per_run.push(RunEfficiency {
            run_index: r.run_index,
            seed: r.seed,
            energy_j: r.total_energy_j(),
            delivered_mbits: delivered,
            goodput_mbps: r.goodput_mbps,
        });
    }
    let n = per_run.len() as f64;
    Ok(EfficiencyReport {
        runs: per_run.len(),
        eb_per_mb: per_run.iter().map(RunEfficiency::eb_per_mb).sum::<f64>() / n,
        goodput_mbps: per_run.iter().map(|r| r.goodput_mbps).sum::<f64>() / n,
        per_run,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub benchmark: EfficiencyReport,
    pub cooperative: EfficiencyReport,
    /// Relative saving in J/Mb; negative when cooperating costs more.
    pub gain: f64,
}

pub fn gain_ratio(benchmark_eb: f64, cooperative_eb: f64) -> f64 {
    1.0 - cooperative_eb / benchmark_eb
}

/// Both reports must cover the same run indices with the same run seeds.
pub fn gain(benchmark: EfficiencyReport, cooperative: EfficiencyReport) -> Result<GainReport, MetricsError> {
    let (b, c) = (benchmark.run_keys(), cooperative.run_keys());
    if b != c {
        return Err(MetricsError::MismatchedRuns {
            benchmark: b,
            cooperative: c,
        });
    }
    let g = gain_ratio(benchmark.eb_per_mb, cooperative.eb_per_mb);
    Ok(GainReport {
        benchmark,
        cooperative,
        gain: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{EnergyLedger, InterfaceKind};
    use crate::scenario::MtClass;
    use crate::sim::{BeaconCounts, DropCounts, Mode, NodeStats};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn node(id: usize, energy: f64, mbits: f64) -> NodeStats {
        NodeStats {
            node_id: id,
            class: MtClass::ClassB,
            generated: 0,
            delivered_pkts: 0,
            delivered_mbits: mbits,
            dropped: DropCounts::default(),
            in_flight_at_end: 0,
            relayed: 0,
            hop_histogram: Vec::new(),
            ledger: EnergyLedger::new(0.0, &[InterfaceKind::LongRange]),
            energy_lr_j: energy,
            energy_sr_j: 0.0,
            energy_total_j: energy,
        }
    }

    fn run(index: u32, nodes: Vec<NodeStats>) -> RunStats {
        let mbits: f64 = nodes.iter().map(|n| n.delivered_mbits).sum();
        RunStats {
            run_index: index,
            mode: Mode::Benchmark,
            duration: 100.0,
            seed: 7 + u64::from(index),
            nodes,
            goodput_mbps: mbits / 100.0,
            beacons: BeaconCounts::default(),
            events_processed: 0,
            causality_violations: 0,
        }
    }

    #[test]
    fn single_node_ratio() {
        let r = energy_efficiency(&[run(0, vec![node(0, 71.7, 82.0)])]).unwrap();
        assert_abs_diff_eq!(r.eb_per_mb, 71.7 / 82.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.eb_per_mb, 0.8744, epsilon = 5e-5);
        assert_eq!(r.runs, 1);
    }

    #[test]
    fn identical_runs_match_one() {
        let one = energy_efficiency(&[run(0, vec![node(0, 50.0, 20.0)])]).unwrap();
        let two = energy_efficiency(&[run(0, vec![node(0, 50.0, 20.0)]), run(1, vec![node(0, 50.0, 20.0)])]).unwrap();
        assert_eq!(one.eb_per_mb, two.eb_per_mb);
    }

    #[test]
    fn mean_of_ratios_not_ratio_of_sums() {
        let r = energy_efficiency(&[run(0, vec![node(0, 10.0, 10.0)]), run(1, vec![node(0, 30.0, 10.0)])]).unwrap();
        assert_abs_diff_eq!(r.eb_per_mb, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_delivery_is_an_error() {
        let err = energy_efficiency(&[run(0, vec![node(0, 1.0, 1.0)]), run(3, vec![node(0, 66.0, 0.0)])]).unwrap_err();
        assert_eq!(err, MetricsError::ZeroDelivery { run_index: 3 });
        assert_eq!(energy_efficiency(&[]).unwrap_err(), MetricsError::NoRuns);
    }

    #[test]
    fn gain_signs() {
        let b = energy_efficiency(&[run(0, vec![node(0, 100.0, 100.0)])]).unwrap();
        let same = gain(b.clone(), b.clone()).unwrap();
        assert_eq!(same.gain, 0.0);
        let mut c = b.clone();
        c.eb_per_mb = 0.58;
        assert_abs_diff_eq!(gain(b.clone(), c).unwrap().gain, 0.42, epsilon = 1e-12);
        let mut worse = b.clone();
        worse.eb_per_mb = 1.3;
        assert!(gain(b, worse).unwrap().gain < 0.0);
    }

    #[test]
    fn gain_rejects_mismatched_runs() {
        let b = energy_efficiency(&[run(0, vec![node(0, 1.0, 1.0)])]).unwrap();
        let c = energy_efficiency(&[run(1, vec![node(0, 1.0, 1.0)])]).unwrap();
        assert!(matches!(gain(b, c), Err(MetricsError::MismatchedRuns { .. })));
    }

    proptest! {
        #[test]
        fn relabeling_nodes_changes_nothing(
            vals in proptest::collection::vec((0.1f64..100.0, 0.1f64..100.0), 1..12),
            rot in 0usize..12,
        ) {
            let nodes: Vec<_> = vals.iter().enumerate().map(|(i, &(e, d))| node(i, e, d)).collect();
            let mut shuffled = nodes.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = energy_efficiency(&[run(0, nodes)]).unwrap();
            let b = energy_efficiency(&[run(0, shuffled)]).unwrap();
            prop_assert!((a.eb_per_mb - b.eb_per_mb).abs() <= 1e-12 * a.eb_per_mb);
        }

        #[test]
        fn energy_scaling_is_linear(e in 0.1f64..100.0, d in 0.1f64..100.0, k in 0.5f64..4.0) {
            let a = energy_efficiency(&[run(0, vec![node(0, e, d)])]).unwrap();
            let b = energy_efficiency(&[run(0, vec![node(0, e * k, d)])]).unwrap();
            prop_assert!((b.eb_per_mb - k * a.eb_per_mb).abs() <= 1e-12 * b.eb_per_mb);
        }

        #[test]
        fn gain_is_scale_free(b in 0.01f64..10.0, c in 0.01f64..10.0, k in 0.01f64..100.0) {
            let g1 = gain_ratio(b, c);
            let g2 = gain_ratio(b * k, c * k);
            prop_assert!((g1 - g2).abs() < 1e-12);
        }
    }
}
