use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{InterfaceKind, RadioState};
use crate::sim::RunStats;

use super::{csv_err, ExperimentError};

/// One node of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub run_index: u32,
    pub node_id: usize,
    pub class: String,
    pub generated_pkts: u64,
    pub delivered_mbits: f64,
    pub dropped_pkts: u64,
    pub hops_mean: f64,
    pub energy_lr_j: f64,
    pub energy_sr_j: f64,
    pub energy_total_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub run_index: u32,
    pub goodput_mbps: f64,
    pub system_energy_j: f64,
    pub eb_per_mb: f64,
}

/// Time and energy of one radio state, as accumulated by a node's ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub run_index: u32,
    pub node_id: usize,
    pub iface: String,
    pub state: String,
    pub seconds: f64,
    pub joules: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config_label: String,
    pub mode: String,
    pub runs: usize,
    pub eb_per_mb: f64,
    pub goodput_mbps: f64,
    /// Empty on the benchmark row and when no benchmark ran.
    pub gain_vs_benchmark: Option<f64>,
}

/// One sweep point with both modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub plan: String,
    pub axis: String,
    pub area: String,
    pub n_nodes: usize,
    pub n_class_a: usize,
    pub axis_value: f64,
    pub cbr_rate: f64,
    pub mean_speed: f64,
    pub runs: usize,
    pub bmk_eb_per_mb: f64,
    pub coop_eb_per_mb: f64,
    pub bmk_goodput_mbps: f64,
    pub coop_goodput_mbps: f64,
    pub gain: f64,
}

pub(crate) fn node_rows(runs: &[RunStats]) -> Vec<NodeRow> {
    runs.iter()
        .flat_map(|r| {
            r.nodes.iter().map(move |n| NodeRow {
                run_index: r.run_index,
                node_id: n.node_id,
                class: n.class.label().to_string(),
                generated_pkts: n.generated,
                delivered_mbits: n.delivered_mbits,
                dropped_pkts: n.dropped.total(),
                hops_mean: n.hops_mean(),
                energy_lr_j: n.energy_lr_j,
                energy_sr_j: n.energy_sr_j,
                energy_total_j: n.energy_total_j,
            })
        })
        .collect()
}

pub(crate) fn aggregate_rows(runs: &[RunStats]) -> Vec<AggregateRow> {
    runs.iter()
        .map(|r| {
            let energy = r.total_energy_j();
            let delivered = r.total_delivered_mbits();
            AggregateRow {
                run_index: r.run_index,
                goodput_mbps: r.goodput_mbps,
                system_energy_j: energy,
                // NaN when nothing was delivered
                eb_per_mb: energy / delivered,
            }
        })
        .collect()
}

pub(crate) fn ledger_rows(runs: &[RunStats], powers: &crate::energy::PowerTable) -> Vec<LedgerRow> {
    let mut rows = Vec::new();
    for r in runs {
        for n in &r.nodes {
            for iface in InterfaceKind::ALL {
                if !n.ledger.has(iface) {
                    continue;
                }
                for state in RadioState::ALL {
                    let seconds = n.ledger.seconds(iface, state);
                    rows.push(LedgerRow {
                        run_index: r.run_index,
                        node_id: n.node_id,
                        iface: iface.label().to_string(),
                        state: state.label().to_string(),
                        seconds,
                        joules: seconds * powers.get(iface).power(state),
                    });
                }
            }
        }
    }
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads rows, failing if the file has no header row.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(csv_err(path))?);
    }
    Ok(rows)
}
