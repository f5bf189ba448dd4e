//! CSV trace writers.

use std::io::Write;

use crate::routing::ForwardDecision;
use crate::scenario::{NodeId, Position};

use super::engine::{DecisionRecord, TraceSink};

/// Writes routing decisions and/or positions as CSV. The first write error
/// is kept and later writes are skipped.
pub struct CsvTrace<D: Write, P: Write> {
    decisions: Option<csv::Writer<D>>,
    positions: Option<csv::Writer<P>>,
    error: Option<csv::Error>,
}

impl<D: Write, P: Write> CsvTrace<D, P> {
    pub fn new(decisions: Option<D>, positions: Option<P>) -> Self {
        let mut trace = Self {
            decisions: decisions.map(csv::Writer::from_writer),
            positions: positions.map(csv::Writer::from_writer),
            error: None,
        };
        if let Some(w) = trace.decisions.as_mut() {
            let r = w.write_record(["time", "node_id", "decision", "next_hop", "eq1_cost", "lr_cost"]);
            trace.keep(r);
        }
        if let Some(w) = trace.positions.as_mut() {
            let r = w.write_record(["time", "node_id", "x", "y"]);
            trace.keep(r);
        }
        trace
    }

    fn keep(&mut self, r: csv::Result<()>) {
        if let Err(e) = r {
            self.error.get_or_insert(e);
        }
    }

    /// Flushes both writers and reports the first error seen.
    pub fn finish(mut self) -> csv::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        if let Some(w) = self.decisions.as_mut() {
            w.flush()?;
        }
        if let Some(w) = self.positions.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

impl<D: Write, P: Write> TraceSink for CsvTrace<D, P> {
    fn decision(&mut self, r: &DecisionRecord) {
        if self.error.is_some() {
            return;
        }
        let Some(w) = self.decisions.as_mut() else {
            return;
        };
        let (label, hop) = match r.decision {
            ForwardDecision::LongRange => ("lr", String::new()),
            ForwardDecision::ShortRange { next_hop } => ("sr", next_hop.to_string()),
        };
        let res = w.write_record([
            format!("{:.9}", r.time),
            r.node_id.to_string(),
            label.to_string(),
            hop,
            format!("{}", r.eq1_cost),
            format!("{}", r.lr_cost),
        ]);
        self.keep(res);
    }

    fn position(&mut self, time: f64, node: NodeId, p: Position) {
        if self.error.is_some() {
            return;
        }
        let Some(w) = self.positions.as_mut() else {
            return;
        };
        let res = w.write_record([
            format!("{time}"),
            node.to_string(),
            format!("{:.6}", p.x),
            format!("{:.6}", p.y),
        ]);
        self.keep(res);
    }
}

/// Collects decisions in memory.
#[derive(Debug, Default)]
pub struct RecordingTrace {
    pub decisions: Vec<DecisionRecord>,
    pub positions: Vec<(f64, NodeId, Position)>,
}

impl TraceSink for RecordingTrace {
    fn decision(&mut self, r: &DecisionRecord) {
        self.decisions.push(*r);
    }

    fn position(&mut self, time: f64, node: NodeId, p: Position) {
        self.positions.push((time, node, p));
    }
}
