use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::output::{read_csv, SweepRow};
use super::{io_err, ExperimentError};

/// Gain curve of one (plan, area, class A count) group.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBlock {
    pub plan: String,
    pub axis: String,
    pub area: String,
    pub n_class_a: usize,
    /// `(axis value, gain)` in file order.
    pub points: Vec<(f64, f64)>,
    pub peak: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub blocks: Vec<ReportBlock>,
    /// Index into `blocks` and the best point of all.
    pub max_gain: (usize, f64, f64),
}

impl ReportSummary {
    pub fn max_gain(&self) -> f64 {
        self.max_gain.2
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut area = None;
        for (i, b) in self.blocks.iter().enumerate() {
            if area != Some(&b.area) {
                let _ = writeln!(out, "== {} | area {} ==", b.plan, b.area);
                area = Some(&b.area);
            }
            let _ = writeln!(out, "class A {} ({} sweep)", b.n_class_a, b.axis);
            for &(v, g) in &b.points {
                let mark = if (v, g) == b.peak { "  <- peak" } else { "" };
                let _ = writeln!(out, "  {v:>8} {:>8.2}%{mark}", g * 100.0);
            }
            if i == self.max_gain.0 {
                let _ = writeln!(out, "  (overall maximum)");
            }
        }
        let (i, v, g) = self.max_gain;
        let b = &self.blocks[i];
        let _ = writeln!(
            out,
            "max gain {:.2}% at {}={} (area {}, class A {})",
            g * 100.0,
            b.axis,
            v,
            b.area,
            b.n_class_a
        );
        out
    }
}

pub fn summarize(rows: &[SweepRow]) -> Option<ReportSummary> {
    let mut blocks: Vec<ReportBlock> = Vec::new();
    for r in rows {
        let pos = blocks
            .iter()
            .position(|b| b.plan == r.plan && b.area == r.area && b.n_class_a == r.n_class_a);
        let block = match pos {
            Some(i) => &mut blocks[i],
            None => {
                blocks.push(ReportBlock {
                    plan: r.plan.clone(),
                    axis: r.axis.clone(),
                    area: r.area.clone(),
                    n_class_a: r.n_class_a,
                    points: Vec::new(),
                    peak: (r.axis_value, r.gain),
                });
                blocks.last_mut().expect("just pushed")
            }
        };
        block.points.push((r.axis_value, r.gain));
        if r.gain > block.peak.1 {
            block.peak = (r.axis_value, r.gain);
        }
    }
    // group blocks of the same area together, keeping first-seen order
    let mut order: Vec<&str> = Vec::new();
    for b in &blocks {
        if !order.contains(&b.area.as_str()) {
            order.push(&b.area);
        }
    }
    let order: Vec<String> = order.into_iter().map(String::from).collect();
    let mut sorted = Vec::with_capacity(blocks.len());
    for a in &order {
        sorted.extend(blocks.iter().filter(|b| &b.area == a).cloned());
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, b) in sorted.iter().enumerate() {
        if best.is_none_or(|(_, _, g)| b.peak.1 > g) {
            best = Some((i, b.peak.0, b.peak.1));
        }
    }
    best.map(|max_gain| ReportSummary {
        blocks: sorted,
        max_gain,
    })
}

/// Reads a sweep table and summarizes it. Fails on a foreign or empty table.
pub fn summarize_file(path: &Path) -> Result<ReportSummary, ExperimentError> {
    let rows: Vec<SweepRow> = read_csv(path).map_err(|e| match e {
        ExperimentError::Csv { path, source } => ExperimentError::Schema {
            path,
            message: source.to_string(),
        },
        other => other,
    })?;
    summarize(&rows).ok_or_else(|| ExperimentError::Schema {
        path: path.to_path_buf(),
        message: "no rows".into(),
    })
}

/// Writes one `<plan>_<area>_a<k>.dat` file per block with `axis gain`
/// columns and returns the paths.
pub fn write_plot_files(summary: &ReportSummary, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::new();
    for b in &summary.blocks {
        let path = dir.join(format!("{}_{}_a{}.dat", b.plan, b.area, b.n_class_a));
        let mut text = format!("# {} gain\n", b.axis);
        for &(v, g) in &b.points {
            let _ = writeln!(text, "{v} {g}");
        }
        fs::write(&path, text).map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(area: &str, a: usize, v: f64, g: f64) -> SweepRow {
        SweepRow {
            plan: "p".into(),
            axis: "node_count".into(),
            area: area.into(),
            n_nodes: v as usize,
            n_class_a: a,
            axis_value: v,
            cbr_rate: 3000.0,
            mean_speed: 0.0,
            runs: 1,
            bmk_eb_per_mb: 1.0,
            coop_eb_per_mb: 1.0 - g,
            bmk_goodput_mbps: 1.0,
            coop_goodput_mbps: 1.0,
            gain: g,
        }
    }

    #[test]
    fn peak_is_named() {
        let rows = vec![row("60x20", 2, 10.0, 0.1), row("60x20", 2, 20.0, 0.3), row("60x20", 2, 30.0, 0.2)];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].peak, (20.0, 0.3));
        assert_eq!(s.max_gain(), 0.3);
        let text = s.render();
        assert!(text.contains("20    30.00%  <- peak"), "{text}");
        assert!(text.contains("max gain 30.00% at node_count=20"), "{text}");
    }

    #[test]
    fn one_block_per_area_and_class() {
        let rows = vec![
            row("60x20", 1, 10.0, 0.1),
            row("100x50", 1, 10.0, 0.05),
            row("60x20", 2, 10.0, 0.2),
        ];
        let s = summarize(&rows).unwrap();
        let areas: Vec<_> = s.blocks.iter().map(|b| (b.area.as_str(), b.n_class_a)).collect();
        assert_eq!(areas, vec![("60x20", 1), ("60x20", 2), ("100x50", 1)]);
        let text = s.render();
        assert_eq!(text.matches("== p | area").count(), 2);
    }

    #[test]
    fn negative_only_sweep_still_reports() {
        let s = summarize(&[row("60x20", 1, 1.0, -0.4), row("60x20", 1, 2.0, -0.2)]).unwrap();
        assert_eq!(s.max_gain(), -0.2);
        assert!(summarize(&[]).is_none());
    }
}
