use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mobility::MobilityParams;
use crate::scenario::{Area, DEFAULT_MAX_ATTEMPTS};
use crate::sim::{Mode, SimConfig};

use super::{io_err, ExperimentError};

/// Input of `cesr run`.
///
/// ```toml
/// modes = ["benchmark", "cooperative"]
///
/// [sim]
/// runs = 10
/// cbr_rate = 3000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "both_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub sim: SimConfig,
}

fn both_modes() -> Vec<Mode> {
    vec![Mode::Benchmark, Mode::Cooperative]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label: None,
            modes: both_modes(),
            sim: SimConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = Self::from_toml(&text).map_err(|source| ExperimentError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.modes.is_empty() {
            return Err(ExperimentError::Plan("`modes` must not be empty".into()));
        }
        let mut seen = self.modes.clone();
        seen.sort_by_key(|m| m.label());
        seen.dedup();
        if seen.len() != self.modes.len() {
            return Err(ExperimentError::Plan("`modes` lists a mode twice".into()));
        }
        self.sim.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NodeCount,
    CbrRate,
    MeanSpeed,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::NodeCount => "node_count",
            Axis::CbrRate => "cbr_rate",
            Axis::MeanSpeed => "mean_speed",
        }
    }
}

/// Input of `cesr sweep`. Every point runs both modes on the same
/// scenarios and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    /// `[width, height]` pairs in meters.
    pub areas: Vec<[f64; 2]>,
    pub class_a_counts: Vec<usize>,
    /// Node count for the `cbr_rate` and `mean_speed` axes.
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub base: SimConfig,
}

fn default_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}

/// One fully resolved sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub area: Area,
    pub n_nodes: usize,
    pub n_class_a: usize,
    pub axis_value: f64,
    pub config: SimConfig,
}

impl SweepPoint {
    pub fn describe(&self, axis: Axis) -> String {
        format!(
            "area {} class_a {} {}={}",
            self.area,
            self.n_class_a,
            axis.label(),
            self.axis_value
        )
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let plan = Self::from_toml(&text).map_err(|source| ExperimentError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Plan(m));
        if self.values.is_empty() {
            return bad("`values` must not be empty".into());
        }
        if self.areas.is_empty() {
            return bad("`areas` must not be empty".into());
        }
        if self.class_a_counts.is_empty() {
            return bad("`class_a_counts` must not be empty".into());
        }
        for &[w, h] in &self.areas {
            Area::new(w, h)?;
        }
        for &v in &self.values {
            let ok = match self.axis {
                Axis::NodeCount => v >= 1.0 && v.fract() == 0.0,
                Axis::CbrRate | Axis::MeanSpeed => v >= 0.0 && v.is_finite(),
            };
            if !ok {
                return bad(format!("value {v} is not valid on the {} axis", self.axis.label()));
            }
        }
        if self.axis != Axis::NodeCount && self.nodes.is_none() {
            return bad(format!("`nodes` is required on the {} axis", self.axis.label()));
        }
        self.base.validate()?;
        for point in self.points() {
            if point.n_class_a > point.n_nodes {
                return bad(format!(
                    "{} class A nodes exceed {} nodes",
                    point.n_class_a, point.n_nodes
                ));
            }
            point.config.validate()?;
        }
        Ok(())
    }

    /// Points in canonical order: area, then class A count, then axis value.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &[w, h] in &self.areas {
            let area = Area { width: w, height: h };
            for &n_class_a in &self.class_a_counts {
                for &v in &self.values {
                    let mut config = self.base.clone();
                    let mut n_nodes = self.nodes.unwrap_or(0);
                    match self.axis {
                        Axis::NodeCount => n_nodes = v as usize,
                        Axis::CbrRate => config.cbr_rate = v,
                        Axis::MeanSpeed => config.mobility = Some(speed_params(self.base.mobility, v)),
                    }
                    out.push(SweepPoint {
                        area,
                        n_nodes,
                        n_class_a,
                        axis_value: v,
                        config,
                    });
                }
            }
        }
        out
    }
}

/// Mobility for one point of a speed sweep. Alpha, heading deviation and
/// update interval come from the base config; the speed deviation is half
/// the mean speed.
fn speed_params(base: Option<MobilityParams>, mean_speed: f64) -> MobilityParams {
    let template = base.unwrap_or_else(|| MobilityParams::walking(1.0));
    MobilityParams {
        mean_speed,
        speed_stddev: mean_speed / 2.0,
        ..template
    }
}
