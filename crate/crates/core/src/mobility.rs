//! Gauss-Markov mobility with reflection at the area edges.
//!
//! Speed and direction follow the AR(1) recursion
//!
//! ```text
//! s'   = a*s + (1-a)*s_mean + sqrt(1-a^2)*sigma_s*g1
//! d'   = a*d + (1-a)*d_mean + sqrt(1-a^2)*sigma_d*g2
//! ```
//!
//! with unit gaussian draws `g1`, `g2`. Each node keeps its own mean
//! direction, drawn once at initialization.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scenario::{Area, Position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityParams {
    /// Memory coefficient in `[0, 1]`; 1 keeps speed and direction fixed.
    pub alpha: f64,
    pub mean_speed: f64,
    pub speed_stddev: f64,
    pub direction_stddev: f64,
    pub update_interval: f64,
}

impl MobilityParams {
    /// Defaults for a given mean speed: `alpha = 0.5`, speed deviation half
    /// the mean, 0.5 rad direction deviation, 1 s updates.
    pub fn walking(mean_speed: f64) -> Self {
        Self {
            alpha: 0.5,
            mean_speed,
            speed_stddev: 0.5 * mean_speed,
            direction_stddev: 0.5,
            update_interval: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.mean_speed >= 0.0 && self.mean_speed.is_finite()) {
            return Err(format!("mean_speed must be >= 0, got {}", self.mean_speed));
        }
        if !(self.speed_stddev >= 0.0 && self.direction_stddev >= 0.0) {
            return Err("mobility standard deviations must be >= 0".into());
        }
        if !(self.update_interval > 0.0 && self.update_interval.is_finite()) {
            return Err(format!(
                "update_interval must be > 0, got {}",
                self.update_interval
            ));
        }
        Ok(())
    }

    /// True when no node can ever move.
    pub fn is_static(&self) -> bool {
        self.mean_speed == 0.0 && self.speed_stddev == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityState {
    pub position: Position,
    /// Always >= 0.
    pub speed: f64,
    /// Radians, unwrapped.
    pub direction: f64,
    pub mean_direction: f64,
}

impl MobilityState {
    /// Starts a node at its mean speed heading along a uniformly drawn mean
    /// direction. Consumes one draw.
    pub fn init<R: Rng + ?Sized>(position: Position, params: &MobilityParams, rng: &mut R) -> Self {
        let mean_direction = rng.random::<f64>() * 2.0 * PI;
        Self {
            position,
            speed: params.mean_speed,
            direction: mean_direction,
            mean_direction,
        }
    }
}

/// One AR(1) update followed by a straight move along the new heading. The
/// result may lie outside the area; [`reflect`] brings it back.
pub fn gm_step<R: Rng + ?Sized>(
    state: MobilityState,
    params: &MobilityParams,
    rng: &mut R,
) -> MobilityState {
    let a = params.alpha;
    let noise = (1.0 - a * a).max(0.0).sqrt();
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    let speed = (a * state.speed + (1.0 - a) * params.mean_speed + noise * params.speed_stddev * g1)
        .max(0.0);
    let direction =
        a * state.direction + (1.0 - a) * state.mean_direction + noise * params.direction_stddev * g2;
    let step = speed * params.update_interval;
    MobilityState {
        position: Position::new(
            state.position.x + step * direction.cos(),
            state.position.y + step * direction.sin(),
        ),
        speed,
        direction,
        mean_direction: state.mean_direction,
    }
}

/// Mirrors `position` back across any violated edge, negating the heading
/// component normal to that edge. Repeats until the point is inside, so
/// overshoots longer than the area itself fold back correctly.
pub fn reflect(position: Position, direction: f64, area: Area) -> (Position, f64) {
    let (inside, flip_x, flip_y) = fold_position(position, area);
    (inside, mirror(direction, flip_x, flip_y))
}

fn fold_position(position: Position, area: Area) -> (Position, bool, bool) {
    let (x, flip_x) = fold(position.x, area.width);
    let (y, flip_y) = fold(position.y, area.height);
    (Position::new(x, y), flip_x, flip_y)
}

fn mirror(mut direction: f64, flip_x: bool, flip_y: bool) -> f64 {
    if flip_x {
        direction = PI - direction;
    }
    if flip_y {
        direction = -direction;
    }
    direction
}

/// Folds a coordinate into `[0, len]`; reports whether an odd number of
/// mirrors was applied.
fn fold(mut v: f64, len: f64) -> (f64, bool) {
    let mut flipped = false;
    while v < 0.0 || v > len {
        if v < 0.0 {
            v = -v;
        } else {
            v = 2.0 * len - v;
        }
        flipped = !flipped;
    }
    (v, flipped)
}

fn reflect_state(state: MobilityState, area: Area) -> MobilityState {
    let (position, flip_x, flip_y) = fold_position(state.position, area);
    // The mean heading mirrors with the heading, otherwise the recursion
    // keeps steering the node into the wall it just bounced off.
    MobilityState {
        position,
        speed: state.speed,
        direction: mirror(state.direction, flip_x, flip_y),
        mean_direction: mirror(state.mean_direction, flip_x, flip_y),
    }
}

/// Steps and reflects every node in id order, so stream consumption is
/// fixed (two gaussian draws per node).
pub fn advance_all<R: Rng + ?Sized>(
    states: &[MobilityState],
    params: &MobilityParams,
    area: Area,
    rng: &mut R,
) -> Vec<MobilityState> {
    states
        .iter()
        .map(|s| reflect_state(gm_step(*s, params, rng), area))
        .collect()
}
