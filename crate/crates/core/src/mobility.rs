//! Kinematics of the aerial STAR-RIS at fixed altitude.
//!
//! The UAV moves in the horizontal plane only. Every displacement passes
//! through the same clamp chain:
//!
//! 1. radial speed clamp: `||delta|| <= V_max * I`
//! 2. service-area box clamp
//! 3. optional return-reachability clamp: the UAV never strays further from
//!    its start than it can fly back in the remaining slots, so `q(N) = q(1)`
//!    holds for every action sequence.
//!
//! All three sets are convex and contain the current position, so the result
//! never violates an earlier stage.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::trace::EpisodeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn offset(&self, d: [f64; 2]) -> Position3 {
        Position3::new(self.x + d[0], self.y + d[1], self.z)
    }
}

/// Axis-aligned horizontal service area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceArea {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl ServiceArea {
    pub fn square(side: f64) -> Self {
        Self {
            min: [0.0, 0.0],
            max: [side, side],
        }
    }

    pub fn clamp(&self, p: Position3) -> Position3 {
        Position3::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
            p.z,
        )
    }

    pub fn contains(&self, p: &Position3) -> bool {
        (self.min[0]..=self.max[0]).contains(&p.x) && (self.min[1]..=self.max[1]).contains(&p.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlanState {
    pub current: Position3,
    pub start: Position3,
    /// Slot duration `I = T / N` in seconds.
    pub slot_duration: f64,
    pub max_speed: f64,
    /// Flight energy coefficient `kappa`.
    pub kappa: f64,
    pub slots_total: usize,
    /// 1-based index of the slot whose hovering position is `current`.
    pub slot_index: usize,
    pub area: ServiceArea,
    /// Clamp so that the start stays reachable before the last slot.
    pub enforce_return: bool,
    /// When false the speed bound is not clamped (diagnostic mode); the
    /// reward's speed penalty then becomes active.
    pub clamp_speed: bool,
}

impl FlightPlanState {
    pub fn new(
        start: Position3,
        slot_duration: f64,
        max_speed: f64,
        kappa: f64,
        slots_total: usize,
        area: ServiceArea,
    ) -> Self {
        Self {
            current: start,
            start,
            slot_duration,
            max_speed,
            kappa,
            slots_total,
            slot_index: 1,
            area,
            enforce_return: true,
            clamp_speed: true,
        }
    }

    /// Maximum distance per slot, `V_max * I`.
    pub fn max_step(&self) -> f64 {
        self.max_speed * self.slot_duration
    }

    /// Slots still to be flown after moving to slot `slot_index + 1`.
    fn remaining_after_move(&self) -> usize {
        self.slots_total.saturating_sub(self.slot_index + 1)
    }
}

/// Moves the UAV by `delta` (meters) and advances the slot index.
///
/// At or past the final slot the UAV holds position.
pub fn apply_displacement(state: &FlightPlanState, delta: [f64; 2]) -> Result<FlightPlanState> {
    if !delta.iter().all(|d| d.is_finite()) {
        return Err(SimError::InvalidAction(format!("non-finite displacement {delta:?}")));
    }
    let mut next = state.clone();
    next.slot_index = state.slot_index + 1;
    if state.slot_index >= state.slots_total {
        next.slot_index = state.slot_index;
        return Ok(next);
    }

    let mut d = delta;
    let max_step = state.max_step();
    let norm = d[0].hypot(d[1]);
    if state.clamp_speed && norm > max_step {
        let s = max_step / norm;
        d = [d[0] * s, d[1] * s];
    }
    let mut target = state.area.clamp(state.current.offset(d));

    if state.enforce_return {
        let reach = max_step * state.remaining_after_move() as f64;
        target = clamp_to_reach(state.current, target, state.start, reach);
    }
    if state.clamp_speed {
        target = trim_to_step(state.current, target, max_step);
    }
    next.current = target;
    Ok(next)
}

/// Shortens the realized step by a few ulps when rounding in the position
/// arithmetic leaves it just above `max_step`.
fn trim_to_step(current: Position3, target: Position3, max_step: f64) -> Position3 {
    let (mut dx, mut dy) = (target.x - current.x, target.y - current.y);
    let mut p = target;
    let mut shrink = 1.0 - 4.0 * f64::EPSILON;
    while p.distance(&current) > max_step {
        dx *= shrink;
        dy *= shrink;
        shrink -= 4.0 * f64::EPSILON;
        p = Position3::new(current.x + dx, current.y + dy, target.z);
    }
    p
}

/// Pulls `target` back along the segment towards the point of the start disc
/// nearest to `current`. That anchor lies inside every convex set that holds
/// both `current` and the start disc, so the speed and box bounds survive.
fn clamp_to_reach(current: Position3, target: Position3, start: Position3, reach: f64) -> Position3 {
    let dist = |p: &Position3| p.horizontal_distance(&start);
    if dist(&target) <= reach {
        return target;
    }
    let dc = dist(&current);
    let anchor = if dc <= reach || dc == 0.0 {
        current
    } else {
        let s = reach / dc;
        Position3::new(
            start.x + (current.x - start.x) * s,
            start.y + (current.y - start.y) * s,
            current.z,
        )
    };
    // Largest t in [0,1] with |anchor + t (target - anchor) - start| <= reach.
    let (ax, ay) = (anchor.x - start.x, anchor.y - start.y);
    let (vx, vy) = (target.x - anchor.x, target.y - anchor.y);
    let a = vx * vx + vy * vy;
    if a == 0.0 {
        return anchor;
    }
    let b = 2.0 * (ax * vx + ay * vy);
    let c = ax * ax + ay * ay - reach * reach;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let t = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
    let p = Position3::new(anchor.x + t * vx, anchor.y + t * vy, current.z);
    // Guard against round-off leaving the point a hair outside the disc.
    let r = dist(&p);
    if r > reach && r > 0.0 {
        let s = reach / r;
        Position3::new(start.x + (p.x - start.x) * s, start.y + (p.y - start.y) * s, current.z)
    } else {
        p
    }
}

/// `kappa * (||next - prev|| / I)^exponent`.
pub fn flight_energy(prev: &Position3, next: &Position3, slot_duration: f64, kappa: f64, exponent: u32) -> f64 {
    let speed = prev.distance(next) / slot_duration;
    kappa * speed.powi(exponent as i32)
}

/// True iff the final hovering position is within `tol` meters of the first.
pub fn check_return_constraint(trace: &EpisodeTrace, tol: f64) -> Result<bool> {
    if !trace.is_complete() {
        return Err(SimError::IncompleteTrace {
            have: trace.slots.len(),
            want: trace.slots_total,
        });
    }
    Ok(trace.return_distance() <= tol)
}

pub fn path_length(points: &[Position3]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}
