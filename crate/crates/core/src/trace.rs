//! Per-slot episode log and its line-delimited JSON form.
//!
//! A trace file holds one JSON object per line. The first line is the
//! episode header (`"kind": "episode"`), every following line one slot
//! (`"kind": "slot"`) in slot order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::channel::Region;
use crate::compute::EnergyBreakdown;
use crate::error::{Result, SimError};
use crate::mobility::{path_length, Position3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Violations {
    /// Devices whose completion time exceeded the deadline.
    pub deadline: usize,
    /// Joint MEC capacity exceeded this slot.
    pub capacity: bool,
    /// Executed displacement exceeded `V_max * I`.
    pub speed: bool,
    /// Devices whose upload could not finish within the slot (zero or near-zero
    /// rate); their task ran locally.
    pub link_fallback: usize,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.deadline > 0 || self.capacity || self.speed || self.link_fallback > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub position: Position3,
    pub next_position: Position3,
    pub displacement_m: f64,
    pub lambda: Vec<f64>,
    pub lambda_executed: Vec<f64>,
    pub power_w: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub phi_r: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub served_region: Option<Region>,
    pub input_bits: Vec<f64>,
    pub deadline_s: Vec<f64>,
    pub rate_bps: Vec<f64>,
    pub completion_s: Vec<f64>,
    pub capacity_usage_cycles: f64,
    pub reward: f64,
    pub energy: EnergyBreakdown,
    pub violations: Violations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub label: String,
    pub episode_seed: u64,
    pub slots_total: usize,
    pub start: Position3,
    pub devices: Vec<Position3>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub label: String,
    pub episode_seed: u64,
    pub slots_total: usize,
    pub start: Position3,
    pub devices: Vec<Position3>,
    pub regions: Vec<Region>,
    pub slots: Vec<SlotRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Episode(EpisodeHeader),
    Slot(Box<SlotRecord>),
}

impl EpisodeTrace {
    pub fn new(header: EpisodeHeader) -> Self {
        Self {
            label: header.label,
            episode_seed: header.episode_seed,
            slots_total: header.slots_total,
            start: header.start,
            devices: header.devices,
            regions: header.regions,
            slots: Vec::new(),
        }
    }

    pub fn header(&self) -> EpisodeHeader {
        EpisodeHeader {
            label: self.label.clone(),
            episode_seed: self.episode_seed,
            slots_total: self.slots_total,
            start: self.start,
            devices: self.devices.clone(),
            regions: self.regions.clone(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.slots.len() == self.slots_total
    }

    /// Hovering positions `q(1), ..., q(n)`.
    pub fn positions(&self) -> Vec<Position3> {
        self.slots.iter().map(|s| s.position).collect()
    }

    /// `||q(N) - q(1)||`; zero for an empty trace.
    pub fn return_distance(&self) -> f64 {
        match (self.slots.first(), self.slots.last()) {
            (Some(a), Some(b)) => b.position.distance(&a.position),
            _ => 0.0,
        }
    }

    pub fn path_length(&self) -> f64 {
        path_length(&self.positions())
    }

    pub fn total_reward(&self) -> f64 {
        self.slots.iter().map(|s| s.reward).sum()
    }

    pub fn violation_counts(&self) -> Violations {
        self.slots.iter().fold(Violations::default(), |mut acc, s| {
            acc.deadline += s.violations.deadline;
            acc.link_fallback += s.violations.link_fallback;
            acc.capacity |= s.violations.capacity;
            acc.speed |= s.violations.speed;
            acc
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &TraceLine::Episode(self.header()))?;
        out.write_all(b"\n")?;
        for s in &self.slots {
            serde_json::to_writer(&mut out, &TraceLine::Slot(Box::new(s.clone())))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads every episode from a stream of trace lines.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<EpisodeTrace>> {
        let mut episodes: Vec<EpisodeTrace> = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TraceLine>(&line)? {
                TraceLine::Episode(h) => episodes.push(EpisodeTrace::new(h)),
                TraceLine::Slot(s) => match episodes.last_mut() {
                    Some(ep) => ep.slots.push(*s),
                    None => {
                        return Err(SimError::Io(std::io::Error::new(
                            std::io::ErrorKind::InvalidData,
                            "slot record before episode header",
                        )))
                    }
                },
            }
        }
        Ok(episodes)
    }
}
