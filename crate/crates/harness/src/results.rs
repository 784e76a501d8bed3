//! Result rows and their CSV form.
//!
//! `sweep_*.csv` columns (energies in joules, distances in meters):
//!
//! | column | meaning |
//! |---|---|
//! | `scheme` | scheme name |
//! | `axis`, `value` | swept quantity and its value (`input_bits` in Mbit, `elements` as a count, `none` for single runs) |
//! | `seed` | training and evaluation seed |
//! | `episodes` | evaluation episodes averaged into the row |
//! | `total_energy_j` | mean episode energy, equal to the sum of the three components |
//! | `local_energy_j`, `offload_energy_j`, `flight_energy_j` | mean episode energy per component |
//! | `deadline_violations`, `capacity_violations`, `speed_violations`, `link_fallbacks` | counts summed over the episodes |
//! | `return_distance_m` | largest `‖q(N) − q(1)‖` over the episodes |
//! | `path_length_m` | mean hovering-path length |

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use starmec_core::compute::total_energy;
use starmec_core::EpisodeTrace;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub axis: String,
    pub value: f64,
    pub seed: u64,
    pub episodes: usize,
    pub total_energy_j: f64,
    pub local_energy_j: f64,
    pub offload_energy_j: f64,
    pub flight_energy_j: f64,
    pub deadline_violations: usize,
    pub capacity_violations: usize,
    pub speed_violations: usize,
    pub link_fallbacks: usize,
    pub return_distance_m: f64,
    pub path_length_m: f64,
}

impl ResultRow {
    pub fn from_traces(scheme: &str, axis: &str, value: f64, seed: u64, traces: &[EpisodeTrace]) -> Self {
        let n = traces.len().max(1) as f64;
        let mut row = ResultRow {
            scheme: scheme.to_string(),
            axis: axis.to_string(),
            value,
            seed,
            episodes: traces.len(),
            total_energy_j: 0.0,
            local_energy_j: 0.0,
            offload_energy_j: 0.0,
            flight_energy_j: 0.0,
            deadline_violations: 0,
            capacity_violations: 0,
            speed_violations: 0,
            link_fallbacks: 0,
            return_distance_m: 0.0,
            path_length_m: 0.0,
        };
        for t in traces {
            let e = total_energy(t);
            row.local_energy_j += e.local / n;
            row.offload_energy_j += e.offload / n;
            row.flight_energy_j += e.flight / n;
            row.path_length_m += t.path_length() / n;
            row.return_distance_m = row.return_distance_m.max(t.return_distance());
            for s in &t.slots {
                row.deadline_violations += s.violations.deadline;
                row.link_fallbacks += s.violations.link_fallback;
                row.capacity_violations += usize::from(s.violations.capacity);
                row.speed_violations += usize::from(s.violations.speed);
            }
        }
        row.total_energy_j = row.local_energy_j + row.offload_energy_j + row.flight_energy_j;
        row
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

pub fn write_rows_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_rows(rows, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_rows_file(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Mean and sample standard deviation of total energy across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub axis: String,
    pub value: f64,
    pub seeds: usize,
    pub mean_energy_j: f64,
    pub std_energy_j: f64,
}

/// Groups by `(scheme, axis, value)` in order of first appearance of each
/// scheme and ascending value.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut schemes: Vec<&str> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme.as_str()) {
            schemes.push(&r.scheme);
        }
    }
    let mut out = Vec::new();
    for scheme in schemes {
        let mut keys: Vec<(&str, f64)> = Vec::new();
        for r in rows.iter().filter(|r| r.scheme == scheme) {
            if !keys.iter().any(|(a, v)| *a == r.axis && *v == r.value) {
                keys.push((&r.axis, r.value));
            }
        }
        keys.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
        for (axis, value) in keys {
            let e: Vec<f64> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.axis == axis && r.value == value)
                .map(|r| r.total_energy_j)
                .collect();
            let n = e.len() as f64;
            let mean = e.iter().sum::<f64>() / n;
            let std = if e.len() > 1 {
                (e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            out.push(SummaryRow {
                scheme: scheme.to_string(),
                axis: axis.to_string(),
                value,
                seeds: e.len(),
                mean_energy_j: mean,
                std_energy_j: std,
            });
        }
    }
    out
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean energy of `scheme` at `value`, if present.
pub fn mean_at(summary: &[SummaryRow], scheme: &str, value: f64) -> Option<f64> {
    summary
        .iter()
        .find(|s| s.scheme == scheme && s.value == value)
        .map(|s| s.mean_energy_j)
}
