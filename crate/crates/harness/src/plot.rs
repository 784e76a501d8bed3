//! SVG figures. Each figure has a CSV twin holding exactly the plotted data.

use std::io::Write;
use std::path::Path;

use plotters::prelude::*;
use starmec_core::EpisodeTrace;

use crate::error::{HarnessError, Result};
use crate::results::SummaryRow;

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(127, 127, 127),
];

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).abs().max(hi.abs() * 1e-3).max(1e-12);
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Mean energy per scheme against the swept value, with one-sigma bars.
pub fn energy_plot(summary: &[SummaryRow], x_label: &str, path: &Path) -> Result<()> {
    if summary.is_empty() {
        return Err(HarnessError::Plot("nothing to plot".into()));
    }
    let xs = summary.iter().map(|s| s.value);
    let (x0, x1) = padded(xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let lo = summary.iter().map(|s| s.mean_energy_j - s.std_energy_j).fold(f64::INFINITY, f64::min);
    let hi = summary.iter().map(|s| s.mean_energy_j + s.std_energy_j).fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = padded(lo.min(0.0), hi);

    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("total energy (J)")
        .draw()
        .map_err(plot_err)?;

    let mut schemes: Vec<&str> = Vec::new();
    for s in summary {
        if !schemes.contains(&s.scheme.as_str()) {
            schemes.push(&s.scheme);
        }
    }
    for (i, scheme) in schemes.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<&SummaryRow> = summary.iter().filter(|s| s.scheme == *scheme).collect();
        chart
            .draw_series(LineSeries::new(pts.iter().map(|s| (s.value, s.mean_energy_j)), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(*scheme)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|s| Circle::new((s.value, s.mean_energy_j), 4, color.filled())))
            .map_err(plot_err)?;
        chart
            .draw_series(pts.iter().map(|s| {
                PathElement::new(
                    vec![(s.value, s.mean_energy_j - s.std_energy_j), (s.value, s.mean_energy_j + s.std_energy_j)],
                    color,
                )
            }))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Hovering positions of each trace, one row per slot.
pub fn write_trajectory_csv<W: Write>(traces: &[EpisodeTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "kind", "index", "x_m", "y_m"])?;
    if let Some(t) = traces.first() {
        for (k, d) in t.devices.iter().enumerate() {
            w.write_record(["devices", "device", &k.to_string(), &d.x.to_string(), &d.y.to_string()])?;
        }
    }
    for t in traces {
        for (n, q) in t.positions().iter().enumerate() {
            w.write_record([t.label.as_str(), "uav", &n.to_string(), &q.x.to_string(), &q.y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// UAV paths over the service area with device markers.
pub fn trajectory_plot(traces: &[EpisodeTrace], area_side_m: f64, path: &Path) -> Result<()> {
    let root = SVGBackend::new(path, (700, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..area_side_m, 0.0..area_side_m)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("x (m)").y_desc("y (m)").draw().map_err(plot_err)?;
    if let Some(t) = traces.first() {
        chart
            .draw_series(t.devices.iter().map(|d| TriangleMarker::new((d.x, d.y), 7, BLACK.filled())))
            .map_err(plot_err)?
            .label("devices")
            .legend(|(x, y)| TriangleMarker::new((x + 10, y), 6, BLACK.filled()));
    }
    for (i, t) in traces.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = t.positions().iter().map(|q| (q.x, q.y)).collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(t.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
