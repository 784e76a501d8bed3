//! Central finite-difference check of [`Mlp::backward`].

use ndarray::{Array2, ArrayView2};

use crate::error::Result;
use crate::mlp::Mlp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps entries that are zero
/// up to rounding from dominating the report.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn objective(net: &Mlp, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Result<f64> {
    Ok((&net.forward(x)? * &dy).sum())
}

/// Compares every analytic gradient of `sum(dy * net(x))` with a central
/// difference of half-width `step`.
pub fn check_mlp_gradients(net: &Mlp, x: ArrayView2<f64>, dy: ArrayView2<f64>, step: f64, floor: f64) -> Result<GradCheckReport> {
    let (_, cache) = net.forward_cached(x)?;
    let grads = net.backward(&cache, dy);
    let analytic: Vec<f64> = grads.param_slices().iter().flat_map(|s| s.iter().copied()).collect();
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
    };
    let n = analytic.len();
    for idx in 0..n {
        let orig = get(&probe, idx);
        set(&mut probe, idx, orig + step);
        let up = objective(&probe, x, dy)?;
        set(&mut probe, idx, orig - step);
        let down = objective(&probe, x, dy)?;
        set(&mut probe, idx, orig);
        let numeric = (up - down) / (2.0 * step);
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(relative_error(analytic[idx], numeric, floor));
    }
    Ok(report)
}

fn locate(net: &Mlp, mut idx: usize) -> (usize, usize) {
    for (s, slice) in net.param_slices().iter().enumerate() {
        if idx < slice.len() {
            return (s, idx);
        }
        idx -= slice.len();
    }
    panic!("parameter index out of range");
}

fn get(net: &Mlp, idx: usize) -> f64 {
    let (s, i) = locate(net, idx);
    net.param_slices()[s][i]
}

fn set(net: &mut Mlp, idx: usize, v: f64) {
    let (s, i) = locate(net, idx);
    net.param_slices_mut()[s][i] = v;
}

/// Convenience for tests: a `rows x cols` matrix filled by `f`.
pub fn matrix(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), &mut f)
}
