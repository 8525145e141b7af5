//! Central finite-difference verification of reverse-mode gradients.

use super::params::ParameterSet;

pub const FD_STEP: f64 = 1e-5;

/// Below this magnitude gradients are compared absolutely rather than
/// relatively, so exact zeros do not divide by zero.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor, max relative error)` per parameter group.
    pub per_tensor: Vec<(String, f64)>,
    pub probes: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `loss_and_grad`'s gradient against central differences on up to
/// `max_probes_per_tensor` entries of every tensor (strided evenly when the
/// tensor is larger).
pub fn gradient_check<F>(
    params: &ParameterSet,
    mut loss_and_grad: F,
    max_probes_per_tensor: usize,
) -> GradCheckReport
where
    F: FnMut(&ParameterSet) -> (f64, ParameterSet),
{
    let (_, analytic) = loss_and_grad(params);
    let mut work = params.clone();
    let mut per_tensor = Vec::new();
    let mut probes = 0;
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let n = params.get(&name).len();
        let stride = n.div_ceil(max_probes_per_tensor.max(1)).max(1);
        let mut worst = 0.0f64;
        for flat in (0..n).step_by(stride) {
            let original = params.get(&name).as_slice().expect("contiguous")[flat];
            work.get_mut(&name).as_slice_mut().unwrap()[flat] = original + FD_STEP;
            let (up, _) = loss_and_grad(&work);
            work.get_mut(&name).as_slice_mut().unwrap()[flat] = original - FD_STEP;
            let (down, _) = loss_and_grad(&work);
            work.get_mut(&name).as_slice_mut().unwrap()[flat] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.get(&name).as_slice().unwrap()[flat];
            worst = worst.max(relative_error(a, numeric));
            probes += 1;
        }
        per_tensor.push((name, worst));
    }
    GradCheckReport {
        max_relative_error: per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max),
        per_tensor,
        probes,
    }
}
