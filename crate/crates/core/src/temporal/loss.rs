use crate::error::{Error, Result};

use super::ZSpikeVector;

/// Stand-in spike time for silent output neurons inside the loss (`e^10`).
pub const Z_MAX: f64 = 22_026.465_794_806_718;

/// Cross-entropy over `softmax(-z)`, so the target class is pushed to fire first.
///
/// Silent outputs are replaced by [`Z_MAX`] and receive zero gradient.
/// Returns the loss and `∂loss/∂z`.
pub fn z_loss(z_out: &ZSpikeVector, class: usize) -> Result<(f64, Vec<f64>)> {
    let n = z_out.len();
    if class >= n {
        return Err(Error::InvalidClass {
            index: class,
            classes: n,
        });
    }
    let z: Vec<f64> = z_out
        .as_slice()
        .iter()
        .map(|&v| if v.is_finite() { v } else { Z_MAX })
        .collect();
    let z_min = z.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = z.iter().map(|&v| (z_min - v).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = z[class] - z_min + total.ln();
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if !z_out.as_slice()[k].is_finite() {
                0.0
            } else {
                let target = if k == class { 1.0 } else { 0.0 };
                target - e / total
            }
        })
        .collect();
    Ok((loss, grad))
}
