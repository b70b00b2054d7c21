//! Least-squares deconvolution against a circulant pilot.
//!
//! Solves `min_β ‖received − circulant(pilot) · β‖₂` in the frequency
//! domain: bins where the pilot spectrum is healthy divide exactly, bins
//! below the relative floor get a ridge term instead of an exact (and
//! ill-posed) division.

use crate::error::{Error, Result};
use crate::fft;
use ndarray::Array1;

/// Relative power floor below which a pilot bin is treated as unreliable.
pub const PILOT_POWER_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CirculantLsReport {
    pub filter: Array1<f64>,
    /// `‖circulant(pilot)·filter − received‖₂`, recomputed in time domain.
    pub residual_norm: f64,
}

pub fn solve_circulant_ls(
    pilot: &Array1<f64>,
    received: &Array1<f64>,
) -> Result<CirculantLsReport> {
    if pilot.is_empty() || pilot.len() != received.len() {
        return Err(Error::DimensionMismatch(format!(
            "pilot has {} taps, received has {}",
            pilot.len(),
            received.len()
        )));
    }
    if pilot.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroPilot);
    }

    let pilot_slice: Vec<f64> = pilot.iter().copied().collect();
    let received_slice: Vec<f64> = received.iter().copied().collect();
    let pilot_spec = fft::dft(&pilot_slice);
    let received_spec = fft::dft(&received_slice);

    let max_power = pilot_spec.iter().map(|c| c.norm_sqr()).fold(0.0f64, f64::max);
    let floor = PILOT_POWER_FLOOR * max_power;

    let filter_spec: Vec<_> = pilot_spec
        .iter()
        .zip(received_spec.iter())
        .map(|(y, r)| {
            let power = y.norm_sqr();
            if power >= floor {
                r / y
            } else {
                y.conj() * r / (power + floor)
            }
        })
        .collect();
    let filter = fft::idft_real(&filter_spec);

    let fitted = fft::circular_convolve(&pilot_slice, filter.as_slice().unwrap());
    let residual_norm = fitted
        .iter()
        .zip(received.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    Ok(CirculantLsReport { filter, residual_norm })
}
