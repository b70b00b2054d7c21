//! FFT helpers for circulant arithmetic.
//!
//! Everything here works on real signals; spectra are kept as complex
//! buffers internally and the imaginary parts of inverse transforms are
//! discarded (they are roundoff for conjugate-symmetric inputs).

use ndarray::Array1;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) fn dft(x: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

pub(crate) fn idft_real(spec: &[Complex<f64>]) -> Array1<f64> {
    let n = spec.len();
    let mut buf = spec.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Array1::from_iter(buf.iter().map(|c| c.re * scale))
}

/// Dense circulant matrix with `first_col` as its first column, so that
/// `circulant(c) · x` equals the circular convolution `c ⊛ x`.
pub(crate) fn circulant(first_col: &[f64]) -> ndarray::Array2<f64> {
    let n = first_col.len();
    ndarray::Array2::from_shape_fn((n, n), |(i, j)| first_col[(i + n - j) % n])
}

/// A filter held in the frequency domain, with FFT plans cached so repeated
/// convolutions (solver inner loops) avoid re-planning.
#[derive(Clone)]
pub(crate) struct CirculantSpectrum {
    len: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Exact unit impulse: convolution is the identity and is short-circuited
    /// so identity channels are bit-transparent.
    is_impulse: bool,
}

impl CirculantSpectrum {
    pub fn new(taps: &[f64]) -> Self {
        let len = taps.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectrum: Vec<Complex<f64>> =
            taps.iter().map(|&v| Complex::new(v, 0.0)).collect();
        forward.process(&mut spectrum);
        let is_impulse =
            taps[0] == 1.0 && taps[1..].iter().all(|&v| v == 0.0);
        Self { len, spectrum, forward, inverse, is_impulse }
    }

    /// `circulant(taps) · x`, i.e. circular convolution of the taps with `x`.
    pub fn convolve(&self, x: &[f64]) -> Array1<f64> {
        if self.is_impulse {
            return Array1::from_iter(x.iter().copied());
        }
        self.transform_with(x, |s, v| s * v)
    }

    /// `circulant(taps)ᵀ · x`, i.e. circular correlation.
    pub fn correlate(&self, x: &[f64]) -> Array1<f64> {
        if self.is_impulse {
            return Array1::from_iter(x.iter().copied());
        }
        self.transform_with(x, |s, v| s.conj() * v)
    }

    fn transform_with(
        &self,
        x: &[f64],
        combine: impl Fn(Complex<f64>, Complex<f64>) -> Complex<f64>,
    ) -> Array1<f64> {
        assert_eq!(x.len(), self.len, "filter/signal length mismatch");
        let mut buf: Vec<Complex<f64>> =
            x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b = combine(*s, *b);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        Array1::from_iter(buf.iter().map(|c| c.re * scale))
    }
}

/// Circular convolution of two equal-length real vectors.
pub(crate) fn circular_convolve(a: &[f64], b: &[f64]) -> Array1<f64> {
    assert_eq!(a.len(), b.len(), "circular convolution needs equal lengths");
    CirculantSpectrum::new(a).convolve(b)
}
