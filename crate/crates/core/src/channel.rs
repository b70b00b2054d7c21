//! Imperfect sensor→fusion-center links.
//!
//! Each link distorts the sent measurement vector by a circular convolution
//! with a per-sensor destructive filter plus Gaussian noise:
//! `r_j = y_j ⊛ β_j + n_j`. Because the group's common part is known at the
//! fusion center and held fixed for a while, the sensors can transmit it as
//! a pilot; the FC knows what was sent and estimates each filter by
//! circulant least squares. The filters assemble into a block-diagonal
//! circulant operator whose products run in the frequency domain,
//! `O(Σ wⱼ log wⱼ)` per matvec.

use crate::error::{Error, Result};
use crate::exec;
use crate::fft::{circulant, CirculantSpectrum};
use crate::rng;
use crate::sensing::{MeasurementSet, StackedSystem};
use crate::solver::{solve_circulant_ls, LinearOperator};
use ndarray::{s, Array1, Array2, ArrayView1};
use std::ops::Range;

/// Circular impulse response of one sensor's link.
#[derive(Debug, Clone)]
pub struct DestructiveFilter {
    taps: Array1<f64>,
}

impl DestructiveFilter {
    pub fn new(taps: Array1<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("filter needs at least one tap".into()));
        }
        if taps.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParameter("filter must not be all zero".into()));
        }
        Ok(Self { taps })
    }

    /// Exact unit impulse of length `w` (the transparent link).
    pub fn impulse(w: usize) -> Self {
        let mut taps = Array1::zeros(w);
        taps[0] = 1.0;
        Self { taps }
    }

    pub fn taps(&self) -> &Array1<f64> {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.dot(&self.taps).sqrt()
    }
}

/// One realization of every link in a group.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub filters: Vec<DestructiveFilter>,
    pub noise_sigma: f64,
}

impl ChannelRealization {
    /// Transparent links with no noise.
    pub fn identity(sensors: usize, w: usize) -> Self {
        Self {
            filters: (0..sensors).map(|_| DestructiveFilter::impulse(w)).collect(),
            noise_sigma: 0.0,
        }
    }
}

/// Near-identity filters for experiments: a unit impulse plus a random tail
/// with per-tap variance `sigma_beta² / w`. `sigma_beta = 0` yields exact
/// impulses.
pub fn draw_filters(
    sensors: usize,
    w: usize,
    sigma_beta: f64,
    seed: u64,
) -> Result<Vec<DestructiveFilter>> {
    if w == 0 {
        return Err(Error::InvalidParameter("filters need at least one tap".into()));
    }
    if sigma_beta < 0.0 {
        return Err(Error::InvalidParameter("sigma_beta must be nonnegative".into()));
    }
    let tap_sigma = sigma_beta / (w as f64).sqrt();
    Ok((0..sensors)
        .map(|j| {
            let mut taps = Array1::zeros(w);
            taps[0] = 1.0;
            if sigma_beta > 0.0 {
                let mut stream = rng::stream(seed, &[j as u64]);
                for t in taps.iter_mut().skip(1) {
                    *t = rng::gaussian(&mut stream) * tap_sigma;
                }
            }
            DestructiveFilter { taps }
        })
        .collect())
}

/// Sends a measurement set through the links: per-sensor circular
/// convolution plus i.i.d. Gaussian noise regenerated from `noise_seed`.
pub fn apply_channel(
    y: &MeasurementSet,
    channel: &ChannelRealization,
    noise_seed: u64,
) -> Result<Array1<f64>> {
    if y.sensor_count() != channel.filters.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurement vectors but {} filters",
            y.sensor_count(),
            channel.filters.len()
        )));
    }
    let mut parts = Vec::with_capacity(y.sensor_count());
    for (j, (y_j, filter)) in y.per_sensor().iter().zip(&channel.filters).enumerate() {
        if y_j.len() != filter.len() {
            return Err(Error::DimensionMismatch(format!(
                "sensor {j}: measurement has {} entries, filter {}",
                y_j.len(),
                filter.len()
            )));
        }
        let spec = CirculantSpectrum::new(filter.taps().as_slice().unwrap());
        let mut r_j = spec.convolve(y_j.as_slice().unwrap());
        if channel.noise_sigma > 0.0 {
            let mut stream = rng::stream(noise_seed, &[j as u64]);
            for v in r_j.iter_mut() {
                *v += channel.noise_sigma * rng::gaussian(&mut stream);
            }
        }
        parts.push(r_j);
    }
    Ok(MeasurementSet::new(parts).stacked())
}

/// Per-sensor circulant least squares on the pilots.
pub fn estimate_filters(
    pilots_sent: &[Array1<f64>],
    pilots_received: &[Array1<f64>],
) -> Result<Vec<DestructiveFilter>> {
    if pilots_sent.len() != pilots_received.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sent pilots but {} received",
            pilots_sent.len(),
            pilots_received.len()
        )));
    }
    let estimates = exec::map_indexed(pilots_sent.len(), |j| {
        solve_circulant_ls(&pilots_sent[j], &pilots_received[j])
            .and_then(|rep| DestructiveFilter::new(rep.filter))
    });
    estimates.into_iter().collect()
}

/// The block-diagonal stack of per-sensor circulant filters.
pub struct BlockCirculant {
    filters: Vec<Array1<f64>>,
    spectra: Vec<CirculantSpectrum>,
    offsets: Vec<Range<usize>>,
}

/// Assembles the block-diagonal operator from the filters.
pub fn build_block_circulant(filters: &[DestructiveFilter]) -> Result<BlockCirculant> {
    if filters.is_empty() {
        return Err(Error::InvalidParameter("need at least one filter".into()));
    }
    let mut offsets = Vec::with_capacity(filters.len());
    let mut at = 0;
    for f in filters {
        offsets.push(at..at + f.len());
        at += f.len();
    }
    Ok(BlockCirculant {
        filters: filters.iter().map(|f| f.taps().clone()).collect(),
        spectra: filters
            .iter()
            .map(|f| CirculantSpectrum::new(f.taps().as_slice().unwrap()))
            .collect(),
        offsets,
    })
}

impl BlockCirculant {
    pub fn block_count(&self) -> usize {
        self.filters.len()
    }

    pub fn dim(&self) -> usize {
        self.offsets.last().map(|r| r.end).unwrap_or(0)
    }

    /// Dense circulant matrix of block `j` (verification at small sizes).
    pub fn dense_block(&self, j: usize) -> Array2<f64> {
        circulant(self.filters[j].as_slice().unwrap())
    }

    /// Frequency-domain matvec with a stacked vector.
    pub fn apply(&self, stacked: &Array1<f64>) -> Result<Array1<f64>> {
        if stacked.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "stacked vector has {} rows, blocks cover {}",
                stacked.len(),
                self.dim()
            )));
        }
        let mut out = Array1::zeros(self.dim());
        for (spec, range) in self.spectra.iter().zip(&self.offsets) {
            let part = stacked.slice(s![range.clone()]);
            out.slice_mut(s![range.clone()])
                .assign(&spec.convolve(part.as_slice().unwrap()));
        }
        Ok(out)
    }

    /// Transpose matvec (per-block circular correlation).
    pub fn apply_transpose(&self, stacked: &Array1<f64>) -> Result<Array1<f64>> {
        if stacked.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "stacked vector has {} rows, blocks cover {}",
                stacked.len(),
                self.dim()
            )));
        }
        let mut out = Array1::zeros(self.dim());
        for (spec, range) in self.spectra.iter().zip(&self.offsets) {
            let part = stacked.slice(s![range.clone()]);
            out.slice_mut(s![range.clone()])
                .assign(&spec.correlate(part.as_slice().unwrap()));
        }
        Ok(out)
    }
}

/// The joint stacked operator with every sensor block filtered through its
/// link: block `j` acts as `B°_j Φ_j D`. Directly usable in BPDN for the
/// channel-aware innovation solve.
pub struct ChannelAwareOperator<'a> {
    sys: &'a StackedSystem,
    spectra: Vec<CirculantSpectrum>,
}

/// Builds the channel-aware joint operator for a stacked system.
pub fn channel_aware_operator<'a>(
    sys: &'a StackedSystem,
    filters: &[DestructiveFilter],
) -> Result<ChannelAwareOperator<'a>> {
    if filters.len() != sys.sensor_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} filters for {} sensors",
            filters.len(),
            sys.sensor_count()
        )));
    }
    for (j, (f, range)) in filters.iter().zip(sys.offsets()).enumerate() {
        if f.len() != range.len() {
            return Err(Error::DimensionMismatch(format!(
                "sensor {j}: filter has {} taps, block has {} rows",
                f.len(),
                range.len()
            )));
        }
    }
    Ok(ChannelAwareOperator {
        sys,
        spectra: filters
            .iter()
            .map(|f| CirculantSpectrum::new(f.taps().as_slice().unwrap()))
            .collect(),
    })
}

impl ChannelAwareOperator<'_> {
    /// Filtered per-sensor block operator `B°_j Φ_j D` for decoupled solves.
    pub fn sensor_operator(&self, j: usize) -> FilteredBlockOperator<'_> {
        FilteredBlockOperator {
            dense: self.sys.sensor_block(j),
            spectrum: &self.spectra[j],
        }
    }

    /// Applies only the link filter of sensor `j` to a measurement-domain
    /// vector.
    pub fn filter_only(&self, j: usize, v: &Array1<f64>) -> Array1<f64> {
        self.spectra[j].convolve(v.as_slice().unwrap())
    }
}

impl LinearOperator for ChannelAwareOperator<'_> {
    fn rows(&self) -> usize {
        self.sys.row_count()
    }

    fn cols(&self) -> usize {
        self.sys.bins() * (self.sys.sensor_count() + 1)
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.sys.bins();
        let common = x.slice(s![..n]);
        let mut out = Array1::zeros(self.rows());
        for (j, (spec, range)) in self.spectra.iter().zip(self.sys.offsets()).enumerate() {
            let inn = x.slice(s![(j + 1) * n..(j + 2) * n]);
            let total = &common + &inn;
            let clean = self.sys.sensor_block(j).dot(&total);
            out.slice_mut(s![range.clone()])
                .assign(&spec.convolve(clean.as_slice().unwrap()));
        }
        out
    }

    fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.sys.bins();
        let mut out = Array1::zeros(self.cols());
        for (j, (spec, range)) in self.spectra.iter().zip(self.sys.offsets()).enumerate() {
            let rows = y.slice(s![range.clone()]);
            let unfiltered = spec.correlate(rows.to_owned().as_slice().unwrap());
            let back = self.sys.sensor_block(j).t().dot(&unfiltered);
            {
                let mut common = out.slice_mut(s![..n]);
                common += &back;
            }
            out.slice_mut(s![(j + 1) * n..(j + 2) * n]).assign(&back);
        }
        out
    }
}

/// One sensor's filtered block `B° (Φ D)`.
pub struct FilteredBlockOperator<'a> {
    dense: &'a Array2<f64>,
    spectrum: &'a CirculantSpectrum,
}

impl LinearOperator for FilteredBlockOperator<'_> {
    fn rows(&self) -> usize {
        self.dense.nrows()
    }

    fn cols(&self) -> usize {
        self.dense.ncols()
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let clean = self.dense.dot(&x);
        self.spectrum.convolve(clean.as_slice().unwrap())
    }

    fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        let unfiltered = self
            .spectrum
            .correlate(y.to_owned().as_slice().unwrap());
        self.dense.t().dot(&unfiltered)
    }
}
