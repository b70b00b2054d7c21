//! Deterministic operators linking the autocorrelation, PSD, and edge-vector
//! domains, plus the thin newtypes for each domain.
//!
//! The chain is: a PSD `s` is the smoothed transform of an autocorrelation
//! `a` (`s = W F a`), and its first-order difference `z = Γ s` is sparse
//! because smoothing leaves `s` close to piecewise constant. The cumulative
//! sum `G` undoes `Γ` exactly, and the dictionary `D = (Γ W F)⁻¹` maps edge
//! vectors straight to autocorrelations (`a = D z`).
//!
//! `F` is realized as the normalized Hartley matrix: a real, symmetric,
//! orthogonal, involutory stand-in for the DFT under the symmetric-spectrum
//! convention, which keeps every vector in this crate real. `W` is a
//! circulant moving average of odd length; lengths whose transform has a
//! zero coefficient are rejected at construction because the dictionary
//! requires `W⁻¹`.

use crate::error::{Error, Result};
use crate::fft;
use ndarray::{Array1, Array2};

/// Magnitudes at or below this count as structural zeros of an edge vector.
pub const EDGE_EPS: f64 = 1e-9;

/// Power per frequency bin, linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdVector {
    values: Array1<f64>,
}

impl PsdVector {
    pub fn new(values: Array1<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// First-order difference of a PSD; sparse for piecewise-constant spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector {
    values: Array1<f64>,
}

impl EdgeVector {
    pub fn new(values: Array1<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: Array1::zeros(n) }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries with magnitude above [`EDGE_EPS`].
    pub fn sparsity(&self) -> usize {
        self.values.iter().filter(|v| v.abs() > EDGE_EPS).count()
    }

    /// Indices of entries with magnitude above [`EDGE_EPS`].
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > EDGE_EPS)
            .map(|(i, _)| i)
            .collect()
    }

    /// Elementwise sum of two edge vectors.
    pub fn plus(&self, other: &EdgeVector) -> EdgeVector {
        EdgeVector::new(&self.values + &other.values)
    }
}

/// Autocorrelation vector under the symmetric-spectrum convention (always
/// real here).
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrVector {
    values: Array1<f64>,
}

impl AutocorrVector {
    pub fn new(values: Array1<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The dense operator family for one bin count.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    n: usize,
    smoothing_len: usize,
    diff: Array2<f64>,
    cumsum: Array2<f64>,
    smooth: Array2<f64>,
    smooth_inv: Array2<f64>,
    transform: Array2<f64>,
    dict: Array2<f64>,
}

/// Builds the operator family for `n` bins with a circulant moving average
/// of odd length `smoothing_len` as the smoother.
pub fn build_operators(n: usize, smoothing_len: usize) -> Result<OperatorSet> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "bin count must be even and at least 8, got {n}"
        )));
    }
    if smoothing_len % 2 == 0 || smoothing_len == 0 || smoothing_len >= n {
        return Err(Error::InvalidParameter(format!(
            "smoothing length must be odd, positive, and below {n}, got {smoothing_len}"
        )));
    }

    // Circulant eigenvalues of the moving average; these are also its
    // singular values up to sign, so invertibility is a direct check.
    let half = (smoothing_len - 1) / 2;
    let len = smoothing_len as f64;
    let eigs: Vec<f64> = (0..n)
        .map(|m| {
            let base = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            let sum: f64 = (1..=half).map(|k| (base * k as f64).cos()).sum();
            (1.0 + 2.0 * sum) / len
        })
        .collect();
    if eigs.iter().any(|e| e.abs() <= 1e-10) {
        return Err(Error::SingularSmoother { len: smoothing_len, n });
    }

    let mut smooth_col = vec![0.0; n];
    smooth_col[0] = 1.0 / len;
    for k in 1..=half {
        smooth_col[k] = 1.0 / len;
        smooth_col[n - k] = 1.0 / len;
    }
    let smooth = fft::circulant(&smooth_col);

    // First column of W⁻¹: inverse transform of the reciprocal eigenvalues.
    // Both sequences are real and even, so a cosine sum suffices.
    let inv_col: Vec<f64> = (0..n)
        .map(|k| {
            let base = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            eigs.iter()
                .enumerate()
                .map(|(m, e)| (base * m as f64).cos() / e)
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let smooth_inv = fft::circulant(&inv_col);

    let cumsum =
        Array2::from_shape_fn((n, n), |(i, j)| if j <= i { 1.0 } else { 0.0 });
    let diff = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            1.0
        } else if i > 0 && j + 1 == i {
            -1.0
        } else {
            0.0
        }
    });

    // Normalized Hartley matrix: F = Fᵀ = F⁻¹.
    let scale = 1.0 / (n as f64).sqrt();
    let transform = Array2::from_shape_fn((n, n), |(i, j)| {
        let angle = 2.0 * std::f64::consts::PI * ((i * j) % n) as f64 / n as f64;
        scale * (angle.cos() + angle.sin())
    });

    // D = (Γ W F)⁻¹ = F W⁻¹ G, using F's involution and Γ⁻¹ = G.
    let dict = transform.dot(&smooth_inv).dot(&cumsum);

    Ok(OperatorSet { n, smoothing_len, diff, cumsum, smooth, smooth_inv, transform, dict })
}

impl OperatorSet {
    pub fn bins(&self) -> usize {
        self.n
    }

    pub fn smoothing_len(&self) -> usize {
        self.smoothing_len
    }

    pub fn diff_matrix(&self) -> &Array2<f64> {
        &self.diff
    }

    pub fn cumsum_matrix(&self) -> &Array2<f64> {
        &self.cumsum
    }

    pub fn smooth_matrix(&self) -> &Array2<f64> {
        &self.smooth
    }

    pub fn transform_matrix(&self) -> &Array2<f64> {
        &self.transform
    }

    /// The dictionary `D` with `a = D z`.
    pub fn dict_matrix(&self) -> &Array2<f64> {
        &self.dict
    }

    /// `D⁻¹ = Γ W F`, materialized for verification.
    pub fn dict_inverse(&self) -> Array2<f64> {
        self.diff.dot(&self.smooth).dot(&self.transform)
    }

    /// Running sum of `x` (`G · x`), computed by the exact telescoping loop.
    pub fn apply_cumsum(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut acc = 0.0;
        x.iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect()
    }

    /// First-order difference of `x` (`Γ · x`).
    pub fn apply_diff(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut prev = 0.0;
        x.iter()
            .map(|v| {
                let d = v - prev;
                prev = *v;
                d
            })
            .collect()
    }

    /// The autocorrelation paired with a PSD vector: `a = F W⁻¹ s`.
    pub fn psd_to_autocorr(&self, s: &Array1<f64>) -> Array1<f64> {
        self.transform.dot(&self.smooth_inv.dot(s))
    }

    /// Forward chain `s = W F a`.
    pub fn autocorr_to_psd(&self, a: &Array1<f64>) -> Array1<f64> {
        self.smooth.dot(&self.transform.dot(a))
    }
}

/// `z = Γ s`; the cumulative sum of the result reproduces `s`.
pub fn edge_of(s: &PsdVector, ops: &OperatorSet) -> EdgeVector {
    EdgeVector::new(ops.apply_diff(s.values()))
}

/// `s = G z`, rejecting edge vectors whose running sum dips below
/// `-EDGE_EPS` (no PSD has negative power).
pub fn psd_of(z: &EdgeVector, ops: &OperatorSet) -> Result<PsdVector> {
    let s = ops.apply_cumsum(z.values());
    if let Some((bin, &value)) =
        s.iter().enumerate().find(|(_, v)| **v < -EDGE_EPS)
    {
        return Err(Error::NegativePsd { bin, value });
    }
    Ok(PsdVector::new(s))
}

/// The autocorrelation whose smoothed transform is `s`.
pub fn autocorr_of(s: &PsdVector, ops: &OperatorSet) -> AutocorrVector {
    AutocorrVector::new(ops.psd_to_autocorr(s.values()))
}
