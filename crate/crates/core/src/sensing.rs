//! Per-sensor compression and the stacked joint-sparsity system.
//!
//! Each sensor compresses its autocorrelation with an individual random
//! matrix, `y_j = Φ_j a_j`. The fusion center stacks the received vectors
//! and works against the block layout
//!
//! ```text
//!   full = [ common_block ‖ innovation_block ]
//!   common_block     = vstack_j (Φ_j D)          (acts on the common edge)
//!   innovation_block = blockdiag_j (Φ_j D)       (acts on each innovation)
//! ```
//!
//! Blocks are materialized densely on demand (desk scale), while the solver
//! inner loops go through the matrix-free [`JointOperator`], which skips the
//! structural zeros.

use crate::error::{Error, Result};
use crate::operators::{EdgeVector, OperatorSet};
use crate::rng;
use crate::scenario::GroupScenario;
use crate::solver::LinearOperator;
use ndarray::{s, Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Random ensemble for sensing matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    Gaussian,
    Bernoulli,
}

/// One sensor's compression matrix, entries scaled so columns have unit
/// expected energy (`N(0, 1/w)` or `±1/√w`).
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    matrix: Array2<f64>,
}

impl SensingMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn measurements(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn signal_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Sensing rate ρ = w / N.
    pub fn rate(&self) -> f64 {
        self.matrix.nrows() as f64 / self.matrix.ncols() as f64
    }

    #[cfg(test)]
    pub(crate) fn from_matrix(matrix: Array2<f64>) -> Self {
        Self { matrix }
    }
}

pub fn draw_sensing_matrix(
    w: usize,
    n: usize,
    ensemble: Ensemble,
    seed: u64,
) -> Result<SensingMatrix> {
    if w == 0 || w > n {
        return Err(Error::InvalidParameter(format!(
            "measurement count must satisfy 1 <= w <= n, got w={w}, n={n}"
        )));
    }
    let mut rng = rng::stream(seed, &[]);
    let scale = 1.0 / (w as f64).sqrt();
    let matrix = match ensemble {
        Ensemble::Gaussian => {
            let mut m = Array2::zeros((w, n));
            for v in m.iter_mut() {
                *v = rng::gaussian(&mut rng) * scale;
            }
            m
        }
        Ensemble::Bernoulli => {
            let mut m = Array2::zeros((w, n));
            for v in m.iter_mut() {
                *v = if rng.gen_bool(0.5) { scale } else { -scale };
            }
            m
        }
    };
    Ok(SensingMatrix { matrix })
}

/// Clean (pre-channel) compressed measurements, one vector per sensor.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    per_sensor: Vec<Array1<f64>>,
}

impl MeasurementSet {
    pub fn new(per_sensor: Vec<Array1<f64>>) -> Self {
        Self { per_sensor }
    }

    pub fn per_sensor(&self) -> &[Array1<f64>] {
        &self.per_sensor
    }

    pub fn sensor_count(&self) -> usize {
        self.per_sensor.len()
    }

    pub fn stacked(&self) -> Array1<f64> {
        let total: usize = self.per_sensor.iter().map(|y| y.len()).sum();
        let mut out = Array1::zeros(total);
        let mut at = 0;
        for y in &self.per_sensor {
            out.slice_mut(s![at..at + y.len()]).assign(y);
            at += y.len();
        }
        out
    }
}

/// `y_j = Φ_j a_j` for every sensor in the group.
pub fn measure(
    scenario: &GroupScenario,
    phis: &[SensingMatrix],
    ops: &OperatorSet,
) -> Result<MeasurementSet> {
    if phis.len() != scenario.sensor_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} sensing matrices for {} sensors",
            phis.len(),
            scenario.sensor_count()
        )));
    }
    let mut per_sensor = Vec::with_capacity(phis.len());
    for (phi, psd) in phis.iter().zip(scenario.psds()) {
        if phi.signal_dim() != ops.bins() {
            return Err(Error::DimensionMismatch(format!(
                "sensing matrix has {} columns but operators use {} bins",
                phi.signal_dim(),
                ops.bins()
            )));
        }
        let a = ops.psd_to_autocorr(psd.values());
        per_sensor.push(phi.matrix().dot(&a));
    }
    Ok(MeasurementSet::new(per_sensor))
}

/// The assembled receive-side system for one group.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    n: usize,
    sensor_blocks: Vec<Array2<f64>>,
    received: Array1<f64>,
    offsets: Vec<Range<usize>>,
}

impl StackedSystem {
    pub fn bins(&self) -> usize {
        self.n
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_blocks.len()
    }

    pub fn row_count(&self) -> usize {
        self.received.len()
    }

    pub fn received(&self) -> &Array1<f64> {
        &self.received
    }

    /// Row range of sensor `j` inside the stacked vectors.
    pub fn offsets(&self) -> &[Range<usize>] {
        &self.offsets
    }

    /// Dense `Φ_j D` block of one sensor.
    pub fn sensor_block(&self, j: usize) -> &Array2<f64> {
        &self.sensor_blocks[j]
    }

    pub fn sensor_blocks(&self) -> &[Array2<f64>] {
        &self.sensor_blocks
    }

    /// Received rows of sensor `j`.
    pub fn received_block(&self, j: usize) -> Array1<f64> {
        self.received.slice(s![self.offsets[j].clone()]).to_owned()
    }

    /// Stacked `Φ_j D` rows acting on the common edge vector.
    pub fn common_block(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.row_count(), self.n));
        for (block, range) in self.sensor_blocks.iter().zip(&self.offsets) {
            out.slice_mut(s![range.clone(), ..]).assign(block);
        }
        out
    }

    /// Block-diagonal matrix acting on the stacked innovations.
    pub fn innovation_block(&self) -> Array2<f64> {
        let j = self.sensor_count();
        let mut out = Array2::zeros((self.row_count(), self.n * j));
        for (idx, (block, range)) in
            self.sensor_blocks.iter().zip(&self.offsets).enumerate()
        {
            out.slice_mut(s![range.clone(), idx * self.n..(idx + 1) * self.n])
                .assign(block);
        }
        out
    }

    /// The full stacked matrix `[common_block ‖ innovation_block]`.
    pub fn joint_matrix(&self) -> Array2<f64> {
        let j = self.sensor_count();
        let mut out = Array2::zeros((self.row_count(), self.n * (j + 1)));
        out.slice_mut(s![.., ..self.n]).assign(&self.common_block());
        out.slice_mut(s![.., self.n..])
            .assign(&self.innovation_block());
        out
    }

    /// Matrix-free form of [`Self::joint_matrix`] for solver loops.
    pub fn joint_operator(&self) -> JointOperator<'_> {
        JointOperator { sys: self }
    }

    /// `r − common_block · z_c`, the right-hand side of the innovation-only
    /// solve.
    pub fn innovation_rhs(&self, z_common: &EdgeVector) -> Result<Array1<f64>> {
        if z_common.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "common edge has {} entries, system uses {} bins",
                z_common.len(),
                self.n
            )));
        }
        let mut out = self.received.clone();
        for (block, range) in self.sensor_blocks.iter().zip(&self.offsets) {
            let contrib = block.dot(z_common.values());
            let mut rows = out.slice_mut(s![range.clone()]);
            rows -= &contrib;
        }
        Ok(out)
    }
}

/// Builds the stacked system from the per-sensor matrices and the received
/// vector (already channel-distorted if a channel applies).
pub fn assemble_stacked(
    phis: &[SensingMatrix],
    ops: &OperatorSet,
    received: Array1<f64>,
) -> Result<StackedSystem> {
    if phis.is_empty() {
        return Err(Error::InvalidParameter("need at least one sensor".into()));
    }
    let n = ops.bins();
    let total: usize = phis.iter().map(|p| p.measurements()).sum();
    if received.len() != total {
        return Err(Error::DimensionMismatch(format!(
            "received vector has {} rows, sensing matrices provide {total}",
            received.len()
        )));
    }
    let mut offsets = Vec::with_capacity(phis.len());
    let mut at = 0;
    let mut sensor_blocks = Vec::with_capacity(phis.len());
    for phi in phis {
        if phi.signal_dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "sensing matrix has {} columns but operators use {n} bins",
                phi.signal_dim()
            )));
        }
        sensor_blocks.push(phi.matrix().dot(ops.dict_matrix()));
        offsets.push(at..at + phi.measurements());
        at += phi.measurements();
    }
    Ok(StackedSystem { n, sensor_blocks, received, offsets })
}

/// The stacked cumulative-sum matrix mapping `(z_c, z_inn_1, …, z_inn_J)` to
/// the stacked PSDs: the joint layout with every block replaced by `G`.
pub fn assemble_psd_stack(ops: &OperatorSet, sensors: usize) -> Array2<f64> {
    let n = ops.bins();
    let g = ops.cumsum_matrix();
    let mut out = Array2::zeros((n * sensors, n * (sensors + 1)));
    for j in 0..sensors {
        out.slice_mut(s![j * n..(j + 1) * n, ..n]).assign(g);
        out.slice_mut(s![j * n..(j + 1) * n, (j + 1) * n..(j + 2) * n])
            .assign(g);
    }
    out
}

/// Writes a dense matrix as bare CSV rows (debugging aid).
pub fn export_matrix_csv<W: std::io::Write>(m: &Array2<f64>, out: &mut W) -> Result<()> {
    for i in 0..m.nrows() {
        let mut first = true;
        for v in m.row(i) {
            if !first {
                write!(out, ",")?;
            }
            write!(out, "{v:e}")?;
            first = false;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Matrix-free `[common_block ‖ innovation_block]` product.
pub struct JointOperator<'a> {
    sys: &'a StackedSystem,
}

impl LinearOperator for JointOperator<'_> {
    fn rows(&self) -> usize {
        self.sys.row_count()
    }

    fn cols(&self) -> usize {
        self.sys.n * (self.sys.sensor_count() + 1)
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.sys.n;
        let common = x.slice(s![..n]);
        let mut out = Array1::zeros(self.rows());
        for (j, (block, range)) in self
            .sys
            .sensor_blocks
            .iter()
            .zip(&self.sys.offsets)
            .enumerate()
        {
            let inn = x.slice(s![(j + 1) * n..(j + 2) * n]);
            let total = &common + &inn;
            out.slice_mut(s![range.clone()]).assign(&block.dot(&total));
        }
        out
    }

    fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.sys.n;
        let mut out = Array1::zeros(self.cols());
        for (j, (block, range)) in self
            .sys
            .sensor_blocks
            .iter()
            .zip(&self.sys.offsets)
            .enumerate()
        {
            let rows = y.slice(s![range.clone()]);
            let back = block.t().dot(&rows);
            {
                let mut common = out.slice_mut(s![..n]);
                common += &back;
            }
            out.slice_mut(s![(j + 1) * n..(j + 2) * n]).assign(&back);
        }
        out
    }
}
