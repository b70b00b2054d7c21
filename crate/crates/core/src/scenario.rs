//! Group-of-sensors scenario generation and serialization.
//!
//! A scenario is one group's ground truth: a shared sparse common edge
//! vector plus one sparse innovation edge vector per sensor, with the PSDs
//! `s_j = G(z_c + z_inn_j)` and their paired autocorrelations. Amplitudes
//! are snapped to a dyadic grid (multiples of 2⁻²⁰) so every cumulative sum
//! and difference in the chain is exact in f64; the edge/PSD round trips
//! asserted elsewhere are then bit-exact, not merely close.

use crate::error::{Error, Result};
use crate::operators::{autocorr_of, AutocorrVector, EdgeVector, OperatorSet, PsdVector};
use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

const DYADIC_GRID: f64 = 1_048_576.0; // 2^20

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupParams {
    pub k_common: usize,
    pub k_inn: usize,
    /// Inclusive magnitude range for nonzero edges; must stay positive.
    pub amplitude_range: (f64, f64),
    #[serde(default = "default_max_tries")]
    pub max_tries: usize,
}

fn default_max_tries() -> usize {
    2000
}

impl Default for GroupParams {
    fn default() -> Self {
        Self { k_common: 4, k_inn: 2, amplitude_range: (0.5, 1.5), max_tries: 2000 }
    }
}

/// Ground truth for one group of sensors.
#[derive(Debug, Clone)]
pub struct GroupScenario {
    seed: u64,
    params: GroupParams,
    z_common: EdgeVector,
    z_innovations: Vec<EdgeVector>,
    psds: Vec<PsdVector>,
    autocorrs: Vec<AutocorrVector>,
}

impl GroupScenario {
    pub fn sensor_count(&self) -> usize {
        self.z_innovations.len()
    }

    pub fn bins(&self) -> usize {
        self.z_common.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn common(&self) -> &EdgeVector {
        &self.z_common
    }

    pub fn innovations(&self) -> &[EdgeVector] {
        &self.z_innovations
    }

    pub fn psds(&self) -> &[PsdVector] {
        &self.psds
    }

    pub fn autocorrs(&self) -> &[AutocorrVector] {
        &self.autocorrs
    }

    /// Total edge vector of sensor `j`: `z_c + z_inn_j`.
    pub fn total_edges(&self, j: usize) -> EdgeVector {
        self.z_common.plus(&self.z_innovations[j])
    }

    /// Serializes the signal structure (not the operator-dependent
    /// autocorrelations) to the scenario JSON schema.
    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFile {
            n: self.bins(),
            j: self.sensor_count(),
            seed: self.seed,
            z_common: self.z_common.values().to_vec(),
            z_innovations: self
                .z_innovations
                .iter()
                .map(|z| z.values().to_vec())
                .collect(),
            generator_params: self.params.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Rebuilds a scenario from its JSON form, recomputing PSDs and
    /// autocorrelations against the supplied operators.
    pub fn from_json(text: &str, ops: &OperatorSet) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        if file.n != ops.bins() {
            return Err(Error::DimensionMismatch(format!(
                "scenario has {} bins but operators were built for {}",
                file.n,
                ops.bins()
            )));
        }
        if file.z_common.len() != file.n
            || file.z_innovations.len() != file.j
            || file.z_innovations.iter().any(|z| z.len() != file.n)
        {
            return Err(Error::DimensionMismatch(
                "scenario edge vectors disagree with the declared shape".into(),
            ));
        }
        let z_common = EdgeVector::new(Array1::from_vec(file.z_common));
        let z_innovations: Vec<EdgeVector> = file
            .z_innovations
            .into_iter()
            .map(|z| EdgeVector::new(Array1::from_vec(z)))
            .collect();
        let (psds, autocorrs) = realize(&z_common, &z_innovations, ops)?;
        Ok(Self {
            seed: file.seed,
            params: file.generator_params,
            z_common,
            z_innovations,
            psds,
            autocorrs,
        })
    }

    pub fn load_json(path: &Path, ops: &OperatorSet) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, ops)
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    n: usize,
    j: usize,
    seed: u64,
    z_common: Vec<f64>,
    z_innovations: Vec<Vec<f64>>,
    generator_params: GroupParams,
}

fn realize(
    z_common: &EdgeVector,
    z_innovations: &[EdgeVector],
    ops: &OperatorSet,
) -> Result<(Vec<PsdVector>, Vec<AutocorrVector>)> {
    let mut psds = Vec::with_capacity(z_innovations.len());
    let mut autocorrs = Vec::with_capacity(z_innovations.len());
    for z_inn in z_innovations {
        let total = z_common.plus(z_inn);
        let s = crate::operators::psd_of(&total, ops)?;
        autocorrs.push(autocorr_of(&s, ops));
        psds.push(s);
    }
    Ok((psds, autocorrs))
}

fn snap(x: f64) -> f64 {
    (x * DYADIC_GRID).round() / DYADIC_GRID
}

fn draw_sparse(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    range: (f64, f64),
    signed: bool,
) -> Array1<f64> {
    let mut z = Array1::zeros(n);
    let mut idx: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    for i in idx {
        let amp = snap(rng.gen_range(range.0..=range.1)).max(snap(range.0));
        let sign = if signed && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
        z[i] = sign * amp;
    }
    z
}

/// Draws one group scenario: the common edge gets positive amplitudes,
/// innovations get random signs, and the whole draw is rejected until all
/// sensor PSDs are nonnegative.
pub fn generate_group(
    ops: &OperatorSet,
    sensors: usize,
    params: &GroupParams,
    seed: u64,
) -> Result<GroupScenario> {
    let n = ops.bins();
    if sensors == 0 {
        return Err(Error::InvalidParameter("need at least one sensor".into()));
    }
    if params.k_common + params.k_inn > n / 4 {
        return Err(Error::InvalidParameter(format!(
            "k_common + k_inn must stay at or below n/4 = {}, got {}",
            n / 4,
            params.k_common + params.k_inn
        )));
    }
    let (lo, hi) = params.amplitude_range;
    if !(lo > 1e-3 && hi >= lo && hi < 1e6) {
        return Err(Error::InvalidParameter(format!(
            "amplitude range must satisfy 1e-3 < lo <= hi < 1e6, got ({lo}, {hi})"
        )));
    }
    if params.max_tries == 0 {
        return Err(Error::InvalidParameter("max_tries must be positive".into()));
    }

    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..params.max_tries {
        let z_common = EdgeVector::new(draw_sparse(
            &mut rng,
            n,
            params.k_common,
            params.amplitude_range,
            false,
        ));
        let z_innovations: Vec<EdgeVector> = (0..sensors)
            .map(|_| {
                EdgeVector::new(draw_sparse(
                    &mut rng,
                    n,
                    params.k_inn,
                    params.amplitude_range,
                    true,
                ))
            })
            .collect();

        let nonneg = z_innovations.iter().all(|z_inn| {
            let total = z_common.plus(z_inn);
            let mut acc = 0.0;
            total.values().iter().all(|v| {
                acc += v;
                acc >= 0.0
            })
        });
        if !nonneg {
            continue;
        }

        let (psds, autocorrs) = realize(&z_common, &z_innovations, ops)?;
        return Ok(GroupScenario {
            seed,
            params: params.clone(),
            z_common,
            z_innovations,
            psds,
            autocorrs,
        });
    }
    Err(Error::GenerationInfeasible { tries: params.max_tries })
}
