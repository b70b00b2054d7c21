//! End-to-end grid experiments.
//!
//! An M×M sensor grid is tiled into groups of J sensors; each group gets an
//! independent scenario from the shared configuration. For every
//! (trial, sensing rate, link severity) cell the harness draws sensing
//! matrices, link filters, and noise from seeds derived from the cell
//! coordinates, runs every selected method on bit-identical data (paired
//! design), and reduces per-sensor metrics into one row per
//! (method, rate, severity, trial). Cells are independent work units and
//! fan out on rayon under the `parallel` feature; the derived seeds make
//! the output identical either way.
//!
//! Wall-clock timing covers each method's solve phase only and is recorded
//! as the median of 3 repeats. With `measure_time = false` the repeats are
//! skipped and the time column is written as zero, which makes the CSV
//! byte-reproducible for a fixed seed.

use crate::channel::{
    apply_channel, draw_filters, estimate_filters, ChannelRealization, DestructiveFilter,
};
use crate::common::{common_innovation_l1_closed, common_joint_l1_closed};
use crate::error::{Error, Result};
use crate::exec;
use crate::operators::{build_operators, EdgeVector, OperatorSet, EDGE_EPS};
use crate::recon::{
    recon_individual, recon_innovation, recon_innovation_channel_aware, recon_jsm,
    ReconMethod, ReconReport,
};
use crate::rng::derive_seed;
use crate::scenario::{generate_group, GroupParams, GroupScenario};
use crate::sensing::{assemble_stacked, draw_sensing_matrix, measure, Ensemble, SensingMatrix};
use crate::solver::{LambdaRule, LinearOperator, SolveConfig};
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Where the fusion center's common-edge estimate comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommonSource {
    /// Ground truth (oracle).
    Truth,
    /// Closed-form joint ℓ₁ optimum from the calibration PSDs.
    JointL1,
    /// Closed-form innovations-only ℓ₁ optimum from the calibration PSDs.
    InnovationL1,
}

/// Which filters the channel-aware method is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterSource {
    /// The true filters (oracle).
    True,
    /// Pilot-based circulant least-squares estimates.
    Estimated,
}

/// Solver block of the experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub lambda_rule: LambdaRule,
    pub tol: f64,
    pub max_iter: usize,
    pub feas_tol: f64,
    pub obj_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let solve = SolveConfig::default();
        Self {
            lambda_rule: LambdaRule::default(),
            tol: solve.tol,
            max_iter: solve.max_iter,
            feas_tol: 1e-6,
            obj_tol: 1e-4,
        }
    }
}

impl SolverSettings {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig { tol: self.tol, max_iter: self.max_iter, ..Default::default() }
    }
}

/// Full experiment configuration; mirrors the config-file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Grid side; the network has m² sensors.
    pub m: usize,
    pub j_per_gos: usize,
    pub n: usize,
    pub k_common: usize,
    pub k_inn: usize,
    pub amplitude_range: (f64, f64),
    pub smoothing_len: usize,
    pub ensemble: Ensemble,
    /// Sensing rates ρ = w/N to sweep.
    pub rate_sweep: Vec<f64>,
    /// Link severities σ_β to sweep.
    pub sigma_beta_sweep: Vec<f64>,
    pub noise_sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<ReconMethod>,
    pub z_c_source: CommonSource,
    pub filter_source: FilterSource,
    /// Pilot retransmission period in sensing rounds (filters are estimated
    /// once per hold window; every trial here is one window).
    pub hold_rounds: usize,
    pub measure_time: bool,
    pub solver: SolverSettings,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            m: 2,
            j_per_gos: 4,
            n: 64,
            k_common: 4,
            k_inn: 1,
            amplitude_range: (0.5, 1.5),
            smoothing_len: 3,
            ensemble: Ensemble::Gaussian,
            rate_sweep: vec![0.25, 0.5],
            sigma_beta_sweep: vec![0.0],
            noise_sigma: 0.0,
            trials: 1,
            seed: 0,
            methods: ReconMethod::ALL.to_vec(),
            z_c_source: CommonSource::InnovationL1,
            filter_source: FilterSource::Estimated,
            hold_rounds: 100,
            measure_time: true,
        solver: SolverSettings::default(),
        }
    }
}

impl GridConfig {
    pub fn gos_count(&self) -> usize {
        self.m * self.m / self.j_per_gos
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.j_per_gos == 0 {
            return Err(Error::InvalidParameter("m and j_per_gos must be positive".into()));
        }
        if (self.m * self.m) % self.j_per_gos != 0 {
            return Err(Error::InvalidParameter(format!(
                "m² = {} must be divisible by j_per_gos = {}",
                self.m * self.m,
                self.j_per_gos
            )));
        }
        if self.rate_sweep.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::InvalidParameter(
                "every sensing rate must lie in (0, 1]".into(),
            ));
        }
        if self.sigma_beta_sweep.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidParameter("sigma_beta must be nonnegative".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter("noise_sigma must be nonnegative".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("select at least one method".into()));
        }
        if self.hold_rounds == 0 {
            return Err(Error::InvalidParameter("hold_rounds must be positive".into()));
        }
        Ok(())
    }

    fn group_params(&self) -> GroupParams {
        GroupParams {
            k_common: self.k_common,
            k_inn: self.k_inn,
            amplitude_range: self.amplitude_range,
            max_tries: 2000,
        }
    }
}

/// Sensor indices of each group. A grid with J = 4 and even M tiles into
/// 2×2 neighborhoods; otherwise groups are contiguous row-major chunks.
pub fn gos_assignment(m: usize, j: usize) -> Vec<Vec<usize>> {
    let total = m * m;
    if j == 4 && m % 2 == 0 {
        let mut groups = Vec::with_capacity(total / 4);
        for by in (0..m).step_by(2) {
            for bx in (0..m).step_by(2) {
                groups.push(vec![
                    by * m + bx,
                    by * m + bx + 1,
                    (by + 1) * m + bx,
                    (by + 1) * m + bx + 1,
                ]);
            }
        }
        groups
    } else {
        (0..total / j).map(|g| (g * j..(g + 1) * j).collect()).collect()
    }
}

/// Per-sensor reconstruction quality.
#[derive(Debug, Clone, Copy)]
pub struct SensorMetrics {
    pub mse: f64,
    pub support_f1: f64,
}

/// MSE and edge-support F1 of a report against the generating scenario.
pub fn metrics(truth: &GroupScenario, report: &ReconReport) -> Vec<SensorMetrics> {
    (0..truth.sensor_count())
        .map(|j| {
            let mse = report.per_sensor_mse[j];
            let true_edges = truth.total_edges(j);
            let est_edges = report.z_estimates.total(j);
            let support_f1 = f1_score(&true_edges, &est_edges);
            SensorMetrics { mse, support_f1 }
        })
        .collect()
}

/// Edge-support F1 at the detection threshold `0.1 · min nonzero |true|`.
fn f1_score(truth: &EdgeVector, estimate: &EdgeVector) -> f64 {
    let min_true = truth
        .values()
        .iter()
        .filter(|v| v.abs() > EDGE_EPS)
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);
    if !min_true.is_finite() {
        // No true edges: perfect score only for an empty estimate.
        let est_empty = estimate.values().iter().all(|v| v.abs() <= EDGE_EPS);
        return if est_empty { 1.0 } else { 0.0 };
    }
    let threshold = 0.1 * min_true;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (t, e) in truth.values().iter().zip(estimate.values()) {
        let t_on = t.abs() > EDGE_EPS;
        let e_on = e.abs() > threshold;
        match (t_on, e_on) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if 2 * tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// One result row: metrics averaged over all groups and sensors of a trial.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub method: ReconMethod,
    pub rho: f64,
    pub sigma_beta: f64,
    pub trial: usize,
    pub mean_mse: f64,
    pub mean_time_s: f64,
    pub support_f1: f64,
}

/// Aggregate over trials for one (method, rate, severity) setting.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub method: ReconMethod,
    pub rho: f64,
    pub sigma_beta: f64,
    pub mean_mse: f64,
    pub mean_time_s: f64,
    pub support_f1: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentResult {
    /// Expected row count: methods × rates × severities × trials.
    pub fn expected_rows(cfg: &GridConfig) -> usize {
        cfg.methods.len()
            * cfg.rate_sweep.len()
            * cfg.sigma_beta_sweep.len()
            * cfg.trials
    }
}

// Seed-derivation tags, one namespace per random stage.
const TAG_SCENARIO: u64 = 1;
const TAG_SENSING: u64 = 2;
const TAG_FILTERS: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_PILOT_NOISE: u64 = 5;

struct CellOutcome {
    /// Per method: (sum of mse, sum of f1, sensor count, solve seconds).
    per_method: Vec<(f64, f64, usize, f64)>,
}

fn method_lambda(sys: &crate::sensing::StackedSystem, rule: &LambdaRule) -> LambdaRule {
    // One shared λ per cell keeps method comparisons on the same footing:
    // the per-sensor rule is evaluated on the raw data and the largest
    // value is reused everywhere.
    match rule {
        LambdaRule::Fixed(v) => LambdaRule::Fixed(*v),
        LambdaRule::MaxCorrFraction(fraction) => {
            let shared = (0..sys.sensor_count())
                .map(|j| {
                    let block = sys.sensor_block(j);
                    let r_j = sys.received_block(j);
                    block
                        .apply_transpose(r_j.view())
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                })
                .fold(0.0f64, f64::max);
            LambdaRule::Fixed((fraction * shared).max(1e-12))
        }
    }
}

fn median3(mut xs: [f64; 3]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[1]
}

fn solve_timed<F>(measure_time: bool, run: F) -> Result<(ReconReport, f64)>
where
    F: Fn() -> Result<ReconReport>,
{
    if !measure_time {
        let rep = run()?;
        return Ok((rep, 0.0));
    }
    let t1 = run()?.wall_time;
    let t2 = run()?.wall_time;
    let rep = run()?;
    let t3 = rep.wall_time;
    Ok((rep, median3([t1, t2, t3])))
}

fn run_cell(
    cfg: &GridConfig,
    ops: &OperatorSet,
    trial: usize,
    gos: usize,
    rho_idx: usize,
    sigma_idx: usize,
) -> Result<CellOutcome> {
    let sensors = cfg.j_per_gos;
    let rho = cfg.rate_sweep[rho_idx];
    let sigma_beta = cfg.sigma_beta_sweep[sigma_idx];
    let w = ((rho * cfg.n as f64).round() as usize).clamp(1, cfg.n);

    let t = trial as u64;
    let g = gos as u64;
    let ri = rho_idx as u64;
    let si = sigma_idx as u64;

    // The scenario depends only on (trial, gos): every sweep cell of a
    // trial sees the same ground truth (paired design).
    let scenario = generate_group(
        ops,
        sensors,
        &cfg.group_params(),
        derive_seed(cfg.seed, &[TAG_SCENARIO, t, g]),
    )?;

    let phis: Vec<SensingMatrix> = (0..sensors)
        .map(|j| {
            draw_sensing_matrix(
                w,
                cfg.n,
                cfg.ensemble,
                derive_seed(cfg.seed, &[TAG_SENSING, t, g, ri, j as u64]),
            )
        })
        .collect::<Result<_>>()?;
    let y = measure(&scenario, &phis, ops)?;

    let filters = draw_filters(
        sensors,
        w,
        sigma_beta,
        derive_seed(cfg.seed, &[TAG_FILTERS, t, g, ri, si]),
    )?;
    let channel = ChannelRealization { filters: filters.clone(), noise_sigma: cfg.noise_sigma };
    let received = apply_channel(&y, &channel, derive_seed(cfg.seed, &[TAG_NOISE, t, g, ri, si]))?;
    let sys = assemble_stacked(&phis, ops, received)?;

    // Calibration phase: the FC extracts its common-edge estimate from the
    // full-rate PSDs gathered at scenario start.
    let z_common = match cfg.z_c_source {
        CommonSource::Truth => scenario.common().clone(),
        CommonSource::JointL1 => common_joint_l1_closed(scenario.psds(), ops).z_common,
        CommonSource::InnovationL1 => {
            common_innovation_l1_closed(scenario.psds(), ops).z_common
        }
    };

    let needs_filters = cfg
        .methods
        .iter()
        .any(|m| *m == ReconMethod::InnovationChannelAware);
    let filters_for_recon: Option<Vec<DestructiveFilter>> = if !needs_filters {
        None
    } else {
        Some(match cfg.filter_source {
            FilterSource::True => filters.clone(),
            FilterSource::Estimated => {
                // Pilot protocol: each sensor transmits its compressed view
                // of the common part; the FC knows what was sent.
                let pilots_sent: Vec<Array1<f64>> = (0..sensors)
                    .map(|j| sys.sensor_block(j).dot(z_common.values()))
                    .collect();
                let all_zero = pilots_sent.iter().all(|p| p.iter().all(|v| *v == 0.0));
                if all_zero {
                    // Unidentifiable pilots (empty common part): fall back
                    // to transparent links.
                    (0..sensors).map(|_| DestructiveFilter::impulse(w)).collect()
                } else {
                    let pilot_received = apply_channel(
                        &crate::sensing::MeasurementSet::new(pilots_sent.clone()),
                        &channel,
                        derive_seed(cfg.seed, &[TAG_PILOT_NOISE, t, g, ri, si]),
                    )?;
                    let pilots_received: Vec<Array1<f64>> = sys
                        .offsets()
                        .iter()
                        .map(|range| {
                            pilot_received.slice(ndarray::s![range.clone()]).to_owned()
                        })
                        .collect();
                    estimate_filters(&pilots_sent, &pilots_received)?
                }
            }
        })
    };

    let lambda = method_lambda(&sys, &cfg.solver.lambda_rule);
    let solve_cfg = cfg.solver.solve_config();
    let truth = scenario.psds();

    let mut per_method = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let (report, seconds) = match method {
            ReconMethod::Individual => {
                let received: Vec<Array1<f64>> =
                    (0..sensors).map(|j| sys.received_block(j)).collect();
                solve_timed(cfg.measure_time, || {
                    recon_individual(&received, &phis, ops, &lambda, &solve_cfg, truth)
                })?
            }
            ReconMethod::Jsm => solve_timed(cfg.measure_time, || {
                recon_jsm(&sys, ops, &lambda, &solve_cfg, truth)
            })?,
            ReconMethod::Innovation => solve_timed(cfg.measure_time, || {
                recon_innovation(&sys, &z_common, ops, &lambda, &solve_cfg, truth)
            })?,
            ReconMethod::InnovationChannelAware => {
                let filters = filters_for_recon
                    .as_ref()
                    .expect("filters prepared when the method is selected");
                solve_timed(cfg.measure_time, || {
                    recon_innovation_channel_aware(
                        &sys, &z_common, filters, ops, &lambda, &solve_cfg, truth,
                    )
                })?
            }
        };
        let sensor_metrics = metrics(&scenario, &report);
        let mse_sum: f64 = sensor_metrics.iter().map(|m| m.mse).sum();
        let f1_sum: f64 = sensor_metrics.iter().map(|m| m.support_f1).sum();
        per_method.push((mse_sum, f1_sum, sensor_metrics.len(), seconds));
    }
    Ok(CellOutcome { per_method })
}

/// Runs the full sweep. Deterministic for a fixed seed; all methods inside
/// one (trial, rate, severity) cell consume bit-identical data.
pub fn run_experiment(cfg: &GridConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let ops = build_operators(cfg.n, cfg.smoothing_len)?;
    let gos_count = cfg.gos_count();

    let sweeps = cfg.rate_sweep.len() * cfg.sigma_beta_sweep.len();
    let cells = cfg.trials * gos_count * sweeps;
    let outcomes = exec::map_indexed(cells, |flat| {
        let trial = flat / (gos_count * sweeps);
        let rest = flat % (gos_count * sweeps);
        let gos = rest / sweeps;
        let sweep = rest % sweeps;
        let rho_idx = sweep / cfg.sigma_beta_sweep.len();
        let sigma_idx = sweep % cfg.sigma_beta_sweep.len();
        run_cell(cfg, &ops, trial, gos, rho_idx, sigma_idx).map_err(|e| match e {
            Error::GenerationInfeasible { tries } => {
                Error::GenerationInfeasibleAt { gos, trial, tries }
            }
            other => other,
        })
    });
    let outcomes: Vec<CellOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    // Reduce in deterministic (trial, gos, sweep) order.
    let mut rows = Vec::with_capacity(ExperimentResult::expected_rows(cfg));
    for trial in 0..cfg.trials {
        for (rho_idx, &rho) in cfg.rate_sweep.iter().enumerate() {
            for (sigma_idx, &sigma_beta) in cfg.sigma_beta_sweep.iter().enumerate() {
                let sweep = rho_idx * cfg.sigma_beta_sweep.len() + sigma_idx;
                let mut mse_sum = vec![0.0; cfg.methods.len()];
                let mut f1_sum = vec![0.0; cfg.methods.len()];
                let mut count = vec![0usize; cfg.methods.len()];
                let mut time_sum = vec![0.0; cfg.methods.len()];
                for gos in 0..gos_count {
                    let flat = trial * gos_count * sweeps + gos * sweeps + sweep;
                    let outcome = &outcomes[flat];
                    for (k, (mse, f1, sensors, secs)) in
                        outcome.per_method.iter().enumerate()
                    {
                        mse_sum[k] += mse;
                        f1_sum[k] += f1;
                        count[k] += sensors;
                        time_sum[k] += secs;
                    }
                }
                for (k, method) in cfg.methods.iter().enumerate() {
                    rows.push(ResultRow {
                        method: *method,
                        rho,
                        sigma_beta,
                        trial,
                        mean_mse: mse_sum[k] / count[k] as f64,
                        mean_time_s: time_sum[k] / gos_count as f64,
                        support_f1: f1_sum[k] / count[k] as f64,
                    });
                }
            }
        }
    }

    let aggregates = aggregate(cfg, &rows);
    Ok(ExperimentResult { rows, aggregates })
}

fn aggregate(cfg: &GridConfig, rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for method in &cfg.methods {
        for &rho in &cfg.rate_sweep {
            for &sigma_beta in &cfg.sigma_beta_sweep {
                let cell: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| {
                        r.method == *method && r.rho == rho && r.sigma_beta == sigma_beta
                    })
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let k = cell.len() as f64;
                out.push(AggregateRow {
                    method: *method,
                    rho,
                    sigma_beta,
                    mean_mse: cell.iter().map(|r| r.mean_mse).sum::<f64>() / k,
                    mean_time_s: cell.iter().map(|r| r.mean_time_s).sum::<f64>() / k,
                    support_f1: cell.iter().map(|r| r.support_f1).sum::<f64>() / k,
                });
            }
        }
    }
    out
}

fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes the rows as CSV: fixed header, rows sorted by
/// (method, rho, sigma_beta, trial), floats at 9 significant digits.
pub fn write_csv<W: Write>(result: &ExperimentResult, out: &mut W) -> Result<()> {
    writeln!(out, "method,rho,sigma_beta,trial,mean_mse,mean_time_s,support_f1")?;
    let mut rows: Vec<&ResultRow> = result.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.method
            .name()
            .cmp(b.method.name())
            .then(a.rho.total_cmp(&b.rho))
            .then(a.sigma_beta.total_cmp(&b.sigma_beta))
            .then(a.trial.cmp(&b.trial))
    });
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method.name(),
            fmt9(r.rho),
            fmt9(r.sigma_beta),
            r.trial,
            fmt9(r.mean_mse),
            fmt9(r.mean_time_s),
            fmt9(r.support_f1)
        )?;
    }
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}
