//! Equality-constrained weighted ℓ₁ minimization.
//!
//! Solves `min Σᵢ wᵢ |xᵢ|  subject to  A x = b` by the method of
//! multipliers: each outer step minimizes the augmented Lagrangian
//! `Σ w|x| + (ρ/2)‖Ax − b + u‖²` with the weighted proximal-gradient
//! routine, the scaled dual `u` accumulates the residual, and ρ ramps up
//! whenever feasibility stalls. Zero-weight coordinates are legal and
//! simply unpenalized.

use crate::error::{Error, Result};
use crate::solver::bpdn::{fista_weighted, SolveConfig, SolverReport};
use crate::solver::linop::LinearOperator;
use ndarray::Array1;
use std::time::Instant;

pub struct EqualityL1Problem<'a> {
    pub op: &'a dyn LinearOperator,
    pub rhs: &'a Array1<f64>,
    pub weights: Array1<f64>,
}

impl<'a> EqualityL1Problem<'a> {
    pub fn new(
        op: &'a dyn LinearOperator,
        rhs: &'a Array1<f64>,
        weights: Array1<f64>,
    ) -> Result<Self> {
        if op.rows() != rhs.len() || op.cols() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, rhs has {} entries, weights {}",
                op.rows(),
                op.cols(),
                rhs.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidParameter(
                "at least one weight must be strictly positive".into(),
            ));
        }
        Ok(Self { op, rhs, weights })
    }
}

#[derive(Debug, Clone)]
pub struct EqualityConfig {
    /// Relative feasibility target: `‖Ax − b‖ ≤ feas_tol · max(1, ‖b‖)`.
    pub feas_tol: f64,
    /// Relative objective stability between outer iterations at exit.
    pub obj_tol: f64,
    pub max_outer: usize,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    pub penalty_cap: f64,
    pub inner: SolveConfig,
}

impl Default for EqualityConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            obj_tol: 1e-4,
            max_outer: 60,
            penalty_start: 1.0,
            penalty_growth: 5.0,
            penalty_cap: 1e12,
            inner: SolveConfig { tol: 1e-11, max_iter: 3000, power_iters: 20 },
        }
    }
}

pub fn solve_equality_l1(
    problem: &EqualityL1Problem<'_>,
    cfg: &EqualityConfig,
) -> Result<SolverReport> {
    let start = Instant::now();
    let op = problem.op;
    let b = problem.rhs;
    let b_scale = b.dot(b).sqrt().max(1.0);
    let feas_target = cfg.feas_tol * b_scale;

    let mut x = Array1::zeros(op.cols());
    let mut dual = Array1::<f64>::zeros(op.rows());
    let mut rho = cfg.penalty_start;
    let mut prev_residual = f64::INFINITY;
    let mut prev_objective = f64::INFINITY;
    let mut total_inner = 0usize;
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_outer {
        let target = b - &dual;
        let thresholds = &problem.weights / rho;
        let inner = fista_weighted(op, &target, &thresholds, Some(x), &cfg.inner);
        x = inner.solution;
        total_inner += inner.iterations;

        let residual_vec = op.residual(x.view(), b.view());
        let residual = residual_vec.dot(&residual_vec).sqrt();
        let objective: f64 = problem
            .weights
            .iter()
            .zip(x.iter())
            .map(|(w, v)| w * v.abs())
            .sum();
        trace.push(objective);

        dual += &residual_vec;

        let objective_stable =
            (objective - prev_objective).abs() <= 0.1 * cfg.obj_tol * (1.0 + objective.abs());
        if residual <= feas_target && objective_stable {
            converged = true;
            break;
        }

        // Penalty ramp when feasibility is not improving fast enough; the
        // scaled dual must shrink with it.
        if residual > 0.25 * prev_residual && rho < cfg.penalty_cap {
            let next = (rho * cfg.penalty_growth).min(cfg.penalty_cap);
            dual *= rho / next;
            rho = next;
        }
        prev_residual = residual;
        prev_objective = objective;
    }

    let residual_vec = op.residual(x.view(), b.view());
    let residual_norm = residual_vec.dot(&residual_vec).sqrt();
    if residual_norm > feas_target {
        return Err(Error::Infeasible { residual: residual_norm, tolerance: feas_target });
    }
    let final_objective: f64 = problem
        .weights
        .iter()
        .zip(x.iter())
        .map(|(w, v)| w * v.abs())
        .sum();

    Ok(SolverReport {
        solution: x,
        iterations: total_inner,
        final_objective,
        residual_norm,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array2};

    fn identity(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_constraint_has_unique_feasible_point() {
        let eye = identity(5);
        let rhs = arr1(&[1.0, -2.0, 0.0, 0.5, 3.0]);
        let weights = Array1::from_elem(5, 1.0);
        let p = EqualityL1Problem::new(&eye, &rhs, weights).unwrap();
        let rep = solve_equality_l1(&p, &EqualityConfig::default()).unwrap();
        for (x, r) in rep.solution.iter().zip(rhs.iter()) {
            assert!((x - r).abs() < 1e-6, "{x} vs {r}");
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let eye = identity(4);
        let rhs = Array1::zeros(4);
        let weights = Array1::from_elem(4, 1.0);
        let p = EqualityL1Problem::new(&eye, &rhs, weights).unwrap();
        let rep = solve_equality_l1(&p, &EqualityConfig::default()).unwrap();
        assert!(rep.solution.iter().all(|v| v.abs() < 1e-9));
        assert!(rep.final_objective < 1e-9);
    }

    #[test]
    fn unpenalized_block_absorbs_everything() {
        // min |x2| s.t. x1 + x2 = 3  → x = (3, 0).
        let a = Array2::from_shape_vec((1, 2), vec![1.0, 1.0]).unwrap();
        let rhs = arr1(&[3.0]);
        let weights = arr1(&[0.0, 1.0]);
        let p = EqualityL1Problem::new(&a, &rhs, weights).unwrap();
        let rep = solve_equality_l1(&p, &EqualityConfig::default()).unwrap();
        assert!((rep.solution[0] - 3.0).abs() < 1e-5, "{:?}", rep.solution);
        assert!(rep.solution[1].abs() < 1e-5);
    }

    #[test]
    fn infeasible_system_is_reported() {
        // x = 0 and x = 1 cannot both hold.
        let a = Array2::from_shape_vec((2, 1), vec![1.0, 1.0]).unwrap();
        let rhs = arr1(&[0.0, 1.0]);
        let weights = arr1(&[1.0]);
        let p = EqualityL1Problem::new(&a, &rhs, weights).unwrap();
        match solve_equality_l1(&p, &EqualityConfig::default()) {
            Err(Error::Infeasible { residual, .. }) => {
                assert!(residual > 0.1, "residual floor should be visible: {residual}");
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn weight_validation() {
        let eye = identity(3);
        let rhs = arr1(&[1.0, 1.0, 1.0]);
        assert!(EqualityL1Problem::new(&eye, &rhs, arr1(&[0.0, 0.0, 0.0])).is_err());
        assert!(EqualityL1Problem::new(&eye, &rhs, arr1(&[1.0, -0.1, 0.0])).is_err());
        assert!(EqualityL1Problem::new(&eye, &rhs, arr1(&[1.0, 0.0])).is_err());
    }
}
