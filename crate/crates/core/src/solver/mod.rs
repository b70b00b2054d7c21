//! Convex solvers behind the reconstruction methods: BPDN, equality-
//! constrained weighted ℓ₁, and circulant least squares.

mod bpdn;
mod circulant_ls;
mod equality_l1;
mod linop;

pub use bpdn::{solve_bpdn, BpdnProblem, LambdaRule, SolveConfig, SolverReport};
pub use circulant_ls::{solve_circulant_ls, CirculantLsReport, PILOT_POWER_FLOOR};
pub use equality_l1::{solve_equality_l1, EqualityConfig, EqualityL1Problem};
pub use linop::{operator_norm_sq, LinearOperator};

