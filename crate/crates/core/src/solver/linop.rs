//! Matrix-free linear operator interface used by the solver inner loops.

use ndarray::{Array1, Array2, ArrayView1};

/// A real linear map with its adjoint. Implementations must be pure so
/// solves on independent problems can run concurrently.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;
    fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64>;

    /// Residual `A x - b`.
    fn residual(&self, x: ArrayView1<'_, f64>, rhs: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut r = self.apply(x);
        r -= &rhs;
        r
    }
}

impl LinearOperator for Array2<f64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.dot(&x)
    }

    fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        self.t().dot(&y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }

    fn cols(&self) -> usize {
        (**self).cols()
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        (**self).apply(x)
    }

    fn apply_transpose(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        (**self).apply_transpose(y)
    }
}

/// Largest squared singular value of `op`, estimated by power iteration on
/// `AᵀA` from a fixed pseudo-random start (solvers stay deterministic).
pub fn operator_norm_sq(op: &(impl LinearOperator + ?Sized), iters: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    let d = op.cols();
    if d == 0 {
        return 0.0;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED_D00D);
    let mut v: Array1<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let w = op.apply(v.view());
        let z = op.apply_transpose(w.view());
        estimate = z.dot(&z).sqrt();
        if estimate <= f64::MIN_POSITIVE {
            return 0.0;
        }
        v = z / estimate;
    }
    estimate
}
