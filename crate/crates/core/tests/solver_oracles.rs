//! Solver correctness against independent oracles: analytic proximal maps,
//! exhaustive search, scalar medians, grid scans, and forward/backward
//! composition.

use ndarray::{arr1, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specsense::solver::{
    solve_bpdn, solve_circulant_ls, solve_equality_l1, BpdnProblem, EqualityConfig,
    EqualityL1Problem, SolveConfig,
};

fn identity(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 })
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[test]
fn bpdn_identity_matches_analytic_prox_on_200_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let eye = identity(16);
    for _ in 0..200 {
        let v: Array1<f64> = (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lambda = rng.gen_range(0.005..2.0);
        let rep = solve_bpdn(
            &BpdnProblem { op: &eye, rhs: &v, lambda },
            &SolveConfig::default(),
        );
        for (x, want) in rep.solution.iter().zip(v.iter().map(|u| soft(*u, lambda))) {
            assert!((x - want).abs() < 1e-8, "{x} vs {want}");
        }
    }
}

/// Exhaustive oracle: best single-column least-squares fit over all d
/// candidates.
fn best_single_support(a: &Array2<f64>, y: &Array1<f64>) -> (usize, f64) {
    let d = a.ncols();
    let mut best = (0usize, 0.0f64, f64::INFINITY);
    for i in 0..d {
        let col = a.column(i);
        let den = col.dot(&col);
        let coef = col.dot(y) / den;
        let resid: f64 = y
            .iter()
            .zip(col.iter())
            .map(|(yi, ci)| {
                let r = yi - coef * ci;
                r * r
            })
            .sum();
        if resid < best.2 {
            best = (i, coef, resid);
        }
    }
    (best.0, best.1)
}

#[test]
fn bpdn_one_sparse_recovery_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(515);
    let d = 32;
    let w = d / 2;
    for trial in 0..20 {
        let a = Array2::from_shape_fn((w, d), |_| {
            specsense::rng::gaussian(&mut rng) / (w as f64).sqrt()
        });
        let support = rng.gen_range(0..d);
        let coef: f64 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut z = Array1::zeros(d);
        z[support] = coef;
        let y = a.dot(&z);

        let corr = a.t().dot(&y);
        let lambda = 1e-4 * corr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rep = solve_bpdn(
            &BpdnProblem { op: &a, rhs: &y, lambda },
            &SolveConfig { tol: 1e-13, ..Default::default() },
        );

        let (oracle_support, oracle_coef) = best_single_support(&a, &y);
        assert_eq!(oracle_support, support, "oracle sanity, trial {trial}");
        assert!((oracle_coef - coef).abs() < 1e-10);

        let est_support = rep
            .solution
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert_eq!(est_support, support, "trial {trial}");
        let err: f64 = rep
            .solution
            .iter()
            .zip(z.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err / coef.abs() < 1e-3, "trial {trial}: rel err {}", err / coef.abs());
    }
}

/// Scalar oracle for the per-bin objective: scan a grid plus the
/// breakpoints (the objective is piecewise linear, so some breakpoint is
/// optimal and the scan is exact there).
fn scan_min(edges: &[f64], include_self: bool) -> f64 {
    let lo = edges.iter().copied().fold(0.0f64, f64::min) - 1.0;
    let hi = edges.iter().copied().fold(0.0f64, f64::max) + 1.0;
    let mut candidates: Vec<f64> = (0..=4000)
        .map(|k| lo + (hi - lo) * k as f64 / 4000.0)
        .collect();
    candidates.push(0.0);
    candidates.extend_from_slice(edges);
    candidates
        .iter()
        .map(|&c| {
            let mut f: f64 = edges.iter().map(|e| (e - c).abs()).sum();
            if include_self {
                f += c.abs();
            }
            f
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn equality_l1_reaches_the_per_bin_median_objective() {
    // Innovations-only program with J = 3 sensors over N = 4 bins; the
    // optimum is the sum of per-bin medians' objectives.
    let n = 4;
    let sensors = 3;
    let ops = specsense::build_operators(8, 1).unwrap();
    let _ = ops; // operators are not needed; the stack is built by hand.

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for trial in 0..10 {
        // Random per-sensor edges and their PSDs (cumulative sums).
        let edges: Vec<Array1<f64>> = (0..sensors)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        let cumsum = Array2::from_shape_fn((n, n), |(i, j)| if j <= i { 1.0 } else { 0.0 });
        let mut stack = Array2::zeros((n * sensors, n * (sensors + 1)));
        let mut rhs = Array1::zeros(n * sensors);
        for j in 0..sensors {
            for r in 0..n {
                for c in 0..n {
                    stack[[j * n + r, c]] = cumsum[[r, c]];
                    stack[[j * n + r, (j + 1) * n + c]] = cumsum[[r, c]];
                }
            }
            let s_j = {
                let mut acc = 0.0;
                edges[j].map(|v| {
                    acc += v;
                    acc
                })
            };
            for r in 0..n {
                rhs[j * n + r] = s_j[r];
            }
        }
        let mut weights = Array1::from_elem(n * (sensors + 1), 1.0);
        for i in 0..n {
            weights[i] = 0.0;
        }
        let p = EqualityL1Problem::new(&stack, &rhs, weights).unwrap();
        let cfg = EqualityConfig {
            feas_tol: 1e-10,
            obj_tol: 1e-7,
            max_outer: 100,
            ..Default::default()
        };
        let rep = solve_equality_l1(&p, &cfg).unwrap();

        let oracle: f64 = (0..n)
            .map(|i| {
                let bin: Vec<f64> = edges.iter().map(|e| e[i]).collect();
                scan_min(&bin, false)
            })
            .sum();
        assert!(
            (rep.final_objective - oracle).abs() < 1e-6 * (1.0 + oracle),
            "trial {trial}: solver {} vs oracle {oracle}",
            rep.final_objective
        );
    }
}

#[test]
fn equality_l1_joint_program_matches_two_bin_grid_search() {
    // Joint program, J = 2 sensors, N = 2 bins. Eliminating the
    // innovations leaves f(z_c) = ‖z_c‖₁ + Σ_j ‖e_j − z_c‖₁, scanned on a
    // 2-D grid.
    let n = 2;
    let sensors = 2;
    let cumsum = arr1(&[1.0f64, 1.0]); // cumulative sums done by hand below
    let _ = cumsum;
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for trial in 0..5 {
        let edges: Vec<[f64; 2]> = (0..sensors)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let mut stack = Array2::zeros((n * sensors, n * (sensors + 1)));
        let mut rhs = Array1::zeros(n * sensors);
        for j in 0..sensors {
            for r in 0..n {
                for c in 0..=r {
                    stack[[j * n + r, c]] = 1.0;
                    stack[[j * n + r, (j + 1) * n + c]] = 1.0;
                }
            }
            rhs[j * n] = edges[j][0];
            rhs[j * n + 1] = edges[j][0] + edges[j][1];
        }
        let weights = Array1::from_elem(n * (sensors + 1), 1.0);
        let p = EqualityL1Problem::new(&stack, &rhs, weights).unwrap();
        let cfg = EqualityConfig {
            feas_tol: 1e-10,
            obj_tol: 1e-7,
            max_outer: 100,
            ..Default::default()
        };
        let rep = solve_equality_l1(&p, &cfg).unwrap();

        // 2-D brute force over z_c: a coarse grid plus the breakpoints on
        // each axis (the objective is piecewise linear per coordinate).
        let mut axis0: Vec<f64> = (0..=400).map(|k| -2.0 + 4.0 * k as f64 / 400.0).collect();
        let mut axis1 = axis0.clone();
        axis0.push(0.0);
        axis1.push(0.0);
        for e in &edges {
            axis0.push(e[0]);
            axis1.push(e[1]);
        }
        let mut oracle = f64::INFINITY;
        for &c0 in &axis0 {
            for &c1 in &axis1 {
                let mut f = c0.abs() + c1.abs();
                for e in &edges {
                    f += (e[0] - c0).abs() + (e[1] - c1).abs();
                }
                oracle = oracle.min(f);
            }
        }
        assert!(
            (rep.final_objective - oracle).abs() < 1e-4 * (1.0 + oracle),
            "trial {trial}: solver {} vs grid {oracle}",
            rep.final_objective
        );
    }
}

#[test]
fn circulant_ls_composed_with_convolution_is_identity_on_filters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3131);
    for trial in 0..30 {
        let w = rng.gen_range(2..40);
        // Pilots with spectra bounded away from zero.
        let pilot: Array1<f64> = loop {
            let p: Array1<f64> = (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let energy = p.dot(&p).sqrt();
            if energy < 1e-3 {
                continue;
            }
            // Spectrum check through the solver's own error behavior is not
            // allowed here; use a direct DFT magnitude bound.
            let spec_min = dft_min_magnitude(&p);
            if spec_min > 1e-6 {
                break p;
            }
        };
        let truth: Array1<f64> = (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let received = convolve_dense(&pilot, &truth);
        let rep = solve_circulant_ls(&pilot, &received).unwrap();
        for (a, b) in rep.filter.iter().zip(truth.iter()) {
            assert!((a - b).abs() < 1e-6, "trial {trial} w={w}");
        }
        assert!(rep.residual_norm < 1e-8);
    }
}

fn dft_min_magnitude(x: &Array1<f64>) -> f64 {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (t, v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn convolve_dense(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.len();
    Array1::from_shape_fn(n, |i| (0..n).map(|j| a[(i + n - j) % n] * b[j]).sum())
}
