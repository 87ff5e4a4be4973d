mod common;

use common::{dense_operator, max_abs_diff, rng, uniform_vec, Dense, Sampler};
use rand::Rng;
use smlm_core::cel0::{
    cel0_term, objective, solve_cel0, solve_weighted_l1_nonneg, weighted_l1_fista, Cel0Params,
    Objective, SolverConfig,
};
use smlm_core::{ForwardOperator, Image, ImageGrid, PsfModel};

const PIXEL: f64 = 25.0;

fn identity(n: usize) -> ForwardOperator {
    let grid = ImageGrid::square(n, PIXEL).unwrap();
    let psf = PsfModel::with_default_radius(1e-3, PIXEL).unwrap();
    ForwardOperator::new(grid, 1, psf).unwrap()
}

fn blur(n: usize, l: usize, sigma_nm: f64) -> (ForwardOperator, Dense) {
    let grid = ImageGrid::square(n, PIXEL).unwrap();
    let psf = PsfModel::with_default_radius(sigma_nm, PIXEL).unwrap();
    let op = ForwardOperator::new(grid, l, psf).unwrap();
    let dense = dense_operator(n, n, l, sigma_nm / PIXEL, op.psf().radius, Sampler::TopLeft);
    (op, dense)
}

fn tight(inner: usize) -> SolverConfig {
    SolverConfig {
        inner_iters: inner,
        inner_tol: 1e-16,
        ..Default::default()
    }
}

/// Largest violation of the optimality conditions of
/// `min 1/2 ||Ax - y||^2 + w.x, x >= 0`, using the dense matrix.
fn kkt_residual(a: &Dense, x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let ax = a.mul(x);
    let r: Vec<f64> = ax.iter().zip(y).map(|(p, q)| p - q).collect();
    let g = a.mul_t(&r);
    x.iter()
        .zip(g.iter().zip(w))
        .map(|(&xi, (&gi, &wi))| {
            let d = gi + wi;
            if xi > 0.0 {
                d.abs()
            } else {
                (-d).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn identity_operator_reproduces_soft_threshold() {
    let op = identity(8);
    let cfg = tight(500);
    let mut r = rng(21);
    for _ in 0..100 {
        let y = uniform_vec(&mut r, 64, -1.0, 2.0);
        let w = uniform_vec(&mut r, 64, 0.0, 1.0);
        let x = solve_weighted_l1_nonneg(
            &Image::from_vec(*op.lr_grid(), y.clone()).unwrap(),
            &op,
            &w,
            &cfg,
        )
        .unwrap();
        let expected: Vec<f64> = y.iter().zip(&w).map(|(a, b)| (a - b).max(0.0)).collect();
        assert!(max_abs_diff(x.values(), &expected) < 1e-6);
    }
}

#[test]
fn unweighted_problem_fits_consistent_data() {
    let mut r = rng(22);
    for (l, sigma) in [(1usize, 20.0), (2, 30.0), (4, 40.0)] {
        let (op, dense) = blur(8, l, sigma);
        for _ in 0..5 {
            let truth = uniform_vec(&mut r, 64, 0.0, 1.0);
            let y = dense.mul(&truth);
            let w = vec![0.0; 64];
            let x = solve_weighted_l1_nonneg(
                &Image::from_vec(*op.lr_grid(), y.clone()).unwrap(),
                &op,
                &w,
                &tight(200_000),
            )
            .unwrap();
            let res: f64 = dense
                .mul(x.values())
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-6, "L={l}: residual {res}");
            assert!(x.values().iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn weighted_problem_satisfies_kkt() {
    let mut r = rng(23);
    for (n, l, sigma) in [(8usize, 2usize, 30.0), (16, 4, 60.0), (16, 2, 40.0)] {
        let (op, dense) = blur(n, l, sigma);
        for _ in 0..5 {
            let truth: Vec<f64> = (0..n * n)
                .map(|_| {
                    if r.random_bool(0.1) {
                        r.random_range(0.5..2.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut y = dense.mul(&truth);
            y.iter_mut().for_each(|v| *v += r.random_range(-0.01..0.01));
            let w = uniform_vec(&mut r, n * n, 0.0, 0.02);
            let lip = op.lipschitz().unwrap();
            let x0 = vec![0.0; n * n];
            let rep = weighted_l1_fista(&op, &y, &w, x0, lip, 100_000, 1e-16).unwrap();
            let kkt = kkt_residual(&dense, &rep.x, &y, &w);
            assert!(kkt < 1e-4, "n={n} L={l}: KKT residual {kkt}");
            // reported objective agrees with the dense evaluation
            let ax = dense.mul(&rep.x);
            let f = 0.5 * ax.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                + rep.x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            assert!((f - rep.objective).abs() <= 1e-10 * f.abs().max(1.0));
        }
    }
}

#[test]
fn inner_solver_never_increases_the_objective() {
    let (op, dense) = blur(16, 4, 109.65);
    let mut r = rng(24);
    let y = uniform_vec(&mut r, 16, 0.0, 1.0);
    let w = uniform_vec(&mut r, 256, 0.0, 0.05);
    let value = |x: &[f64]| {
        let ax = dense.mul(x);
        0.5 * ax.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
    };
    let lip = op.lipschitz().unwrap();
    let x0 = uniform_vec(&mut r, 256, 0.0, 1.0);
    let mut prev = value(&x0);
    for iters in [1usize, 2, 5, 10, 50, 200] {
        let rep = weighted_l1_fista(&op, &y, &w, x0.clone(), lip, iters, 1e-16).unwrap();
        let v = value(&rep.x);
        assert!(v <= value(&x0) * (1.0 + 1e-12));
        assert!(v <= prev * (1.0 + 1e-9), "{iters}: {v} > {prev}");
        prev = v;
    }
}

/// Objective of the nonconvex problem evaluated from scratch.
fn dense_objective(dense: &Dense, x: &[f64], y: &[f64], norms: &[f64], lambda: f64) -> f64 {
    let ax = dense.mul(x);
    0.5 * ax.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        + x.iter()
            .zip(norms)
            .map(|(&v, &n)| cel0_term(v, n, lambda))
            .sum::<f64>()
}

#[test]
fn irl1_trace_is_monotone_on_random_runs() {
    let mut r = rng(25);
    for run in 0..20 {
        let n = if run % 2 == 0 { 16 } else { 24 };
        let sigma = r.random_range(40.0..120.0);
        let (op, dense) = blur(n, 4, sigma);
        let truth: Vec<f64> = (0..n * n)
            .map(|_| {
                if r.random_bool(0.03) {
                    r.random_range(0.5..1.5)
                } else {
                    0.0
                }
            })
            .collect();
        let mut y = dense.mul(&truth);
        y.iter_mut().for_each(|v| *v += r.random_range(-0.02..0.02));
        let lambda = 10f64.powf(r.random_range(-4.0..-1.0));
        let params = Cel0Params::new(lambda).unwrap();
        let cfg = SolverConfig {
            outer_iters: 15,
            inner_iters: 100,
            ..Default::default()
        };
        let yi = Image::from_vec(*op.lr_grid(), y.clone()).unwrap();
        let rep = solve_cel0(&yi, &op, &params, &cfg, None).unwrap();
        for k in 1..rep.objective_trace.len() {
            let (a, b) = (rep.objective_trace[k - 1], rep.objective_trace[k]);
            assert!(b <= a + 1e-8 * a.abs(), "run {run} step {k}: {a} -> {b}");
        }
        assert!(rep.solution.values().iter().all(|v| *v >= 0.0));
        let x = rep.solution.values();
        // The last trace entry is the objective before support cleanup; the
        // cleanup only removes entries below 1e-12 of the peak.
        let fresh = dense_objective(&dense, x, &y, op.column_norms(), lambda);
        let last = *rep.objective_trace.last().unwrap();
        assert!(
            (fresh - last).abs() <= 1e-6 * last.abs().max(1e-12),
            "run {run}: {fresh} vs {last}"
        );
        match objective(&rep.solution, &yi, &op, &params).unwrap() {
            Objective::Value(v) => assert!((v - fresh).abs() <= 1e-9 * fresh.abs().max(1e-12)),
            Objective::Infeasible => panic!("solution reported infeasible"),
        }
    }
}

#[test]
fn zero_data_gives_zero_after_one_outer_iteration() {
    let (op, _) = blur(16, 4, 109.65);
    let y = Image::zeros(*op.lr_grid());
    let rep = solve_cel0(
        &y,
        &op,
        &Cel0Params::new(0.01).unwrap(),
        &SolverConfig::default(),
        None,
    )
    .unwrap();
    assert!(rep.solution.values().iter().all(|v| *v == 0.0));
    assert_eq!(rep.outer_iterations_used, 1);
    assert!(rep.converged);
    assert_eq!(rep.objective_trace, vec![0.0, 0.0]);
}

#[test]
fn objective_flags_negative_entries() {
    let (op, _) = blur(8, 4, 50.0);
    let mut x = Image::zeros(*op.hr_grid());
    x.set(0, 0, -1.0);
    let y = Image::zeros(*op.lr_grid());
    assert_eq!(
        objective(&x, &y, &op, &Cel0Params::new(0.1).unwrap()).unwrap(),
        Objective::Infeasible
    );
}

#[test]
fn warm_start_is_honoured() {
    let (op, dense) = blur(16, 4, 80.0);
    let mut truth = vec![0.0; 256];
    truth[5 * 16 + 6] = 1.0;
    let y = Image::from_vec(*op.lr_grid(), dense.mul(&truth)).unwrap();
    let x0 = Image::from_vec(*op.hr_grid(), truth.clone()).unwrap();
    let params = Cel0Params::new(1e-4).unwrap();
    let rep = solve_cel0(&y, &op, &params, &SolverConfig::default(), Some(&x0)).unwrap();
    // starting at the exact sparse truth, the objective can only stay put
    assert!(rep.objective_trace[0] <= 1e-4 + 1e-15);
    assert!(*rep.objective_trace.last().unwrap() <= rep.objective_trace[0] * (1.0 + 1e-8));
}
