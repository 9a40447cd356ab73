use mftg_core::brownian::sample_brownian;
use mftg_core::ensemble::Crowd;
use mftg_core::grid::TimeGrid;
use mftg_core::lq::{arctan_speed, keep_together_deterministic_oracle};
use mftg_core::lsmc::{backward_lsmc, BasisFamily, PicardConfig, RegressionBasis, RegressionInputs};
use mftg_core::scenarios::{builtin, builtin_text, parse_with_overrides};
use mftg_core::solve::{solve_on, SolverChoice};

fn poly(degree: usize) -> RegressionBasis {
    RegressionBasis { family: BasisFamily::Polynomial, degree, inputs: vec![], per_coordinate: false }
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn norm(a: &[f64]) -> f64 {
    (a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn decoupled_noise_free_run_needs_two_updates() {
    // Nothing couples the paths and the desired velocity is the only input, so
    // the best response does not depend on the current control. The first
    // update lands on the fixed point, the second sees only the state change it
    // caused, and the third sweep confirms convergence without updating.
    let spec = parse_with_overrides(
        builtin_text("dv_set4").unwrap(),
        &["tagged.noise=0".into(), "solver.picard.damping=1".into()],
    )
    .unwrap();
    let grid = TimeGrid::new(spec.horizon, 40).unwrap();
    let sol = solve_on(&spec, &grid, 64, 3, SolverChoice::Lsmc).unwrap();
    let d = &sol.diagnostics;
    assert!(d.converged);
    let updates = d.iterations - 1;
    assert!(updates <= 2, "{:?}", d.residuals);

    let lq = solve_on(&spec, &grid, 64, 3, SolverChoice::Lq).unwrap();
    assert!(rms(sol.ensemble.uy.as_slice(), lq.ensemble.uy.as_slice()) < 1e-9);
    // The backward Euler sum of the closed-form controls reproduces the states.
    let (m, dt) = (grid.steps(), grid.dt());
    let mut y = lq.ensemble.y.clone();
    for k in (0..m).rev() {
        for i in 0..y.row(k).len() {
            let v = y.row(k + 1)[i] - lq.ensemble.uy.row(k)[i] * dt;
            y.row_mut(k)[i] = v;
        }
    }
    assert!(rms(sol.ensemble.y.as_slice(), y.as_slice()) < 1e-9);
    // The continuous-time states differ by the quadrature error only.
    assert!(rms(sol.ensemble.y.as_slice(), lq.ensemble.y.as_slice()) < 0.05);
}

#[test]
fn deterministic_keep_together_matches_the_calculus_of_variations_optimum() {
    let spec = parse_with_overrides(
        builtin_text("kt_set2").unwrap(),
        &["tagged.noise=0".into(), "tagged.initial.std=0".into(), "tagged.terminal.std=0".into()],
    )
    .unwrap();
    let grid = TimeGrid::new(spec.horizon, 50).unwrap();
    let sol = solve_on(&spec, &grid, 200, 5, SolverChoice::Lsmc).unwrap();
    assert!(sol.diagnostics.converged);
    let opt = keep_together_deterministic_oracle(50.0, 10.0, &[0.1, 0.1], &[2.0, 2.0], 1.0).unwrap();
    for y in sol.ensemble.y.row(0).chunks(2) {
        for (a, b) in y.iter().zip(&opt.initial) {
            assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
        }
    }
}

#[test]
fn keep_together_without_attraction_agrees_with_closed_form() {
    let mut spec = builtin("kt_set2").unwrap();
    spec.solver.picard = PicardConfig { tol: 1e-7, ..spec.solver.picard.clone() };
    let grid = TimeGrid::new(spec.horizon, 50).unwrap();
    let lsmc = solve_on(&spec, &grid, 2000, 11, SolverChoice::Lsmc).unwrap();
    let lq = solve_on(&spec, &grid, 2000, 11, SolverChoice::Lq).unwrap();
    assert!(lsmc.diagnostics.converged);
    let (a, b) = (&lsmc.ensemble, &lq.ensemble);
    let du = rms(a.uy.as_slice(), b.uy.as_slice()) / norm(b.uy.as_slice());
    let dy = rms(a.y.as_slice(), b.y.as_slice()) / norm(b.y.as_slice());
    assert!(du < 0.05, "control {du}");
    assert!(dy < 0.05, "state {dy}");
}

#[test]
fn boundaries_hold_exactly_after_a_coupled_solve() {
    let spec = parse_with_overrides(builtin_text("twist").unwrap(), &["solver.picard.max_iters=5".into()]).unwrap();
    let grid = TimeGrid::new(spec.horizon, 20).unwrap();
    let sol = solve_on(&spec, &grid, 300, 2, SolverChoice::Lsmc).unwrap();
    // Five iterations are not enough; the result is still well formed.
    assert!(!sol.diagnostics.converged);
    assert_eq!(sol.diagnostics.residuals.len(), 5);
    sol.check_boundaries().unwrap();
    let e = &sol.ensemble;
    assert_eq!(e.y.row(20), &sol.y_terminal[..]);
    assert_eq!(e.x.as_ref().unwrap().row(0), &sol.x_initial[..]);
    assert!(e.mean_path(Crowd::Ordinary).is_some());
}

#[test]
fn converged_flag_matches_the_last_residual() {
    let spec = builtin("dv_set1").unwrap();
    let grid = TimeGrid::new(spec.horizon, 20).unwrap();
    let sol = solve_on(&spec, &grid, 500, 4, SolverChoice::Lsmc).unwrap();
    let d = &sol.diagnostics;
    assert_eq!(d.converged, *d.residuals.last().unwrap() < d.tol);
    assert_eq!(d.iterations, d.residuals.len());
    assert_eq!(d.max_condition.len(), d.iterations);
}

#[test]
fn lsmc_speed_tracks_the_walking_profile() {
    let spec = builtin("dv_set4").unwrap();
    let grid = TimeGrid::new(spec.horizon, 40).unwrap();
    let sol = solve_on(&spec, &grid, 500, 4, SolverChoice::Lsmc).unwrap();
    let uy = &sol.ensemble.uy;
    // λ_des / (λ_cont + λ_des) of the target speed, up to noise.
    let share = 10.0 / 10.5;
    for k in 5..35 {
        let mean: f64 = uy.row(k).chunks(2).map(|u| u[0]).sum::<f64>() / 500.0;
        let want = share * arctan_speed(grid.time(k));
        assert!((mean - want).abs() < 0.05, "t = {}: {mean} vs {want}", grid.time(k));
    }
}

/// `Y_T = B_T`, driver `B_t²`: `Y_t = B_t − B_t²(T − t) − (T − t)²/2`. The
/// left-point driver sum is off by `(T − t) dt / 2`, so the error halves with dt.
fn martingale_with_drift_error(steps: usize, paths: usize) -> f64 {
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let bundle = sample_brownian(&grid, paths, (0, 1), 17).unwrap();
    let level = bundle.level_y();
    let inputs = RegressionInputs::shared(level.clone());
    let terminal = level.row(steps).to_vec();
    let drv = level.clone();
    let sol = backward_lsmc(&grid, &bundle, &inputs, &poly(2), 1e-8, &terminal, 1, |k, n, o| {
        o[0] = drv.get(k, n)[0].powi(2);
    })
    .unwrap();
    (0..=steps)
        .map(|k| {
            let r = 1.0 - grid.time(k);
            let exact: Vec<f64> = level.row(k).iter().map(|b| b - b * b * r - r * r / 2.0).collect();
            rms(sol.values.row(k), &exact)
        })
        .fold(0.0, f64::max)
}

#[test]
fn backward_error_decreases_over_three_grid_levels() {
    let errs: Vec<f64> = [4, 8, 16].iter().map(|&m| martingale_with_drift_error(m, 20_000)).collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 0.6 * errs[0], "{errs:?}");
}

#[test]
fn closed_form_solution_passes_the_boundary_check() {
    for name in ["kt_set1", "dv_set1", "dv_set4"] {
        let spec = builtin(name).unwrap();
        let grid = TimeGrid::new(spec.horizon, 20).unwrap();
        let sol = solve_on(&spec, &grid, 300, 9, SolverChoice::Lq).unwrap();
        sol.check_boundaries().unwrap();
        assert_eq!(sol.ensemble.y.row(20), &sol.y_terminal[..]);
    }
}
