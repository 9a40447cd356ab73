//! Verification suites: solver cross-checks, spike variations and a
//! convergence study of the backward scheme.

use serde::Serialize;

use mftg_core::brownian::sample_brownian;
use mftg_core::ensemble::Crowd;
use mftg_core::game::{spike_variation_check, SpikeConfig};
use mftg_core::grid::TimeGrid;
use mftg_core::lq::keep_together_deterministic_oracle;
use mftg_core::lsmc::{backward_lsmc, BasisFamily, RegressionBasis, RegressionInputs};
use mftg_core::reduce::mean_rows;
use mftg_core::scenarios::{ScenarioKind, ScenarioSpec};
use mftg_core::solve::{solve_on, SolverChoice};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Oracles,
    Spike,
    Convergence,
}

impl Suite {
    pub fn ident(self) -> &'static str {
        match self {
            Suite::Oracles => "oracles",
            Suite::Spike => "spike",
            Suite::Convergence => "convergence",
        }
    }

    /// Scenario used when none is given.
    pub fn default_scenario(self) -> &'static str {
        match self {
            Suite::Oracles | Suite::Convergence => "kt_set2",
            Suite::Spike => "bidir",
        }
    }
}

/// One checked quantity against a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: Relation::AtMost, passed: value <= bound }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: Relation::Below, passed: value < bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, bound, relation: Relation::AtLeast, passed: value >= bound }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Check::at_least(name, v, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    Below,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub scenario: String,
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run_suite(suite: Suite, spec: &ScenarioSpec) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Oracles => oracles(spec)?,
        Suite::Spike => spike(spec)?,
        Suite::Convergence => convergence(spec.solver.paths, spec.solver.steps, spec.solver.seed)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        suite,
        scenario: spec.name.clone(),
        seed: spec.solver.seed,
        paths: spec.solver.paths,
        steps: spec.solver.steps,
        checks,
        passed,
    })
}

fn rel_rms(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// Relative tolerance of the LSMC/closed-form comparison.
pub const CROSS_SOLVER_TOL: f64 = 0.05;

/// Mean initial tagged position of both solvers on the noise-free version of
/// a keep-together spec, relative to the calculus-of-variations optimum.
pub fn keep_together_initial_errors(spec: &ScenarioSpec, grid: &TimeGrid) -> Result<Vec<(SolverChoice, f64)>> {
    let mut quiet = spec.clone();
    quiet.tagged.noise = 0.0;
    let t = &quiet.tagged;
    let opt = keep_together_deterministic_oracle(t.cont, t.init, &t.initial.mean, &t.terminal.mean, quiet.horizon)?;
    let mut out = Vec::new();
    for choice in [SolverChoice::Lsmc, SolverChoice::Lq] {
        let sol = solve_on(&quiet, grid, quiet.solver.paths, quiet.solver.seed, choice)?;
        let mean = mean_rows(sol.ensemble.y.row(0), quiet.dim);
        let err = mean.iter().zip(&opt.initial).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        out.push((choice, err));
    }
    Ok(out)
}

fn oracles(spec: &ScenarioSpec) -> Result<Vec<Check>> {
    let grid = TimeGrid::new(spec.horizon, spec.solver.steps)?;
    let (n, seed) = (spec.solver.paths, spec.solver.seed);
    let lsmc = solve_on(spec, &grid, n, seed, SolverChoice::Lsmc)?;
    let lq = solve_on(spec, &grid, n, seed, SolverChoice::Lq)?;
    let (a, b) = (&lsmc.ensemble, &lq.ensemble);
    let mut checks = vec![
        Check::flag("lsmc converged", lsmc.diagnostics.converged),
        Check::at_most("relative L2 gap of tagged control", rel_rms(a.uy.as_slice(), b.uy.as_slice()), CROSS_SOLVER_TOL),
        Check::at_most("relative L2 gap of tagged state", rel_rms(a.y.as_slice(), b.y.as_slice()), CROSS_SOLVER_TOL),
    ];
    if spec.kind == ScenarioKind::KeepTogether {
        for (choice, err) in keep_together_initial_errors(spec, &grid)? {
            let name = format!("noise-free initial position, {choice:?} vs optimum").to_lowercase();
            checks.push(Check::at_most(name, err, 0.01));
        }
    }
    Ok(checks)
}

/// Constant control offset used for the negative control of the spike check.
pub const DETUNE: f64 = 0.5;

fn spike(spec: &ScenarioSpec) -> Result<Vec<Check>> {
    let sol = solve_on(spec, &TimeGrid::new(spec.horizon, spec.solver.steps)?, spec.solver.paths, spec.solver.seed, SolverChoice::Auto)?;
    let mut checks = vec![Check::flag("solver converged", sol.diagnostics.converged)];
    let cand = sol.spike_candidate();
    let cfg = SpikeConfig { seed: spec.solver.seed, ..SpikeConfig::default() };
    let mut crowds = vec![Crowd::Tagged];
    if spec.has_ordinary() {
        crowds.push(Crowd::Ordinary);
    }
    for c in crowds {
        let r = spike_variation_check(&cand, c, &cfg)?;
        checks.push(Check::at_least(format!("worst spike score, {} crowd", c.name()), r.worst_score, -cfg.sigmas));
        let detuned = cand.with_control_offset(c, &vec![DETUNE; spec.dim])?;
        let r = spike_variation_check(&detuned, c, &cfg)?;
        checks.push(Check::flag(format!("detuned {} control rejected", c.name()), !r.passed));
    }
    Ok(checks)
}

/// Error of the backward scheme on `Y_T = B_T`, zero driver: the largest
/// per-step L² distance to `B_t`, and the mean of `|Z − 1|`.
pub fn martingale_errors(paths: usize, steps: usize, seed: u64) -> Result<(f64, f64)> {
    let grid = TimeGrid::new(1.0, steps)?;
    let bundle = sample_brownian(&grid, paths, (0, 1), seed)?;
    let level = bundle.level_y();
    let basis = RegressionBasis { family: BasisFamily::Polynomial, degree: 2, inputs: vec![], per_coordinate: false };
    let inputs = RegressionInputs::shared(level.clone());
    let sol = backward_lsmc(&grid, &bundle, &inputs, &basis, 1e-8, level.row(steps), 1, |_, _, o| o[0] = 0.0)?;
    let mut sup = 0.0f64;
    for k in 0..=steps {
        let mse = sol.values.row(k).iter().zip(level.row(k)).map(|(y, b)| (y - b).powi(2)).sum::<f64>() / paths as f64;
        sup = sup.max(mse.sqrt());
    }
    let z: f64 = (0..steps).flat_map(|k| sol.integrand.row(k).iter()).map(|z| (z - 1.0).abs()).sum();
    Ok((sup, z / (steps * paths) as f64))
}

/// Largest per-step L² error of the backward scheme on `Y_T = B_T` with
/// driver `B_t²`, against `Y_t = B_t − B_t²(T − t) − (T − t)²/2`.
pub fn driven_martingale_error(paths: usize, steps: usize, seed: u64) -> Result<f64> {
    let grid = TimeGrid::new(1.0, steps)?;
    let bundle = sample_brownian(&grid, paths, (0, 1), seed)?;
    let level = bundle.level_y();
    let basis = RegressionBasis { family: BasisFamily::Polynomial, degree: 2, inputs: vec![], per_coordinate: false };
    let inputs = RegressionInputs::shared(level.clone());
    let sol = backward_lsmc(&grid, &bundle, &inputs, &basis, 1e-8, level.row(steps), 1, |k, n, o| {
        o[0] = level.get(k, n)[0].powi(2);
    })?;
    let mut sup = 0.0f64;
    for k in 0..=steps {
        let r = 1.0 - grid.time(k);
        let mse = sol
            .values
            .row(k)
            .iter()
            .zip(level.row(k))
            .map(|(y, b)| (y - (b - b * b * r - r * r / 2.0)).powi(2))
            .sum::<f64>()
            / paths as f64;
        sup = sup.max(mse.sqrt());
    }
    Ok(sup)
}

/// Grid levels of the convergence study.
pub const LEVELS: [usize; 3] = [4, 8, 16];

fn convergence(paths: usize, steps: usize, seed: u64) -> Result<Vec<Check>> {
    let (sup, z) = martingale_errors(paths, steps, seed)?;
    let mut checks = vec![
        Check::at_most("martingale state error (sup over steps)", sup, 0.05),
        Check::at_most("martingale integrand error (mean |Z - 1|)", z, 0.05),
    ];
    let errs = LEVELS.iter().map(|&m| driven_martingale_error(paths, m, seed)).collect::<Result<Vec<_>>>()?;
    for (w, m) in errs.windows(2).zip(LEVELS.windows(2)) {
        checks.push(Check::below(format!("driven error at M = {} relative to M = {}", m[1], m[0]), w[1] / w[0], 1.0));
    }
    Ok(checks)
}
