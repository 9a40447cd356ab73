//! Solver dispatch for a scenario.

use serde::{Deserialize, Serialize};

use crate::brownian::sample_brownian;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::game::adjoint_boundary_rows;
use crate::grid::TimeGrid;
use crate::lq::solve_lq_paths;
use crate::lsmc::{solve_equilibrium, AdjointEnsemble, Diagnostics, EquilibriumSolution};
use crate::paths::PathArray;
use crate::rng::Stream;
use crate::scenarios::ScenarioSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Lsmc,
    Lq,
    /// Closed form when the scenario has no ordinary crowd, LSMC otherwise.
    #[default]
    Auto,
}

impl SolverChoice {
    pub fn from_ident(s: &str) -> Option<Self> {
        match s {
            "lsmc" => Some(SolverChoice::Lsmc),
            "lq" => Some(SolverChoice::Lq),
            "auto" => Some(SolverChoice::Auto),
            _ => None,
        }
    }
}

/// Solve `spec` with its own grid, path count and seed.
pub fn solve(spec: &ScenarioSpec, choice: SolverChoice) -> Result<EquilibriumSolution> {
    let grid = TimeGrid::new(spec.horizon, spec.solver.steps)?;
    solve_on(spec, &grid, spec.solver.paths, spec.solver.seed, choice)
}

pub fn solve_on(
    spec: &ScenarioSpec,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    choice: SolverChoice,
) -> Result<EquilibriumSolution> {
    match choice {
        SolverChoice::Lsmc => solve_equilibrium(spec, grid, paths, seed, &spec.solver.picard),
        SolverChoice::Lq => solve_lq(spec, grid, paths, seed),
        SolverChoice::Auto if spec.has_ordinary() => solve_equilibrium(spec, grid, paths, seed, &spec.solver.picard),
        SolverChoice::Auto => solve_lq(spec, grid, paths, seed),
    }
}

/// Closed-form solution of a tagged-crowd-only scenario, on the same
/// randomness as the LSMC solver would use.
pub fn solve_lq(spec: &ScenarioSpec, grid: &TimeGrid, paths: usize, seed: u64) -> Result<EquilibriumSolution> {
    spec.validate()?;
    let prob = spec
        .lq_problem()
        .ok_or_else(|| Error::Unsupported("the closed-form solver handles the tagged crowd alone".into()))?;
    let d = spec.dim;
    let m = grid.steps();
    let n = paths;
    let dims = spec.noise_dims();
    let bundle = sample_brownian(grid, paths, dims, seed)?;
    let y0 = spec.tagged.initial.sample(paths, seed, Stream::TaggedInitial);
    let yt = spec.tagged.terminal.sample(paths, seed, Stream::TaggedTerminal);
    let mut sol = solve_lq_paths(&prob, grid, &bundle, &y0, &yt)?;
    // The matching formula gives p_0 up to rounding; pin it to the boundary
    // condition evaluated on the returned Y_0.
    let rows = adjoint_boundary_rows(&spec.coefficients(), sol.y.row(0), &y0, &[], &[])?;
    sol.p.row_mut(0).copy_from_slice(&rows.yy_initial);
    let ensemble = Ensemble { grid: grid.clone(), dim: d, noise_dims: dims, y: sol.y, z: sol.z, uy: sol.u, x: None, ux: None };
    if !ensemble.is_finite() {
        return Err(Error::NonFinite { what: "closed-form ensemble", step: m });
    }
    // Without an ordinary crowd the cross adjoint and its integrands vanish.
    let adjoints = AdjointEnsemble {
        p_yy: sol.p,
        p_yx: PathArray::zeros(m + 1, n, d),
        q_yx: PathArray::zeros(m + 1, n, 0),
        q_yy: PathArray::zeros(m + 1, n, d * d),
        p_xx: None,
        p_xy: None,
        q_xx: None,
        q_xy: None,
    };
    let diagnostics = Diagnostics {
        solver: "lq".into(),
        converged: true,
        iterations: 0,
        residuals: Vec::new(),
        max_condition: Vec::new(),
        regularized: Vec::new(),
        tol: 0.0,
        damping: 0.0,
    };
    Ok(EquilibriumSolution {
        ensemble,
        adjoints,
        diagnostics,
        bundle,
        y_anchor: y0,
        y_terminal: yt,
        x_initial: Vec::new(),
        spec: spec.clone(),
    })
}
