//! Front end of the crowd solver: scenario resolution, run artifacts and the
//! verification suites.

pub mod artifacts;
pub mod error;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use mftg_core::scenarios::{builtin_text, parse_with_overrides, ScenarioSpec};
use mftg_core::solve::{solve, SolverChoice};

pub use artifacts::{collect, ArtifactOptions, RunArtifacts};
pub use error::{CliError, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "MFTG_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioSource {
    Builtin(String),
    File(PathBuf),
}

/// Solver settings that have dedicated flags; they are applied as overrides
/// after the `key=value` list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverFlags {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
}

/// Load a scenario and apply overrides, then validate it.
pub fn resolve_spec(source: &ScenarioSource, overrides: &[String], flags: &SolverFlags) -> Result<ScenarioSpec> {
    let text = match source {
        ScenarioSource::Builtin(name) => builtin_text(name)?.to_string(),
        ScenarioSource::File(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
    };
    let mut all = overrides.to_vec();
    if let Some(s) = flags.seed {
        all.push(format!("solver.seed={s}"));
    }
    if let Some(n) = flags.paths {
        all.push(format!("solver.paths={n}"));
    }
    if let Some(m) = flags.steps {
        all.push(format!("solver.steps={m}"));
    }
    Ok(parse_with_overrides(&text, &all)?)
}

/// Solve `spec` and collect its artifacts. Non-convergence is not an error
/// here; the diagnostics record it.
pub fn run_artifacts(spec: &ScenarioSpec, solver: SolverChoice, opts: &ArtifactOptions) -> Result<RunArtifacts> {
    let sol = solve(spec, solver)?;
    collect(&sol, solver, opts)
}

/// Solve, write artifacts under `out`, and report non-convergence after the
/// artifacts are on disk.
pub fn run(spec: &ScenarioSpec, solver: SolverChoice, opts: &ArtifactOptions, out: &Path) -> Result<Vec<PathBuf>> {
    let art = run_artifacts(spec, solver, opts)?;
    let written = art.write_to(out)?;
    let d = &art.diagnostics.solver;
    if !d.converged {
        return Err(CliError::NotConverged { iterations: d.iterations, residual: d.residuals.last().copied().unwrap_or(f64::NAN) });
    }
    Ok(written)
}

/// Worker pool sized by `MFTG_THREADS`, if set.
pub fn thread_pool_from_env() -> Result<Option<rayon::ThreadPool>> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::Usage(format!("cannot build a pool of {n} threads: {e}")))
}
