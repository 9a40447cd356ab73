use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mftg_cli::artifacts::to_json;
use mftg_cli::verify::{run_suite, Suite};
use mftg_cli::{resolve_spec, run, thread_pool_from_env, ArtifactOptions, CliError, Result, ScenarioSource, SolverFlags};
use mftg_core::scenarios::{builtin_names, serialize_scenario};
use mftg_core::solve::SolverChoice;

#[derive(Parser)]
#[command(name = "mftg", version, about = "Tagged and ordinary crowd equilibria by least-squares Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write its artifacts.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
        solver: SolverArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Paths written to paths.csv.
        #[arg(long, default_value_t = ArtifactOptions::default().path_sample)]
        path_sample: usize,
        /// Density snapshots per crowd.
        #[arg(long, default_value_t = ArtifactOptions::default().snapshots)]
        snapshots: usize,
        /// Histogram bins per axis.
        #[arg(long, default_value_t = ArtifactOptions::default().bins)]
        bins: usize,
    },
    /// Run a verification suite and print its report.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin scenarios.
    ListScenarios,
    /// Print the resolved scenario in canonical form.
    ExportSpec {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Builtin scenario name.
    #[arg(long, conflicts_with = "file")]
    scenario: Option<String>,
    /// Scenario file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Override `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Lsmc,
    Lq,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Oracles,
    Spike,
    Convergence,
}

impl ScenarioArgs {
    fn source(&self, fallback: Option<&str>) -> Result<ScenarioSource> {
        match (&self.scenario, &self.file, fallback) {
            (Some(name), _, _) => Ok(ScenarioSource::Builtin(name.clone())),
            (None, Some(path), _) => Ok(ScenarioSource::File(path.clone())),
            (None, None, Some(name)) => Ok(ScenarioSource::Builtin(name.into())),
            (None, None, None) => Err(CliError::Usage("give --scenario NAME or --file PATH".into())),
        }
    }

    fn resolve(&self, fallback: Option<&str>) -> Result<mftg_core::scenarios::ScenarioSpec> {
        let flags = SolverFlags { seed: self.seed, paths: self.paths, steps: self.steps };
        resolve_spec(&self.source(fallback)?, &self.overrides, &flags)
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, solver, out, path_sample, snapshots, bins } => {
            let spec = scenario.resolve(None)?;
            let solver = match solver {
                SolverArg::Lsmc => SolverChoice::Lsmc,
                SolverArg::Lq => SolverChoice::Lq,
                SolverArg::Auto => SolverChoice::Auto,
            };
            fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            let opts = ArtifactOptions { path_sample, snapshots, bins };
            let written = run(&spec, solver, &opts, &out)?;
            eprintln!("wrote {} files to {}", written.len(), out.display());
            Ok(())
        }
        Command::Verify { suite, scenario, out } => {
            let suite = match suite {
                SuiteArg::Oracles => Suite::Oracles,
                SuiteArg::Spike => Suite::Spike,
                SuiteArg::Convergence => Suite::Convergence,
            };
            let spec = scenario.resolve(Some(suite.default_scenario()))?;
            let report = run_suite(suite, &spec)?;
            write_or_print(out.as_ref(), &to_json(&report))?;
            if out.is_some() {
                print!("{}", to_json(&report));
            }
            if report.passed {
                Ok(())
            } else {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                Err(CliError::VerifyFailed(failed.join("; ")))
            }
        }
        Command::ListScenarios => {
            for name in builtin_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::ExportSpec { scenario, out } => {
            let spec = scenario.resolve(None)?;
            write_or_print(out.as_ref(), &serialize_scenario(&spec))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_pool_from_env().and_then(|pool| match pool {
        Some(p) => p.install(|| execute(cli.command)),
        None => execute(cli.command),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> Result<()> {
        let cli = Cli::try_parse_from(std::iter::once("mftg").chain(args.iter().copied())).expect("arguments parse");
        execute(cli.command)
    }

    fn code(r: Result<()>) -> i32 {
        r.err().map_or(0, |e| e.exit_code())
    }

    #[test]
    fn run_writes_the_artifact_set() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("kt");
        exec(&["run", "--scenario", "kt_set1", "--paths", "300", "--steps", "10", "--out", out.to_str().unwrap()]).unwrap();
        for f in ["paths.csv", "speed.csv", "distance_to_mean.csv", "diagnostics.json", "metadata.json", "spec.scn", "density/tagged_00010.txt"] {
            assert!(out.join(f).is_file(), "{f}");
        }
        let spec = fs::read_to_string(out.join("spec.scn")).unwrap();
        assert!(spec.contains("solver.paths = 300\n") && spec.contains("solver.steps = 10\n"));
        let meta = fs::read_to_string(out.join("metadata.json")).unwrap();
        assert!(meta.contains("\"requested_solver\": \"auto\""));
    }

    #[test]
    fn same_flags_give_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for out in [&a, &b] {
            exec(&["run", "--scenario", "dv_set1", "--solver", "lsmc", "--paths", "200", "--steps", "10", "--seed", "5", "--out", out.to_str().unwrap()])
                .unwrap();
        }
        for f in ["paths.csv", "speed.csv", "diagnostics.json", "density/tagged_00005.txt"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn conflicting_override_is_a_validation_failure() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let r = exec(&["run", "--scenario", "dv_set1", "--set", "tagged.cont=0", "--set", "tagged.des=0", "--out", out]);
        assert_eq!(code(r), 2);
        assert_eq!(code(exec(&["run", "--scenario", "kt_set7", "--out", out])), 2);
        assert_eq!(code(exec(&["run", "--out", out])), 2);
    }

    #[test]
    fn lq_solver_refuses_a_two_crowd_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let r = exec(&["run", "--scenario", "bidir", "--solver", "lq", "--paths", "50", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(r), 2);
    }

    #[test]
    fn non_convergence_exits_with_three_after_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t");
        let r = exec(&[
            "run", "--scenario", "twist", "--set", "solver.picard.max_iters=2", "--paths", "200", "--steps", "10", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(r), 3);
        let diag = fs::read_to_string(out.join("diagnostics.json")).unwrap();
        assert!(diag.contains("\"converged\": false"));
        assert!(out.join("density/ordinary_00010.txt").is_file());
    }

    #[test]
    fn unwritable_output_is_an_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "").unwrap();
        let r = exec(&["run", "--scenario", "kt_set2", "--paths", "50", "--steps", "5", "--out", file.to_str().unwrap()]);
        assert_eq!(code(r), 4);
    }

    #[test]
    fn export_spec_round_trips_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.scn");
        exec(&["export-spec", "--scenario", "bidir", "--set", "tagged.init=4", "--out", path.to_str().unwrap()]).unwrap();
        let out = dir.path().join("copy.scn");
        exec(&["export-spec", "--file", path.to_str().unwrap(), "--out", out.to_str().unwrap()]).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        assert_eq!(text, fs::read_to_string(&path).unwrap());
        assert!(text.contains("tagged.init = 4\n"));
    }

    #[test]
    fn scenario_and_file_are_exclusive() {
        assert!(Cli::try_parse_from(["mftg", "export-spec", "--scenario", "kt_set1", "--file", "x"]).is_err());
    }

    #[test]
    fn convergence_suite_passes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        exec(&["verify", "convergence", "--paths", "10000", "--steps", "50", "--out", out.to_str().unwrap()]).unwrap();
        assert!(fs::read_to_string(out).unwrap().contains("\"passed\": true"));
    }

    #[test]
    fn oracle_suite_passes_on_keep_together() {
        exec(&["verify", "oracles", "--scenario", "kt_set2", "--paths", "2000", "--steps", "50"]).unwrap();
    }

    #[test]
    fn list_scenarios_succeeds() {
        exec(&["list-scenarios"]).unwrap();
    }
}
