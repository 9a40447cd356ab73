//! Run artifacts: path samples, density snapshots and summary series.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mftg_core::ensemble::{distance_to_mean_series, Crowd, Ensemble};
use mftg_core::lsmc::{Diagnostics, EquilibriumSolution};
use mftg_core::paths::PathArray;
use mftg_core::reduce::tree_sum_indexed;
use mftg_core::scenarios::serialize_scenario;
use mftg_core::solve::SolverChoice;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactOptions {
    /// Number of paths written to the paths table.
    pub path_sample: usize,
    /// Number of density snapshots, evenly spread over `[0, T]`.
    pub snapshots: usize,
    /// Histogram bins per axis.
    pub bins: usize,
}

impl Default for ArtifactOptions {
    fn default() -> Self {
        ArtifactOptions { path_sample: 100, snapshots: 5, bins: 50 }
    }
}

/// 2-D histogram of one crowd at one grid point over the first two
/// coordinates. Row `j` of `counts` is the `j`-th bin of the second axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub crowd: Crowd,
    pub step: usize,
    pub time: f64,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bounds: [f64; 4],
    pub bins: usize,
    pub counts: Vec<u64>,
}

impl DensityGrid {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "crowd {}\nstep {}\ntime {}\nbounds {} {} {} {}\nbins {} {}\n",
            self.crowd.name(),
            self.step,
            self.time,
            self.bounds[0],
            self.bounds[1],
            self.bounds[2],
            self.bounds[3],
            self.bins,
            self.bins
        );
        for row in self.counts.chunks(self.bins) {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// In-memory form of everything a run writes.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub times: Vec<f64>,
    pub paths_csv: String,
    pub densities: Vec<DensityGrid>,
    /// Mean distance to the crowd mean, `M + 1` values per crowd.
    pub distance_to_mean: Vec<(Crowd, Vec<f64>)>,
    /// Mean control speed, `M` values per crowd.
    pub speed: Vec<(Crowd, Vec<f64>)>,
    pub diagnostics: RunDiagnostics,
    pub metadata: Metadata,
    pub spec_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDiagnostics {
    #[serde(flatten)]
    pub solver: Diagnostics,
    pub boundaries_exact: bool,
    /// `E‖X_T − x_T‖`, when there is an ordinary crowd.
    pub terminal_miss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub scenario: String,
    pub requested_solver: SolverChoice,
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub options: ArtifactOptions,
    /// Canonical text of the resolved scenario.
    pub spec: String,
}

fn crowds(e: &Ensemble) -> Vec<Crowd> {
    if e.x.is_some() {
        vec![Crowd::Tagged, Crowd::Ordinary]
    } else {
        vec![Crowd::Tagged]
    }
}

/// Mean `‖u_k‖` over paths for `k < M`.
pub fn speed_profile(control: &PathArray, dim: usize) -> Vec<f64> {
    let n = control.paths();
    (0..control.rows().saturating_sub(1))
        .map(|k| {
            let row = control.row(k);
            tree_sum_indexed(n, |i| row[i * dim..(i + 1) * dim].iter().map(|v| v * v).sum::<f64>().sqrt()) / n as f64
        })
        .collect()
}

/// `E‖X_T − x_T‖` over the sample.
pub fn terminal_miss(x: &PathArray, dim: usize, target: &[f64]) -> f64 {
    let last = x.row(x.rows() - 1);
    let n = x.paths();
    tree_sum_indexed(n, |i| {
        last[i * dim..(i + 1) * dim].iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }) / n as f64
}

fn coord(row: &[f64], dim: usize, i: usize, c: usize) -> f64 {
    if c < dim {
        row[i * dim + c]
    } else {
        0.0
    }
}

/// Histograms of `state` at `steps` over one box fitted to all of them and
/// padded by 10% on each side. Every path lands in a bin.
pub fn density_grids(crowd: Crowd, state: &PathArray, dim: usize, grid_times: &[f64], steps: &[usize], bins: usize) -> Vec<DensityGrid> {
    let n = state.paths();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &k in steps {
        let row = state.row(k);
        for i in 0..n {
            for c in 0..2 {
                let v = coord(row, dim, i, c);
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
    }
    for c in 0..2 {
        let pad = if hi[c] > lo[c] { 0.1 * (hi[c] - lo[c]) } else { 0.5 };
        lo[c] -= pad;
        hi[c] += pad;
    }
    let bin = |v: f64, c: usize| (((v - lo[c]) / (hi[c] - lo[c]) * bins as f64) as usize).min(bins - 1);
    steps
        .iter()
        .map(|&k| {
            let row = state.row(k);
            let mut counts = vec![0u64; bins * bins];
            for i in 0..n {
                let (bx, by) = (bin(coord(row, dim, i, 0), 0), bin(coord(row, dim, i, 1), 1));
                counts[by * bins + bx] += 1;
            }
            DensityGrid { crowd, step: k, time: grid_times[k], bounds: [lo[0], hi[0], lo[1], hi[1]], bins, counts }
        })
        .collect()
}

fn snapshot_steps(m: usize, count: usize) -> Vec<usize> {
    if count <= 1 {
        return vec![0];
    }
    let mut s: Vec<usize> = (0..count).map(|i| ((i * m) as f64 / (count - 1) as f64).round() as usize).collect();
    s.dedup();
    s
}

fn paths_table(e: &Ensemble, sample: usize) -> Result<String> {
    let d = e.dim;
    let mut header = vec!["step".to_string(), "t".into(), "path".into()];
    let axes: Vec<(&str, &PathArray)> = {
        let mut v = vec![("y", &e.y), ("uy", &e.uy)];
        if let (Some(x), Some(ux)) = (&e.x, &e.ux) {
            v.push(("x", x));
            v.push(("ux", ux));
        }
        v
    };
    for (name, _) in &axes {
        header.extend((1..=d).map(|c| format!("{name}{c}")));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io("paths.csv", std::io::Error::other(e));
    w.write_record(&header).map_err(io)?;
    for k in 0..e.grid.points() {
        let t = e.grid.time(k).to_string();
        for n in 0..sample.min(e.paths()) {
            let mut rec = vec![k.to_string(), t.clone(), n.to_string()];
            for (_, a) in &axes {
                rec.extend(a.get(k, n).iter().map(|v| v.to_string()));
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("paths.csv", std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Assemble the artifacts of a solve.
pub fn collect(sol: &EquilibriumSolution, requested: SolverChoice, opts: &ArtifactOptions) -> Result<RunArtifacts> {
    if opts.bins == 0 {
        return Err(CliError::Usage("density grids need at least one bin".into()));
    }
    let e = &sol.ensemble;
    let d = e.dim;
    let m = e.grid.steps();
    let times = e.grid.times();
    let snaps = snapshot_steps(m, opts.snapshots);
    let mut densities = Vec::new();
    let mut distance_to_mean = Vec::new();
    let mut speed = Vec::new();
    for c in crowds(e) {
        let state = e.state(c).expect("crowd present");
        densities.extend(density_grids(c, state, d, &times, &snaps, opts.bins));
        distance_to_mean.push((c, distance_to_mean_series(e, c)?));
        speed.push((c, speed_profile(e.control(c).expect("crowd present"), d)));
    }
    let terminal_miss = match (&e.x, &sol.spec.ordinary) {
        (Some(x), Some(o)) => Some(terminal_miss(x, d, &o.target)),
        _ => None,
    };
    let spec_text = serialize_scenario(&sol.spec);
    let metadata = Metadata {
        scenario: sol.spec.name.clone(),
        requested_solver: requested,
        seed: sol.spec.solver.seed,
        paths: e.paths(),
        steps: m,
        options: opts.clone(),
        spec: spec_text.clone(),
    };
    Ok(RunArtifacts {
        paths_csv: paths_table(e, opts.path_sample)?,
        densities,
        distance_to_mean,
        speed,
        diagnostics: RunDiagnostics {
            solver: sol.diagnostics.clone(),
            boundaries_exact: sol.check_boundaries().is_ok(),
            terminal_miss,
        },
        metadata,
        spec_text,
        times,
    })
}

fn series_csv(times: &[f64], series: &[(Crowd, Vec<f64>)]) -> String {
    let mut s = String::from("t");
    for (c, _) in series {
        s.push(',');
        s.push_str(c.name());
    }
    s.push('\n');
    let rows = series.first().map_or(0, |(_, v)| v.len());
    for (k, t) in times.iter().take(rows).enumerate() {
        s.push_str(&t.to_string());
        for (_, v) in series {
            s.push(',');
            s.push_str(&v[k].to_string());
        }
        s.push('\n');
    }
    s
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact records serialize");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(())
}

impl RunArtifacts {
    /// Write every artifact under `dir` and return the files written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let density_dir = dir.join("density");
        fs::create_dir_all(&density_dir).map_err(|e| CliError::io(&density_dir, e))?;
        let mut written = Vec::new();
        write(dir, "paths.csv", &self.paths_csv, &mut written)?;
        write(dir, "distance_to_mean.csv", &series_csv(&self.times, &self.distance_to_mean), &mut written)?;
        write(dir, "speed.csv", &series_csv(&self.times, &self.speed), &mut written)?;
        write(dir, "diagnostics.json", &to_json(&self.diagnostics), &mut written)?;
        write(dir, "metadata.json", &to_json(&self.metadata), &mut written)?;
        write(dir, "spec.scn", &self.spec_text, &mut written)?;
        for g in &self.densities {
            let name = format!("{}_{:05}.txt", g.crowd.name(), g.step);
            write(&density_dir, &name, &g.to_text(), &mut written)?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mftg_core::scenarios::builtin;
    use mftg_core::solve::solve;

    fn constant(rows: usize, paths: usize, value: &[f64]) -> PathArray {
        let data = value.iter().copied().cycle().take(rows * paths * value.len()).collect();
        PathArray::from_vec(rows, paths, value.len(), data)
    }

    #[test]
    fn unit_control_has_unit_speed() {
        let s = speed_profile(&constant(11, 7, &[1.0, 0.0]), 2);
        assert_eq!(s, vec![1.0; 10]);
    }

    #[test]
    fn zero_control_has_zero_speed() {
        assert_eq!(speed_profile(&constant(5, 3, &[0.0, 0.0]), 2), vec![0.0; 4]);
    }

    #[test]
    fn every_path_is_counted_including_the_extremes() {
        let mut x = PathArray::zeros(3, 4, 2);
        let pts = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.5, 0.25]];
        for k in 0..3 {
            for (n, p) in pts.iter().enumerate() {
                x.get_mut(k, n).copy_from_slice(p);
            }
        }
        let g = density_grids(Crowd::Tagged, &x, 2, &[0.0, 0.5, 1.0], &[0, 2], 5);
        assert_eq!(g.len(), 2);
        for d in &g {
            assert_eq!(d.total(), 4);
            assert_eq!(d.bounds, [-0.1, 1.1, -0.1, 1.1]);
        }
        // (1, 1) sits in the last bin on both axes.
        assert_eq!(g[0].counts[4 * 5 + 4], 1);
    }

    #[test]
    fn collapsed_crowd_still_gets_a_box() {
        let x = constant(2, 6, &[3.0, -1.0]);
        let g = density_grids(Crowd::Ordinary, &x, 2, &[0.0, 1.0], &[1], 4);
        assert_eq!(g[0].bounds, [2.5, 3.5, -1.5, -0.5]);
        assert_eq!(g[0].total(), 6);
    }

    #[test]
    fn snapshots_span_the_horizon() {
        assert_eq!(snapshot_steps(100, 5), vec![0, 25, 50, 75, 100]);
        assert_eq!(snapshot_steps(3, 5), vec![0, 1, 2, 3]);
        assert_eq!(snapshot_steps(10, 1), vec![0]);
    }

    #[test]
    fn keep_together_run_conserves_mass_and_sizes_series() {
        let mut spec = builtin("kt_set1").unwrap();
        spec.solver.paths = 400;
        spec.solver.steps = 20;
        let sol = solve(&spec, SolverChoice::Auto).unwrap();
        let art = collect(&sol, SolverChoice::Auto, &ArtifactOptions::default()).unwrap();
        assert_eq!(art.densities.len(), 5);
        assert!(art.densities.iter().all(|g| g.total() == 400 && g.counts.len() == 2500));
        assert_eq!(art.distance_to_mean[0].1.len(), 21);
        assert_eq!(art.speed[0].1.len(), 20);
        assert!(art.diagnostics.boundaries_exact);
        // Header plus 100 sampled paths on 21 grid points.
        assert_eq!(art.paths_csv.lines().count(), 1 + 100 * 21);
        assert_eq!(series_csv(&art.times, &art.distance_to_mean).lines().count(), 22);
        assert_eq!(series_csv(&art.times, &art.speed).lines().count(), 21);
    }

    #[test]
    fn density_text_has_one_line_per_row() {
        let x = constant(1, 3, &[0.0, 0.0]);
        let g = &density_grids(Crowd::Tagged, &x, 2, &[0.0], &[0], 3)[0];
        let text = g.to_text();
        assert!(text.starts_with("crowd tagged\nstep 0\ntime 0\nbounds -0.5 0.5 -0.5 0.5\nbins 3 3\n"));
        assert_eq!(text.lines().count(), 5 + 3);
        assert!(text.lines().any(|l| l == "0 3 0"));
    }
}
