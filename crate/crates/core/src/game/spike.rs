use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::Crowd;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::PathArray;
use crate::reduce::{mean_rows, tree_sum_slice};
use crate::rng::{CounterRng, Stream};

use super::cost::{CoefficientSet, CostEval, EvalPoint};

/// A candidate equilibrium: states, controls and boundary data on a grid.
#[derive(Debug, Clone)]
pub struct SpikeCandidate {
    pub coeffs: CoefficientSet,
    pub grid: TimeGrid,
    /// `B^y_{t_k}` levels.
    pub noise_y: PathArray,
    pub y: PathArray,
    pub uy: PathArray,
    pub x: Option<PathArray>,
    pub ux: Option<PathArray>,
    /// Per-path `y_0`.
    pub y_anchor: Vec<f64>,
    /// `x_T` (empty without an ordinary crowd).
    pub x_target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeConfig {
    pub trials: usize,
    /// Length of the perturbation interval `E_ε`.
    pub epsilon: f64,
    /// Range of the bump magnitude `|δ|`.
    pub magnitude: (f64, f64),
    pub seed: u64,
    /// Tolerance in standard errors of the mean cost change.
    pub sigmas: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig { trials: 200, epsilon: 0.1, magnitude: (0.5, 2.0), seed: 0, sigmas: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrial {
    pub start: f64,
    pub length: f64,
    pub bump: Vec<f64>,
    /// Mean over paths of `J(perturbed) − J(candidate)`.
    pub mean_delta: f64,
    pub std_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeReport {
    pub crowd: Crowd,
    pub trials: Vec<SpikeTrial>,
    pub passed: bool,
    /// Most negative `mean_delta / std_error` over the trials.
    pub worst_score: f64,
}

/// A deterministic bump `δ` added to the control on steps `start..start + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub start: usize,
    pub len: usize,
    pub delta: Vec<f64>,
}

impl SpikeCandidate {
    fn dim(&self) -> usize {
        self.coeffs.dim
    }

    fn check(&self, crowd: Crowd) -> Result<()> {
        if crowd == Crowd::Ordinary && (self.x.is_none() || self.ux.is_none() || self.coeffs.ordinary.is_none()) {
            return Err(Error::invalid("candidate has no ordinary crowd"));
        }
        Ok(())
    }

    /// States and control of `crowd` after adding `bump` to its control, the
    /// other crowd's control held fixed.
    ///
    /// A deterministic drift change moves the forward state by its running
    /// integral. For the backward state the same holds in reverse: the change
    /// is deterministic and conditional expectations reproduce constants, so
    /// `Y_k` shifts by `−Σ_{j ≥ k} δ_j dt` while `Y_T` stays pinned.
    pub fn perturbed(&self, crowd: Crowd, bump: &Bump) -> Result<(PathArray, PathArray)> {
        self.check(crowd)?;
        let d = self.dim();
        let m = self.grid.steps();
        let dt = self.grid.dt();
        let end = (bump.start + bump.len).min(m);
        let (mut state, mut control) = match crowd {
            Crowd::Tagged => (self.y.clone(), self.uy.clone()),
            Crowd::Ordinary => (self.x.clone().expect("checked"), self.ux.clone().expect("checked")),
        };
        for k in bump.start..end {
            for v in control.row_mut(k).chunks_mut(d) {
                for i in 0..d {
                    v[i] += bump.delta[i];
                }
            }
        }
        for k in 0..=m {
            let active = match crowd {
                Crowd::Tagged => end.saturating_sub(bump.start.max(k)),
                Crowd::Ordinary => k.min(end).saturating_sub(bump.start),
            };
            if active == 0 {
                continue;
            }
            let sign = if crowd == Crowd::Tagged { -1.0 } else { 1.0 };
            let w = sign * active as f64 * dt;
            for v in state.row_mut(k).chunks_mut(d) {
                for i in 0..d {
                    v[i] += w * bump.delta[i];
                }
            }
        }
        Ok((state, control))
    }

    /// Apply a constant control offset over the whole horizon and return the
    /// resulting (generally suboptimal) candidate.
    pub fn with_control_offset(&self, crowd: Crowd, offset: &[f64]) -> Result<SpikeCandidate> {
        let bump = Bump { start: 0, len: self.grid.steps() + 1, delta: offset.to_vec() };
        let (s, u) = self.perturbed(crowd, &bump)?;
        let mut out = self.clone();
        match crowd {
            Crowd::Tagged => {
                out.y = s;
                out.uy = u;
            }
            Crowd::Ordinary => {
                out.x = Some(s);
                out.ux = Some(u);
            }
        }
        Ok(out)
    }

    fn own(&self, crowd: Crowd) -> (&PathArray, &PathArray) {
        match crowd {
            Crowd::Tagged => (&self.y, &self.uy),
            Crowd::Ordinary => (self.x.as_ref().expect("checked"), self.ux.as_ref().expect("checked")),
        }
    }

    /// Per-path cost of `crowd` accrued at row `k` (running cost times `dt`
    /// for `k < M`, plus the boundary cost on its row), given that crowd's
    /// state and control rows.
    fn row_costs(&self, crowd: Crowd, k: usize, state: &[f64], control: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let n = self.y.paths();
        let m = self.grid.steps();
        let dt = self.grid.dt();
        let mut out = vec![0.0; n];
        if k < m {
            let (y, uy, x, ux): (&[f64], &[f64], &[f64], &[f64]) = match crowd {
                Crowd::Tagged => (
                    state,
                    control,
                    self.x.as_ref().map_or(&[], |a| a.row(k)),
                    self.ux.as_ref().map_or(&[], |a| a.row(k)),
                ),
                Crowd::Ordinary => (self.y.row(k), self.uy.row(k), state, control),
            };
            let mean_y = mean_rows(y, d);
            let mean_x = if x.is_empty() { Vec::new() } else { mean_rows(x, d) };
            let t = self.grid.time(k);
            let noise = self.noise_y.row(k);
            out.par_iter_mut().enumerate().try_for_each_init(
                || CostEval::zeros(d),
                |e, (j, o)| -> Result<()> {
                    let p = EvalPoint {
                        t,
                        y: part(y, j, d),
                        mean_y: &mean_y,
                        uy: part(uy, j, d),
                        z: &[],
                        x: part(x, j, d),
                        mean_x: &mean_x,
                        ux: part(ux, j, d),
                        noise_y: part(noise, j, d),
                    };
                    self.coeffs.running_cost_into(crowd, &p, e)?;
                    *o = e.value * dt;
                    Ok(())
                },
            )?;
        }
        let boundary_row = match crowd {
            Crowd::Tagged => 0,
            Crowd::Ordinary => m,
        };
        if k == boundary_row {
            for (j, o) in out.iter_mut().enumerate() {
                let anchor = match crowd {
                    Crowd::Tagged => &self.y_anchor[j * d..(j + 1) * d],
                    Crowd::Ordinary => &self.x_target[..],
                };
                *o += self.coeffs.boundary_cost(crowd, &state[j * d..(j + 1) * d], anchor)?.0;
            }
        }
        Ok(out)
    }

    /// Per-row, per-path costs of `crowd` under the candidate (`M + 1` rows).
    fn cost_table(&self, crowd: Crowd) -> Result<Vec<Vec<f64>>> {
        let (s, u) = self.own(crowd);
        (0..=self.grid.steps()).map(|k| self.row_costs(crowd, k, s.row(k), u.row(k))).collect()
    }

    /// Per-path cost of `crowd` under the candidate.
    pub fn path_costs(&self, crowd: Crowd) -> Result<Vec<f64>> {
        self.check(crowd)?;
        let mut total = vec![0.0; self.y.paths()];
        for row in self.cost_table(crowd)? {
            for (t, c) in total.iter_mut().zip(row) {
                *t += c;
            }
        }
        Ok(total)
    }

    /// Per-path `J(perturbed) − J(candidate)`, evaluated on the rows the bump
    /// can reach.
    pub fn cost_deltas(&self, crowd: Crowd, bump: &Bump) -> Result<Vec<f64>> {
        self.check(crowd)?;
        self.deltas_with(crowd, bump, None)
    }

    fn deltas_with(&self, crowd: Crowd, bump: &Bump, base: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
        let d = self.dim();
        let m = self.grid.steps();
        let n = self.y.paths();
        let dt = self.grid.dt();
        let mut total = vec![0.0; n];
        if bump.len == 0 {
            return Ok(total);
        }
        let end = (bump.start + bump.len).min(m);
        let rows = match crowd {
            Crowd::Tagged => 0..end,
            Crowd::Ordinary => bump.start..m + 1,
        };
        let (s0, u0) = self.own(crowd);
        let mut state = vec![0.0; n * d];
        let mut control = vec![0.0; n * d];
        for k in rows {
            let active = match crowd {
                Crowd::Tagged => end.saturating_sub(bump.start.max(k)),
                Crowd::Ordinary => k.min(end).saturating_sub(bump.start),
            };
            let sign = if crowd == Crowd::Tagged { -1.0 } else { 1.0 };
            let shift = sign * active as f64 * dt;
            let on = if (bump.start..end).contains(&k) { 1.0 } else { 0.0 };
            for (i, (sv, s)) in state.iter_mut().zip(s0.row(k)).enumerate() {
                *sv = s + shift * bump.delta[i % d];
            }
            for (i, (cv, c)) in control.iter_mut().zip(u0.row(k)).enumerate() {
                *cv = c + on * bump.delta[i % d];
            }
            let new = self.row_costs(crowd, k, &state, &control)?;
            let old = match base {
                Some(b) => std::borrow::Cow::Borrowed(&b[k]),
                None => std::borrow::Cow::Owned(self.row_costs(crowd, k, s0.row(k), u0.row(k))?),
            };
            for ((t, a), b) in total.iter_mut().zip(&new).zip(old.iter()) {
                *t += a - b;
            }
        }
        Ok(total)
    }
}

fn part(s: &[f64], j: usize, d: usize) -> &[f64] {
    if s.is_empty() {
        s
    } else {
        &s[j * d..(j + 1) * d]
    }
}

/// Mean and standard error of per-path samples.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = tree_sum_slice(xs, |v| v) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = tree_sum_slice(xs, |v| (v - mean) * (v - mean)) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Draw random bumps on random intervals of length `ε` and check that none
/// lowers `crowd`'s expected cost by more than `sigmas` standard errors.
pub fn spike_variation_check(cand: &SpikeCandidate, crowd: Crowd, cfg: &SpikeConfig) -> Result<SpikeReport> {
    cand.check(crowd)?;
    if cfg.epsilon < 0.0 || cfg.magnitude.0 < 0.0 || cfg.magnitude.1 < cfg.magnitude.0 {
        return Err(Error::invalid("spike check needs ε ≥ 0 and 0 ≤ min magnitude ≤ max magnitude"));
    }
    let d = cand.dim();
    let m = cand.grid.steps();
    let len = ((cfg.epsilon / cand.grid.dt()).round() as usize).min(m);
    let base = cand.cost_table(crowd)?;
    let n = cand.y.paths();
    let mut costs = vec![0.0; n];
    for row in &base {
        for (c, v) in costs.iter_mut().zip(row) {
            *c += v;
        }
    }
    let scale = costs.iter().map(|c| c.abs()).sum::<f64>() / n as f64;
    let floor = 1e-9 * (1.0 + scale);
    let tag = match crowd {
        Crowd::Tagged => 0u64,
        Crowd::Ordinary => 1u64 << 32,
    };
    let mut trials = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut rng = CounterRng::new(cfg.seed, Stream::Spike, tag | trial as u64);
        let start = ((rng.uniform(0) * (m - len + 1) as f64) as usize).min(m - len);
        let dir: Vec<f64> = (0..d).map(|i| rng.normal(1 + i as u64)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mag = cfg.magnitude.0 + (cfg.magnitude.1 - cfg.magnitude.0) * rng.uniform(1 + d as u64);
        let delta: Vec<f64> = dir.iter().map(|v| mag * v / norm).collect();
        let bump = Bump { start, len, delta };
        let deltas = cand.deltas_with(crowd, &bump, Some(&base))?;
        let (mean, se) = mean_and_se(&deltas);
        let passed = mean >= -(cfg.sigmas * se + floor);
        trials.push(SpikeTrial {
            start: cand.grid.time(start),
            length: len as f64 * cand.grid.dt(),
            bump: bump.delta,
            mean_delta: mean,
            std_error: se,
            passed,
        });
    }
    let passed = trials.iter().all(|t| t.passed);
    let worst_score = trials
        .iter()
        .map(|t| if t.std_error > 0.0 { t.mean_delta / t.std_error } else if t.mean_delta < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY })
        .fold(f64::INFINITY, f64::min);
    Ok(SpikeReport { crowd, trials, passed, worst_score })
}
