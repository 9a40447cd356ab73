use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{sample_brownian, BrownianBundle};
use crate::ensemble::{Crowd, Ensemble};
use crate::error::{Error, Result};
use crate::game::{adjoint_boundary_rows, argmax_rows, assemble_adjoint_steps, SpikeCandidate, StepSlice};
use crate::grid::TimeGrid;
use crate::paths::PathArray;
use crate::reduce::{mean_rows, tree_sum_blocks};
use crate::rng::Stream;
use crate::scenarios::ScenarioSpec;

use super::backward::{backward_sweep, StepProjectors};
use super::basis::{BasisFamily, Feature, RegressionBasis, RegressionInputs};
use super::forward::forward_euler;

/// Damped fixed-point iteration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub max_iters: usize,
    /// Weight of the new iterate, in `(0, 1]`.
    pub damping: f64,
    /// Relative L² change below which the iteration stops.
    pub tol: f64,
    pub ridge: f64,
    /// Anderson mixing depth; 0 keeps plain damped iteration.
    #[serde(default)]
    pub anderson: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { max_iters: 200, damping: 0.5, tol: 1e-6, ridge: 1e-8, anderson: 0 }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance {} must be positive", self.tol)));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::invalid(format!("ridge {} must be finite and non-negative", self.ridge)));
        }
        Ok(())
    }
}

/// Adjoint paths. Ordinary entries are `None` without an ordinary crowd.
/// Integrands are `d × w_x` (`q^{·x}`) and `d × w_y` (`q^{·y}`) per path.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointEnsemble {
    pub p_yy: PathArray,
    pub p_yx: PathArray,
    pub q_yx: PathArray,
    pub q_yy: PathArray,
    pub p_xx: Option<PathArray>,
    pub p_xy: Option<PathArray>,
    pub q_xx: Option<PathArray>,
    pub q_xy: Option<PathArray>,
}

/// Structured record of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub solver: String,
    pub converged: bool,
    pub iterations: usize,
    /// Fixed-point residual of every iteration.
    pub residuals: Vec<f64>,
    /// Largest regression condition number per iteration.
    pub max_condition: Vec<f64>,
    /// Number of ridge-regularized regressions per iteration.
    pub regularized: Vec<usize>,
    pub tol: f64,
    pub damping: f64,
}

/// A solved equilibrium candidate with the randomness that produced it.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub ensemble: Ensemble,
    pub adjoints: AdjointEnsemble,
    pub diagnostics: Diagnostics,
    pub bundle: BrownianBundle,
    /// Sampled `y_0`, `y_T` and `x_0` (`N × d`; `x_0` empty without an
    /// ordinary crowd).
    pub y_anchor: Vec<f64>,
    pub y_terminal: Vec<f64>,
    pub x_initial: Vec<f64>,
    pub spec: ScenarioSpec,
}

impl EquilibriumSolution {
    /// Candidate for the spike-variation check.
    pub fn spike_candidate(&self) -> SpikeCandidate {
        let e = &self.ensemble;
        SpikeCandidate {
            coeffs: self.spec.coefficients(),
            grid: e.grid.clone(),
            noise_y: self.bundle.level_y(),
            y: e.y.clone(),
            uy: e.uy.clone(),
            x: e.x.clone(),
            ux: e.ux.clone(),
            y_anchor: self.y_anchor.clone(),
            x_target: self.spec.ordinary.as_ref().map_or_else(Vec::new, |o| o.target.clone()),
        }
    }

    /// Check the hard constraints and the adjoint boundary rows sample-wise.
    pub fn check_boundaries(&self) -> Result<()> {
        let e = &self.ensemble;
        let m = e.grid.steps();
        if e.y.row(m) != &self.y_terminal[..] {
            return Err(Error::invalid("tagged terminal row differs from the sampled y_T"));
        }
        if let Some(x) = &e.x {
            if x.row(0) != &self.x_initial[..] {
                return Err(Error::invalid("ordinary initial row differs from the sampled x_0"));
            }
        }
        let coeffs = self.spec.coefficients();
        let (x_terminal, target) = match (&e.x, &self.spec.ordinary) {
            (Some(x), Some(o)) => (x.row(m).to_vec(), o.target.clone()),
            _ => (Vec::new(), Vec::new()),
        };
        let rows = adjoint_boundary_rows(&coeffs, e.y.row(0), &self.y_anchor, &x_terminal, &target)?;
        let a = &self.adjoints;
        if a.p_yy.row(0) != &rows.yy_initial[..] || a.p_yx.row(m) != &rows.yx_terminal[..] {
            return Err(Error::invalid("tagged adjoint boundary rows are inconsistent"));
        }
        if let (Some(pxx), Some(pxy)) = (&a.p_xx, &a.p_xy) {
            if pxx.row(m) != &rows.xx_terminal[..] || pxy.row(0) != &rows.xy_initial[..] {
                return Err(Error::invalid("ordinary adjoint boundary rows are inconsistent"));
            }
        }
        Ok(())
    }
}

/// Assemble regression inputs on every row from the selected features.
fn regression_inputs(
    basis: &RegressionBasis,
    dim: usize,
    by: &PathArray,
    bx: Option<&PathArray>,
    x: Option<&PathArray>,
    uy: &PathArray,
    boundary: &[&[f64]],
) -> RegressionInputs {
    let rows = by.rows();
    let n = by.paths();
    if basis.family == BasisFamily::None {
        return RegressionInputs::empty(rows, n);
    }
    let mut per_coord: Vec<Box<dyn Fn(usize, usize, usize) -> f64 + Sync + '_>> = Vec::new();
    for f in &basis.inputs {
        match f {
            Feature::Brownian => per_coord.push(Box::new(move |k, j, c| by.get(k, j)[c])),
            Feature::OrdinaryBrownian => {
                if let Some(bx) = bx {
                    per_coord.push(Box::new(move |k, j, c| bx.get(k, j)[c]));
                }
            }
            Feature::OrdinaryState => {
                if let Some(x) = x {
                    per_coord.push(Box::new(move |k, j, c| x.get(k, j)[c]));
                }
            }
            Feature::TaggedControl => per_coord.push(Box::new(move |k, j, c| uy.get(k, j)[c])),
            Feature::BoundaryData => {
                for b in boundary {
                    let b = *b;
                    per_coord.push(Box::new(move |_, j, c| b[j * dim + c]));
                }
            }
        }
    }
    let f = per_coord.len();
    let width = f * dim;
    let mut raw = PathArray::zeros(rows, n, width);
    for k in 0..rows {
        raw.row_mut(k).par_chunks_mut(width.max(1)).enumerate().for_each(|(j, out)| {
            if width == 0 {
                return;
            }
            for c in 0..dim {
                for (i, g) in per_coord.iter().enumerate() {
                    out[c * f + i] = g(k, j, c);
                }
            }
        });
    }
    let groups = if basis.per_coordinate {
        (0..dim).map(|c| (c * f..(c + 1) * f).collect()).collect()
    } else {
        vec![(0..width).collect()]
    };
    RegressionInputs { raw, groups }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

struct Sweep {
    x: Option<PathArray>,
    y: PathArray,
    z: PathArray,
    adjoints: AdjointEnsemble,
    /// Best responses to the adjoints of this sweep.
    uy_next: PathArray,
    ux_next: Option<PathArray>,
    max_condition: f64,
    regularized: usize,
}

struct Problem<'a> {
    spec: &'a ScenarioSpec,
    grid: &'a TimeGrid,
    bundle: &'a BrownianBundle,
    ridge: f64,
    by: PathArray,
    bx: Option<PathArray>,
    y0: Vec<f64>,
    yt: Vec<f64>,
    x0: Vec<f64>,
}

impl Problem<'_> {
    /// One pass of the coupled system for fixed controls: states, adjoints and
    /// the maximizing controls. `full` also computes the integrands and the
    /// cross adjoints, which do not feed back into the controls.
    fn sweep(&self, uy: &PathArray, ux: Option<&PathArray>, full: bool) -> Result<Sweep> {
        let spec = self.spec;
        let grid = self.grid;
        let d = spec.dim;
        let m = grid.steps();
        let dt = grid.dt();
        let n = self.bundle.paths();
        let coeffs = spec.coefficients();
        let (wx, wy) = spec.noise_dims();

        let x = match (&spec.ordinary, ux) {
            (Some(o), Some(ux)) => {
                let sigma = o.sigma;
                Some(forward_euler(
                    grid,
                    self.bundle,
                    &self.x0,
                    d,
                    |k, j, _, out| out.copy_from_slice(ux.get(k, j)),
                    |_, _, _, out| {
                        out.fill(0.0);
                        for i in 0..d {
                            out[i * wx + i] = sigma;
                        }
                    },
                )?)
            }
            _ => None,
        };

        let mut boundary: Vec<&[f64]> = vec![&self.y0, &self.yt];
        if x.is_some() {
            boundary.push(&self.x0);
        }
        let inputs = regression_inputs(&spec.solver.basis, d, &self.by, self.bx.as_ref(), x.as_ref(), uy, &boundary);
        let projectors = StepProjectors::fit(&inputs, &spec.solver.basis, self.ridge, m)?;

        let noise = spec.tagged.noise;
        let by = &self.by;
        let ysol = backward_sweep(grid, self.bundle, &inputs, &projectors, &self.yt, d, full, |k, j, out| {
            let u = uy.get(k, j);
            let b = by.get(k, j);
            for i in 0..d {
                out[i] = u[i] + noise * b[i];
            }
        })?;
        let y = ysol.values;

        // Forward adjoints and the drifts of the backward ones.
        let empty: &[f64] = &[];
        let x_terminal = x.as_ref().map_or_else(Vec::new, |x| x.row(m).to_vec());
        let target = spec.ordinary.as_ref().map_or_else(Vec::new, |o| o.target.clone());
        let rows = adjoint_boundary_rows(&coeffs, y.row(0), &self.y0, &x_terminal, &target)?;
        let mut p_yy = PathArray::zeros(m + 1, n, d);
        let mut p_xy = x.as_ref().map(|_| PathArray::zeros(m + 1, n, d));
        p_yy.row_mut(0).copy_from_slice(&rows.yy_initial);
        if let Some(p) = p_xy.as_mut() {
            p.row_mut(0).copy_from_slice(&rows.xy_initial);
        }
        let mut drift_xx = PathArray::zeros(m, n, if x.is_some() { d } else { 0 });
        let mut drift_yx = PathArray::zeros(m, n, d);
        for k in 0..m {
            let mean_y = mean_rows(y.row(k), d);
            let mean_x = x.as_ref().map_or_else(Vec::new, |x| mean_rows(x.row(k), d));
            let slice = StepSlice {
                t: grid.time(k),
                dim: d,
                y: y.row(k),
                uy: uy.row(k),
                noise_y: by.row(k),
                x: x.as_ref().map_or(empty, |x| x.row(k)),
                ux: ux.map_or(empty, |u| u.row(k)),
                mean_y: &mean_y,
                mean_x: &mean_x,
            };
            let pxy_k = p_xy.as_ref().map_or_else(Vec::new, |p| p.row(k).to_vec());
            let step = assemble_adjoint_steps(&coeffs, &slice, p_yy.row(k), &pxy_k, dt)?;
            p_yy.row_mut(k + 1).copy_from_slice(&step.next_yy);
            if let Some(p) = p_xy.as_mut() {
                p.row_mut(k + 1).copy_from_slice(&step.next_xy);
            }
            drift_yx.row_mut(k).copy_from_slice(&step.drifts.yx);
            if x.is_some() {
                drift_xx.row_mut(k).copy_from_slice(&step.drifts.xx);
            }
        }
        if let Some(k) = p_yy.first_non_finite_row() {
            return Err(Error::NonFinite { what: "tagged adjoint", step: k });
        }

        let xsol = if x.is_some() {
            let dx = &drift_xx;
            Some(backward_sweep(grid, self.bundle, &inputs, &projectors, &rows.xx_terminal, d, full, |k, j, out| {
                out.copy_from_slice(dx.get(k, j));
            })?)
        } else {
            None
        };

        // Best responses: step k pairs with the adjoint carried across
        // [t_k, t_{k+1}], the last row with the terminal adjoint.
        let mut uy_next = PathArray::zeros(m + 1, n, d);
        for k in 0..=m {
            let src = if k < m { p_yy.row(k + 1) } else { p_yy.row(m) };
            argmax_rows(Crowd::Tagged, &coeffs, grid.time(k), src, uy_next.row_mut(k))?;
        }
        let ux_next = match &xsol {
            Some(sol) => {
                let mut u = PathArray::zeros(m + 1, n, d);
                let mut pbar = vec![0.0; n * d];
                for k in 0..=m {
                    let p = sol.values.row(k);
                    if k < m {
                        for ((b, pi), dr) in pbar.iter_mut().zip(p).zip(drift_xx.row(k)) {
                            *b = pi + dr * dt;
                        }
                    } else {
                        pbar.copy_from_slice(p);
                    }
                    argmax_rows(Crowd::Ordinary, &coeffs, grid.time(k), &pbar, u.row_mut(k))?;
                }
                Some(u)
            }
            None => None,
        };

        let split = |zfull: &PathArray| -> (PathArray, PathArray) {
            let w = wx + wy;
            let mut qx = PathArray::zeros(m + 1, n, d * wx);
            let mut qy = PathArray::zeros(m + 1, n, d * wy);
            for k in 0..=m {
                for j in 0..n {
                    let zr = zfull.get(k, j);
                    for i in 0..d {
                        for c in 0..wx {
                            qx.get_mut(k, j)[i * wx + c] = zr[i * w + c];
                        }
                        for c in 0..wy {
                            qy.get_mut(k, j)[i * wy + c] = zr[i * w + wx + c];
                        }
                    }
                }
            }
            (qx, qy)
        };

        let (p_yx, q_yx, q_yy) = if full {
            let dyx = &drift_yx;
            let sol = backward_sweep(grid, self.bundle, &inputs, &projectors, &rows.yx_terminal, d, true, |k, j, out| {
                out.copy_from_slice(dyx.get(k, j));
            })?;
            let (qx, qy) = split(&sol.integrand);
            (sol.values, qx, qy)
        } else {
            (PathArray::zeros(m + 1, n, d), PathArray::zeros(m + 1, n, d * wx), PathArray::zeros(m + 1, n, d * wy))
        };
        let (p_xx, q_xx, q_xy) = match xsol {
            Some(sol) => {
                let (qx, qy) = split(&sol.integrand);
                (Some(sol.values), Some(qx), Some(qy))
            }
            None => (None, None, None),
        };

        Ok(Sweep {
            x,
            y,
            z: ysol.integrand,
            adjoints: AdjointEnsemble { p_yy, p_yx, q_yx, q_yy, p_xx, p_xy, q_xx, q_xy },
            uy_next,
            ux_next,
            max_condition: projectors.max_condition(),
            regularized: projectors.regularized_count(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    tree_sum_blocks(a.len(), 1, |r, acc| acc[0] = a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum())[0]
}

/// Damped fixed-point update, optionally with Anderson mixing over the last
/// `depth` iterates. Buffers are recycled between iterations.
struct Mixer {
    depth: usize,
    f: Vec<f64>,
    du: VecDeque<Vec<f64>>,
    df: VecDeque<Vec<f64>>,
    spare: Vec<(Vec<f64>, Vec<f64>)>,
    last_u: Vec<f64>,
    last_f: Vec<f64>,
    has_last: bool,
}

impl Mixer {
    fn new(depth: usize) -> Self {
        Mixer {
            depth,
            f: Vec::new(),
            du: VecDeque::new(),
            df: VecDeque::new(),
            spare: Vec::new(),
            last_u: Vec::new(),
            last_f: Vec::new(),
            has_last: false,
        }
    }

    fn reset(&mut self) {
        while let (Some(a), Some(b)) = (self.du.pop_front(), self.df.pop_front()) {
            self.spare.push((a, b));
        }
        self.has_last = false;
    }

    /// Overwrite `u` with the next iterate, given its image `g = G(u)`.
    fn step(&mut self, u: &mut [f64], g: &[f64], alpha: f64) {
        self.f.clear();
        self.f.extend(g.iter().zip(u.iter()).map(|(a, b)| a - b));
        if self.depth == 0 {
            for (x, fx) in u.iter_mut().zip(&self.f) {
                *x += alpha * fx;
            }
            return;
        }
        if self.has_last {
            let (mut du, mut df) = if self.du.len() == self.depth {
                (self.du.pop_front().expect("full"), self.df.pop_front().expect("full"))
            } else {
                self.spare.pop().unwrap_or_default()
            };
            du.clear();
            du.extend(u.iter().zip(&self.last_u).map(|(a, b)| a - b));
            df.clear();
            df.extend(self.f.iter().zip(&self.last_f).map(|(a, b)| a - b));
            self.du.push_back(du);
            self.df.push_back(df);
        }
        self.last_u.clear();
        self.last_u.extend_from_slice(u);
        self.last_f.clear();
        self.last_f.extend_from_slice(&self.f);
        self.has_last = true;

        for (x, fx) in u.iter_mut().zip(&self.f) {
            *x += alpha * fx;
        }
        let h = self.df.len();
        if h == 0 {
            return;
        }
        let mut gram = DMatrix::<f64>::zeros(h, h);
        let mut rhs = DVector::<f64>::zeros(h);
        for i in 0..h {
            for j in i..h {
                let v = dot(&self.df[i], &self.df[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
            rhs[i] = dot(&self.df[i], &self.f);
        }
        let reg = 1e-10 * gram.trace().max(f64::MIN_POSITIVE);
        for i in 0..h {
            gram[(i, i)] += reg;
        }
        if let Some(gamma) = gram.cholesky().map(|c| c.solve(&rhs)) {
            for i in 0..h {
                let gi = gamma[i];
                for ((x, a), b) in u.iter_mut().zip(&self.du[i]).zip(&self.df[i]) {
                    *x -= gi * (a + alpha * b);
                }
            }
        }
    }
}

/// Straight-line velocities from the boundary data, used as the first iterate.
fn initial_controls(grid: &TimeGrid, d: usize, from: &[f64], to: impl Fn(usize) -> Vec<f64>) -> PathArray {
    let n = from.len() / d;
    let m = grid.steps();
    let mut u = PathArray::zeros(m + 1, n, d);
    for j in 0..n {
        let end = to(j);
        let v: Vec<f64> = (0..d).map(|i| (end[i] - from[j * d + i]) / grid.horizon()).collect();
        for k in 0..=m {
            u.get_mut(k, j).copy_from_slice(&v);
        }
    }
    u
}

/// Damped Picard iteration on the controls for the equilibrium system: the
/// forward state, the regression-based backward state, the forward and
/// backward adjoints, and the closed-form best responses.
pub fn solve_equilibrium(
    spec: &ScenarioSpec,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    cfg: &PicardConfig,
) -> Result<EquilibriumSolution> {
    spec.validate()?;
    cfg.validate()?;
    if paths < 2 {
        return Err(Error::invalid("at least two paths are needed"));
    }
    let d = spec.dim;
    let m = grid.steps();
    let dims = spec.noise_dims();
    let bundle = sample_brownian(grid, paths, dims, seed)?;
    let y0 = spec.tagged.initial.sample(paths, seed, Stream::TaggedInitial);
    let yt = spec.tagged.terminal.sample(paths, seed, Stream::TaggedTerminal);
    let x0 = spec.ordinary.as_ref().map_or_else(Vec::new, |o| o.initial.sample(paths, seed, Stream::OrdinaryInitial));
    let prob = Problem {
        spec,
        grid,
        bundle: &bundle,
        ridge: cfg.ridge,
        by: bundle.level_y(),
        bx: if dims.0 > 0 { Some(bundle.level_x()) } else { None },
        y0,
        yt,
        x0,
    };

    let mut uy = initial_controls(grid, d, &prob.y0, |j| prob.yt[j * d..(j + 1) * d].to_vec());
    let mut ux = spec.ordinary.as_ref().map(|o| initial_controls(grid, d, &prob.x0, |_| o.target.clone()));

    let mut diag = Diagnostics {
        solver: "lsmc".into(),
        converged: false,
        iterations: 0,
        residuals: Vec::new(),
        max_condition: Vec::new(),
        regularized: Vec::new(),
        tol: cfg.tol,
        damping: cfg.damping,
    };
    let mut prev_states: Option<(PathArray, Option<PathArray>)> = None;
    let mut mixer = Mixer::new(cfg.anderson);
    let mut best = f64::INFINITY;
    let (mut cur, mut next) = (Vec::new(), Vec::new());
    for iter in 0..cfg.max_iters {
        let s = prob.sweep(&uy, ux.as_ref(), false)?;
        let mut residual = relative_change(s.uy_next.as_slice(), uy.as_slice());
        if let (Some(a), Some(b)) = (&s.ux_next, &ux) {
            residual = residual.max(relative_change(a.as_slice(), b.as_slice()));
        }
        if let Some((py, px)) = &prev_states {
            residual = residual.max(relative_change(s.y.as_slice(), py.as_slice()));
            if let (Some(a), Some(b)) = (&s.x, px) {
                residual = residual.max(relative_change(a.as_slice(), b.as_slice()));
            }
        }
        diag.iterations = iter + 1;
        diag.residuals.push(residual);
        diag.max_condition.push(s.max_condition);
        diag.regularized.push(s.regularized);
        log::debug!("picard iteration {}: residual {residual:e}", iter + 1);
        if !residual.is_finite() {
            return Err(Error::NonFinite { what: "picard residual", step: iter + 1 });
        }
        if residual < cfg.tol {
            diag.converged = true;
            uy = s.uy_next;
            ux = s.ux_next;
            break;
        }
        let split = uy.as_slice().len();
        cur.clear();
        cur.extend_from_slice(uy.as_slice());
        next.clear();
        next.extend_from_slice(s.uy_next.as_slice());
        if let (Some(u), Some(v)) = (&ux, &s.ux_next) {
            cur.extend_from_slice(u.as_slice());
            next.extend_from_slice(v.as_slice());
        }
        if residual > 10.0 * best {
            mixer.reset();
        }
        best = best.min(residual);
        mixer.step(&mut cur, &next, cfg.damping);
        uy.as_mut_slice().copy_from_slice(&cur[..split]);
        if let Some(u) = ux.as_mut() {
            u.as_mut_slice().copy_from_slice(&cur[split..]);
        }
        prev_states = Some((s.y, s.x));
    }
    if !diag.converged {
        log::warn!(
            "picard iteration did not converge in {} iterations (last residual {:e})",
            cfg.max_iters,
            diag.residuals.last().copied().unwrap_or(f64::NAN)
        );
    }

    // States and adjoints generated by the controls that are returned.
    let fin = prob.sweep(&uy, ux.as_ref(), true)?;
    let ensemble = Ensemble { grid: grid.clone(), dim: d, noise_dims: dims, y: fin.y, z: fin.z, uy, x: fin.x, ux };
    if !ensemble.is_finite() {
        return Err(Error::NonFinite { what: "equilibrium ensemble", step: m });
    }
    let Problem { y0, yt, x0, .. } = prob;
    Ok(EquilibriumSolution {
        ensemble,
        adjoints: fin.adjoints,
        diagnostics: diag,
        bundle,
        y_anchor: y0,
        y_terminal: yt,
        x_initial: x0,
        spec: spec.clone(),
    })
}
