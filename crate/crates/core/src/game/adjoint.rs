use rayon::prelude::*;

use crate::ensemble::Crowd;
use crate::error::Result;
use crate::reduce::tree_sum_by;

use super::cost::{CoefficientSet, CostEval, CostTerm, EvalPoint};
use super::measure::{mean_derivative_quadratic, MeanForm};

/// All paths at one grid time (`N × d` slices; ordinary slices empty when the
/// scenario has no ordinary crowd).
#[derive(Debug, Clone, Copy)]
pub struct StepSlice<'a> {
    pub t: f64,
    pub dim: usize,
    pub y: &'a [f64],
    pub uy: &'a [f64],
    pub noise_y: &'a [f64],
    pub x: &'a [f64],
    pub ux: &'a [f64],
    pub mean_y: &'a [f64],
    pub mean_x: &'a [f64],
}

impl<'a> StepSlice<'a> {
    pub fn paths(&self) -> usize {
        self.y.len() / self.dim
    }

    pub fn point(&self, n: usize) -> EvalPoint<'a> {
        let d = self.dim;
        let part = |s: &'a [f64]| if s.is_empty() { s } else { &s[n * d..(n + 1) * d] };
        EvalPoint {
            t: self.t,
            y: part(self.y),
            mean_y: self.mean_y,
            uy: part(self.uy),
            z: &[],
            x: part(self.x),
            mean_x: self.mean_x,
            ux: part(self.ux),
            noise_y: part(self.noise_y),
        }
    }
}

/// Adjoint drifts `D` in `dp = D dt + …` for every path, i.e.
/// `−{∂_• H + E[*(∂_μ H)]}`. Ordinary entries are empty without an ordinary
/// crowd.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointDrifts {
    pub yy: Vec<f64>,
    pub yx: Vec<f64>,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
}

/// Forward-adjoint rows after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointStep {
    pub drifts: AdjointDrifts,
    pub next_yy: Vec<f64>,
    pub next_xy: Vec<f64>,
}

/// Boundary rows: `p^{yy}_0 = ∂_y h^y`, `p^{xy}_0 = 0`, `p^{xx}_T = −∂_x h^x`,
/// `p^{yx}_T = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRows {
    pub yy_initial: Vec<f64>,
    pub xy_initial: Vec<f64>,
    pub xx_terminal: Vec<f64>,
    pub yx_terminal: Vec<f64>,
}

/// Per-crowd derivatives: own-state gradient, other-state gradient and the two
/// law contributions (shared by all paths).
fn crowd_drifts(coeffs: &CoefficientSet, crowd: Crowd, slice: &StepSlice) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = slice.dim;
    let n = slice.paths();
    let terms = &coeffs.crowd(crowd)?.running;
    let (own_slice, other_mean) = match crowd {
        Crowd::Tagged => (slice.y, slice.mean_x),
        Crowd::Ordinary => (slice.x, slice.mean_y),
    };

    // Law derivatives depend on the laws only, never on the evaluation path.
    let mut law_own = vec![0.0; d];
    let mut law_other = vec![0.0; d];
    let mut custom = false;
    for term in terms {
        match term {
            CostTerm::DistanceToOwnMean { weight } => {
                let g = mean_derivative_quadratic(&MeanForm::DistToMean, own_slice, d)?;
                for i in 0..d {
                    law_own[i] += 0.5 * weight * g[i];
                }
            }
            CostTerm::DistanceToOtherMean { weight } => {
                // ½w|s − m|² = ½w|m − s|²: minus the mean-to-point form at `m`.
                let g = mean_derivative_quadratic(&MeanForm::MeanToPoint(other_mean.to_vec()), own_slice, d)?;
                for i in 0..d {
                    law_other[i] -= 0.5 * weight * g[i];
                }
            }
            CostTerm::Custom(_) => custom = true,
            _ => {}
        }
    }
    if custom {
        // Only custom terms still carry law gradients: isolate them.
        let mut only = coeffs.clone();
        let c = match crowd {
            Crowd::Tagged => &mut only.tagged,
            Crowd::Ordinary => only.ordinary.as_mut().expect("crowd exists"),
        };
        c.running.retain(|t| matches!(t, CostTerm::Custom(_)));
        let sums = tree_sum_by(n, 2 * d, |j, acc| {
            let e = only.running_cost(crowd, &slice.point(j)).expect("crowd exists");
            for i in 0..d {
                acc[i] += e.d_mean[i];
                acc[d + i] += e.d_other_mean[i];
            }
        });
        for i in 0..d {
            law_own[i] += sums[i] / n as f64;
            law_other[i] += sums[d + i] / n as f64;
        }
    }

    let mut own = vec![0.0; n * d];
    let mut other = vec![0.0; n * d];
    own.par_chunks_mut(d).zip(other.par_chunks_mut(d)).enumerate().try_for_each_init(
        || CostEval::zeros(d),
        |e, (j, (o, ot))| -> Result<()> {
            coeffs.running_cost_into(crowd, &slice.point(j), e)?;
            for i in 0..d {
                o[i] = e.d_state[i] + law_own[i];
                ot[i] = e.d_other[i] + law_other[i];
            }
            Ok(())
        },
    )?;
    Ok((own, other))
}

/// Drifts of the four adjoints at one time step.
pub fn adjoint_drifts(coeffs: &CoefficientSet, slice: &StepSlice) -> Result<AdjointDrifts> {
    let (yy, yx) = crowd_drifts(coeffs, Crowd::Tagged, slice)?;
    let (xx, xy) = if coeffs.ordinary.is_some() {
        crowd_drifts(coeffs, Crowd::Ordinary, slice)?
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(AdjointDrifts { yy, yx, xx, xy })
}

/// Drifts at `t_k` and the forward adjoints `p^{yy}`, `p^{xy}` advanced to
/// `t_{k+1}` (their martingale parts vanish since `∂_z H = 0`).
pub fn assemble_adjoint_steps(
    coeffs: &CoefficientSet,
    slice: &StepSlice,
    p_yy: &[f64],
    p_xy: &[f64],
    dt: f64,
) -> Result<AdjointStep> {
    let drifts = adjoint_drifts(coeffs, slice)?;
    let step = |p: &[f64], d: &[f64]| p.iter().zip(d).map(|(a, b)| a + b * dt).collect::<Vec<f64>>();
    let next_yy = step(p_yy, &drifts.yy);
    let next_xy = step(p_xy, &drifts.xy);
    Ok(AdjointStep { drifts, next_yy, next_xy })
}

/// Boundary rows from `Y_0`, its anchors `y_0`, and (if present) `X_T` with
/// target `x_T`.
pub fn adjoint_boundary_rows(
    coeffs: &CoefficientSet,
    y_initial: &[f64],
    y_anchor: &[f64],
    x_terminal: &[f64],
    x_target: &[f64],
) -> Result<BoundaryRows> {
    let d = coeffs.dim;
    let n = y_initial.len() / d;
    let mut yy = vec![0.0; n * d];
    for j in 0..n {
        let (_, g) = coeffs.boundary_cost(Crowd::Tagged, &y_initial[j * d..(j + 1) * d], &y_anchor[j * d..(j + 1) * d])?;
        yy[j * d..(j + 1) * d].copy_from_slice(&g);
    }
    let mut xx = Vec::new();
    if coeffs.ordinary.is_some() {
        xx = vec![0.0; n * d];
        for j in 0..n {
            let (_, g) = coeffs.boundary_cost(Crowd::Ordinary, &x_terminal[j * d..(j + 1) * d], x_target)?;
            for i in 0..d {
                xx[j * d + i] = -g[i];
            }
        }
    }
    let xy_initial = if coeffs.ordinary.is_some() { vec![0.0; n * d] } else { Vec::new() };
    Ok(BoundaryRows { yy_initial: yy, xy_initial, xx_terminal: xx, yx_terminal: vec![0.0; n * d] })
}
