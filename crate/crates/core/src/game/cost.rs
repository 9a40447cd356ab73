use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::ensemble::Crowd;
use crate::error::{Error, Result};
use crate::lq::{eval_desired_velocity, DesiredVelocityLaw};

/// Arguments of every coefficient: `(t, y, μ^y, v, z, x, μ^x, u)` with laws
/// represented by their means and `B^y_t` for the tagged drift.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint<'a> {
    pub t: f64,
    pub y: &'a [f64],
    pub mean_y: &'a [f64],
    pub uy: &'a [f64],
    pub z: &'a [f64],
    pub x: &'a [f64],
    pub mean_x: &'a [f64],
    pub ux: &'a [f64],
    pub noise_y: &'a [f64],
}

impl<'a> EvalPoint<'a> {
    /// `(own state, own mean, own control, other state, other mean)`.
    pub fn split(&self, crowd: Crowd) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        match crowd {
            Crowd::Tagged => (self.y, self.mean_y, self.uy, self.x, self.mean_x),
            Crowd::Ordinary => (self.x, self.mean_x, self.ux, self.y, self.mean_y),
        }
    }
}

/// Value and partial derivatives of a running cost, in the crowd's own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CostEval {
    pub value: f64,
    pub d_state: Vec<f64>,
    pub d_control: Vec<f64>,
    pub d_other: Vec<f64>,
    pub d_mean: Vec<f64>,
    pub d_other_mean: Vec<f64>,
}

impl CostEval {
    pub fn zeros(dim: usize) -> Self {
        CostEval {
            value: 0.0,
            d_state: vec![0.0; dim],
            d_control: vec![0.0; dim],
            d_other: vec![0.0; dim],
            d_mean: vec![0.0; dim],
            d_other_mean: vec![0.0; dim],
        }
    }

    pub fn reset(&mut self) {
        self.value = 0.0;
        for v in [&mut self.d_state, &mut self.d_control, &mut self.d_other, &mut self.d_mean, &mut self.d_other_mean] {
            v.fill(0.0);
        }
    }
}

/// Arguments of a user-supplied, control-free running cost.
#[derive(Debug, Clone, Copy)]
pub struct CostArgs<'a> {
    pub t: f64,
    pub state: &'a [f64],
    pub mean: &'a [f64],
    pub other: &'a [f64],
    pub other_mean: &'a [f64],
}

/// Gradient of a custom cost with respect to `(state, mean, other, other_mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub state: Vec<f64>,
    pub mean: Vec<f64>,
    pub other: Vec<f64>,
    pub other_mean: Vec<f64>,
}

type ValueFn = dyn Fn(&CostArgs) -> f64 + Send + Sync;
type GradFn = dyn Fn(&CostArgs) -> CostGradient + Send + Sync;

/// A state cost given by closures. Without an analytic gradient, central
/// differences are used and a warning is logged once.
#[derive(Clone)]
pub struct CustomCost {
    pub name: String,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    warned: Arc<AtomicBool>,
}

/// Step of the finite-difference fallback.
pub const FD_STEP: f64 = 1e-6;

impl CustomCost {
    pub fn new(name: impl Into<String>, value: impl Fn(&CostArgs) -> f64 + Send + Sync + 'static) -> Self {
        CustomCost { name: name.into(), value: Arc::new(value), gradient: None, warned: Arc::new(AtomicBool::new(false)) }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&CostArgs) -> CostGradient + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, a: &CostArgs) -> f64 {
        (self.value)(a)
    }

    pub fn gradient(&self, a: &CostArgs) -> CostGradient {
        if let Some(g) = &self.gradient {
            return g(a);
        }
        if !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("cost `{}` has no analytic gradient; using central differences", self.name);
        }
        let f = &self.value;
        let fd = |slot: usize| -> Vec<f64> {
            let base = [a.state, a.mean, a.other, a.other_mean][slot];
            (0..base.len())
                .map(|i| {
                    let mut plus = base.to_vec();
                    let mut minus = base.to_vec();
                    plus[i] += FD_STEP;
                    minus[i] -= FD_STEP;
                    let with = |v: &[f64]| {
                        let mut b = *a;
                        match slot {
                            0 => b.state = v,
                            1 => b.mean = v,
                            2 => b.other = v,
                            _ => b.other_mean = v,
                        }
                        f(&b)
                    };
                    (with(&plus) - with(&minus)) / (2.0 * FD_STEP)
                })
                .collect()
        };
        CostGradient { state: fd(0), mean: fd(1), other: fd(2), other_mean: fd(3) }
    }
}

impl fmt::Debug for CustomCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCost").field("name", &self.name).field("gradient", &self.gradient.is_some()).finish()
    }
}

/// Running-cost building blocks, each `½ weight · |…|²` in the crowd's own
/// state `s` and control `u`.
#[derive(Debug, Clone)]
pub enum CostTerm {
    /// `½ w |u|²`
    ControlEnergy { weight: f64 },
    /// `½ w |u − v_des(t)|²`
    VelocityTracking { weight: f64, law: DesiredVelocityLaw },
    /// `½ w |s − c|²`
    PointDistance { weight: f64, point: Vec<f64> },
    /// `½ w |s − E s|²`
    DistanceToOwnMean { weight: f64 },
    /// `½ w |s − E o|²` for the other crowd's state `o`
    DistanceToOtherMean { weight: f64 },
    /// `½ w |s − o|²` against the other crowd's state on the same path
    DistanceToOther { weight: f64 },
    Custom(CustomCost),
}

impl CostTerm {
    /// Add this term's value and partials at `point` into `acc`.
    pub fn accumulate(&self, crowd: Crowd, point: &EvalPoint, horizon: f64, acc: &mut CostEval) {
        let (s, ms, u, o, mo) = point.split(crowd);
        let d = s.len();
        match self {
            CostTerm::ControlEnergy { weight } => {
                for i in 0..d {
                    acc.value += 0.5 * weight * u[i] * u[i];
                    acc.d_control[i] += weight * u[i];
                }
            }
            CostTerm::VelocityTracking { weight, law } => {
                let v = eval_desired_velocity(law, point.t, horizon, d);
                for i in 0..d {
                    let e = u[i] - v[i];
                    acc.value += 0.5 * weight * e * e;
                    acc.d_control[i] += weight * e;
                }
            }
            CostTerm::PointDistance { weight, point: c } => {
                for i in 0..d {
                    let e = s[i] - c[i];
                    acc.value += 0.5 * weight * e * e;
                    acc.d_state[i] += weight * e;
                }
            }
            CostTerm::DistanceToOwnMean { weight } => {
                for i in 0..d {
                    let e = s[i] - ms[i];
                    acc.value += 0.5 * weight * e * e;
                    acc.d_state[i] += weight * e;
                    acc.d_mean[i] -= weight * e;
                }
            }
            CostTerm::DistanceToOtherMean { weight } => {
                for i in 0..d {
                    let e = s[i] - mo[i];
                    acc.value += 0.5 * weight * e * e;
                    acc.d_state[i] += weight * e;
                    acc.d_other_mean[i] -= weight * e;
                }
            }
            CostTerm::DistanceToOther { weight } => {
                for i in 0..d {
                    let e = s[i] - o[i];
                    acc.value += 0.5 * weight * e * e;
                    acc.d_state[i] += weight * e;
                    acc.d_other[i] -= weight * e;
                }
            }
            CostTerm::Custom(c) => {
                let args = CostArgs { t: point.t, state: s, mean: ms, other: o, other_mean: mo };
                acc.value += c.value(&args);
                let g = c.gradient(&args);
                add(&mut acc.d_state, &g.state);
                add(&mut acc.d_mean, &g.mean);
                add(&mut acc.d_other, &g.other);
                add(&mut acc.d_other_mean, &g.other_mean);
            }
        }
    }

    /// Contribution `(a, c(t))` to the control part `½ a|u|² − c·u + const`.
    fn control_quadratic(&self, t: f64, horizon: f64, dim: usize) -> Option<(f64, Vec<f64>)> {
        match self {
            CostTerm::ControlEnergy { weight } => Some((*weight, vec![0.0; dim])),
            CostTerm::VelocityTracking { weight, law } => {
                let v = eval_desired_velocity(law, t, horizon, dim);
                Some((*weight, v.iter().map(|vi| weight * vi).collect()))
            }
            _ => None,
        }
    }

    pub fn weight(&self) -> Option<f64> {
        match self {
            CostTerm::ControlEnergy { weight }
            | CostTerm::VelocityTracking { weight, .. }
            | CostTerm::PointDistance { weight, .. }
            | CostTerm::DistanceToOwnMean { weight }
            | CostTerm::DistanceToOtherMean { weight }
            | CostTerm::DistanceToOther { weight } => Some(*weight),
            CostTerm::Custom(_) => None,
        }
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Drift, diffusion and costs of one crowd. Drifts are `u` (plus
/// `λ_noise B^y_t` for the tagged crowd) and the ordinary diffusion is `σ I`,
/// so neither depends on states or laws.
#[derive(Debug, Clone)]
pub struct CrowdCoefficients {
    /// `λ_noise` for the tagged crowd, `σ` for the ordinary crowd.
    pub noise: f64,
    pub running: Vec<CostTerm>,
    /// Weight of `½ w |s − anchor|²` at `t = 0` (tagged) or `t = T` (ordinary).
    pub boundary_weight: f64,
}

/// Coefficients of both crowds.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub dim: usize,
    pub horizon: f64,
    pub tagged: CrowdCoefficients,
    pub ordinary: Option<CrowdCoefficients>,
}

impl CoefficientSet {
    pub fn crowd(&self, crowd: Crowd) -> Result<&CrowdCoefficients> {
        match crowd {
            Crowd::Tagged => Ok(&self.tagged),
            Crowd::Ordinary => self.ordinary.as_ref().ok_or_else(|| Error::invalid("scenario has no ordinary crowd")),
        }
    }

    /// `b^y = u^y + λ_noise B^y_t`.
    pub fn drift_y(&self, p: &EvalPoint) -> Vec<f64> {
        p.uy.iter().zip(p.noise_y).map(|(u, b)| u + self.tagged.noise * b).collect()
    }

    /// `b^x = u^x`.
    pub fn drift_x(&self, p: &EvalPoint) -> Vec<f64> {
        p.ux.to_vec()
    }

    /// Scalar `σ` of `σ^x = σ I`.
    pub fn sigma_x(&self) -> f64 {
        self.ordinary.as_ref().map_or(0.0, |o| o.noise)
    }

    pub fn running_cost(&self, crowd: Crowd, p: &EvalPoint) -> Result<CostEval> {
        let mut acc = CostEval::zeros(self.dim);
        self.running_cost_into(crowd, p, &mut acc)?;
        Ok(acc)
    }

    /// `running_cost` into a caller-owned buffer, which is reset first.
    pub fn running_cost_into(&self, crowd: Crowd, p: &EvalPoint, acc: &mut CostEval) -> Result<()> {
        let c = self.crowd(crowd)?;
        acc.reset();
        for term in &c.running {
            term.accumulate(crowd, p, self.horizon, acc);
        }
        Ok(())
    }

    /// `½ w |s − anchor|²` and its gradient in `s`.
    pub fn boundary_cost(&self, crowd: Crowd, state: &[f64], anchor: &[f64]) -> Result<(f64, Vec<f64>)> {
        let w = self.crowd(crowd)?.boundary_weight;
        let grad: Vec<f64> = state.iter().zip(anchor).map(|(s, a)| w * (s - a)).collect();
        let value = 0.5 * w * state.iter().zip(anchor).map(|(s, a)| (s - a) * (s - a)).sum::<f64>();
        Ok((value, grad))
    }

    /// Control part `½ a|u|² − c(t)·u` of the running cost. Custom terms are
    /// control-free and contribute nothing.
    pub fn control_quadratic(&self, crowd: Crowd, t: f64) -> Result<(f64, Vec<f64>)> {
        let mut a = 0.0;
        let mut c = vec![0.0; self.dim];
        for term in &self.crowd(crowd)?.running {
            if let Some((w, lin)) = term.control_quadratic(t, self.horizon, self.dim) {
                a += w;
                add(&mut c, &lin);
            }
        }
        Ok((a, c))
    }

    /// True when every running term is one of the built-in quadratics.
    pub fn is_quadratic(&self) -> bool {
        let builtin = |c: &CrowdCoefficients| c.running.iter().all(|t| !matches!(t, CostTerm::Custom(_)));
        builtin(&self.tagged) && self.ordinary.as_ref().is_none_or(builtin)
    }
}
