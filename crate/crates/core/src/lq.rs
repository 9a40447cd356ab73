//! Linear-quadratic tagged problems solved by the matching ansatz
//! `Y_t = γ(t) p_t + η(t) B^y_t + θ(t)`.

use serde::{Deserialize, Serialize};

use crate::brownian::BrownianBundle;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::law::GaussianLaw;
use crate::paths::PathArray;

/// Riccati factors beyond this magnitude are reported as a blow-up.
pub const BLOW_UP_BOUND: f64 = 1e6;

/// Time profile of the preferred velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesiredVelocityLaw {
    None,
    /// `sign(t − T/2) · magnitude`.
    PiecewiseSign { magnitude: Vec<f64> },
    /// `max{0.1, arctan(πt − 1.6)} · direction`.
    Arctan { direction: Vec<f64> },
    /// Piecewise-linear interpolation of tabulated values, held constant
    /// outside the table.
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

/// Scalar speed of the arctan walking profile.
pub fn arctan_speed(t: f64) -> f64 {
    (std::f64::consts::PI * t - 1.6).atan().max(0.1)
}

/// Evaluate `v_des(t)` in `ℝ^dim`.
pub fn eval_desired_velocity(law: &DesiredVelocityLaw, t: f64, horizon: f64, dim: usize) -> Vec<f64> {
    match law {
        DesiredVelocityLaw::None => vec![0.0; dim],
        DesiredVelocityLaw::PiecewiseSign { magnitude } => {
            let s = t - horizon / 2.0;
            let sign = if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            };
            magnitude.iter().map(|m| sign * m).collect()
        }
        DesiredVelocityLaw::Arctan { direction } => {
            let v = arctan_speed(t);
            direction.iter().map(|d| v * d).collect()
        }
        DesiredVelocityLaw::Table { times, values } => {
            if times.is_empty() {
                return vec![0.0; dim];
            }
            let i = times.partition_point(|&s| s <= t);
            if i == 0 {
                return values[0].clone();
            }
            if i == times.len() {
                return values[i - 1].clone();
            }
            let (t0, t1) = (times[i - 1], times[i]);
            let w = (t - t0) / (t1 - t0);
            values[i - 1].iter().zip(&values[i]).map(|(a, b)| a + w * (b - a)).collect()
        }
    }
}

impl DesiredVelocityLaw {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check = |v: &[f64], what: &str| {
            if v.len() != dim {
                return Err(Error::invalid(format!("{what} has {} components, expected {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{what} is not finite")));
            }
            Ok(())
        };
        match self {
            DesiredVelocityLaw::None => Ok(()),
            DesiredVelocityLaw::PiecewiseSign { magnitude } => check(magnitude, "desired-velocity magnitude"),
            DesiredVelocityLaw::Arctan { direction } => check(direction, "desired-velocity direction"),
            DesiredVelocityLaw::Table { times, values } => {
                if times.len() != values.len() {
                    return Err(Error::invalid("desired-velocity table needs one value per time"));
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::invalid("desired-velocity table times must increase"));
                }
                values.iter().try_for_each(|v| check(v, "desired-velocity table entry"))
            }
        }
    }
}

/// Coefficients of a tagged LQ problem with running cost
/// `½[λ_cont|u|² + λ_des|u − v_des|² + λ_rep|Y − Q|²]` and `Y_T = y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingCoefficients {
    pub horizon: f64,
    pub noise: f64,
    pub cont: f64,
    pub des: f64,
    pub rep: f64,
    pub q: Vec<f64>,
    pub terminal: Vec<f64>,
    pub vdes: DesiredVelocityLaw,
}

/// Matching factors tabulated on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LQMatchingSolution {
    pub grid: TimeGrid,
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
    /// `theta[k]` is `θ(t_k) ∈ ℝ^d`.
    pub theta: Vec<Vec<f64>>,
    pub cont: f64,
    pub des: f64,
    pub vdes: DesiredVelocityLaw,
}

impl LQMatchingSolution {
    /// Martingale integrand `Z_t = η(t)`.
    pub fn z(&self, k: usize) -> f64 {
        self.eta[k]
    }

    /// `Y = γ p + η B + θ`.
    pub fn state(&self, k: usize, p: &[f64], b: &[f64]) -> Vec<f64> {
        (0..p.len()).map(|i| self.gamma[k] * p[i] + self.eta[k] * b[i] + self.theta[k][i]).collect()
    }
}

/// Backward RK4 for the matching system
///
/// ```text
/// γ' = −λ_rep γ² + 1/(λ_cont + λ_des)
/// η' = −λ_rep γ η + λ_noise
/// θ' = −λ_rep γ (θ − Q) + λ_des v_des(t)/(λ_cont + λ_des)
/// ```
///
/// with `γ(T) = η(T) = 0`, `θ(T) = y_T`.
pub fn integrate_matching(c: &MatchingCoefficients, grid: &TimeGrid) -> Result<LQMatchingSolution> {
    let w = c.cont + c.des;
    if !(w > 0.0) {
        return Err(Error::Unsupported(format!(
            "control weight λ_cont + λ_des = {w} must be positive"
        )));
    }
    let d = c.terminal.len();
    if c.q.len() != d {
        return Err(Error::invalid("Q and y_T dimensions differ"));
    }
    let m = grid.steps();
    let h = grid.dt();
    let inv = 1.0 / w;
    let rep = c.rep;
    let horizon = grid.horizon();
    // State layout: [γ, η, θ_1..θ_d].
    let rhs = |t: f64, s: &[f64]| -> Vec<f64> {
        let v = eval_desired_velocity(&c.vdes, t, horizon, d);
        let mut out = Vec::with_capacity(2 + d);
        out.push(-rep * s[0] * s[0] + inv);
        out.push(-rep * s[0] * s[1] + c.noise);
        for i in 0..d {
            out.push(-rep * s[0] * (s[2 + i] - c.q[i]) + c.des * v[i] * inv);
        }
        out
    };
    let mut gamma = vec![0.0; m + 1];
    let mut eta = vec![0.0; m + 1];
    let mut theta = vec![vec![0.0; d]; m + 1];
    theta[m] = c.terminal.clone();
    let mut s: Vec<f64> = [0.0, 0.0].into_iter().chain(c.terminal.iter().copied()).collect();
    let axpy = |s: &[f64], k: &[f64], a: f64| -> Vec<f64> { s.iter().zip(k).map(|(x, y)| x + a * y).collect() };
    for k in (0..m).rev() {
        let t = grid.time(k + 1);
        // Integrate in reversed time τ = T − t, so the step is −h in t.
        let k1 = rhs(t, &s);
        let k2 = rhs(t - h / 2.0, &axpy(&s, &k1, -h / 2.0));
        let k3 = rhs(t - h / 2.0, &axpy(&s, &k2, -h / 2.0));
        let k4 = rhs(t - h, &axpy(&s, &k3, -h));
        for i in 0..s.len() {
            s[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !s[0].is_finite() || s[0].abs() > BLOW_UP_BOUND {
            return Err(Error::RiccatiBlowUp { time: grid.time(k), bound: BLOW_UP_BOUND });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "matching system", step: k });
        }
        gamma[k] = s[0];
        eta[k] = s[1];
        theta[k].copy_from_slice(&s[2..]);
    }
    Ok(LQMatchingSolution { grid: grid.clone(), gamma, eta, theta, cont: c.cont, des: c.des, vdes: c.vdes.clone() })
}

/// Closed-form optimal control `(p + λ_des v_des(t)) / (λ_cont + λ_des)`.
pub fn optimal_control_lq(sol: &LQMatchingSolution, p: &[f64], t: f64) -> Vec<f64> {
    let v = eval_desired_velocity(&sol.vdes, t, sol.grid.horizon(), p.len());
    control_from_adjoint(p, &v, sol.cont, sol.des)
}

/// Stationary point of `u·p − ½[λ_cont|u|² + λ_des|u − v|²]`.
pub fn control_from_adjoint(p: &[f64], v: &[f64], cont: f64, des: f64) -> Vec<f64> {
    let w = cont + des;
    p.iter().zip(v).map(|(pi, vi)| (pi + des * vi) / w).collect()
}

/// Optimum of the noise-free keep-together problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KeepTogetherOptimum {
    pub initial: Vec<f64>,
    pub velocity: Vec<f64>,
    pub cost: f64,
}

/// Minimize `λ_cont |y_T − Y_0|² / (2T) + λ_init |Y_0 − y_0|² / 2` over `Y_0`;
/// the optimal path walks at constant velocity.
pub fn keep_together_deterministic_oracle(
    cont: f64,
    init: f64,
    y0: &[f64],
    yt: &[f64],
    horizon: f64,
) -> Result<KeepTogetherOptimum> {
    if !(cont > 0.0) || init < 0.0 || !(horizon > 0.0) {
        return Err(Error::invalid("need λ_cont > 0, λ_init ≥ 0 and T > 0"));
    }
    if y0.len() != yt.len() {
        return Err(Error::invalid("y_0 and y_T dimensions differ"));
    }
    let a = cont / horizon;
    let initial: Vec<f64> = if init.is_infinite() {
        y0.to_vec()
    } else {
        y0.iter().zip(yt).map(|(s, e)| (a * e + init * s) / (a + init)).collect()
    };
    let velocity: Vec<f64> = initial.iter().zip(yt).map(|(s, e)| (e - s) / horizon).collect();
    let speed_sq: f64 = velocity.iter().map(|v| v * v).sum();
    let miss: f64 = if init.is_infinite() {
        0.0
    } else {
        init * initial.iter().zip(y0).map(|(s, e)| (s - e).powi(2)).sum::<f64>()
    };
    Ok(KeepTogetherOptimum { initial, velocity, cost: 0.5 * cont * speed_sq * horizon + 0.5 * miss })
}

/// Tagged-only mean-field LQ problem: running cost
/// `½[λ_cont|u|² + λ_des|u − v_des|² + λ_rep|Y − Q|² + λ_attr|Y − E Y|²]`,
/// initial cost `½ λ_init |Y_0 − y_0|²`, `Y_T = y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqTaggedProblem {
    pub horizon: f64,
    pub noise: f64,
    pub cont: f64,
    pub des: f64,
    pub rep: f64,
    pub q: Vec<f64>,
    pub attr: f64,
    pub init: f64,
    pub initial: GaussianLaw,
    pub terminal: GaussianLaw,
    pub vdes: DesiredVelocityLaw,
}

/// Paths of the closed-form solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LqPaths {
    pub y: PathArray,
    /// `d × d` integrand against `B^y` (diagonal `η(t)`).
    pub z: PathArray,
    pub u: PathArray,
    pub p: PathArray,
    pub mean_system: LQMatchingSolution,
    pub deviation_system: LQMatchingSolution,
    /// Sensitivity of the deviation offset to the terminal deviation.
    pub phi: Vec<f64>,
}

/// Solve by splitting into the mean (`λ_rep`, `Q`, `v_des`, `E y_T`) and the
/// deviation (`λ_rep + λ_attr`, no target, no desired velocity) systems. The
/// adjoint follows its forward Euler recursion on the grid.
pub fn solve_lq_paths(
    prob: &LqTaggedProblem,
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    y0: &[f64],
    yt: &[f64],
) -> Result<LqPaths> {
    let d = prob.terminal.dim();
    let n = bundle.paths();
    if bundle.wy() != d || y0.len() != n * d || yt.len() != n * d {
        return Err(Error::invalid("LQ path solver needs w_y = d and N × d boundary samples"));
    }
    let mean_sys = integrate_matching(
        &MatchingCoefficients {
            horizon: prob.horizon,
            noise: 0.0,
            cont: prob.cont,
            des: prob.des,
            rep: prob.rep,
            q: prob.q.clone(),
            terminal: prob.terminal.mean.clone(),
            vdes: prob.vdes.clone(),
        },
        grid,
    )?;
    let dev_sys = integrate_matching(
        &MatchingCoefficients {
            horizon: prob.horizon,
            noise: prob.noise,
            cont: prob.cont,
            des: prob.des,
            rep: prob.rep + prob.attr,
            q: vec![0.0; d],
            terminal: vec![0.0; d],
            vdes: DesiredVelocityLaw::None,
        },
        grid,
    )?;
    let m = grid.steps();
    let dt = grid.dt();
    // φ' = −(λ_rep + λ_attr) γ_d φ, φ(T) = 1, by RK4 on the tabulated γ_d
    // (linear interpolation at midpoints).
    let lam = prob.rep + prob.attr;
    let mut phi = vec![1.0; m + 1];
    for k in (0..m).rev() {
        let (g1, g0) = (dev_sys.gamma[k + 1], dev_sys.gamma[k]);
        let gm = 0.5 * (g0 + g1);
        let f = |g: f64, v: f64| -lam * g * v;
        let v = phi[k + 1];
        let k1 = f(g1, v);
        let k2 = f(gm, v - dt / 2.0 * k1);
        let k3 = f(gm, v - dt / 2.0 * k2);
        let k4 = f(g0, v - dt * k3);
        phi[k] = v - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    let ybar0 = &prob.initial.mean;
    let ybart = &prob.terminal.mean;
    let den_m = 1.0 - prob.init * mean_sys.gamma[0];
    let den_d = 1.0 - prob.init * dev_sys.gamma[0];
    let mut pbar: Vec<f64> =
        (0..d).map(|i| prob.init * (mean_sys.theta[0][i] - ybar0[i]) / den_m).collect();

    let mut y = PathArray::zeros(m + 1, n, d);
    let mut z = PathArray::zeros(m + 1, n, d * d);
    let mut u = PathArray::zeros(m + 1, n, d);
    let mut p = PathArray::zeros(m + 1, n, d);
    let lb = bundle.level_y();
    let mut ptil = vec![0.0; n * d];
    for j in 0..n {
        for i in 0..d {
            let delta = yt[j * d + i] - ybart[i];
            let dev0 = y0[j * d + i] - ybar0[i];
            ptil[j * d + i] = prob.init * (phi[0] * delta - dev0) / den_d;
        }
    }
    for k in 0..=m {
        let t = grid.time(k);
        let v = eval_desired_velocity(&prob.vdes, t, prob.horizon, d);
        let ybar: Vec<f64> = (0..d).map(|i| mean_sys.gamma[k] * pbar[i] + mean_sys.theta[k][i]).collect();
        for j in 0..n {
            let b = lb.get(k, j);
            let mut yk = vec![0.0; d];
            let mut pk = vec![0.0; d];
            for i in 0..d {
                let delta = yt[j * d + i] - ybart[i];
                let ydev = dev_sys.gamma[k] * ptil[j * d + i] + dev_sys.eta[k] * b[i] + phi[k] * delta;
                yk[i] = if k == m { yt[j * d + i] } else { ybar[i] + ydev };
                pk[i] = pbar[i] + ptil[j * d + i];
            }
            y.get_mut(k, j).copy_from_slice(&yk);
            p.get_mut(k, j).copy_from_slice(&pk);
            u.get_mut(k, j).copy_from_slice(&control_from_adjoint(&pk, &v, prob.cont, prob.des));
            let zr = z.get_mut(k, j);
            for i in 0..d {
                zr[i * d + i] = if k == m { 0.0 } else { dev_sys.eta[k] };
            }
            if k < m {
                for i in 0..d {
                    ptil[j * d + i] += lam * (yk[i] - ybar[i]) * dt;
                }
            }
        }
        if k < m {
            for i in 0..d {
                pbar[i] += prob.rep * (ybar[i] - prob.q[i]) * dt;
            }
        }
    }
    if let Some(k) = y.first_non_finite_row() {
        return Err(Error::NonFinite { what: "LQ tagged state", step: k });
    }
    Ok(LqPaths { y, z, u, p, mean_system: mean_sys, deviation_system: dev_sys, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::sample_brownian;
    use crate::grid::make_grid;
    use crate::rng::Stream;

    fn coeffs(rep: f64, noise: f64, vdes: DesiredVelocityLaw) -> MatchingCoefficients {
        MatchingCoefficients {
            horizon: 4.0,
            noise,
            cont: 0.5,
            des: 2.0,
            rep,
            q: vec![0.0, 0.0],
            terminal: vec![0.3, -0.2],
            vdes,
        }
    }

    #[test]
    fn closed_forms_without_repulsion() {
        let g = make_grid(4.0, 400).unwrap();
        let s = integrate_matching(&coeffs(0.0, 0.1, DesiredVelocityLaw::None), &g).unwrap();
        assert!((s.gamma[0] + 1.6).abs() < 1e-12);
        assert!((s.eta[0] + 0.4).abs() < 1e-12);
        for k in 0..=400 {
            let t = g.time(k);
            assert!((s.gamma[k] - (t - 4.0) / 2.5).abs() < 1e-10);
            assert!((s.eta[k] - 0.1 * (t - 4.0)).abs() < 1e-10);
            assert_eq!(s.theta[k], vec![0.3, -0.2]);
        }
    }

    #[test]
    fn terminal_conditions_exact() {
        let g = make_grid(1.0, 37).unwrap();
        let s = integrate_matching(&coeffs(-2.0, 0.5, DesiredVelocityLaw::PiecewiseSign { magnitude: vec![3.0, 3.0] }), &g)
            .unwrap();
        assert_eq!(s.gamma[37], 0.0);
        assert_eq!(s.eta[37], 0.0);
        assert_eq!(s.theta[37], vec![0.3, -0.2]);
    }

    #[test]
    fn riccati_matches_tangent_solution() {
        // λ_rep = −2, 1/(λ_c+λ_d) = c: γ = −√(c/2) tan(√(2c)(T − t)).
        let mut c = coeffs(-2.0, 0.0, DesiredVelocityLaw::None);
        c.horizon = 1.0;
        let g = make_grid(1.0, 200).unwrap();
        let s = integrate_matching(&c, &g).unwrap();
        let cc: f64 = 1.0 / 2.5;
        for k in 0..=200 {
            let tau = 1.0 - g.time(k);
            let exact = -(cc / 2.0).sqrt() * ((2.0 * cc).sqrt() * tau).tan();
            assert!((s.gamma[k] - exact).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn rk4_self_convergence() {
        let mut c = coeffs(-2.0, 0.3, DesiredVelocityLaw::None);
        c.horizon = 1.0;
        let solve = |m: usize| integrate_matching(&c, &make_grid(1.0, m).unwrap()).unwrap().gamma[0];
        let (a, b, e) = (solve(50), solve(100), solve(200));
        let ratio = (a - b).abs() / (b - e).abs();
        assert!(ratio >= 8.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_reports_time() {
        // Blow-up at T − t = π / (2√(2c)) ≈ 1.756 for c = 0.4.
        let mut c = coeffs(-2.0, 0.0, DesiredVelocityLaw::None);
        c.horizon = 4.0;
        let err = integrate_matching(&c, &make_grid(4.0, 4000).unwrap()).unwrap_err();
        match err {
            Error::RiccatiBlowUp { time, .. } => {
                let expect = 4.0 - std::f64::consts::FRAC_PI_2 / (0.8f64).sqrt();
                assert!((time - expect).abs() < 0.01, "{time} vs {expect}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn nonpositive_control_weight_rejected() {
        let mut c = coeffs(0.0, 0.0, DesiredVelocityLaw::None);
        c.cont = 0.0;
        c.des = 0.0;
        assert!(matches!(integrate_matching(&c, &make_grid(1.0, 4).unwrap()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn control_examples() {
        assert_eq!(control_from_adjoint(&[0.0], &[0.0], 1.0, 1.0), vec![0.0]);
        assert_eq!(control_from_adjoint(&[0.0], &[1.0], 1.0, 1.0), vec![0.5]);
        let u = control_from_adjoint(&[0.0], &[1.0], 0.5, 10.0)[0];
        assert!((u - 10.0 / 10.5).abs() < 1e-15);
    }

    #[test]
    fn desired_velocity_examples() {
        let a = DesiredVelocityLaw::Arctan { direction: vec![1.0] };
        assert_eq!(eval_desired_velocity(&a, 0.0, 4.0, 1), vec![0.1]);
        let v4 = eval_desired_velocity(&a, 4.0, 4.0, 1)[0];
        assert!((v4 - (4.0 * std::f64::consts::PI - 1.6).atan()).abs() < 1e-15);
        assert!((v4 - 1.4798).abs() < 1e-4);
        let s = DesiredVelocityLaw::PiecewiseSign { magnitude: vec![3.0, 3.0] };
        assert_eq!(eval_desired_velocity(&s, 0.25, 1.0, 2), vec![-3.0, -3.0]);
        assert_eq!(eval_desired_velocity(&s, 0.75, 1.0, 2), vec![3.0, 3.0]);
        let t = DesiredVelocityLaw::Table { times: vec![0.0, 1.0], values: vec![vec![0.0], vec![2.0]] };
        assert_eq!(eval_desired_velocity(&t, 0.25, 1.0, 1), vec![0.5]);
        assert_eq!(eval_desired_velocity(&t, 3.0, 1.0, 1), vec![2.0]);
    }

    #[test]
    fn keep_together_oracle() {
        let o = keep_together_deterministic_oracle(50.0, 10.0, &[0.1, 0.1], &[2.0, 2.0], 1.0).unwrap();
        for v in &o.initial {
            assert!((v - 101.0 / 60.0).abs() < 1e-12);
        }
        let free = keep_together_deterministic_oracle(50.0, 0.0, &[0.1], &[2.0], 1.0).unwrap();
        assert_eq!(free.initial, vec![2.0]);
        assert_eq!(free.cost, 0.0);
        let hard = keep_together_deterministic_oracle(50.0, 1e12, &[0.1], &[2.0], 1.0).unwrap();
        assert!((hard.initial[0] - 0.1).abs() < 1e-9);
    }

    fn kt(attr: f64, noise: f64, y0_std: f64) -> LqTaggedProblem {
        LqTaggedProblem {
            horizon: 1.0,
            noise,
            cont: 50.0,
            des: 0.0,
            rep: 0.0,
            q: vec![0.0, 0.0],
            attr,
            init: 10.0,
            initial: GaussianLaw { mean: vec![0.1, 0.1], std: y0_std },
            terminal: GaussianLaw::point(vec![2.0, 2.0]),
            vdes: DesiredVelocityLaw::None,
        }
    }

    #[test]
    fn deterministic_paths_hit_oracle() {
        let g = make_grid(1.0, 100).unwrap();
        let b = sample_brownian(&g, 4, (0, 2), 1).unwrap();
        let prob = kt(50.0, 0.0, 0.0);
        let y0 = prob.initial.sample(4, 1, Stream::TaggedInitial);
        let yt = prob.terminal.sample(4, 1, Stream::TaggedTerminal);
        let sol = solve_lq_paths(&prob, &g, &b, &y0, &yt).unwrap();
        for j in 0..4 {
            for &v in sol.y.get(0, j) {
                assert!((v - 101.0 / 60.0).abs() < 1e-9);
            }
            assert_eq!(sol.y.get(100, j), &[2.0, 2.0]);
            for &u in sol.u.get(50, j) {
                assert!((u - (2.0 - 101.0 / 60.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noisy_paths_end_on_terminal_samples() {
        let g = make_grid(1.0, 50).unwrap();
        let b = sample_brownian(&g, 20, (0, 2), 3).unwrap();
        let mut prob = kt(50.0, 1.0, 0.1);
        prob.terminal.std = 0.3;
        let y0 = prob.initial.sample(20, 3, Stream::TaggedInitial);
        let yt = prob.terminal.sample(20, 3, Stream::TaggedTerminal);
        let sol = solve_lq_paths(&prob, &g, &b, &y0, &yt).unwrap();
        assert_eq!(sol.y.row(50), &yt[..]);
        // The ansatz reproduces y_T up to rounding even before pinning.
        let k = 49;
        for j in 0..20 {
            let yk = sol.y.get(k, j);
            for i in 0..2 {
                assert!((yk[i] - yt[j * 2 + i]).abs() < 0.5);
            }
        }
    }
}
