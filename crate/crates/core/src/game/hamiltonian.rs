use crate::ensemble::Crowd;
use crate::error::{Error, Result};

use super::cost::{CoefficientSet, EvalPoint};

/// Adjoint arguments `(p^{ix}, p^{iy}, q^{ix})` of `H^i`.
#[derive(Debug, Clone, Copy)]
pub struct Adjoints<'a> {
    pub p_x: &'a [f64],
    pub p_y: &'a [f64],
    /// `d × w_x`, row-major.
    pub q_x: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianValue {
    pub value: f64,
    pub grad_y: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub grad_z: Vec<f64>,
    /// Gradient in the crowd's own control.
    pub grad_u: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H^i = b^x·p^{ix} + b^y·p^{iy} + σ^x : q^{ix} − f^i`.
pub fn eval_hamiltonian(crowd: Crowd, coeffs: &CoefficientSet, point: &EvalPoint, adj: &Adjoints) -> Result<HamiltonianValue> {
    let d = coeffs.dim;
    let f = coeffs.running_cost(crowd, point)?;
    let by = coeffs.drift_y(point);
    let bx = coeffs.drift_x(point);
    let mut value = dot(&by, adj.p_y) - f.value;
    if !bx.is_empty() {
        value += dot(&bx, adj.p_x);
    }
    if !adj.q_x.is_empty() {
        let wx = adj.q_x.len() / d;
        let sigma = coeffs.sigma_x();
        value += (0..d.min(wx)).map(|i| sigma * adj.q_x[i * wx + i]).sum::<f64>();
    }
    let own_p = match crowd {
        Crowd::Tagged => adj.p_y,
        Crowd::Ordinary => adj.p_x,
    };
    let grad_u: Vec<f64> = (0..d).map(|i| own_p[i] - f.d_control[i]).collect();
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
    let (grad_y, grad_x) = match crowd {
        Crowd::Tagged => (neg(&f.d_state), neg(&f.d_other)),
        Crowd::Ordinary => (neg(&f.d_other), neg(&f.d_state)),
    };
    Ok(HamiltonianValue { value, grad_y, grad_x, grad_z: vec![0.0; point.z.len()], grad_u })
}

/// Closed-form maximizer of `H^i` over the crowd's own control,
/// `û = (p^{ii} + c(t)) / a`, for the control part `½ a|u|² − c·u` of `f^i`.
pub fn argmax_control(crowd: Crowd, coeffs: &CoefficientSet, t: f64, p_own: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; p_own.len()];
    argmax_rows(crowd, coeffs, t, p_own, &mut out)?;
    Ok(out)
}

/// `argmax_control` for a whole `N × d` slice of adjoints at one time.
pub fn argmax_rows(crowd: Crowd, coeffs: &CoefficientSet, t: f64, p_own: &[f64], out: &mut [f64]) -> Result<()> {
    let (a, c) = coeffs.control_quadratic(crowd, t)?;
    if !(a > 0.0) {
        return Err(Error::Unsupported(format!(
            "{} Hamiltonian is not strictly concave in the control (total quadratic weight {a})",
            crowd.name()
        )));
    }
    let d = c.len();
    for (i, (o, p)) in out.iter_mut().zip(p_own).enumerate() {
        *o = (p + c[i % d]) / a;
    }
    Ok(())
}
