use rayon::prelude::*;

use crate::brownian::BrownianBundle;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::PathArray;

/// Euler–Maruyama for `dX = b dt + σ dB^x` with `X_0` pinned to `initial`.
///
/// `drift(k, n, x_k, out)` writes `b` (length `dim`); `diffusion(k, n, x_k,
/// out)` writes `σ` as a row-major `dim × w_x` matrix.
pub fn forward_euler<B, S>(
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    initial: &[f64],
    dim: usize,
    drift: B,
    diffusion: S,
) -> Result<PathArray>
where
    B: Fn(usize, usize, &[f64], &mut [f64]) + Sync,
    S: Fn(usize, usize, &[f64], &mut [f64]) + Sync,
{
    let n = bundle.paths();
    if initial.len() != n * dim {
        return Err(Error::invalid(format!(
            "initial condition has {} values, expected {} paths × {} dims",
            initial.len(),
            n,
            dim
        )));
    }
    let wx = bundle.wx();
    let dt = grid.dt();
    let mut x = PathArray::zeros(grid.points(), n, dim);
    x.row_mut(0).copy_from_slice(initial);
    for k in 0..grid.steps() {
        let prev = x.row(k).to_vec();
        let inc = bundle.dbx();
        x.row_mut(k + 1).par_chunks_mut(dim).enumerate().for_each(|(p, out)| {
            let xk = &prev[p * dim..(p + 1) * dim];
            let mut b = vec![0.0; dim];
            drift(k, p, xk, &mut b);
            let mut sig = vec![0.0; dim * wx];
            if wx > 0 {
                diffusion(k, p, xk, &mut sig);
            }
            let db = if wx > 0 { inc.get(k, p) } else { &[][..] };
            for i in 0..dim {
                let mut v = xk[i] + b[i] * dt;
                for j in 0..wx {
                    v += sig[i * wx + j] * db[j];
                }
                out[i] = v;
            }
        });
        if x.row(k + 1).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "forward state", step: k + 1 });
        }
    }
    Ok(x)
}
