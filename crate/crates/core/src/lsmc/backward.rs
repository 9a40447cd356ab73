use rayon::prelude::*;

use crate::brownian::BrownianBundle;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::PathArray;

use super::basis::{RegressionBasis, RegressionInputs};
use super::regression::Projector;

/// Least-squares projectors for every step `k < M` and input group.
#[derive(Debug, Clone)]
pub struct StepProjectors {
    steps: Vec<Vec<Projector>>,
}

impl StepProjectors {
    pub fn fit(inputs: &RegressionInputs, basis: &RegressionBasis, ridge: f64, steps: usize) -> Result<Self> {
        let width = inputs.raw.width();
        let paths = inputs.raw.paths();
        let degree = basis.effective_degree();
        let family_cols = |g: &Vec<usize>| match basis.family {
            super::basis::BasisFamily::None => Vec::new(),
            super::basis::BasisFamily::Polynomial => g.clone(),
        };
        let mut out = Vec::with_capacity(steps);
        for k in 0..steps {
            let raw = inputs.raw.row(k);
            let row: Result<Vec<Projector>> = inputs
                .groups
                .iter()
                .map(|g| Projector::fit(raw, width, paths, &family_cols(g), degree, ridge, k))
                .collect();
            out.push(row?);
        }
        Ok(StepProjectors { steps: out })
    }

    pub fn get(&self, k: usize, g: usize) -> &Projector {
        &self.steps[k][g]
    }

    pub fn groups(&self) -> usize {
        self.steps.first().map_or(0, |s| s.len())
    }

    pub fn max_condition(&self) -> f64 {
        self.steps.iter().flatten().map(|p| p.condition()).fold(1.0, f64::max)
    }

    pub fn regularized_count(&self) -> usize {
        self.steps.iter().flatten().filter(|p| p.regularized()).count()
    }
}

/// Solution of a backward sweep: values on `M + 1` rows and martingale
/// integrands (`m × (w_x + w_y)` per path, zero on the last row).
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    pub values: PathArray,
    pub integrand: PathArray,
}

/// Run the scheme
///
/// ```text
/// V_M = terminal
/// V_k = Π_k[V_{k+1}] − driver_k dt
/// Z_k = Π_k[V_{k+1} ΔB_k^T] / dt
/// ```
///
/// for `dV = driver dt + Z dB`, using pre-fitted projectors. The terminal row
/// is copied verbatim. With `integrand = false` the `Z` regressions are
/// skipped and the integrand is left at zero.
#[allow(clippy::too_many_arguments)]
pub fn backward_sweep<D>(
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    inputs: &RegressionInputs,
    projectors: &StepProjectors,
    terminal: &[f64],
    m: usize,
    integrand: bool,
    driver: D,
) -> Result<BackwardSolution>
where
    D: Fn(usize, usize, &mut [f64]) + Sync,
{
    let n = bundle.paths();
    if terminal.len() != n * m {
        return Err(Error::invalid("terminal values must be N × m"));
    }
    let groups = projectors.groups();
    if groups > 1 && groups != m {
        return Err(Error::invalid(format!("{groups} regression groups cannot serve {m} output coordinates")));
    }
    let (wx, wy) = (bundle.wx(), bundle.wy());
    let w = wx + wy;
    let dt = grid.dt();
    let steps = grid.steps();
    let width = inputs.raw.width();
    let mut values = PathArray::zeros(steps + 1, n, m);
    let mut z = PathArray::zeros(steps + 1, n, m * w);
    values.row_mut(steps).copy_from_slice(terminal);

    let coord_groups: Vec<Vec<usize>> = if groups <= 1 { vec![(0..m).collect()] } else { (0..m).map(|c| vec![c]).collect() };

    for k in (0..steps).rev() {
        let next = values.row(k + 1).to_vec();
        let raw = inputs.raw.row(k);
        for (g, coords) in coord_groups.iter().enumerate() {
            let proj = projectors.get(k, g);
            let nc = coords.len();
            let mut level = vec![0.0; n * nc];
            for p in 0..n {
                for (ci, &c) in coords.iter().enumerate() {
                    level[p * nc + ci] = next[p * m + c];
                }
            }
            let fitted = proj.project(raw, width, &level, nc);
            // Z uses the residual V_{k+1} − Π_k[V_{k+1}], which has the same
            // conditional covariance with ΔB but far less variance.
            let cols = nc * w;
            let mut zfit = Vec::new();
            if integrand && cols > 0 {
                let mut targets = vec![0.0; n * cols];
                targets.par_chunks_mut(cols).enumerate().for_each(|(p, t)| {
                    let mut db = vec![0.0; w];
                    bundle.stacked_increment(k, p, &mut db);
                    for ci in 0..nc {
                        let r = level[p * nc + ci] - fitted[p * nc + ci];
                        for j in 0..w {
                            t[ci * w + j] = r * db[j] / dt;
                        }
                    }
                });
                zfit = proj.project(raw, width, &targets, cols);
            }
            let vrow = values.row_mut(k);
            for p in 0..n {
                for (ci, &c) in coords.iter().enumerate() {
                    vrow[p * m + c] = fitted[p * nc + ci];
                }
            }
            if zfit.is_empty() {
                continue;
            }
            let zrow = z.row_mut(k);
            for p in 0..n {
                for (ci, &c) in coords.iter().enumerate() {
                    for j in 0..w {
                        zrow[(p * m + c) * w + j] = zfit[p * cols + ci * w + j];
                    }
                }
            }
        }
        let vrow = values.row_mut(k);
        vrow.par_chunks_mut(m).enumerate().for_each(|(p, v)| {
            let mut drv = vec![0.0; m];
            driver(k, p, &mut drv);
            for (vi, d) in v.iter_mut().zip(&drv) {
                *vi -= d * dt;
            }
        });
        if values.row(k).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "backward state", step: k });
        }
    }
    Ok(BackwardSolution { values, integrand: z })
}

/// Fit projectors on `inputs` and solve `dY = b dt + Z dB`, `Y_T = terminal`.
#[allow(clippy::too_many_arguments)]
pub fn backward_lsmc<D>(
    grid: &TimeGrid,
    bundle: &BrownianBundle,
    inputs: &RegressionInputs,
    basis: &RegressionBasis,
    ridge: f64,
    terminal: &[f64],
    m: usize,
    driver: D,
) -> Result<BackwardSolution>
where
    D: Fn(usize, usize, &mut [f64]) + Sync,
{
    if terminal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "terminal condition", step: grid.steps() });
    }
    let projectors = StepProjectors::fit(inputs, basis, ridge, grid.steps())?;
    backward_sweep(grid, bundle, inputs, &projectors, terminal, m, true, driver)
}
