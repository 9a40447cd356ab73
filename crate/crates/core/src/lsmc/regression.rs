use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reduce::{tree_sum_blocks, tree_sum_by, BLOCK};

use super::basis::{monomial_exponents, BasisFamily, RegressionBasis};

/// Gram matrices whose condition number exceeds this are treated as rank
/// deficient.
pub const RANK_CONDITION_LIMIT: f64 = 1e10;

/// Largest number of regression inputs in one group.
pub const MAX_INPUTS: usize = 64;

/// A fitted least-squares projector onto a polynomial basis of one input
/// group at one time step. Inputs are standardized; columns without spread
/// are dropped before building monomials.
#[derive(Debug, Clone)]
pub struct Projector {
    cols: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    exponents: Vec<Vec<u8>>,
    /// Each term after the intercept is `term[parent] * z[var]`.
    recipe: Vec<(usize, usize)>,
    degree: usize,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    condition: f64,
    regularized: bool,
    dropped: usize,
}

impl Projector {
    /// Fit on `raw` (`rows × width`, one row per path) using columns `cols`.
    pub fn fit(
        raw: &[f64],
        width: usize,
        rows: usize,
        cols: &[usize],
        degree: usize,
        ridge: f64,
        step: usize,
    ) -> Result<Self> {
        let n = rows;
        if cols.len() > MAX_INPUTS {
            return Err(Error::invalid(format!("{} regression inputs exceed the limit of {MAX_INPUTS}", cols.len())));
        }
        let moments = if cols.is_empty() {
            Vec::new()
        } else {
            tree_sum_by(n, 2 * cols.len(), |i, acc| {
                for (c, &col) in cols.iter().enumerate() {
                    let v = raw[i * width + col];
                    acc[2 * c] += v;
                    acc[2 * c + 1] += v * v;
                }
            })
        };
        let mut kept = Vec::new();
        let mut center = Vec::new();
        let mut scale = Vec::new();
        for (c, &col) in cols.iter().enumerate() {
            let mean = moments[2 * c] / n as f64;
            let var = (moments[2 * c + 1] / n as f64 - mean * mean).max(0.0);
            let sd = var.sqrt();
            if sd > 1e-12 * mean.abs().max(1.0) {
                kept.push(col);
                center.push(mean);
                scale.push(sd);
            }
        }
        let dropped = cols.len() - kept.len();
        let exponents = monomial_exponents(kept.len(), degree);
        let recipe = build_recipe(&exponents);
        let mut proj = Projector {
            cols: kept,
            center,
            scale,
            exponents,
            recipe,
            degree,
            chol: nalgebra::Cholesky::new(DMatrix::identity(1, 1)).expect("identity is SPD"),
            condition: 1.0,
            regularized: false,
            dropped,
        };
        let k = proj.terms();
        if k == 1 {
            return Ok(proj);
        }
        let design = proj.design(raw, width, rows);
        let upper = tree_sum_blocks(rows, k * k, |r, acc| {
            // Row-major `rows × k` is column-major `k × rows`.
            let a = DMatrixView::from_slice(&design[r.start * k..r.end * k], k, r.len());
            let mut g = DMatrixViewMut::from_slice(acc, k, k);
            g.gemm(1.0, &a, &a.transpose(), 0.0);
        });
        let mut gram = DMatrix::from_column_slice(k, k, &upper) / rows as f64;
        // Exact symmetry for the eigen solver.
        for p in 0..k {
            for q in p + 1..k {
                gram[(q, p)] = gram[(p, q)];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(gram.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        proj.condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let deficient = !(proj.condition < RANK_CONDITION_LIMIT);
        if deficient && ridge == 0.0 {
            return Err(Error::DegenerateRegression {
                step,
                detail: format!("condition number {:e} with zero ridge", proj.condition),
            });
        }
        // Ridge on every column but the intercept, so fitted values keep the
        // sample mean of the targets.
        for p in 1..k {
            gram[(p, p)] += ridge;
        }
        proj.regularized = deficient;
        proj.chol = nalgebra::Cholesky::new(gram).ok_or_else(|| Error::DegenerateRegression {
            step,
            detail: "Cholesky factorization failed".into(),
        })?;
        Ok(proj)
    }

    /// Number of basis functions.
    pub fn terms(&self) -> usize {
        self.exponents.len()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn dropped_columns(&self) -> usize {
        self.dropped
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Basis row for one raw input row.
    pub fn basis_row(&self, raw_row: &[f64], out: &mut [f64]) {
        let mut z = [0.0; MAX_INPUTS];
        for (v, &col) in self.cols.iter().enumerate() {
            z[v] = (raw_row[col] - self.center[v]) / self.scale[v];
        }
        out[0] = 1.0;
        for (t, &(parent, var)) in self.recipe.iter().enumerate() {
            out[t + 1] = out[parent] * z[var];
        }
    }

    fn design(&self, raw: &[f64], width: usize, rows: usize) -> Vec<f64> {
        let k = self.terms();
        let mut a = vec![0.0; rows * k];
        a.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
            self.basis_row(&raw[i * width..(i + 1) * width], out);
        });
        a
    }

    /// Least-squares coefficients (`terms × m`, column-major per target).
    pub fn coefficients(&self, raw: &[f64], width: usize, targets: &[f64], m: usize) -> DMatrix<f64> {
        let rows = targets.len() / m;
        let design = if self.terms() == 1 { Vec::new() } else { self.design(raw, width, rows) };
        self.solve_on(&design, targets, m)
    }

    fn solve_on(&self, design: &[f64], targets: &[f64], m: usize) -> DMatrix<f64> {
        let rows = targets.len() / m;
        let k = self.terms();
        if k == 1 {
            let mut mean = tree_sum_by(rows, m, |i, acc| {
                for (a, t) in acc.iter_mut().zip(&targets[i * m..(i + 1) * m]) {
                    *a += t;
                }
            });
            for v in &mut mean {
                *v /= rows as f64;
            }
            return DMatrix::from_row_slice(1, m, &mean);
        }
        let rhs = tree_sum_blocks(rows, k * m, |r, acc| {
            let a = DMatrixView::from_slice(&design[r.start * k..r.end * k], k, r.len());
            let t = DMatrixView::from_slice(&targets[r.start * m..r.end * m], m, r.len());
            let mut g = DMatrixViewMut::from_slice(acc, k, m);
            g.gemm(1.0, &a, &t.transpose(), 0.0);
        });
        let mut beta = DMatrix::from_column_slice(k, m, &rhs) / rows as f64;
        for j in 0..m {
            let col = DVector::from_iterator(k, beta.column(j).iter().copied());
            let sol = self.chol.solve(&col);
            beta.set_column(j, &sol);
        }
        beta
    }

    /// Evaluate fitted values for every row of `raw` given coefficients.
    pub fn evaluate(&self, raw: &[f64], width: usize, rows: usize, beta: &DMatrix<f64>) -> Vec<f64> {
        let design = if self.terms() == 1 { Vec::new() } else { self.design(raw, width, rows) };
        self.evaluate_on(&design, rows, beta)
    }

    fn evaluate_on(&self, design: &[f64], rows: usize, beta: &DMatrix<f64>) -> Vec<f64> {
        let m = beta.ncols();
        let k = self.terms();
        // Row-major copy so the inner loop runs over contiguous memory.
        let b: Vec<f64> = (0..k).flat_map(|p| (0..m).map(move |j| (p, j))).map(|(p, j)| beta[(p, j)]).collect();
        let mut out = vec![0.0; rows * m];
        if k == 1 {
            out.par_chunks_mut(m).for_each(|o| o.copy_from_slice(&b));
            return out;
        }
        let bt = beta.transpose();
        out.par_chunks_mut(BLOCK * m).enumerate().for_each(|(b, o)| {
            let len = o.len() / m;
            let a = DMatrixView::from_slice(&design[b * BLOCK * k..(b * BLOCK + len) * k], k, len);
            let mut v = DMatrixViewMut::from_slice(o, m, len);
            v.gemm(1.0, &bt, &a, 0.0);
        });
        out
    }

    /// Project `targets` (`N × m`) onto the basis span.
    pub fn project(&self, raw: &[f64], width: usize, targets: &[f64], m: usize) -> Vec<f64> {
        let rows = targets.len() / m;
        let design = if self.terms() == 1 { Vec::new() } else { self.design(raw, width, rows) };
        let beta = self.solve_on(&design, targets, m);
        self.evaluate_on(&design, rows, &beta)
    }
}

/// Parent term and variable for each non-constant monomial in graded order.
fn build_recipe(exponents: &[Vec<u8>]) -> Vec<(usize, usize)> {
    exponents
        .iter()
        .skip(1)
        .map(|e| {
            let var = e.iter().position(|&p| p > 0).expect("non-constant term");
            let mut parent = e.clone();
            parent[var] -= 1;
            let idx = exponents.iter().position(|x| *x == parent).expect("graded order lists parents first");
            (idx, var)
        })
        .collect()
}

/// A fitted conditional-expectation function.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub projector: Projector,
    pub coefficients: DMatrix<f64>,
    pub width: usize,
}

impl LeastSquaresFit {
    /// Evaluate at one raw input row.
    pub fn eval(&self, raw_row: &[f64]) -> Vec<f64> {
        let k = self.projector.terms();
        let mut a = vec![0.0; k];
        if self.width > 0 {
            self.projector.basis_row(raw_row, &mut a);
        } else {
            a[0] = 1.0;
        }
        (0..self.coefficients.ncols())
            .map(|j| (0..k).map(|p| a[p] * self.coefficients[(p, j)]).sum())
            .collect()
    }
}

/// Least-squares projection of `targets` (`N × m`) onto the basis built from
/// the raw inputs (`N × width`). Returns the fitted function and the fitted
/// values.
pub fn regress_conditional(
    targets: &[f64],
    m: usize,
    basis: &RegressionBasis,
    inputs: &[f64],
    width: usize,
    ridge: f64,
) -> Result<(LeastSquaresFit, Vec<f64>)> {
    if m == 0 || targets.is_empty() || targets.len() % m != 0 {
        return Err(Error::invalid("targets must be a non-empty N × m array"));
    }
    let n = targets.len() / m;
    if width > 0 && inputs.len() != n * width {
        return Err(Error::invalid("inputs and targets disagree on the number of paths"));
    }
    let cols: Vec<usize> = match basis.family {
        BasisFamily::None => vec![],
        BasisFamily::Polynomial => (0..width).collect(),
    };
    let degree = basis.effective_degree();
    let proj = Projector::fit(inputs, width, n, &cols, degree, ridge, 0)?;
    if n <= proj.terms() {
        return Err(Error::invalid(format!("need more paths ({n}) than basis functions ({})", proj.terms())));
    }
    let beta = proj.coefficients(inputs, width, targets, m);
    let fitted = proj.evaluate(inputs, width, n, &beta);
    Ok((LeastSquaresFit { projector: proj, coefficients: beta, width }, fitted))
}
