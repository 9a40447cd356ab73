use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::PathArray;
use crate::rng::{CounterRng, Stream};

/// Increments of the split noise `(B^x, B^y)` on a grid, one independent
/// counter-addressed stream per path.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianBundle {
    grid: TimeGrid,
    seed: u64,
    /// `ΔB^x[k][n]`, rows `0..M`.
    dbx: PathArray,
    /// `ΔB^y[k][n]`, rows `0..M`.
    dby: PathArray,
}

fn increments(grid: &TimeGrid, paths: usize, width: usize, seed: u64, stream: Stream) -> PathArray {
    let m = grid.steps();
    let sqdt = grid.dt().sqrt();
    // Generate path-major in parallel, then transpose into time-major rows.
    let per_path: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|n| {
            let mut rng = CounterRng::new(seed, stream, n as u64);
            let mut out = Vec::with_capacity(m * width);
            for k in 0..m {
                for j in 0..width {
                    out.push(sqdt * rng.normal(((k as u64) << 16) | j as u64));
                }
            }
            out
        })
        .collect();
    let mut arr = PathArray::zeros(m, paths, width);
    for (n, p) in per_path.iter().enumerate() {
        for k in 0..m {
            arr.get_mut(k, n).copy_from_slice(&p[k * width..(k + 1) * width]);
        }
    }
    arr
}

impl BrownianBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn paths(&self) -> usize {
        self.dby.paths().max(self.dbx.paths())
    }

    pub fn wx(&self) -> usize {
        self.dbx.width()
    }

    pub fn wy(&self) -> usize {
        self.dby.width()
    }

    pub fn dbx(&self) -> &PathArray {
        &self.dbx
    }

    pub fn dby(&self) -> &PathArray {
        &self.dby
    }

    /// Increment of the stacked noise `B = (B^x, B^y)` for path `n`, step `k`.
    pub fn stacked_increment(&self, k: usize, n: usize, out: &mut [f64]) {
        let wx = self.wx();
        out[..wx].copy_from_slice(self.dbx.get(k, n));
        out[wx..].copy_from_slice(self.dby.get(k, n));
    }

    /// `B^y_{t_k}` for `k = 0..=M` (cumulative sums, `B^y_0 = 0`).
    pub fn level_y(&self) -> PathArray {
        cumulate(&self.dby)
    }

    pub fn level_x(&self) -> PathArray {
        cumulate(&self.dbx)
    }
}

fn cumulate(inc: &PathArray) -> PathArray {
    let (m, n, w) = (inc.rows(), inc.paths(), inc.width());
    let mut lv = PathArray::zeros(m + 1, n, w);
    for k in 0..m {
        let prev = lv.row(k).to_vec();
        for ((next, p), d) in lv.row_mut(k + 1).iter_mut().zip(prev).zip(inc.row(k)) {
            *next = p + d;
        }
    }
    lv
}

/// Sample the noise bundle for `paths` paths with dimensions `(w_x, w_y)`.
pub fn sample_brownian(grid: &TimeGrid, paths: usize, dims: (usize, usize), seed: u64) -> Result<BrownianBundle> {
    if paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let (wx, wy) = dims;
    Ok(BrownianBundle {
        grid: *grid,
        seed,
        dbx: increments(grid, paths, wx, seed, Stream::BrownianX),
        dby: increments(grid, paths, wy, seed, Stream::BrownianY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn deterministic() {
        let g = make_grid(1.0, 20).unwrap();
        let a = sample_brownian(&g, 50, (2, 2), 11).unwrap();
        let b = sample_brownian(&g, 50, (2, 2), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_differ() {
        let g = make_grid(1.0, 20).unwrap();
        let a = sample_brownian(&g, 10, (1, 1), 1).unwrap();
        let b = sample_brownian(&g, 10, (1, 1), 2).unwrap();
        assert_ne!(a.dby(), b.dby());
        assert_ne!(a.dbx(), b.dbx());
    }

    #[test]
    fn tagged_noise_independent_of_ordinary_dimension() {
        let g = make_grid(1.0, 10).unwrap();
        let a = sample_brownian(&g, 8, (0, 2), 5).unwrap();
        let b = sample_brownian(&g, 8, (2, 2), 5).unwrap();
        assert_eq!(a.dby(), b.dby());
    }

    #[test]
    fn increment_is_pure_function_of_address() {
        let g = make_grid(1.0, 10).unwrap();
        let small = sample_brownian(&g, 3, (0, 1), 9).unwrap();
        let big = sample_brownian(&g, 40, (0, 1), 9).unwrap();
        for k in 0..10 {
            for n in 0..3 {
                assert_eq!(small.dby().get(k, n), big.dby().get(k, n));
            }
        }
    }

    #[test]
    fn levels_telescope() {
        let g = make_grid(1.0, 16).unwrap();
        let b = sample_brownian(&g, 4, (0, 2), 3).unwrap();
        let lv = b.level_y();
        assert_eq!(lv.row(0), &[0.0; 8]);
        for n in 0..4 {
            for j in 0..2 {
                let s: f64 = (0..16).map(|k| b.dby().get(k, n)[j]).sum();
                assert!((lv.get(16, n)[j] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moments_within_five_standard_errors() {
        let g = make_grid(1.0, 100).unwrap();
        let n = 100_000;
        let b = sample_brownian(&g, n, (0, 1), 2024).unwrap();
        let dt = g.dt();
        for k in [0usize, 37, 99] {
            let row = b.dby().row(k);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            // se(mean) = sqrt(dt/N); se(var) = dt * sqrt(2/(N-1)) for Gaussian samples.
            let se_mean = (dt / n as f64).sqrt();
            let se_var = dt * (2.0 / (n as f64 - 1.0)).sqrt();
            assert!(mean.abs() < 5.0 * se_mean, "step {k}: mean {mean}");
            assert!((var - dt).abs() < 5.0 * se_var, "step {k}: var {var}");
        }
    }
}
