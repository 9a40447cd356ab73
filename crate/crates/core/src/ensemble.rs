use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::law::{empirical_law, EmpiricalLaw};
use crate::paths::PathArray;
use crate::reduce::{mean_rows, tree_sum_indexed};

/// The two populations of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crowd {
    /// Terminal-constrained pedestrians (backward state).
    Tagged,
    /// Initially-constrained pedestrians (forward state).
    Ordinary,
}

impl Crowd {
    pub fn name(self) -> &'static str {
        match self {
            Crowd::Tagged => "tagged",
            Crowd::Ordinary => "ordinary",
        }
    }
}

/// Solved particle paths on a grid. All arrays have `M + 1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Noise dimensions `(w_x, w_y)`.
    pub noise_dims: (usize, usize),
    pub y: PathArray,
    /// Martingale integrand, `dim × (w_x + w_y)` row-major per path.
    pub z: PathArray,
    pub uy: PathArray,
    pub x: Option<PathArray>,
    pub ux: Option<PathArray>,
}

impl Ensemble {
    pub fn paths(&self) -> usize {
        self.y.paths()
    }

    pub fn state(&self, crowd: Crowd) -> Option<&PathArray> {
        match crowd {
            Crowd::Tagged => Some(&self.y),
            Crowd::Ordinary => self.x.as_ref(),
        }
    }

    pub fn control(&self, crowd: Crowd) -> Option<&PathArray> {
        match crowd {
            Crowd::Tagged => Some(&self.uy),
            Crowd::Ordinary => self.ux.as_ref(),
        }
    }

    pub fn law(&self, crowd: Crowd, k: usize) -> Result<EmpiricalLaw> {
        let s = self
            .state(crowd)
            .ok_or_else(|| Error::invalid(format!("ensemble has no {} crowd", crowd.name())))?;
        empirical_law(s.row(k), self.dim)
    }

    pub fn mean_path(&self, crowd: Crowd) -> Option<Vec<Vec<f64>>> {
        let s = self.state(crowd)?;
        Some((0..s.rows()).map(|k| mean_rows(s.row(k), self.dim)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite()
            && self.z.is_finite()
            && self.uy.is_finite()
            && self.x.as_ref().is_none_or(|a| a.is_finite())
            && self.ux.as_ref().is_none_or(|a| a.is_finite())
    }
}

/// Per-path distances `‖pos_n − mean‖` at row `k` of `state`.
pub fn distance_to_mean_samples(state: &PathArray, dim: usize, k: usize) -> Vec<f64> {
    let row = state.row(k);
    let mean = mean_rows(row, dim);
    row.chunks(dim)
        .map(|p| p.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>().sqrt())
        .collect()
}

/// Mean distance to the crowd mean at every grid point.
pub fn distance_to_mean_series(ens: &Ensemble, which: Crowd) -> Result<Vec<f64>> {
    let state = ens
        .state(which)
        .ok_or_else(|| Error::invalid(format!("ensemble has no {} crowd", which.name())))?;
    Ok((0..state.rows())
        .map(|k| {
            let d = distance_to_mean_samples(state, ens.dim, k);
            tree_sum_indexed(d.len(), |i| d[i]) / d.len() as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn static_ensemble(points: &[[f64; 2]], m: usize) -> Ensemble {
        let grid = make_grid(1.0, m).unwrap();
        let n = points.len();
        let mut y = PathArray::zeros(m + 1, n, 2);
        for k in 0..=m {
            for (i, p) in points.iter().enumerate() {
                y.get_mut(k, i).copy_from_slice(p);
            }
        }
        Ensemble {
            grid,
            dim: 2,
            noise_dims: (0, 2),
            y,
            z: PathArray::zeros(m + 1, n, 4),
            uy: PathArray::zeros(m + 1, n, 2),
            x: None,
            ux: None,
        }
    }

    #[test]
    fn coincident_particles_have_zero_spread() {
        let e = static_ensemble(&[[1.0, 2.0]; 5], 4);
        assert_eq!(distance_to_mean_series(&e, Crowd::Tagged).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn symmetric_pair() {
        let e = static_ensemble(&[[0.0, 0.0], [2.0, 0.0]], 3);
        assert_eq!(distance_to_mean_series(&e, Crowd::Tagged).unwrap(), vec![1.0; 4]);
        let e = static_ensemble(&[[-1.0, 0.0], [1.0, 0.0]], 6);
        assert_eq!(distance_to_mean_series(&e, Crowd::Tagged).unwrap(), vec![1.0; 7]);
    }

    #[test]
    fn missing_crowd_is_an_error() {
        let e = static_ensemble(&[[0.0, 0.0]], 1);
        assert!(distance_to_mean_series(&e, Crowd::Ordinary).is_err());
    }
}
