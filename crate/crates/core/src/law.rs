use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{mean_rows, tree_sum_by};
use crate::rng::{CounterRng, Stream};

/// First and second empirical moments of a cross-section of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub dim: usize,
    pub mean: Vec<f64>,
    /// Row-major `dim × dim` matrix of `E[v v^T]`.
    pub second_moment: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mut c = self.second_moment.clone();
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] -= self.mean[i] * self.mean[j];
            }
        }
        c
    }
}

/// Moments of `slice`, a contiguous list of `dim`-vectors.
pub fn empirical_law(slice: &[f64], dim: usize) -> Result<EmpiricalLaw> {
    if dim == 0 || slice.is_empty() || slice.len() % dim != 0 {
        return Err(Error::invalid("empirical law needs a non-empty slice of whole vectors"));
    }
    let n = slice.len() / dim;
    let mean = mean_rows(slice, dim);
    let mut second_moment = tree_sum_by(n, dim * dim, |i, acc| {
        let v = &slice[i * dim..(i + 1) * dim];
        for a in 0..dim {
            for b in 0..dim {
                acc[a * dim + b] += v[a] * v[b];
            }
        }
    });
    for s in &mut second_moment {
        *s /= n as f64;
    }
    Ok(EmpiricalLaw { dim, mean, second_moment })
}

/// Isotropic Gaussian `N(mean, std² I)`; `std = 0` is a point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLaw {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl GaussianLaw {
    pub fn point(mean: Vec<f64>) -> Self {
        GaussianLaw { mean, std: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.std == 0.0
    }

    /// One draw per path from its own stream; exact copies of the mean when
    /// `std = 0`.
    pub fn sample(&self, paths: usize, seed: u64, stream: Stream) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(paths * d);
        for n in 0..paths {
            let mut rng = CounterRng::new(seed, stream, n as u64);
            for (j, m) in self.mean.iter().enumerate() {
                if self.std == 0.0 {
                    out.push(*m);
                } else {
                    out.push(m + self.std * rng.normal(j as u64));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let l = empirical_law(&[0.0, 0.0, 2.0, 2.0], 2).unwrap();
        assert_eq!(l.mean, vec![1.0, 1.0]);
    }

    #[test]
    fn point_mass() {
        let l = empirical_law(&[0.3, -1.2], 2).unwrap();
        assert_eq!(l.mean, vec![0.3, -1.2]);
        assert!(l.covariance().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn three_on_a_line() {
        let l = empirical_law(&[0.0, 0.0, 1.0, 0.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(l.mean, vec![1.0, 0.0]);
        assert!((l.second_moment[0] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_slice_rejected() {
        assert!(matches!(empirical_law(&[], 2), Err(Error::InvalidArgument(_))));
        assert!(empirical_law(&[1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn recompute_matches_stored() {
        let xs: Vec<f64> = (0..999).map(|i| ((i * 31) % 17) as f64 * 0.37 - 2.0).collect();
        let a = empirical_law(&xs, 3).unwrap();
        let b = empirical_law(&xs, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_point_mass_is_exact() {
        let g = GaussianLaw::point(vec![10.0, 0.0]);
        let s = g.sample(5, 1, Stream::TaggedTerminal);
        assert!(s.chunks(2).all(|c| c == [10.0, 0.0]));
    }

    #[test]
    fn gaussian_moments() {
        let g = GaussianLaw { mean: vec![1.0, -2.0], std: 0.3 };
        let n = 40_000;
        let s = g.sample(n, 3, Stream::TaggedInitial);
        let l = empirical_law(&s, 2).unwrap();
        let cov = l.covariance();
        let se = 0.3 / (n as f64).sqrt();
        assert!((l.mean[0] - 1.0).abs() < 5.0 * se);
        assert!((l.mean[1] + 2.0).abs() < 5.0 * se);
        assert!((cov[0] - 0.09).abs() < 5.0 * 0.09 * (2.0 / n as f64).sqrt());
    }
}
