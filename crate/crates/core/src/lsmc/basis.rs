use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::PathArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Monomials of total degree `≤ degree` in the standardized inputs.
    Polynomial,
    /// Intercept only: conditional expectation collapses to the sample mean.
    None,
}

/// Adapted quantities that may enter the regression basis at `t_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// `B^y_{t_k}`.
    Brownian,
    /// `B^x_{t_k}`.
    OrdinaryBrownian,
    /// `X_{t_k}`.
    OrdinaryState,
    /// Current tagged control `u^y_{t_k}` (carries the forward adjoint).
    TaggedControl,
    /// Per-path boundary data known at time zero (`y_0`, `y_T`, `x_0`).
    BoundaryData,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::Brownian,
        Feature::OrdinaryBrownian,
        Feature::OrdinaryState,
        Feature::TaggedControl,
        Feature::BoundaryData,
    ];

    pub fn ident(self) -> &'static str {
        match self {
            Feature::Brownian => "brownian",
            Feature::OrdinaryBrownian => "ordinary_brownian",
            Feature::OrdinaryState => "ordinary_state",
            Feature::TaggedControl => "tagged_control",
            Feature::BoundaryData => "boundary_data",
        }
    }

    pub fn from_ident(s: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.ident() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionBasis {
    pub family: BasisFamily,
    pub degree: usize,
    pub inputs: Vec<Feature>,
    /// Regress coordinate `c` of the targets only on coordinate `c` of the
    /// inputs (exact for isotropic, coordinate-decoupled models).
    pub per_coordinate: bool,
}

impl Default for RegressionBasis {
    fn default() -> Self {
        RegressionBasis {
            family: BasisFamily::Polynomial,
            degree: 2,
            inputs: vec![Feature::Brownian, Feature::OrdinaryState, Feature::TaggedControl, Feature::BoundaryData],
            per_coordinate: true,
        }
    }
}

impl RegressionBasis {
    pub fn effective_degree(&self) -> usize {
        match self.family {
            BasisFamily::Polynomial => self.degree,
            BasisFamily::None => 0,
        }
    }
}

/// Raw regression inputs on every grid row, plus the grouping of input
/// columns used for each output coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInputs {
    pub raw: PathArray,
    /// `groups[g]` lists the raw columns feeding output group `g`. A single
    /// group is shared by all output coordinates.
    pub groups: Vec<Vec<usize>>,
}

impl RegressionInputs {
    /// Inputs with no features at all (intercept-only regressions).
    pub fn empty(rows: usize, paths: usize) -> Self {
        RegressionInputs { raw: PathArray::zeros(rows, paths, 0), groups: vec![vec![]] }
    }

    /// One shared group made of every column of `raw`.
    pub fn shared(raw: PathArray) -> Self {
        let cols = (0..raw.width()).collect();
        RegressionInputs { raw, groups: vec![cols] }
    }

    pub fn group_for(&self, coord: usize) -> Result<&[usize]> {
        if self.groups.len() == 1 {
            Ok(&self.groups[0])
        } else {
            self.groups
                .get(coord)
                .map(|g| g.as_slice())
                .ok_or_else(|| Error::invalid(format!("no regression group for coordinate {coord}")))
        }
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }
}

/// Multi-indices of total degree `≤ degree` over `vars` variables, graded
/// (constant term first).
pub fn monomial_exponents(vars: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut cur = vec![0u8; vars];
        push_graded(&mut out, &mut cur, 0, total);
    }
    out
}

fn push_graded(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, var: usize, remaining: usize) {
    if var == cur.len() {
        if remaining == 0 {
            out.push(cur.clone());
        }
        return;
    }
    if var + 1 == cur.len() {
        cur[var] = remaining as u8;
        out.push(cur.clone());
        cur[var] = 0;
        return;
    }
    for p in (0..=remaining).rev() {
        cur[var] = p as u8;
        push_graded(out, cur, var + 1, remaining - p);
    }
    cur[var] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn monomial_counts() {
        for vars in 0..5 {
            for deg in 0..4 {
                let e = monomial_exponents(vars, deg);
                assert_eq!(e.len(), binom(vars + deg, deg), "vars {vars} deg {deg}");
                assert!(e[0].iter().all(|&p| p == 0));
                assert!(e.iter().all(|m| m.iter().map(|&p| p as usize).sum::<usize>() <= deg));
            }
        }
    }

    #[test]
    fn feature_idents_roundtrip() {
        for f in Feature::ALL {
            assert_eq!(Feature::from_ident(f.ident()), Some(f));
        }
        assert_eq!(Feature::from_ident("nope"), None);
    }
}
