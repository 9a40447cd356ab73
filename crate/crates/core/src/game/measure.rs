use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::mean_rows;

/// Mean-dependent quadratic forms with closed-form Lions derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanForm {
    /// `|s − E ξ|²`, differentiated in the law at fixed `s` and averaged over
    /// an independent copy `s*`.
    DistToMean,
    /// `|E ξ − c|²`.
    MeanToPoint(Vec<f64>),
}

/// `E[*(∂_μ f)]` evaluated on `slice` (`N × dim`).
///
/// For the distance-to-mean form the derivative is `−2(s* − E ξ)`, whose
/// expectation over the copy vanishes identically, so the zero vector is
/// returned without touching the samples.
pub fn mean_derivative_quadratic(form: &MeanForm, slice: &[f64], dim: usize) -> Result<Vec<f64>> {
    if slice.is_empty() || dim == 0 || slice.len() % dim != 0 {
        return Err(Error::invalid("mean derivative needs a non-empty N × d slice"));
    }
    match form {
        MeanForm::DistToMean => Ok(vec![0.0; dim]),
        MeanForm::MeanToPoint(c) => {
            if c.len() != dim {
                return Err(Error::invalid("anchor point dimension differs from slice"));
            }
            let m = mean_rows(slice, dim);
            Ok(m.iter().zip(c).map(|(mi, ci)| 2.0 * (mi - ci)).collect())
        }
    }
}
