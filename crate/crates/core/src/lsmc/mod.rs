//! Least-squares Monte Carlo machinery.

pub mod backward;
pub mod basis;
pub mod forward;
pub mod picard;
pub mod regression;

pub use backward::{backward_lsmc, backward_sweep, BackwardSolution, StepProjectors};
pub use basis::{BasisFamily, Feature, RegressionBasis, RegressionInputs};
pub use forward::forward_euler;
pub use regression::{regress_conditional, LeastSquaresFit, Projector};
pub use picard::{solve_equilibrium, AdjointEnsemble, Diagnostics, EquilibriumSolution, PicardConfig};
